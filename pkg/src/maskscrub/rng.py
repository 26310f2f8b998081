"""Seeded random streams.

Every document gets its own ``numpy.random.Generator`` (PCG64) seeded by a
``SeedSequence`` over the configured 64-bit seed and the first 128 bits of
SHA-256 of the document id. Same seed and id give the same stream on any
platform running numpy's PCG64.
"""

import hashlib

import numpy as np

RNG_ALGORITHM = "numpy PCG64 / SeedSequence[seed_lo32, seed_hi32, sha256(doc_id)[:16] as 4 x u32le]"


def seed_words(seed: int, doc_id: str = "") -> list[int]:
    if not 0 <= seed < 2 ** 64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    digest = hashlib.sha256(doc_id.encode("utf-8")).digest()[:16]
    words = [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]
    return [seed & 0xFFFFFFFF, seed >> 32, *words]


def document_rng(seed: int, doc_id: str = "") -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed_words(seed, doc_id))))
