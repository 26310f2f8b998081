"""Replacement of flagged words and the document substitution table."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .backends import MlmBackend, TokenDistribution, cosine_distances
from .tokenizer import REDACTED, Word, restore_case

SUBSTITUTED = "substituted"
REMOVED = "removed"

# redraw budget for numeric replacements that hit the original or a taken value
_NUMERIC_ATTEMPTS = 100


class Collision(ValueError):
    pass


@dataclass(frozen=True)
class SubstitutionParams:
    n: int = 50
    k: int = 1
    s: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if not 1 <= self.k <= self.n:
            raise ValueError(f"need 1 <= k <= n, got k={self.k}, n={self.n}")
        if not 0.0 <= self.s <= 2.0:
            raise ValueError(f"radius s={self.s} outside [0, 2]")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class Candidate:
    token_id: int
    surface: str
    probability: float
    distance: float


@dataclass(frozen=True)
class SubstitutionOutcome:
    word_index: int
    action: str
    replacement: str | None = None
    candidates_considered: int = 0
    distance: float | None = None


class SubstitutionTable:
    """One-to-one map from lowercase originals to replacements."""

    def __init__(self, forward=None):
        self.forward: dict[str, str] = {}
        self.reverse: dict[str, str] = {}
        for orig, rep in (forward or {}).items():
            self.insert(orig, rep)

    def __len__(self):
        return len(self.forward)

    def __contains__(self, original):
        return original in self.forward

    def lookup(self, original: str) -> str | None:
        return self.forward.get(original)

    def taken(self, replacement: str, original: str) -> bool:
        """Whether ``replacement`` already stands in for a different original."""
        owner = self.reverse.get(replacement)
        return owner is not None and owner != original

    def insert(self, original: str, replacement: str) -> None:
        if REDACTED in (original, replacement):
            raise ValueError("the redaction sentinel cannot enter the table")
        if original == replacement:
            raise ValueError(f"replacement for {original!r} equals the original")
        if self.taken(replacement, original):
            raise Collision(f"{replacement!r} already replaces {self.reverse[replacement]!r}")
        current = self.forward.get(original)
        if current is not None and current != replacement:
            raise Collision(f"{original!r} already maps to {current!r}")
        self.forward[original] = replacement
        self.reverse[replacement] = original

    def as_dict(self) -> dict[str, str]:
        return dict(self.forward)

    def to_json(self) -> str:
        return json.dumps(self.forward, ensure_ascii=False, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SubstitutionTable":
        data = json.loads(text)
        if not isinstance(data, dict) or not all(
                isinstance(k, str) and isinstance(v, str) for k, v in data.items()):
            raise ValueError("substitution table must be a JSON object of strings")
        return cls(data)


def table_apply(table: SubstitutionTable, word_surface_lower: str) -> str | None:
    return table.lookup(word_surface_lower)


def word_embedding(token_ids: Sequence[int], backend: MlmBackend) -> np.ndarray:
    """Mean of the static embeddings of a word's tokens."""
    if not len(token_ids):
        raise ValueError("word has no tokens")
    return backend.embed_many(list(token_ids)).mean(axis=0)


def rank_candidates(word: Word, token_ids: Sequence[int], distribution: TokenDistribution,
                    backend: MlmBackend) -> list[Candidate]:
    """Eligible candidates ordered by distance, then probability (desc), then id."""
    vocab = backend.vocab
    own = set(token_ids)
    lower = word.lower
    eligible = [(tid, p) for tid, p in distribution.entries
                if tid not in own and vocab.is_wordlike(tid) and vocab.surface(tid) != lower]
    if not eligible:
        return []
    ids = [tid for tid, _ in eligible]
    dist = cosine_distances(word_embedding(token_ids, backend), backend.embed_many(ids))
    cands = [Candidate(tid, vocab.surface(tid), p, float(d))
             for (tid, p), d in zip(eligible, dist)]
    cands.sort(key=lambda c: (c.distance, -c.probability, c.token_id))
    return cands


def propose_substitution(word: Word, word_index: int, token_ids: Sequence[int],
                         distribution: TokenDistribution, backend: MlmBackend,
                         params: SubstitutionParams, rng: np.random.Generator,
                         table: SubstitutionTable | None = None) -> SubstitutionOutcome:
    """Pick a close, plausible stand-in for a flagged non-numeric word.

    Candidates inside radius ``s`` are kept in similarity order; with fewer
    than ``k`` of them the word is removed, otherwise one of the first ``k``
    is drawn uniformly. A draw that already replaces another original in
    ``table`` is discarded and the draw repeated over what is left.
    """
    ranked = rank_candidates(word, token_ids, distribution, backend)
    within = [c for c in ranked if c.distance <= params.s]
    if len(within) < params.k:
        return SubstitutionOutcome(word_index, REMOVED, None, len(ranked))
    pool = within[:params.k]
    while pool:
        c = pool.pop(int(rng.integers(len(pool))))
        if table is not None and table.taken(c.surface, word.lower):
            continue
        return SubstitutionOutcome(word_index, SUBSTITUTED, c.surface, len(ranked), c.distance)
    return SubstitutionOutcome(word_index, REMOVED, None, len(ranked))


def substitute_numeric(word: Word, word_index: int, rng: np.random.Generator,
                       table: SubstitutionTable | None = None) -> SubstitutionOutcome:
    """Same-length random digits; separators stay where they are."""
    surface = word.surface
    digits = [i for i, c in enumerate(surface) if c.isdecimal()]
    for _ in range(_NUMERIC_ATTEMPTS):
        chars = list(surface)
        for i, d in zip(digits, rng.integers(0, 10, size=len(digits))):
            chars[i] = str(int(d))
        rep = "".join(chars)
        if rep == word.lower or (table is not None and table.taken(rep, word.lower)):
            continue
        return SubstitutionOutcome(word_index, SUBSTITUTED, rep)
    return SubstitutionOutcome(word_index, REMOVED)


def reverse_apply(sanitized_text: str, table: SubstitutionTable) -> str:
    """Put originals back wherever a replacement occurs as a whole word.

    Matching is case-insensitive and longest-replacement-first; the original
    takes on the casing of the matched text.
    """
    if not table.reverse:
        return sanitized_text
    reps = sorted(table.reverse, key=lambda r: (-len(r), r))
    pattern = re.compile(r"(?<!\w)(?:" + "|".join(map(re.escape, reps)) + r")(?!\w)",
                         re.IGNORECASE)
    lowered = {r.lower(): o for r, o in table.reverse.items()}

    def put_back(m):
        found = m.group(0)
        return restore_case(found, lowered[found.lower()])

    return pattern.sub(put_back, sanitized_text)
