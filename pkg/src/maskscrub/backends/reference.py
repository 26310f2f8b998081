"""Table-driven backend used for tests and as an executable oracle.

A table row reads ``context-pattern <TAB> token <TAB> probability``. The
pattern is a whitespace-separated token sequence with ``_`` at the masked
slot; it matches a query when its left part ends right before the target
position and its right part starts right after it. Other masked positions
in a query are spelled with the mask token (``[MASK]``). When several
patterns match, the one with the most literal tokens wins, then the one
declared first. The bare pattern ``_`` matches everything.

Within the winning pattern, listed tokens get their listed probability and
the leftover mass is spread evenly over all other non-special tokens.
Special tokens sit at the probability floor.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable

import numpy as np

from ..tokenizer import SubwordVocabulary
from .base import PROB_FLOOR, MlmBackend

SLOT = "_"


def parse_table(lines: Iterable[str]) -> list[tuple[str, str, float]]:
    rows = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ValueError(f"line {lineno}: expected 3 tab-separated columns")
        rows.append((parts[0], parts[1], float(parts[2])))
    return rows


def read_table(path) -> list[tuple[str, str, float]]:
    with open(path, encoding="utf-8") as fh:
        return parse_table(fh)


class ReferenceBackend(MlmBackend):

    def __init__(self, vocab: SubwordVocabulary, rows=(), embeddings=None,
                 max_context: int = 512, identity: str = "reference"):
        super().__init__()
        self.vocab = vocab
        self.max_context = max_context
        self.identity = identity
        n = len(vocab)
        if embeddings is None:
            embeddings = np.eye(n)
        emb = np.asarray(embeddings, dtype=np.float64)
        if emb.shape[0] != n:
            raise ValueError(f"embedding rows ({emb.shape[0]}) != vocabulary size ({n})")
        if not np.all(np.isfinite(emb)):
            raise ValueError("embeddings must be finite")
        self._emb = emb
        self._emb.setflags(write=False)
        self.embedding_dim = emb.shape[1]

        self._rules: dict[tuple, dict[int, float]] = {}
        self._order: dict[tuple, int] = {}
        for pattern, token, prob in rows:
            key = self._pattern_key(pattern)
            if token not in vocab:
                raise ValueError(f"table token {token!r} not in vocabulary")
            if not 0.0 < prob <= 1.0:
                raise ValueError(f"probability {prob} for {token!r} outside (0, 1]")
            self._order.setdefault(key, len(self._order))
            self._rules.setdefault(key, {})[vocab.index[token]] = prob
        for key, entries in self._rules.items():
            if sum(entries.values()) > 1.0 + 1e-9:
                raise ValueError(f"pattern {self._render(key)!r} has mass above 1")
        self._shapes = sorted({(len(l), len(r)) for l, r in self._rules},
                              key=lambda s: -(s[0] + s[1]))
        self._fill = np.array([i for i in range(n) if i not in vocab.special_ids], dtype=np.int64)
        self._vectors: dict[tuple | None, np.ndarray] = {}

    def _pattern_key(self, pattern: str) -> tuple:
        toks = pattern.split()
        if toks.count(SLOT) != 1:
            raise ValueError(f"pattern {pattern!r} needs exactly one {SLOT!r}")
        i = toks.index(SLOT)
        left, right = toks[:i], toks[i + 1:]
        for t in left + right:
            if t not in self.vocab:
                raise ValueError(f"pattern token {t!r} not in vocabulary")
        return (tuple(self.vocab.index[t] for t in left),
                tuple(self.vocab.index[t] for t in right))

    def _render(self, key) -> str:
        left, right = key
        return " ".join([self.vocab.tokens[i] for i in left] + [SLOT]
                        + [self.vocab.tokens[i] for i in right])

    @classmethod
    def from_files(cls, vocab: SubwordVocabulary, tables, embeddings=None, **kw):
        rows = []
        for path in tables:
            rows.extend(read_table(path))
        emb = None
        if embeddings is not None:
            emb = np.load(Path(embeddings)) if not isinstance(embeddings, np.ndarray) else embeddings
        return cls(vocab, rows, emb, **kw)

    def match(self, tokens: tuple[int, ...], target: int):
        """Key of the winning pattern for this query, or None."""
        best = None
        best_rank = None
        for ll, rl in self._shapes:
            if ll > target or target + 1 + rl > len(tokens):
                continue
            key = (tokens[target - ll:target], tokens[target + 1:target + 1 + rl])
            if key in self._rules:
                rank = (ll + rl, -self._order[key])
                if best_rank is None or rank > best_rank:
                    best, best_rank = key, rank
        return best

    def _vector(self, key) -> np.ndarray:
        vec = self._vectors.get(key)
        if vec is not None:
            return vec
        n = len(self.vocab)
        vec = np.zeros(n)
        listed = self._rules.get(key, {}) if key is not None else {}
        for tid, p in listed.items():
            vec[tid] = p
        fill = self._fill[~np.isin(self._fill, list(listed))] if listed else self._fill
        rest = 1.0 - sum(listed.values())
        if rest > 0 and fill.size:
            vec[fill] = rest / fill.size
        vec = np.maximum(vec, PROB_FLOOR)
        vec.setflags(write=False)
        self._vectors[key] = vec
        return vec

    def _full_distribution(self, tokens, target):
        return self._vector(self.match(tokens, target)).copy()

    def embed(self, token_id: int) -> np.ndarray:
        return self._emb[token_id]

    def embed_many(self, token_ids) -> np.ndarray:
        return self._emb[np.asarray(token_ids, dtype=np.int64)]
