"""Masked-language-model backend interface and shared query types."""

from __future__ import annotations

import abc
import threading
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from .. import _accel
from ..tokenizer import SubwordVocabulary

PROB_FLOOR = 1e-12


class BackendError(Exception):
    pass


class ContextTooLong(BackendError):
    pass


class ZeroVector(ValueError):
    pass


@dataclass(frozen=True)
class MaskedQuery:
    """Token ids with one or more mask placeholders and the position to score."""

    tokens: tuple[int, ...]
    target_position: int

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(int(t) for t in self.tokens))
        if not 0 <= self.target_position < len(self.tokens):
            raise IndexError("target_position outside the token list")


@dataclass(frozen=True)
class TokenDistribution:
    """Top-n entries sorted by probability (desc), ties by token id (asc).

    ``requested`` carries exact probabilities for ids the caller asked for
    explicitly, whether or not they made the cut.
    """

    entries: tuple[tuple[int, float], ...]
    requested: dict[int, float] = field(default_factory=dict)

    @property
    def truncation(self) -> int:
        return len(self.entries)

    def ids(self) -> list[int]:
        return [tid for tid, _ in self.entries]

    def probability_of(self, token_id: int) -> float | None:
        if token_id in self.requested:
            return self.requested[token_id]
        for tid, p in self.entries:
            if tid == token_id:
                return p
        return None


def top_entries(probs: np.ndarray, top_n: int) -> tuple[tuple[int, float], ...]:
    v = probs.shape[0]
    if top_n >= v:
        cand = np.arange(v)
    else:
        kth = -np.partition(-probs, top_n - 1)[top_n - 1]
        cand = np.flatnonzero(probs >= kth)
    order = np.lexsort((cand, -probs[cand]))
    chosen = cand[order][:top_n]
    return tuple((int(i), float(probs[i])) for i in chosen)


def cosine_distance(a, b) -> float:
    """``1 - cos(a, b)``, clipped to [0, 2]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = float(np.sqrt(a @ a))
    nb = float(np.sqrt(b @ b))
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine distance undefined for a zero vector")
    if np.array_equal(a, b):
        return 0.0
    d = 1.0 - float(a @ b) / (na * nb)
    return min(2.0, max(0.0, d))


def cosine_distances(query, matrix) -> np.ndarray:
    """Vectorised :func:`cosine_distance` against each row of ``matrix``."""
    q = np.asarray(query, dtype=np.float64)
    m = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    if not q.any() or not np.all(np.einsum("ij,ij->i", m, m) > 0):
        raise ZeroVector("cosine distance undefined for a zero vector")
    d = np.clip(_accel.cosine_distances(q, m), 0.0, 2.0)
    d[np.all(m == q, axis=1)] = 0.0
    return d


class MlmBackend(abc.ABC):
    """Probability of vocabulary entries at a masked position, plus static
    token embeddings.

    Subclasses implement :meth:`_full_distribution` (normalised, floored
    probabilities over the whole vocabulary) and :meth:`embed`. Instances
    are read-only after construction; the small result cache is guarded by
    a lock so a backend can be shared between threads.
    """

    vocab: SubwordVocabulary
    max_context: int
    embedding_dim: int
    identity: str = "unknown"

    _cache_size = 64

    def __init__(self):
        self._cache = OrderedDict()
        self._lock = threading.Lock()

    @abc.abstractmethod
    def _full_distribution(self, tokens: tuple[int, ...], target: int) -> np.ndarray:
        ...

    @abc.abstractmethod
    def embed(self, token_id: int) -> np.ndarray:
        ...

    def embed_many(self, token_ids) -> np.ndarray:
        return np.stack([self.embed(t) for t in token_ids]) if len(token_ids) else \
            np.zeros((0, self.embedding_dim))

    def check(self, query: MaskedQuery) -> None:
        if len(query.tokens) > self.max_context:
            raise ContextTooLong(
                f"{len(query.tokens)} tokens exceed the context limit of {self.max_context}")
        if query.tokens[query.target_position] != self.vocab.mask_id:
            raise ValueError("target position does not hold the mask token")
        n = len(self.vocab)
        for t in query.tokens:
            if not 0 <= t < n:
                raise ValueError(f"token id {t} outside the vocabulary")

    def distribution(self, query: MaskedQuery) -> np.ndarray:
        """Full floored probability vector for the query's target position."""
        self.check(query)
        key = (query.tokens, query.target_position)
        with self._lock:
            hit = self._cache.get(key)
            if hit is not None:
                self._cache.move_to_end(key)
                return hit
        probs = np.maximum(self._full_distribution(query.tokens, query.target_position),
                           PROB_FLOOR)
        probs.setflags(write=False)
        with self._lock:
            self._cache[key] = probs
            while len(self._cache) > self._cache_size:
                self._cache.popitem(last=False)
        return probs

    def masked_distribution(self, query: MaskedQuery, top_n: int,
                            include=()) -> TokenDistribution:
        if top_n < 1:
            raise ValueError("top_n must be positive")
        probs = self.distribution(query)
        return TokenDistribution(top_entries(probs, top_n),
                                 {int(t): float(probs[t]) for t in include})

    def token_probability(self, query: MaskedQuery, token_id: int) -> float:
        return float(self.distribution(query)[token_id])
