"""Per-word probability by iterative masking, and threshold filtering."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .backends import PROB_FLOOR, MaskedQuery, MlmBackend, TokenDistribution
from .tokenizer import TokenizedText


class PunctuationWord(ValueError):
    pass


class OutOfRange(ValueError):
    pass


class MissingProbability(ValueError):
    pass


@dataclass(frozen=True)
class WordProbability:
    word_index: int
    probability: float
    per_token: tuple[float, ...]
    ic_nats: float


@dataclass(frozen=True)
class RedactionDecision:
    word_index: int
    probability: float
    flagged: bool
    threshold_used: float


def information_content(p: float) -> float:
    """Information content in nats, ``-ln(p)``."""
    if not 0.0 < p <= 1.0:
        raise OutOfRange(f"probability {p!r} outside (0, 1]")
    return -math.log(p)


def fit_window(prefix: Sequence[int], ids: Sequence[int], word_start: int,
               limit: int) -> tuple[list[int], int]:
    """Cut ``prefix + ids`` down to ``limit`` tokens.

    Context is dropped oldest-first. If the utterance alone is still too
    long, utterance tokens are dropped from the left (never past the word)
    and then from the right. Returns the token list and the offset at which
    ``ids[0]`` (or what remains of it) lands.
    """
    n = len(ids)
    if len(prefix) + n <= limit:
        return list(prefix) + list(ids), len(prefix)
    if n <= limit:
        keep = limit - n
        ctx = list(prefix[len(prefix) - keep:]) if keep else []
        return ctx + list(ids), len(ctx)
    a = min(n - limit, word_start)
    return list(ids[a:a + limit]), -a


def _queries(text: TokenizedText, word_index: int, backend: MlmBackend, prefix):
    word = text.words[word_index]
    if word.kind == "punctuation":
        raise PunctuationWord(f"word {word_index} ({word.surface!r}) is punctuation")
    ids, offset = fit_window(prefix, text.ids, word.token_start, backend.max_context)
    start = offset + word.token_start
    stop = offset + word.token_stop
    truth = ids[start:stop]
    mask = backend.vocab.mask_id
    for i in range(stop - start):
        q = list(ids)
        q[start + i:stop] = [mask] * (stop - start - i)
        yield MaskedQuery(tuple(q), start + i), truth[i]


def whole_word_query(text: TokenizedText, word_index: int, backend: MlmBackend,
                     prefix=()) -> MaskedQuery:
    """The query with every token of the word masked, aimed at its first token."""
    return next(_queries(text, word_index, backend, prefix))[0]


def probe_word(text: TokenizedText, word_index: int, backend: MlmBackend, prefix=(),
               top_n: int | None = None) -> tuple[WordProbability, TokenDistribution | None]:
    """Chain-masked probability of one word.

    Step ``i`` masks tokens ``i..m`` of the word (earlier tokens show their
    true values) and scores the true token ``i``. With ``top_n`` set, the
    first, whole-word-masked query also returns the top candidates, so
    probability and candidates come from a single backend call.
    """
    steps = []
    dist = None
    for i, (query, tid) in enumerate(_queries(text, word_index, backend, prefix)):
        if i == 0 and top_n is not None:
            dist = backend.masked_distribution(query, top_n, include=(tid,))
            p = dist.requested[tid]
        else:
            p = backend.token_probability(query, tid)
        steps.append(max(p, PROB_FLOOR))
    # clamp only guards log() against underflow on absurdly long words
    prob = max(math.prod(steps), 5e-324)
    return WordProbability(word_index, prob, tuple(steps), -math.log(prob)), dist


def word_probability(text: TokenizedText, word_index: int, backend: MlmBackend,
                     prefix=()) -> WordProbability:
    return probe_word(text, word_index, backend, prefix)[0]


def p_filter(text: TokenizedText, probabilities: Sequence[WordProbability],
             p: float) -> list[RedactionDecision]:
    """Flag every non-punctuation word whose probability is strictly below ``p``."""
    if not 0.0 < p <= 1.0:
        raise OutOfRange(f"threshold {p!r} outside (0, 1]")
    by_index = {}
    for wp in probabilities:
        if wp.word_index in by_index:
            raise ValueError(f"duplicate probability for word {wp.word_index}")
        by_index[wp.word_index] = wp
    decisions = []
    for i, word in enumerate(text.words):
        if word.kind == "punctuation":
            continue
        wp = by_index.pop(i, None)
        if wp is None:
            raise MissingProbability(f"no probability for word {i}")
        decisions.append(RedactionDecision(i, wp.probability, wp.probability < p, p))
    if by_index:
        raise ValueError(f"probabilities given for uncovered words {sorted(by_index)}")
    return decisions
