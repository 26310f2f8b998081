"""Utterance, dialogue and corpus sanitization."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .backends import MlmBackend
from .corpus import Conversation, Utterance
from .pfilter import RedactionDecision, WordProbability, p_filter, probe_word, whole_word_query
from .rng import document_rng
from .substitution import (
    REMOVED,
    SUBSTITUTED,
    SubstitutionParams,
    SubstitutionTable,
    propose_substitution,
    substitute_numeric,
)
from .tokenizer import REDACTED, TokenizedText, detokenize, split_words, tokenize

log = logging.getLogger(__name__)

KEPT = "kept"
MODES = ("redact_only", "redact_and_substitute")
INVOCATIONS = ("separate", "simultaneous")
TABLE_SCOPES = ("per_conversation", "corpus")


@dataclass(frozen=True)
class SanitizeConfig:
    threshold_p: float = 0.01
    params: SubstitutionParams = field(default_factory=SubstitutionParams)
    mode: str = "redact_and_substitute"
    invocation: str = "separate"
    use_context: bool = True
    context_depth: int = 1
    backend_id: str = ""
    table_scope: str = "per_conversation"

    def __post_init__(self):
        if not 0.0 < self.threshold_p <= 1.0:
            raise ValueError(f"threshold_p={self.threshold_p} outside (0, 1]")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.invocation not in INVOCATIONS:
            raise ValueError(f"invocation must be one of {INVOCATIONS}")
        if self.table_scope not in TABLE_SCOPES:
            raise ValueError(f"table_scope must be one of {TABLE_SCOPES}")
        if self.context_depth < 1:
            raise ValueError("context_depth must be at least 1")

    @property
    def substitute(self) -> bool:
        return self.mode == "redact_and_substitute"


@dataclass(frozen=True)
class DecisionRecord:
    turn_index: int
    word_index: int
    surface: str
    probability: float
    ic_nats: float
    action: str
    replacement: str | None = None

    def to_dict(self, conversation: str) -> dict:
        return {"conversation": conversation, "turn": self.turn_index, "word": self.word_index,
                "surface": self.surface, "prob": self.probability, "ic": self.ic_nats,
                "action": self.action, "replacement": self.replacement}


@dataclass(frozen=True)
class SanitizedUtterance:
    original: Utterance
    sanitized_text: str
    decisions: tuple[DecisionRecord, ...]


class DialogueAborted(Exception):
    """A turn failed; ``partial`` holds the turns finished before it."""

    def __init__(self, conversation, turn_index, cause, partial):
        super().__init__(f"conversation {conversation!r} failed at turn {turn_index}: "
                         f"{type(cause).__name__}: {cause}")
        self.conversation = conversation
        self.turn_index = turn_index
        self.cause = cause
        self.partial = partial


def context_prefix(contexts: Sequence[str], backend: MlmBackend) -> list[int]:
    """Token ids for earlier sanitized turns, each closed by the separator.

    Redaction sentinels in the context become the unknown token.
    """
    vocab = backend.vocab
    ids: list[int] = []
    for text in contexts:
        tok = tokenize(text, vocab)
        for w in tok.words:
            if w.surface == REDACTED:
                ids.append(vocab.unk_id)
            else:
                ids.extend(t.id for t in tok.tokens[w.token_start:w.token_stop])
        ids.append(vocab.sep_id)
    return ids


def _as_contexts(prev_context) -> list[str]:
    if prev_context is None:
        return []
    if isinstance(prev_context, str):
        return [prev_context]
    return list(prev_context)


def score_words(text: TokenizedText, backend: MlmBackend, prefix: Sequence[int] = (),
                top_n: int | None = None):
    """Probabilities for every non-punctuation word (and first-step candidates
    when ``top_n`` is given)."""
    probs: list[WordProbability] = []
    dists = {}
    for i, w in enumerate(text.words):
        if w.kind == "punctuation":
            continue
        wp, dist = probe_word(text, i, backend, prefix, top_n)
        probs.append(wp)
        if dist is not None:
            dists[i] = dist
    return probs, dists


def sanitize_utterance(utt: Utterance, prev_context, config: SanitizeConfig,
                       backend: MlmBackend, table: SubstitutionTable | None = None,
                       rng: np.random.Generator | None = None, *,
                       substitution_backend: MlmBackend | None = None,
                       sensitive: set[str] | None = None) -> SanitizedUtterance:
    """Flag and replace the low-probability words of one utterance.

    ``prev_context`` (a string or a list of strings, oldest first) is the
    already-sanitized text of preceding turns; it conditions the estimates
    but is never itself flagged. ``sensitive`` holds the lowercase surfaces
    flagged earlier in the document: any later occurrence is treated as
    flagged too, whatever its probability there, and newly flagged words are
    added to it. ``substitution_backend`` optionally draws candidates from a
    different model; it only applies to separate invocation.
    """
    if table is None:
        table = SubstitutionTable()
    if sensitive is None:
        sensitive = set()
    if rng is None:
        rng = document_rng(config.params.seed)
    contexts = _as_contexts(prev_context) if config.use_context else []
    prefix = context_prefix(contexts, backend) if contexts else []
    text = tokenize(utt.text, backend.vocab)
    simultaneous = config.invocation == "simultaneous"
    n = config.params.n
    probs, dists = score_words(text, backend, prefix, n if simultaneous else None)
    by_index = {wp.word_index: wp for wp in probs}
    flags = p_filter(text, probs, config.threshold_p)

    sub_backend = backend if simultaneous or substitution_backend is None else substitution_backend
    if sub_backend is backend:
        sub_text, sub_prefix = text, prefix
    else:
        sub_text = tokenize(utt.text, sub_backend.vocab)
        sub_prefix = context_prefix(contexts, sub_backend) if contexts else []

    replacements = {}
    records = []
    for d in flags:
        key = text.words[d.word_index].lower
        if not d.flagged and key in sensitive:
            d = replace(d, flagged=True)
        if d.flagged:
            sensitive.add(key)
        records.append(_resolve(d, by_index[d.word_index], utt, text, config, table, rng,
                                dists, sub_backend, sub_text, sub_prefix, replacements))
    return SanitizedUtterance(utt, detokenize(text, replacements), tuple(records))


def _resolve(d: RedactionDecision, wp: WordProbability, utt, text, config, table, rng, dists,
             sub_backend, sub_text, sub_prefix, replacements) -> DecisionRecord:
    word = text.words[d.word_index]

    def record(action, replacement=None):
        return DecisionRecord(utt.turn_index, d.word_index, word.surface, wp.probability,
                              wp.ic_nats, action, replacement)

    if not d.flagged:
        return record(KEPT)
    if not config.substitute:
        replacements[d.word_index] = REDACTED
        return record(REMOVED)
    key = word.lower
    existing = table.lookup(key)
    if existing is not None:
        replacements[d.word_index] = existing
        return record(SUBSTITUTED, existing)
    if word.kind == "numeric":
        outcome = substitute_numeric(word, d.word_index, rng, table)
    else:
        dist = dists.get(d.word_index)
        if dist is None:
            query = whole_word_query(sub_text, d.word_index, sub_backend, sub_prefix)
            dist = sub_backend.masked_distribution(query, config.params.n)
        outcome = propose_substitution(word, d.word_index, sub_text.word_ids(d.word_index), dist,
                                       sub_backend, config.params, rng, table)
    if outcome.action == SUBSTITUTED:
        table.insert(key, outcome.replacement)
        replacements[d.word_index] = outcome.replacement
        return record(SUBSTITUTED, outcome.replacement)
    replacements[d.word_index] = REDACTED
    return record(REMOVED)


def simultaneous_pass(utt: Utterance, prev_context, config: SanitizeConfig,
                      backend: MlmBackend, table: SubstitutionTable | None = None,
                      rng: np.random.Generator | None = None) -> SanitizedUtterance:
    """:func:`sanitize_utterance` with one shared query for probability and candidates."""
    return sanitize_utterance(utt, prev_context, replace(config, invocation="simultaneous"),
                              backend, table, rng)


def sanitize_dialogue(conv: Sequence[Utterance], config: SanitizeConfig, backend: MlmBackend,
                      *, table: SubstitutionTable | None = None,
                      rng: np.random.Generator | None = None, doc_id: str = "",
                      substitution_backend: MlmBackend | None = None,
                      sensitive: set[str] | None = None) -> list[SanitizedUtterance]:
    """Sanitize turns in order, feeding each turn the sanitized text before it."""
    if table is None:
        table = SubstitutionTable()
    if rng is None:
        rng = document_rng(config.params.seed, doc_id)
    if sensitive is None:
        sensitive = set()
    done: list[SanitizedUtterance] = []
    history: list[str] = []
    last = -1
    for utt in conv:
        if utt.turn_index <= last:
            raise ValueError("turns must be ordered by strictly increasing turn_index")
        last = utt.turn_index
        ctx = history[-config.context_depth:] if config.use_context else None
        try:
            res = sanitize_utterance(utt, ctx, config, backend, table, rng,
                                     substitution_backend=substitution_backend,
                                     sensitive=sensitive)
        except Exception as exc:
            raise DialogueAborted(doc_id, utt.turn_index, exc, done) from exc
        done.append(res)
        history.append(res.sanitized_text)
    return done


@dataclass
class CorpusResult:
    sanitized: dict[str, list[SanitizedUtterance]]
    tables: dict[str, SubstitutionTable]
    failures: list[DialogueAborted]

    def texts(self) -> dict[str, list[str]]:
        return {cid: [u.sanitized_text for u in res] for cid, res in self.sanitized.items()}

    def decisions(self):
        for cid, res in self.sanitized.items():
            for u in res:
                for rec in u.decisions:
                    yield cid, rec


def sanitize_corpus(conversations: Sequence[Conversation], config: SanitizeConfig,
                    backend: MlmBackend, **kw) -> CorpusResult:
    """Sanitize every conversation; failures keep their finished turns.

    A conversation that fails keeps its completed turns in ``sanitized`` and
    the remaining turns are left out; the failure is recorded in ``failures``.
    """
    corpus_scope = config.table_scope == "corpus"
    shared, shared_seen = SubstitutionTable(), set()
    sanitized, tables, failures = {}, {}, []
    for conv in conversations:
        table = shared if corpus_scope else SubstitutionTable()
        seen = shared_seen if corpus_scope else set()
        tables[conv.id] = table
        try:
            sanitized[conv.id] = sanitize_dialogue(conv.turns, config, backend, table=table,
                                                   doc_id=conv.id, sensitive=seen, **kw)
        except DialogueAborted as exc:
            log.error("conversation %s aborted at turn %d (%s)", conv.id, exc.turn_index,
                      type(exc.cause).__name__)
            sanitized[conv.id] = exc.partial
            failures.append(exc)
    return CorpusResult(sanitized, tables, failures)


def count_words(text: str) -> int:
    return len(split_words(text))
