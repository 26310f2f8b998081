"""Gold labels from dialogue metadata, word-level P/R/F1, threshold sweeps."""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

from .backends import MlmBackend
from .corpus import Conversation
from .pipeline import KEPT, DecisionRecord, SanitizeConfig, sanitize_corpus, score_words
from .tokenizer import split_words, tokenize

log = logging.getLogger(__name__)

DEFAULT_CATEGORIES = (
    "customer name", "username", "email", "phone number",
    "account id", "order id", "street address", "zip code",
)


class CoverageMismatch(ValueError):
    pass


WordKey = tuple  # (conversation id, turn index, word index)


@dataclass
class GoldLabeling:
    """Sensitive words keyed by (conversation, turn, word).

    ``labels`` holds every evaluated (non-punctuation) word; the value is the
    category that marked it, or None for safe words.
    """

    labels: dict[WordKey, str | None] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def sensitive(self, key) -> bool:
        return self.labels.get(key) is not None

    def update(self, other: "GoldLabeling") -> None:
        self.labels.update(other.labels)
        self.warnings.extend(other.warnings)


def _value_pattern(value: str) -> re.Pattern:
    parts = [re.escape(p) for p in value.split()]
    return re.compile(r"(?<!\w)" + r"\s+".join(parts) + r"(?!\w)", re.IGNORECASE)


def gold_labels(conv: Conversation, categories: Sequence[str] = DEFAULT_CATEGORIES) -> GoldLabeling:
    """Mark words that overlap a metadata value from ``categories``.

    Values match case-insensitively at word boundaries. A word hit by more
    than one category keeps the one listed first in ``categories``.
    """
    gold = GoldLabeling()
    patterns = []
    for cat in categories:
        for value in conv.metadata.get(cat, []):
            if value.strip():
                patterns.append((cat, value, _value_pattern(value)))
    matched = set()
    for utt in conv.turns:
        words = split_words(utt.text)
        spans = []
        for cat, value, pat in patterns:
            for m in pat.finditer(utt.text):
                spans.append((m.start(), m.end(), cat))
                matched.add((cat, value))
        for wi, (s, e, kind) in enumerate(words):
            if kind == "punctuation":
                continue
            label = None
            for ms, me, cat in spans:  # spans follow category order
                if s < me and ms < e:
                    label = cat
                    break
            gold.labels[(conv.id, utt.turn_index, wi)] = label
    for cat, value, _ in patterns:
        if (cat, value) not in matched:
            # the value itself is sensitive, so only the category is logged
            gold.warnings.append(f"{conv.id}: a {cat!r} value never occurs in the text")
    for w in gold.warnings:
        log.warning(w)
    return gold


def corpus_gold(conversations: Iterable[Conversation],
                categories: Sequence[str] = DEFAULT_CATEGORIES) -> GoldLabeling:
    gold = GoldLabeling()
    for conv in conversations:
        gold.update(gold_labels(conv, categories))
    return gold


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp,
                               self.fn + other.fn, self.tn + other.tn)


def f1_score(precision: float | None, recall: float | None) -> tuple[float, bool]:
    """Harmonic mean; returns ``(0.0, False)`` when it is undefined."""
    if precision is None or recall is None or precision + recall == 0:
        return 0.0, False
    return 2 * precision * recall / (precision + recall), True


def prf(counts: ConfusionCounts):
    precision = counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp else None
    recall = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn else None
    f1, defined = f1_score(precision, recall)
    return precision, recall, f1, defined


@dataclass(frozen=True)
class EvalReport:
    counts: ConfusionCounts
    precision: float | None
    recall: float | None
    f1: float
    f1_defined: bool
    per_category: dict[str, float | None]
    threshold: float | None = None

    @classmethod
    def from_counts(cls, counts, per_category=None, threshold=None) -> "EvalReport":
        p, r, f1, ok = prf(counts)
        return cls(counts, p, r, f1, ok, dict(per_category or {}), threshold)

    def to_dict(self) -> dict:
        c = self.counts
        return {
            "threshold": self.threshold,
            "counts": {"tp": c.tp, "fp": c.fp, "fn": c.fn, "tn": c.tn},
            "precision": self.precision,
            "precision_defined": self.precision is not None,
            "recall": self.recall,
            "recall_defined": self.recall is not None,
            "f1": self.f1,
            "f1_defined": self.f1_defined,
            "per_category_recall": self.per_category,
        }


def _score_predictions(predicted: dict[WordKey, bool], gold: GoldLabeling,
                       threshold=None) -> EvalReport:
    if predicted.keys() != gold.labels.keys():
        missing = len(gold.labels.keys() - predicted.keys())
        extra = len(predicted.keys() - gold.labels.keys())
        raise CoverageMismatch(f"{missing} gold words without decisions, "
                               f"{extra} decisions without gold words")
    tp = fp = fn = tn = 0
    cat_hits: dict[str, list[int]] = {}
    for key, flagged in predicted.items():
        cat = gold.labels[key]
        if cat is not None:
            hits = cat_hits.setdefault(cat, [0, 0])
            hits[1] += 1
            if flagged:
                tp += 1
                hits[0] += 1
            else:
                fn += 1
        elif flagged:
            fp += 1
        else:
            tn += 1
    per_cat = {cat: h[0] / h[1] for cat, h in sorted(cat_hits.items())}
    return EvalReport.from_counts(ConfusionCounts(tp, fp, fn, tn), per_cat, threshold)


def score(decisions: Iterable[tuple[str, DecisionRecord]], gold: GoldLabeling,
          threshold: float | None = None) -> EvalReport:
    """Word-level scores; substituted and removed words count as predicted unsafe."""
    predicted = {}
    for cid, rec in decisions:
        key = (cid, rec.turn_index, rec.word_index)
        if key in predicted:
            raise CoverageMismatch(f"duplicate decision for {key}")
        predicted[key] = rec.action != KEPT
    return _score_predictions(predicted, gold, threshold)


def _check_thresholds(thresholds: Sequence[float]) -> None:
    if not thresholds:
        raise ValueError("at least one threshold is required")
    for p in thresholds:
        if not 0.0 < p <= 1.0:
            raise ValueError(f"threshold {p} outside (0, 1]")
    if any(b < a for a, b in zip(thresholds, thresholds[1:])):
        raise ValueError("thresholds must be sorted ascending")


def corpus_probabilities(conversations: Sequence[Conversation], backend: MlmBackend):
    """Context-free probability of every evaluated word, keyed like the gold labels.

    Values are ``(probability, lowercase surface)`` in document order.
    """
    out = {}
    for conv in conversations:
        for utt in conv.turns:
            text = tokenize(utt.text, backend.vocab)
            probs, _ = score_words(text, backend)
            for wp in probs:
                out[(conv.id, utt.turn_index, wp.word_index)] = (
                    wp.probability, text.words[wp.word_index].lower)
    return out


def threshold_flags(probs, p: float, corpus_scope: bool = False) -> dict[WordKey, bool]:
    """Pipeline flags for context-free probabilities at threshold ``p``.

    A surface flagged once stays flagged for the rest of its document (or
    the rest of the corpus with a corpus-wide table), as in the pipeline.
    """
    out = {}
    seen: set[str] = set()
    last = None
    for key, (prob, lower) in probs.items():
        if not corpus_scope and key[0] != last:
            seen = set()
            last = key[0]
        flagged = prob < p or lower in seen
        if flagged:
            seen.add(lower)
        out[key] = flagged
    return out


def sweep(conversations: Sequence[Conversation], config_base: SanitizeConfig,
          thresholds: Sequence[float], backend: MlmBackend,
          categories: Sequence[str] = DEFAULT_CATEGORIES) -> list[EvalReport]:
    """One report per threshold.

    Without context the word probabilities do not depend on the threshold,
    so they are computed once and re-thresholded. With context, earlier
    redactions change later estimates and the full pipeline runs per
    threshold.
    """
    _check_thresholds(thresholds)
    gold = corpus_gold(conversations, categories)
    if not config_base.use_context:
        probs = corpus_probabilities(conversations, backend)
        scope = config_base.table_scope == "corpus"
        return [_score_predictions(threshold_flags(probs, p, scope), gold, p)
                for p in thresholds]
    reports = []
    for p in thresholds:
        result = sanitize_corpus(conversations, replace(config_base, threshold_p=p), backend)
        if result.failures:
            raise result.failures[0]
        reports.append(score(result.decisions(), gold, p))
    return reports


def _fmt(x) -> str:
    return "n/a" if x is None else f"{x:.2f}"


def render_table(reports: Sequence[EvalReport], label: str = "p") -> str:
    """Aligned plain-text table: one row per threshold."""
    rows = [("Model", "Recall", "Precision", "F1")]
    for r in reports:
        name = f"{label}={r.threshold:.0E}" if r.threshold is not None else label
        f1 = _fmt(r.f1) if r.f1_defined else "n/a"
        rows.append((name, _fmt(r.recall), _fmt(r.precision), f1))
    widths = [max(len(row[i]) for row in rows) for i in range(4)]
    lines = []
    for j, row in enumerate(rows):
        cells = [row[0].ljust(widths[0])] + [c.rjust(w) for c, w in zip(row[1:], widths[1:])]
        lines.append("  ".join(cells).rstrip())
        if j == 0:
            lines.append("-" * len(lines[0]))
    return "\n".join(lines) + "\n"


def reports_to_json(reports: Sequence[EvalReport]) -> str:
    return json.dumps({"reports": [r.to_dict() for r in reports]}, indent=2) + "\n"
