"""Dialogue corpus reading and writing.

JSON corpora look like::

    {"conversations": [{"id": "c1",
                        "turns": [{"speaker": "customer", "text": "..."}],
                        "metadata": {"customer name": ["John Smith"]}}]}

Plain-text input is one utterance per line, the whole file one document.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class Utterance:
    speaker: str
    text: str
    turn_index: int


@dataclass
class Conversation:
    id: str
    turns: list[Utterance]
    metadata: dict[str, list[str]] = field(default_factory=dict)


def parse_corpus(data) -> list[Conversation]:
    if not isinstance(data, dict) or not isinstance(data.get("conversations"), list):
        raise CorpusError('expected an object with a "conversations" list')
    convs = []
    seen = set()
    for n, raw in enumerate(data["conversations"]):
        cid = str(raw.get("id", n))
        if cid in seen:
            raise CorpusError(f"duplicate conversation id {cid!r}")
        seen.add(cid)
        turns = []
        for i, t in enumerate(raw.get("turns", [])):
            if not isinstance(t, dict) or not isinstance(t.get("text"), str):
                raise CorpusError(f"conversation {cid!r}, turn {i}: missing text")
            turns.append(Utterance(str(t.get("speaker", "")), t["text"], i))
        meta = {}
        for key, values in (raw.get("metadata") or {}).items():
            if isinstance(values, str):
                values = [values]
            meta[key] = [str(v) for v in values]
        convs.append(Conversation(cid, turns, meta))
    return convs


def read_corpus(path) -> list[Conversation]:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if not text.strip():
        return []
    try:
        return parse_corpus(json.loads(text))
    except json.JSONDecodeError as exc:
        raise CorpusError(f"{path}: {exc}") from exc


def read_plaintext(path) -> list[Conversation]:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        return []
    return [Conversation(path.stem, [Utterance("", ln, i) for i, ln in enumerate(lines)])]


def corpus_to_json(conversations, texts=None, keep_metadata: bool = True) -> str:
    """Serialise conversations, optionally swapping in new turn texts.

    ``texts`` maps conversation id to the list of replacement turn texts.
    Metadata holds raw slot values, so sanitized output drops it.
    """
    out = []
    for conv in conversations:
        new = texts.get(conv.id) if texts else None
        turns = [{"speaker": u.speaker, "text": new[i] if new is not None else u.text}
                 for i, u in enumerate(conv.turns)]
        out.append({"id": conv.id, "turns": turns, "metadata": conv.metadata if keep_metadata else {}})
    return json.dumps({"conversations": out}, ensure_ascii=False, indent=2) + "\n"


# ABCD scenario fields behind each gold category
ABCD_FIELDS = {
    "customer name": ("personal", "customer_name"),
    "username": ("personal", "username"),
    "email": ("personal", "email"),
    "phone number": ("personal", "phone"),
    "account id": ("personal", "account_id"),
    "order id": ("order", "order_id"),
    "street address": ("order", "street_address"),
    "zip code": ("order", "zip_code"),
}


def parse_abcd(data, split: str = "test", limit: int | None = None) -> list[Conversation]:
    """Convert ABCD (``abcd_v1.1.json``) dialogues; system action turns are dropped."""
    if split not in data:
        raise CorpusError(f"ABCD data has no {split!r} split")
    convs = []
    for raw in data[split][:limit]:
        turns = []
        for speaker, text in raw["original"]:
            if speaker == "action":
                continue
            turns.append(Utterance(speaker, text, len(turns)))
        scenario = raw.get("scenario", {})
        meta = {}
        for cat, (section, key) in ABCD_FIELDS.items():
            value = scenario.get(section, {}).get(key)
            if value not in (None, ""):
                meta[cat] = [str(value)]
        convs.append(Conversation(str(raw["convo_id"]), turns, meta))
    return convs
