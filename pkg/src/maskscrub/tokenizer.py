"""Word splitting, greedy longest-match subword tokenization and splicing.

Words are found first (independently of any vocabulary), then each word is
lowercased and segmented into vocabulary pieces. Every token keeps the
character span it came from, so the original text can always be rebuilt.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Sequence

REDACTED = "[REDACTED]"

NUMERIC_SEPARATORS = frozenset("-./()+")

# A numeric run may carry separators but must start and end on a digit (a
# leading "(" or "+" and a trailing ")" are allowed), and must not run into
# letters: "123abc" is one mixed word, not "123" + "abc". The redaction
# sentinel counts as a single word so sanitized text keeps its word count.
_WORD_RE = re.compile(
    r"""
    \[REDACTED\]
    | (?<![^\W_])[(+]*\d(?:[\d\-./()+]*[\d)])?(?![^\W_])
    | [^\W_]+
    | \S
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    text: str
    start: int
    end: int
    is_continuation: bool
    id: int

    @property
    def char_span(self) -> tuple[int, int]:
        return (self.start, self.end)


@dataclass(frozen=True)
class Word:
    token_start: int
    token_stop: int
    start: int
    end: int
    surface: str
    kind: str

    @property
    def token_indices(self) -> range:
        return range(self.token_start, self.token_stop)

    @property
    def char_span(self) -> tuple[int, int]:
        return (self.start, self.end)

    @property
    def n_tokens(self) -> int:
        return self.token_stop - self.token_start

    @property
    def lower(self) -> str:
        return self.surface.lower()


@dataclass(frozen=True)
class TokenizedText:
    source: str
    tokens: tuple[Token, ...]
    words: tuple[Word, ...]

    @property
    def ids(self) -> list[int]:
        return [t.id for t in self.tokens]

    def word_ids(self, index: int) -> list[int]:
        w = self.words[index]
        return [t.id for t in self.tokens[w.token_start:w.token_stop]]

    def gaps(self) -> list[str]:
        """Text between consecutive words, including leading/trailing gaps."""
        out = []
        pos = 0
        for w in self.words:
            out.append(self.source[pos:w.start])
            pos = w.end
        out.append(self.source[pos:])
        return out


class SubwordVocabulary:
    """Token inventory with a continuation marker and special tokens.

    Continuation pieces are stored with their marker prefix (``##ing``);
    lookups during segmentation add the marker for non-initial pieces.
    """

    def __init__(self, tokens: Sequence[str], continuation_marker: str = "##",
                 unk_token: str = "[UNK]", mask_token: str = "[MASK]",
                 sep_token: str = "[SEP]", cls_token: str | None = "[CLS]",
                 pad_token: str | None = "[PAD]"):
        self.tokens = list(tokens)
        self.index = {}
        for i, tok in enumerate(self.tokens):
            self.index.setdefault(tok, i)
        self.continuation_marker = continuation_marker
        for name, tok in (("unk", unk_token), ("mask", mask_token), ("sep", sep_token)):
            if tok not in self.index:
                raise ValueError(f"{name} token {tok!r} missing from vocabulary")
        self.unk_token = unk_token
        self.mask_token = mask_token
        self.sep_token = sep_token
        self.cls_token = cls_token
        self.pad_token = pad_token
        self.unk_id = self.index[unk_token]
        self.mask_id = self.index[mask_token]
        self.sep_id = self.index[sep_token]
        self.cls_id = self.index.get(cls_token) if cls_token else None
        self.pad_id = self.index.get(pad_token) if pad_token else None
        self.special_ids = frozenset(
            i for i in (self.unk_id, self.mask_id, self.sep_id, self.cls_id, self.pad_id)
            if i is not None)
        # longest piece bounds the inner search loop
        self._max_piece = max((len(self._bare(t)) for t in self.tokens), default=1)

    @classmethod
    def from_file(cls, path, **kwargs) -> "SubwordVocabulary":
        with open(path, encoding="utf-8") as fh:
            tokens = [line.rstrip("\r\n") for line in fh]
        while tokens and tokens[-1] == "":
            tokens.pop()
        return cls(tokens, **kwargs)

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def _bare(self, tok: str) -> str:
        m = self.continuation_marker
        return tok[len(m):] if m and tok.startswith(m) else tok

    def is_continuation(self, token_id: int) -> bool:
        m = self.continuation_marker
        return bool(m) and self.tokens[token_id].startswith(m)

    def surface(self, token_id: int) -> str:
        """Token text without the continuation marker."""
        return self._bare(self.tokens[token_id])

    def is_wordlike(self, token_id: int) -> bool:
        """True for ordinary word-initial pieces that contain a letter or digit."""
        if token_id in self.special_ids or self.is_continuation(token_id):
            return False
        tok = self.tokens[token_id]
        if len(tok) > 2 and tok[0] == "[" and tok[-1] == "]":
            return False  # reserved slots such as [unused0]
        return any(c.isalnum() for c in tok)

    def segment(self, units: Sequence[str]) -> list[tuple[int, int, int]]:
        """Greedy longest-match over one lowercased word.

        ``units`` holds the lowercased form of each source character (usually
        one char each). Returns ``(token_id, start, end)`` triples with offsets
        into ``units``. A position where no piece matches yields a
        one-character unknown token and segmentation resumes after it.
        """
        out = []
        pos = 0
        n = len(units)
        while pos < n:
            end = min(n, pos + self._max_piece)
            found = None
            while end > pos:
                piece = "".join(units[pos:end])
                if pos > 0:
                    piece = self.continuation_marker + piece
                tid = self.index.get(piece)
                if tid is not None:
                    found = tid
                    break
                end -= 1
            if found is None:
                out.append((self.unk_id, pos, pos + 1))
                pos += 1
            else:
                out.append((found, pos, end))
                pos = end
        return out


def word_kind(surface: str) -> str:
    has_digit = any(c.isdecimal() for c in surface)
    has_alpha = any(c.isalpha() for c in surface)
    if not has_digit and not has_alpha:
        return "punctuation"
    if has_digit and all(c.isdecimal() or c in NUMERIC_SEPARATORS for c in surface):
        return "numeric"
    if has_alpha and not has_digit:
        return "alphabetic"
    return "mixed"


def split_words(text: str) -> list[tuple[int, int, str]]:
    """Vocabulary-independent word boundaries as ``(start, end, kind)``."""
    return [(m.start(), m.end(), word_kind(m.group())) for m in _WORD_RE.finditer(text)]


def tokenize(text: str, vocab: SubwordVocabulary) -> TokenizedText:
    tokens: list[Token] = []
    words: list[Word] = []
    for start, end, kind in split_words(text):
        surface = text[start:end]
        # lowered per character so spans survive case mappings that change length
        units = [c.lower() for c in surface]
        first = len(tokens)
        for i, (tid, s, e) in enumerate(vocab.segment(units)):
            tokens.append(Token("".join(units[s:e]), start + s, start + e, i > 0, tid))
        words.append(Word(first, len(tokens), start, end, surface, kind))
    return TokenizedText(text, tuple(tokens), tuple(words))


def restore_case(original: str, replacement: str) -> str:
    """Carry the casing pattern of ``original`` over to ``replacement``.

    All-caps originals (with more than one cased letter) give an all-caps
    replacement, a capitalised original gives a capitalised replacement,
    anything else gives lowercase. The redaction sentinel is never touched.
    """
    if replacement == REDACTED:
        return replacement
    rep = replacement.lower()
    cased = [c for c in original if c.isalpha()]
    if len(cased) > 1 and all(c.isupper() for c in cased):
        return rep.upper()
    if cased and cased[0].isupper():
        return rep[:1].upper() + rep[1:]
    return rep


def detokenize(tokenized: TokenizedText, replacements: Mapping[int, str]) -> str:
    if not replacements:
        return tokenized.source
    src = tokenized.source
    parts = []
    pos = 0
    for idx in sorted(replacements):
        if not 0 <= idx < len(tokenized.words):
            raise IndexError(f"word index {idx} out of range")
        w = tokenized.words[idx]
        parts.append(src[pos:w.start])
        parts.append(restore_case(w.surface, replacements[idx]))
        pos = w.end
    parts.append(src[pos:])
    return "".join(parts)

