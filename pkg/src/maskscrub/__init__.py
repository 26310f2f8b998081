"""Sanitize text by redacting words a masked language model finds improbable."""

__version__ = "0.1.0"

from .backends import MaskedQuery, MlmBackend, ReferenceBackend, load_backend
from .corpus import Conversation, Utterance, read_corpus
from .pipeline import SanitizeConfig, sanitize_corpus, sanitize_dialogue, sanitize_utterance
from .substitution import SubstitutionParams, SubstitutionTable, reverse_apply
from .tokenizer import SubwordVocabulary, detokenize, tokenize

__all__ = [
    "MaskedQuery", "MlmBackend", "ReferenceBackend", "load_backend",
    "Conversation", "Utterance", "read_corpus",
    "SanitizeConfig", "sanitize_corpus", "sanitize_dialogue", "sanitize_utterance",
    "SubstitutionParams", "SubstitutionTable", "reverse_apply",
    "SubwordVocabulary", "detokenize", "tokenize",
]
