from .base import (
    PROB_FLOOR,
    BackendError,
    ContextTooLong,
    MaskedQuery,
    MlmBackend,
    TokenDistribution,
    ZeroVector,
    cosine_distance,
    cosine_distances,
)
from .bundle import BundleError, load_backend, resolve_bundle
from .reference import ReferenceBackend
from .transformer import BertBackend

__all__ = [
    "PROB_FLOOR", "BackendError", "ContextTooLong", "MaskedQuery", "MlmBackend",
    "TokenDistribution", "ZeroVector", "cosine_distance", "cosine_distances",
    "BundleError", "load_backend", "resolve_bundle", "ReferenceBackend", "BertBackend",
]
