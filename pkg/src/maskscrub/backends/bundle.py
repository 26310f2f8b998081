"""Model bundle loading.

A bundle is a directory holding ``manifest.json``, a vocabulary file and
weight files. The manifest names the backend format and carries the
vocabulary conventions (continuation marker, special tokens), the context
limit and the embedding dimension, so tokenizer and backend are always
built from the same source.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from ..tokenizer import SubwordVocabulary
from .base import MlmBackend
from .reference import ReferenceBackend
from .transformer import BertBackend

MANIFEST = "manifest.json"
BUILTIN_PREFIX = "builtin:"


class BundleError(Exception):
    pass


def builtin_bundle_path(name: str = "reference") -> Path:
    path = Path(str(resources.files("maskscrub") / "data" / "bundles" / name))
    if not (path / MANIFEST).is_file():
        raise BundleError(f"no built-in bundle named {name!r}")
    return path


def resolve_bundle(ref: str | Path) -> Path:
    ref = str(ref)
    if ref.startswith(BUILTIN_PREFIX):
        return builtin_bundle_path(ref[len(BUILTIN_PREFIX):])
    path = Path(ref)
    if not (path / MANIFEST).is_file():
        raise BundleError(f"{path}: not a model bundle (missing {MANIFEST})")
    return path


def read_manifest(path: Path) -> dict:
    try:
        with open(path / MANIFEST, encoding="utf-8") as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise BundleError(f"{path / MANIFEST}: {exc}") from exc
    for key in ("format", "vocab_file"):
        if key not in manifest:
            raise BundleError(f"{path / MANIFEST}: missing {key!r}")
    return manifest


def load_vocab(path: Path, manifest: dict) -> SubwordVocabulary:
    return SubwordVocabulary.from_file(
        path / manifest["vocab_file"],
        continuation_marker=manifest.get("continuation_marker", "##"),
        unk_token=manifest.get("unk_token", "[UNK]"),
        mask_token=manifest.get("mask_token", "[MASK]"),
        sep_token=manifest.get("sep_token", "[SEP]"),
        cls_token=manifest.get("cls_token", "[CLS]"),
        pad_token=manifest.get("pad_token", "[PAD]"),
    )


def load_backend(ref: str | Path) -> MlmBackend:
    """Build a backend from a bundle directory or ``builtin:<name>``."""
    path = resolve_bundle(ref)
    manifest = read_manifest(path)
    identity = f"{manifest['format']}:{manifest.get('variant', path.name)}"
    try:
        vocab = load_vocab(path, manifest)
        fmt = manifest["format"]
        if fmt == "reference-table":
            emb = manifest.get("embeddings")
            backend = ReferenceBackend.from_files(
                vocab, [path / t for t in manifest.get("tables", [])],
                embeddings=path / emb if emb else None,
                max_context=int(manifest.get("max_context", 512)),
                identity=identity)
        elif fmt == "bert-mlm":
            backend = BertBackend.from_files(vocab, path / manifest["weights"],
                                             manifest["config"], identity)
        else:
            raise BundleError(f"unknown bundle format {fmt!r}")
    except (OSError, KeyError, ValueError) as exc:
        raise BundleError(f"{path}: {exc}") from exc
    dim = manifest.get("embedding_dim")
    if dim is not None and int(dim) != backend.embedding_dim:
        raise BundleError(f"{path}: manifest embedding_dim {dim} != {backend.embedding_dim}")
    backend.bundle_path = path
    return backend
