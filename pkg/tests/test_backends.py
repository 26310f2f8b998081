import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from maskscrub.backends import (
    PROB_FLOOR,
    BundleError,
    ContextTooLong,
    MaskedQuery,
    ReferenceBackend,
    ZeroVector,
    cosine_distance,
    cosine_distances,
    load_backend,
)
from maskscrub.backends.bundle import builtin_bundle_path
from maskscrub.backends.reference import parse_table

from conftest import make_vocab


def q(backend, words, target):
    v = backend.vocab
    ids = [v.mask_id if w == "[MASK]" else v.index[w] for w in words]
    return MaskedQuery(tuple(ids), target)


def test_uniform_four(uniform4):
    query = q(uniform4, ["w", "[MASK]", "y"], 1)
    dist = uniform4.masked_distribution(query, 10)
    regular = [(t, p) for t, p in dist.entries if t not in uniform4.vocab.special_ids]
    assert len(regular) == 4
    assert all(p == pytest.approx(0.25) for _, p in regular)
    for tok in "wxyz":
        assert uniform4.token_probability(query, uniform4.vocab.index[tok]) == 0.25


def test_mask_token_sits_at_floor(uniform4):
    query = q(uniform4, ["[MASK]"], 0)
    assert uniform4.token_probability(query, uniform4.vocab.mask_id) == PROB_FLOOR


def test_full_vocab_sums_to_one(fixture_backend):
    query = q(fixture_backend, ["my", "name", "is", "[MASK]", "smith", "."], 3)
    total = sum(fixture_backend.token_probability(query, t) for t in range(len(fixture_backend.vocab)))
    assert total == pytest.approx(1.0, abs=1e-6)


def test_names_fixture_entry(fixture_backend):
    query = q(fixture_backend, ["my", "name", "is", "[MASK]", "smith", "."], 3)
    dist = fixture_backend.masked_distribution(query, 50)
    assert (fixture_backend.vocab.index["john"], 0.004) in dist.entries


def test_prefix_property(fixture_backend):
    query = q(fixture_backend, ["my", "name", "is", "[MASK]", "smith", "."], 3)
    one = fixture_backend.masked_distribution(query, 1)
    fifty = fixture_backend.masked_distribution(query, 50)
    assert one.entries == fifty.entries[:1]


def test_entries_sorted_with_id_tiebreak(fixture_backend):
    query = q(fixture_backend, ["[MASK]"], 0)
    entries = fixture_backend.masked_distribution(query, len(fixture_backend.vocab)).entries
    keys = [(-p, t) for t, p in entries]
    assert keys == sorted(keys)
    assert sum(p for _, p in entries) <= 1 + 1e-6
    assert all(0 < p <= 1 for _, p in entries)


def test_requested_ids_reported_exactly(fixture_backend):
    query = q(fixture_backend, ["my", "name", "is", "john", "[MASK]", "."], 4)
    smith = fixture_backend.vocab.index["smith"]
    dist = fixture_backend.masked_distribution(query, 1, include=[smith])
    assert dist.requested[smith] == 0.001
    assert dist.probability_of(smith) == 0.001


def test_most_specific_pattern_wins():
    vocab = make_vocab(["a", "b", "c"])
    rows = [("_", "a", 0.5), ("b _", "a", 0.1), ("c b _", "a", 0.2), ("b _ c", "a", 0.3)]
    be = ReferenceBackend(vocab, rows)
    assert be.token_probability(q(be, ["[MASK]"], 0), vocab.index["a"]) == 0.5
    assert be.token_probability(q(be, ["b", "[MASK]"], 1), vocab.index["a"]) == 0.1
    assert be.token_probability(q(be, ["c", "b", "[MASK]"], 2), vocab.index["a"]) == 0.2
    # equal specificity: first declared wins
    assert be.token_probability(q(be, ["c", "b", "[MASK]", "c"], 2), vocab.index["a"]) == 0.2


def test_table_validation():
    vocab = make_vocab(["a"])
    with pytest.raises(ValueError):
        ReferenceBackend(vocab, [("a a", "a", 0.5)])
    with pytest.raises(ValueError):
        ReferenceBackend(vocab, [("_", "zzz", 0.5)])
    with pytest.raises(ValueError):
        ReferenceBackend(vocab, [("_", "a", 1.5)])
    with pytest.raises(ValueError):
        parse_table(["_\ta"])
    assert parse_table(["# comment", "", "_\ta\t0.5"]) == [("_", "a", 0.5)]


def test_context_too_long(uniform4):
    be = ReferenceBackend(uniform4.vocab, max_context=3)
    with pytest.raises(ContextTooLong):
        be.token_probability(q(be, ["w", "x", "y", "[MASK]"], 3), 5)


def test_target_must_be_mask(uniform4):
    with pytest.raises(ValueError):
        uniform4.token_probability(q(uniform4, ["w"], 0), 5)


def test_determinism_across_instances():
    a = load_backend("builtin:reference")
    b = load_backend("builtin:reference")
    query = q(a, ["hello", "[MASK]", "."], 1)
    assert np.array_equal(a.distribution(query), b.distribution(query))
    assert a.masked_distribution(query, 20) == b.masked_distribution(query, 20)


def test_embeddings_one_hot_default(uniform4):
    v = uniform4.vocab
    e_w, e_x = uniform4.embed(v.index["w"]), uniform4.embed(v.index["x"])
    assert cosine_distance(e_w, e_w) == 0
    assert cosine_distance(e_w, e_x) == 1


@pytest.mark.parametrize("a,b,d", [
    ((1, 0), (1, 0), 0.0), ((1, 0), (0, 1), 1.0), ((1, 0), (-1, 0), 2.0),
    ((3, 4), (4, 3), 0.04),
])
def test_cosine_examples(a, b, d):
    assert cosine_distance(a, b) == pytest.approx(d, abs=1e-12)
    # independent dot-product route
    dot = sum(x * y for x, y in zip(a, b))
    assert 1 - dot / (math.hypot(*a) * math.hypot(*b)) == pytest.approx(d, abs=1e-12)


def test_cosine_errors():
    with pytest.raises(ZeroVector):
        cosine_distance((0, 0), (1, 0))
    with pytest.raises(ValueError):
        cosine_distance((1, 0), (1, 0, 0))
    with pytest.raises(ZeroVector):
        cosine_distances((1.0, 0.0), np.array([[0.0, 0.0]]))


vec = st.lists(st.floats(-10, 10, allow_nan=False), min_size=3, max_size=3).filter(
    lambda v: math.sqrt(sum(x * x for x in v)) > 1e-3)


@settings(max_examples=200, deadline=None)
@given(vec, vec)
def test_cosine_properties(a, b):
    d = cosine_distance(a, b)
    assert 0 <= d <= 2
    assert d == pytest.approx(cosine_distance(b, a), abs=1e-12)
    assert cosine_distance(a, a) == 0
    assert cosine_distances(a, np.array([b]))[0] == pytest.approx(d, abs=1e-9)


def test_builtin_bundle_loads(fixture_backend):
    assert fixture_backend.identity == "reference-table:fixture-v1"
    assert fixture_backend.embedding_dim == 16
    assert fixture_backend.max_context == 128


def test_bundle_errors(tmp_path):
    with pytest.raises(BundleError):
        load_backend(tmp_path)
    with pytest.raises(BundleError):
        load_backend("builtin:nope")
    (tmp_path / "manifest.json").write_text("{not json")
    with pytest.raises(BundleError):
        load_backend(tmp_path)
    src = builtin_bundle_path()
    manifest = json.loads((src / "manifest.json").read_text())
    manifest["embedding_dim"] = 3
    for name in ("vocab.txt", "table.tsv", "names.tsv", "embeddings.npy"):
        (tmp_path / name).write_bytes((src / name).read_bytes())
    (tmp_path / "manifest.json").write_text(json.dumps(manifest))
    with pytest.raises(BundleError):
        load_backend(tmp_path)
    manifest["embedding_dim"] = 16
    manifest["format"] = "gpt"
    (tmp_path / "manifest.json").write_text(json.dumps(manifest))
    with pytest.raises(BundleError):
        load_backend(tmp_path)
