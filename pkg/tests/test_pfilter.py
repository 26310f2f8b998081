import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from maskscrub.backends import PROB_FLOOR, MaskedQuery, ReferenceBackend
from maskscrub.pfilter import (
    MissingProbability,
    OutOfRange,
    PunctuationWord,
    WordProbability,
    fit_window,
    information_content,
    p_filter,
    probe_word,
    word_probability,
)
from maskscrub.tokenizer import tokenize

from conftest import make_vocab
from oracles import chain_oracle, piece_backend

SENTENCE = "My name is John Smith."


def flagged(text, probs, p):
    return {text.words[d.word_index].lower for d in p_filter(text, probs, p) if d.flagged}


def all_probs(text, backend):
    return [word_probability(text, i, backend) for i, w in enumerate(text.words)
            if w.kind != "punctuation"]


@pytest.mark.parametrize("p,ic", [(1.0, 0.0), (0.5, 0.693147), (1e-12, 27.631)])
def test_information_content(p, ic):
    assert information_content(p) == pytest.approx(ic, abs=1e-3)


@pytest.mark.parametrize("p", [0.0, -0.1, 1.0001])
def test_information_content_range(p):
    with pytest.raises(OutOfRange):
        information_content(p)


def test_worked_example_probabilities(fixture_backend):
    text = tokenize(SENTENCE, fixture_backend.vocab)
    got = {text.words[wp.word_index].lower: wp.probability for wp in all_probs(text, fixture_backend)}
    assert got == {"my": 0.03, "name": 0.07, "is": 0.06, "john": 0.004, "smith": 0.001}


def test_worked_example_flags(fixture_backend):
    text = tokenize(SENTENCE, fixture_backend.vocab)
    assert flagged(text, all_probs(text, fixture_backend), 0.01) == {"john", "smith"}


def test_punctuation_gets_no_decision(fixture_backend):
    text = tokenize(SENTENCE, fixture_backend.vocab)
    decisions = p_filter(text, all_probs(text, fixture_backend), 1.0)
    assert [d.word_index for d in decisions] == [0, 1, 2, 3, 4]
    assert all(d.flagged for d in decisions)
    with pytest.raises(PunctuationWord):
        word_probability(text, 5, fixture_backend)


def test_threshold_at_floor_flags_nothing(fixture_backend):
    text = tokenize(SENTENCE, fixture_backend.vocab)
    assert flagged(text, all_probs(text, fixture_backend), PROB_FLOOR) == set()


def test_coverage_errors(fixture_backend):
    text = tokenize(SENTENCE, fixture_backend.vocab)
    probs = all_probs(text, fixture_backend)
    with pytest.raises(MissingProbability):
        p_filter(text, probs[:-1], 0.01)
    with pytest.raises(ValueError):
        p_filter(text, probs + probs[:1], 0.01)
    with pytest.raises(ValueError):
        p_filter(text, probs + [WordProbability(5, 0.5, (0.5,), math.log(2))], 0.01)
    with pytest.raises(OutOfRange):
        p_filter(text, probs, 0.0)


def two_piece_backend():
    vocab = make_vocab(["a", "c"], ["b"])
    rows = [("_", "a", 0.5), ("a _", "##b", 0.5)]
    return ReferenceBackend(vocab, rows)


def test_two_step_chain():
    be = two_piece_backend()
    text = tokenize("ab", be.vocab)
    assert [t.text for t in text.tokens] == ["a", "b"]
    wp = word_probability(text, 0, be)
    assert wp.per_token == (0.5, 0.5)
    assert wp.probability == 0.25


def test_single_token_equals_whole_word_query(fixture_backend):
    text = tokenize("hello there", fixture_backend.vocab)
    ids = text.ids
    q = MaskedQuery((fixture_backend.vocab.mask_id, ids[1]), 0)
    assert word_probability(text, 0, fixture_backend).probability == \
        fixture_backend.token_probability(q, ids[0])


def test_probe_returns_candidates_and_same_probability(fixture_backend):
    text = tokenize(SENTENCE, fixture_backend.vocab)
    wp, dist = probe_word(text, 3, fixture_backend, top_n=5)
    assert wp == word_probability(text, 3, fixture_backend)
    assert len(dist.entries) == 5
    assert dist.entries[0][0] == fixture_backend.vocab.index["david"]


def test_fit_window():
    assert fit_window([1, 2], [3, 4], 0, 10) == ([1, 2, 3, 4], 2)
    assert fit_window([1, 2, 3], [4, 5], 0, 3) == ([3, 4, 5], 1)
    # utterance too long: left crop stops at the word, then crop right
    assert fit_window([9], [1, 2, 3, 4, 5, 6], 1, 3) == ([2, 3, 4], -1)
    assert fit_window([], [1, 2, 3, 4, 5, 6], 5, 3) == ([4, 5, 6], -3)


def test_long_utterance_still_scored(fixture_backend):
    text = tokenize(" ".join(["hello"] * 300) + " john", fixture_backend.vocab)
    wp = word_probability(text, 300, fixture_backend)
    assert 0 < wp.probability <= 1


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.text("abcdef", min_size=2, max_size=4))
def test_product_law_property(seed, word):
    be = piece_backend(np.random.default_rng(seed))
    text = tokenize(f"f {word} a", be.vocab)
    w = text.words[1]
    assert w.n_tokens == len(word)
    wp = word_probability(text, 1, be)
    oracle = chain_oracle(be, text.ids, w.token_start, w.token_stop)
    assert wp.probability == pytest.approx(oracle, rel=1e-9)
    assert wp.probability <= min(wp.per_token)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.text("abcdef", min_size=1, max_size=4), st.sampled_from("abcdef"))
def test_length_anti_monotonicity(seed, word, extra):
    be = piece_backend(np.random.default_rng(seed))
    short = word_probability(tokenize(word, be.vocab), 0, be).per_token
    longer = word_probability(tokenize(word + extra, be.vocab), 0, be)
    # the shorter prefix of the chain times one more factor <= 1
    assert math.prod(longer.per_token[:-1]) * longer.per_token[-1] <= math.prod(longer.per_token[:-1])
    assert len(longer.per_token) == len(short) + 1


probs_st = st.lists(st.floats(1e-12, 1.0), min_size=1, max_size=8)


@settings(max_examples=300, deadline=None)
@given(probs_st, st.floats(1e-12, 1.0), st.floats(1e-12, 1.0))
def test_containment_and_duality(values, p1, p2):
    p1, p2 = sorted((p1, p2))
    be = make_vocab(["w"])
    text = tokenize(" ".join(["w"] * len(values)), be)
    wps = [WordProbability(i, v, (v,), information_content(v)) for i, v in enumerate(values)]
    low = {d.word_index for d in p_filter(text, wps, p1) if d.flagged}
    high = {d.word_index for d in p_filter(text, wps, p2) if d.flagged}
    assert low <= high
    for d in p_filter(text, wps, p2):
        # duality up to rounding at the exact boundary
        if not math.isclose(values[d.word_index], p2, rel_tol=1e-12):
            assert d.flagged == (wps[d.word_index].ic_nats > -math.log(p2))
