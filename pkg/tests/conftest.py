import numpy as np
import pytest

from maskscrub.backends import MlmBackend, ReferenceBackend, load_backend
from maskscrub.corpus import read_corpus
from maskscrub.backends.bundle import builtin_bundle_path
from maskscrub.tokenizer import SubwordVocabulary

SPECIALS = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]

FIXTURE_CORPUS = builtin_bundle_path().parents[1] / "fixtures" / "corpus.json"


def make_vocab(words, pieces=()):
    return SubwordVocabulary(SPECIALS + list(words) + ["##" + p for p in pieces])


class CountingBackend(MlmBackend):
    """Delegates to another backend and counts public query calls."""

    def __init__(self, inner):
        super().__init__()
        self.inner = inner
        self.vocab = inner.vocab
        self.max_context = inner.max_context
        self.embedding_dim = inner.embedding_dim
        self.identity = inner.identity
        self.distribution_calls = 0
        self.probability_calls = 0

    def _full_distribution(self, tokens, target):
        return self.inner._full_distribution(tokens, target)

    def distribution(self, query):
        return self.inner.distribution(query)

    def masked_distribution(self, query, top_n, include=()):
        self.distribution_calls += 1
        return self.inner.masked_distribution(query, top_n, include)

    def token_probability(self, query, token_id):
        self.probability_calls += 1
        return self.inner.token_probability(query, token_id)

    def embed(self, token_id):
        return self.inner.embed(token_id)

    def embed_many(self, token_ids):
        return self.inner.embed_many(token_ids)

    @property
    def queries(self):
        return self.distribution_calls + self.probability_calls


@pytest.fixture(scope="session")
def fixture_backend():
    return load_backend("builtin:reference")


@pytest.fixture(scope="session")
def fixture_corpus():
    return read_corpus(FIXTURE_CORPUS)


@pytest.fixture
def uniform4():
    vocab = make_vocab(["w", "x", "y", "z"])
    return ReferenceBackend(vocab)


def random_backend(rng, n_words=12, n_pieces=4, dim=6, patterns=3):
    """Small reference backend with random table rows and embeddings."""
    words = [f"w{i}" for i in range(n_words)]
    pieces = [f"p{i}" for i in range(n_pieces)]
    vocab = make_vocab(words, pieces)
    rows = []
    seen = set()
    for _ in range(patterns):
        left = [str(x) for x in rng.choice(words, size=rng.integers(0, 3))]
        pat = " ".join(left + ["_"])
        if pat in seen:
            continue
        seen.add(pat)
        chosen = rng.choice(words, size=rng.integers(1, n_words), replace=False)
        probs = rng.dirichlet(np.ones(len(chosen) + 1))[:-1]
        rows += [(pat, str(w), float(p)) for w, p in zip(chosen, probs) if p > 0]
    emb = rng.normal(size=(len(vocab), dim))
    return ReferenceBackend(vocab, rows, emb)


_ACCEPTANCE = []


@pytest.fixture
def acceptance_record():
    def record(criterion, passed, detail=""):
        _ACCEPTANCE.append((criterion, passed, detail))
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, passed, detail in sorted(_ACCEPTANCE, key=lambda r: r[0]):
        status = {True: "PASS", False: "FAIL", None: "SKIP"}[passed]
        terminalreporter.write_line(f"criterion {criterion}: {status}  {detail}")
