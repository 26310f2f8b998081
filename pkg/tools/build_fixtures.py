"""Regenerate the built-in reference bundle and the fixture corpus.

Everything is derived from the word lists below and a fixed seed, so the
checked-in files can be rebuilt byte-for-byte:

    python tools/build_fixtures.py
"""

import json
from collections import Counter, defaultdict
from pathlib import Path

import numpy as np

from maskscrub.tokenizer import SubwordVocabulary, tokenize

ROOT = Path(__file__).resolve().parents[1] / "src" / "maskscrub" / "data"
BUNDLE = ROOT / "bundles" / "reference"
FIXTURES = ROOT / "fixtures"
SEED = 20240611
DIM = 16

SPECIALS = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
PUNCT = list(".,?!'-@:()/#&;\"")
LETTERS = list("abcdefghijklmnopqrstuvwxyz")
DIGITS = list("0123456789")
SUFFIXES = ["s", "ed", "ing", "er", "ly", "son", "ton", "ville"]

# Frequent words get fixed probabilities; the first block is very common.
VERY_COMMON = {
    "hello": 0.03, "hi": 0.02, "i": 0.04, "you": 0.035, "the": 0.04, "to": 0.03, "my": 0.03, "is": 0.03,
    "a": 0.025, "it": 0.025, "and": 0.02, "can": 0.02, "your": 0.02, "for": 0.02,
    "that": 0.015, "help": 0.015, "please": 0.012,
}
COMMON = """
hello hi thank thanks contacting us how today need with order have what
will be me this do check let just one moment sure great okay ok yes no
account name username email address phone number zip code id street avenue
road lane drive apartment could would like want refund return shipping
item items package delivered arrived yet still when where why problem issue
sorry about verify confirm identity also membership level gold silver bronze
guest customer service update change password login site website card credit
payment date day week last since so much good bye anything else welcome
here there our we was were been are on in of at by from not got get now
see looks system found pulled up all set have has had new old wrong size
shirt jeans boots jacket hat dress gmail yahoo hotmail com net org mail way again
""".split()
# Replacement pool: moderately probable everywhere, never used in the corpus.
POOL_FIRST = ["david", "michael", "james", "robert", "sarah", "emma", "olivia",
              "daniel", "laura", "peter", "anna", "thomas"]
POOL_LAST = ["williams", "jones", "brown", "taylor", "miller", "davis", "wilson",
             "moore", "clark", "lewis", "walker", "hall"]
POOL_STREET = ["oak", "pine", "cedar", "elm", "birch", "willow"]
POOL_MISC = ["table", "river", "stone"]

# Planted personal data (appear in the corpus; listed with low probabilities).
FIRST = ["john", "alice", "carlos", "priya", "kenji", "fatima", "liam", "chloe",
         "marta", "oscar", "ingrid", "tariq", "yuki", "bruno", "leila", "sven",
         "amara", "dmitri", "noor", "felix"]
LAST = ["smith", "garcia", "nakamura", "okafor", "kowalski", "haddad", "lindqvist",
        "moreau", "silva", "novak", "reyes", "ferreira", "tanaka", "mensah",
        "larsen", "ivanova", "costa", "bauer", "khan", "dubois"]
STREETS = ["maple", "juniper", "sycamore", "magnolia", "hawthorn", "chestnut",
           "alder", "laurel", "poplar", "spruce"]

# Worked example: "My name is John Smith." with fixed per-word probabilities.
NAMES_TSV = [
    ("_ name is john smith .", "my", 0.03),
    ("my _ is john smith .", "name", 0.07),
    ("my name _ john smith .", "is", 0.06),
    ("my name is _ smith .", "john", 0.004),
    ("my name is _ smith .", "david", 0.25),
    ("my name is _ smith .", "michael", 0.2),
    ("my name is _ smith .", "james", 0.15),
    ("my name is _ smith .", "robert", 0.1),
    ("my name is _ smith .", "table", 0.02),
    ("my name is john _ .", "smith", 0.001),
    ("my name is john _ .", "williams", 0.3),
    ("my name is john _ .", "jones", 0.2),
    ("my name is john _ .", "brown", 0.15),
    ("my name is john _ .", "taylor", 0.1),
    ("my name is john _ .", "river", 0.02),
]


def build_vocab():
    words = list(VERY_COMMON) + COMMON + POOL_FIRST + POOL_LAST + POOL_STREET + POOL_MISC \
        + FIRST + LAST + STREETS
    seen = set()
    vocab = []
    for tok in SPECIALS + PUNCT + DIGITS + LETTERS + words:
        if tok not in seen:
            seen.add(tok)
            vocab.append(tok)
    for piece in LETTERS + DIGITS + SUFFIXES:
        vocab.append("##" + piece)
    return vocab


def build_table(rng):
    rows = []
    mass = 0.0
    for w, p in VERY_COMMON.items():
        rows.append(("_", w, p))
        mass += p
    for w in POOL_FIRST + POOL_LAST + POOL_STREET + POOL_MISC:
        rows.append(("_", w, 0.006))
        mass += 0.006
    # planted names/streets: log-uniform between 2e-4 and 8e-3
    planted = FIRST + LAST + STREETS
    for w, p in zip(planted, np.exp(rng.uniform(np.log(2e-4), np.log(8e-3), size=len(planted)))):
        p = float(f"{p:.3g}")
        rows.append(("_", w, p))
        mass += p
    # other frequent words: log-uniform shape, scaled to leave ~4 % of the mass
    # for everything unlisted (letters, digits, pieces, punctuation)
    common = [w for w in dict.fromkeys(COMMON) if w not in VERY_COMMON]
    raw = np.exp(rng.uniform(np.log(1.5e-3), np.log(1.5e-2), size=len(common)))
    raw *= min(1.0, (0.96 - mass) / raw.sum())
    for w, p in zip(common, raw):
        rows.append(("_", w, float(f"{p:.3g}")))
    total = sum(p for _, _, p in rows)
    assert total < 1.0, total
    return rows


def build_bigrams(vocab, corpus, rng):
    """``left _`` rows learned from the template words of the corpus.

    Only transitions between template words (and from the turn separator)
    are counted, so planted values only ever get leftover mass. Pool words
    are listed in every row to keep them among the top candidates.
    """
    sv = SubwordVocabulary(vocab)
    template = set(VERY_COMMON) | set(COMMON) | set(PUNCT)
    counts = defaultdict(Counter)
    for conv in corpus["conversations"]:
        for turn in conv["turns"]:
            words = [w.lower for w in tokenize(turn["text"], sv).words]
            toks = ["[SEP]"] + words
            for left, tok in zip(toks, toks[1:]):
                if (left == "[SEP]" or left in template) and tok in template:
                    counts[left][tok] += 1
    pool = POOL_FIRST + POOL_LAST + POOL_STREET + POOL_MISC
    rows = []
    for left in sorted(counts):
        mass = rng.uniform(0.75, 0.9)
        total = sum(counts[left].values())
        for tok, c in sorted(counts[left].items()):
            rows.append((f"{left} _", tok, float(f"{mass * c / total:.4g}")))
        rows += [(f"{left} _", w, 0.002) for w in pool if w not in counts[left]]
    return rows


def build_embeddings(vocab, rng):
    centers = {name: rng.normal(size=DIM) * 3 for name in
               ("special", "punct", "digit", "letter", "func", "first", "last",
                "street", "misc", "piece")}
    emb = np.zeros((len(vocab), DIM))
    first = set(POOL_FIRST + FIRST)
    last = set(POOL_LAST + LAST)
    street = set(POOL_STREET + STREETS + ["street", "avenue", "road", "lane", "drive"])
    for i, tok in enumerate(vocab):
        if tok in SPECIALS:
            c = "special"
        elif tok.startswith("##"):
            c = "piece"
        elif tok in PUNCT:
            c = "punct"
        elif tok in DIGITS:
            c = "digit"
        elif tok in LETTERS:
            c = "letter"
        elif tok in first:
            c = "first"
        elif tok in last:
            c = "last"
        elif tok in street:
            c = "street"
        elif tok in POOL_MISC:
            c = "misc"
        else:
            c = "func"
        emb[i] = centers[c] + rng.normal(size=DIM)
    idx = {t: i for i, t in enumerate(vocab)}
    # the worked example expects John -> David and Smith -> Williams
    emb[idx["david"]] = emb[idx["john"]] + 0.05 * rng.normal(size=DIM)
    emb[idx["williams"]] = emb[idx["smith"]] + 0.05 * rng.normal(size=DIM)
    return np.round(emb, 6)


def build_corpus(rng):
    convs = []
    for n in range(20):
        first, last = FIRST[n], LAST[n]
        name = f"{first.title()} {last.title()}"
        user = f"{first[0]}{last}{rng.integers(10, 99)}"
        domain = ["gmail", "yahoo", "hotmail"][n % 3]
        email = f"{first}.{last}@{domain}.com"
        phone = f"({rng.integers(200, 999)}) {rng.integers(200, 999)}-{rng.integers(1000, 9999)}"
        account = "".join(rng.choice(list("ABCDEFGHJKLMNPQRSTUVWXYZ23456789"), size=8))
        order = str(rng.integers(1_000_000_000, 9_999_999_999))
        street = f"{rng.integers(10, 9999)} {STREETS[n % len(STREETS)].title()} " \
                 f"{['Street', 'Avenue', 'Road', 'Lane', 'Drive'][n % 5]}"
        zipc = f"{rng.integers(10000, 99999)}"
        turns = [
            ("agent", "Hello, thank you for contacting us. How can I help you today?"),
            ("customer", f"Hi, my name is {name} and I need help with my order."),
            ("agent", "Sure, I can help with that. Could you verify your username please?"),
            ("customer", f"It is {user}."),
            ("agent", f"Thank you {first.title()}. What is the email on the account?"),
            ("customer", f"My email is {email} and my phone number is {phone}."),
        ]
        variant = n % 4
        if variant == 0:
            turns += [("agent", "Can I have the order id please?"),
                      ("customer", f"The order id is {order}."),
                      ("agent", "Thanks, I see the order. The refund will be on your card.")]
        elif variant == 1:
            turns += [("agent", "What is the shipping address?"),
                      ("customer", f"It is {street}, zip code {zipc}."),
                      ("agent", f"Got it, {street} {zipc}. The package is on the way.")]
        elif variant == 2:
            turns += [("agent", "Could I also get your account id?"),
                      ("customer", f"Sure, my account id is {account}."),
                      ("agent", f"Thanks {name}, your account is all set.")]
        else:
            turns += [("agent", "Can I have the order id and zip code?"),
                      ("customer", f"Order id {order}, zip code {zipc}."),
                      ("customer", f"Again, my name is {first.title()}, {first.title()} {last.title()}."),
                      ("agent", "Great, I found it. Anything else?")]
        values = {
            "customer name": name, "username": user, "email": email,
            "phone number": phone, "account id": account, "order id": order,
            "street address": street, "zip code": zipc,
        }
        said = " ".join(t for _, t in turns)
        metadata = {k: [v] for k, v in values.items() if v in said}
        convs.append({"id": f"fixture-{n:02d}",
                      "turns": [{"speaker": s, "text": t} for s, t in turns],
                      "metadata": metadata})
    return {"conversations": convs}


def main():
    rng = np.random.default_rng(SEED)
    BUNDLE.mkdir(parents=True, exist_ok=True)
    FIXTURES.mkdir(parents=True, exist_ok=True)
    vocab = build_vocab()
    (BUNDLE / "vocab.txt").write_text("\n".join(vocab) + "\n", encoding="utf-8")
    rows = build_table(rng)
    with open(BUNDLE / "table.tsv", "w", encoding="utf-8") as fh:
        fh.write("# context-pattern\ttoken\tprobability\n")
        for pat, tok, p in rows:
            fh.write(f"{pat}\t{tok}\t{p!r}\n")
    with open(BUNDLE / "names.tsv", "w", encoding="utf-8") as fh:
        fh.write("# worked example: My name is John Smith.\n")
        for pat, tok, p in NAMES_TSV:
            fh.write(f"{pat}\t{tok}\t{p!r}\n")
    np.save(BUNDLE / "embeddings.npy", build_embeddings(vocab, rng))
    corpus = build_corpus(rng)
    with open(BUNDLE / "bigram.tsv", "w", encoding="utf-8") as fh:
        fh.write("# template-word continuations\n")
        for pat, tok, p in build_bigrams(vocab, corpus, rng):
            fh.write(f"{pat}\t{tok}\t{p!r}\n")
    manifest = {
        "format": "reference-table",
        "variant": "fixture-v1",
        "vocab_file": "vocab.txt",
        "continuation_marker": "##",
        "unk_token": "[UNK]",
        "mask_token": "[MASK]",
        "sep_token": "[SEP]",
        "cls_token": "[CLS]",
        "pad_token": "[PAD]",
        "max_context": 128,
        "embedding_dim": DIM,
        "tables": ["names.tsv", "bigram.tsv", "table.tsv"],
        "embeddings": "embeddings.npy",
    }
    (BUNDLE / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    (FIXTURES / "corpus.json").write_text(json.dumps(corpus, indent=2) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
