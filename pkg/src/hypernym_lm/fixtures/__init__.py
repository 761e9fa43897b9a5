"""Bundled fixture set: a deterministic synthetic corpus generator plus the
two tiny WordNet databases shipped as package data.

The corpus is template-generated prose over a small lexicon whose noun pools
line up with the branches of ``wordnet_train.tsv``, so a class map built at
depth 6 covers a meaningful slice of the vocabulary. A handful of nouns
(iron, magnesium, desk, rhenium, osmium, and some nonce words) are injected
with exact low counts to populate the rare frequency strata.

``python -m hypernym_lm.fixtures OUTDIR`` materializes corpus files, copies
the WordNet fixtures and writes a ready-to-run demo config.
"""

from __future__ import annotations

import shutil
import sys
from importlib import resources
from pathlib import Path

import numpy as np

DETERMINERS = [("the", 50.0), ("a", 18.0), ("this", 6.0), ("that", 5.0), ("every", 2.0)]

ADJECTIVES = [
    ("old", 16.0), ("new", 14.0), ("small", 12.0), ("large", 11.0), ("heavy", 8.0),
    ("bright", 7.0), ("dark", 6.0), ("fine", 5.0), ("pure", 4.0), ("cold", 4.0),
    ("warm", 3.5), ("quiet", 3.0), ("busy", 2.5), ("plain", 2.0), ("sharp", 1.8),
    ("smooth", 1.5), ("pale", 1.2), ("deep", 1.0), ("rare", 0.8), ("broad", 0.6),
]

# nouns covered by wordnet_train.tsv (mapped at depth 6)
MAPPED_NOUNS = [
    ("dog", 30.0), ("cat", 26.0), ("horse", 22.0), ("chair", 24.0), ("bed", 20.0),
    ("apple", 18.0), ("tree", 17.0), ("gold", 16.0), ("cow", 14.0), ("bird", 14.0),
    ("silver", 12.0), ("copper", 11.0), ("hammer", 10.0), ("sheep", 10.0), ("oak", 9.0),
    ("pear", 8.0), ("bench", 8.0), ("fox", 7.0), ("saw", 7.0), ("metal", 7.0),
    ("wolf", 6.0), ("pine", 6.0), ("plum", 5.0), ("stool", 5.0), ("rabbit", 5.0),
    ("oxygen", 4.5), ("cherry", 4.0), ("cabinet", 4.0), ("hawk", 3.5), ("zinc", 3.0),
    ("wrench", 3.0), ("crow", 2.5), ("tin", 2.5), ("hydrogen", 2.0), ("owl", 2.0),
    ("chisel", 1.6), ("nickel", 1.4), ("birch", 1.2), ("nitrogen", 1.0),
    ("mango", 0.9), ("cobalt", 0.8), ("helium", 0.7),
]

# everyday nouns with no entry in the fixture databases
UNMAPPED_NOUNS = [
    ("market", 30.0), ("village", 26.0), ("house", 24.0), ("river", 20.0),
    ("road", 18.0), ("story", 16.0), ("door", 15.0), ("garden", 14.0),
    ("winter", 12.0), ("morning", 12.0), ("letter", 10.0), ("bridge", 9.0),
    ("harbor", 8.0), ("meadow", 7.0), ("valley", 6.0), ("shore", 5.0),
    ("forest", 5.0), ("cellar", 4.0), ("kitchen", 4.0), ("workshop", 3.5),
    ("mill", 3.0), ("farm", 3.0), ("tower", 2.5), ("street", 2.0), ("field", 1.5),
]

VERBS = [
    ("is", 40.0), ("was", 30.0), ("holds", 12.0), ("makes", 11.0), ("sells", 9.0),
    ("buys", 8.0), ("finds", 8.0), ("keeps", 7.0), ("shows", 6.0), ("takes", 6.0),
    ("gives", 5.0), ("sees", 5.0), ("carries", 4.0), ("brings", 3.5), ("stores", 3.0),
    ("cleans", 2.5), ("mends", 2.0), ("weighs", 1.5), ("sorts", 1.0),
]

PREPOSITIONS = [
    ("of", 30.0), ("in", 26.0), ("on", 18.0), ("near", 12.0), ("under", 8.0),
    ("over", 6.0), ("beside", 4.0), ("behind", 3.0), ("from", 6.0), ("with", 10.0),
]

# (word, exact occurrences per 100k train tokens) — injected, not sampled
RARE_INJECTED = [
    ("iron", 8), ("desk", 7), ("magnesium", 5), ("rhenium", 3), ("osmium", 2),
    ("zorvan", 4), ("brell", 3), ("quist", 2), ("marn", 2), ("tolk", 1),
    ("fenwick", 1), ("skerry", 1),
]

_SENTENCE_SHAPES = (
    ("D", "ADJ", "N", "V", "P", "D", "N", "."),
    ("D", "N", "V", "D", "ADJ", "N", "."),
    ("D", "N", "P", "D", "N", "V", "ADJ", "."),
    ("D", "ADJ", "N", "and", "D", "N", "V", "."),
    ("D", "N", "V", "ADJ", "."),
    ("D", "N", "of", "D", "N", "V", "P", "D", "N", "."),
)

_UNK_RATE = 0.004  # WikiText-style literal <unk> markers


class _Pool:
    def __init__(self, items):
        self.words = [w for w, _ in items]
        weights = np.array([w for _, w in items], dtype=np.float64)
        self.p = weights / weights.sum()

    def draw(self, rng: np.random.Generator) -> str:
        return self.words[int(rng.choice(len(self.words), p=self.p))]


def _pools():
    nouns = _Pool(MAPPED_NOUNS + UNMAPPED_NOUNS)
    return {
        "D": _Pool(DETERMINERS),
        "ADJ": _Pool(ADJECTIVES),
        "N": nouns,
        "V": _Pool(VERBS),
        "P": _Pool(PREPOSITIONS),
    }


def _sentence(rng: np.random.Generator, pools) -> list[str]:
    shape = _SENTENCE_SHAPES[int(rng.integers(len(_SENTENCE_SHAPES)))]
    out = []
    for slot in shape:
        if slot in pools:
            word = pools[slot].draw(rng)
            if slot == "N" and rng.random() < _UNK_RATE:
                word = "<unk>"
            out.append(word)
        else:
            out.append(slot)
    return out


def _rare_sentence(rng: np.random.Generator, pools, word: str) -> list[str]:
    shapes = (
        ["the", word, "lies", "in", "the", pools["N"].draw(rng), "."],
        ["the", "ADJ", word, "is", "ADJ", "."],
        ["a", word, "was", "kept", "near", "the", pools["N"].draw(rng), "."],
    )
    s = list(shapes[int(rng.integers(len(shapes)))])
    return [pools["ADJ"].draw(rng) if tok == "ADJ" else tok for tok in s]


def generate_documents(target_tokens: int, seed: int,
                       rare_counts: list[tuple[str, int]] | None = None) -> list[list[str]]:
    """Deterministic documents totalling ~target_tokens whitespace tokens."""
    rng = np.random.default_rng(seed)
    pools = _pools()
    rare_queue: list[str] = []
    if rare_counts:
        for word, count in rare_counts:
            rare_queue.extend([word] * count)
    docs: list[list[str]] = []
    total = 0
    rare_cursor = 0
    doc_idx = 0
    while total < target_tokens:
        n_sentences = int(rng.integers(3, 8))
        doc: list[str] = []
        for _ in range(n_sentences):
            doc.extend(_sentence(rng, pools))
        # spread injected rare sentences across every third document
        if rare_cursor < len(rare_queue) and doc_idx % 3 == 0:
            doc.extend(_rare_sentence(rng, pools, rare_queue[rare_cursor]))
            rare_cursor += 1
        docs.append(doc)
        total += len(doc)
        doc_idx += 1
    while rare_cursor < len(rare_queue):  # guarantee exact rare counts
        docs[rare_cursor % len(docs)].extend(
            _rare_sentence(rng, pools, rare_queue[rare_cursor]))
        rare_cursor += 1
    return docs


def write_documents(docs: list[list[str]], path: Path):
    path.write_text("\n\n".join(" ".join(doc) for doc in docs) + "\n", encoding="utf-8")


def wordnet_small_path() -> Path:
    return Path(resources.files("hypernym_lm.fixtures") / "wordnet_small.tsv")


def wordnet_train_path() -> Path:
    return Path(resources.files("hypernym_lm.fixtures") / "wordnet_train.tsv")


_DEMO_CONFIG = """\
[corpus]
train = "{root}/train.txt"
valid = "{root}/valid.txt"
test = "{root}/test.txt"

[wordnet]
path = "{root}/wordnet_train.tsv"

[classmap]
depth = 6
freq_threshold = "inf"

[vocab]
unk_threshold = 2

[model]
n_layers = 2
n_heads = 4
hidden_size = 64
ffn_size = 256
seq_len = 64

[pacing]
kind = "constant"
a = 0.12
b = 0.8

[training]
steps = 300
batch_size = 16
seed = 0
objective = "hcp"
eval_interval = 100

[optimizer]
lr = 0.001
min_lr = 0.0001
warmup_steps = 60

[output]
dir = "{root}/run"
"""


def write_fixture_tree(dest: str | Path, seed: int = 7,
                       train_tokens: int = 110_000, valid_tokens: int = 9_000,
                       test_tokens: int = 9_000) -> dict[str, Path]:
    """Materialize corpus files, WordNet fixtures and a demo config."""
    root = Path(dest)
    root.mkdir(parents=True, exist_ok=True)
    paths = {
        "train": root / "train.txt",
        "valid": root / "valid.txt",
        "test": root / "test.txt",
        "wordnet_small": root / "wordnet_small.tsv",
        "wordnet_train": root / "wordnet_train.tsv",
        "config": root / "demo.toml",
    }
    scale = train_tokens / 100_000
    rare_train = [(w, max(1, round(c * scale))) for w, c in RARE_INJECTED]
    rare_held = [(w, max(1, round(c * 0.25))) for w, c in RARE_INJECTED]
    write_documents(generate_documents(train_tokens, seed, rare_train), paths["train"])
    write_documents(generate_documents(valid_tokens, seed + 1, rare_held), paths["valid"])
    write_documents(generate_documents(test_tokens, seed + 2, rare_held), paths["test"])
    shutil.copy(wordnet_small_path(), paths["wordnet_small"])
    shutil.copy(wordnet_train_path(), paths["wordnet_train"])
    paths["config"].write_text(_DEMO_CONFIG.format(root=root.resolve()), encoding="utf-8")
    return paths
