"""Token-to-hypernym-class mapping and corpus frequency counting.

The mapping rule, for each token with corpus frequency <= the threshold:
walk its synsets in sense-frequency order; within each synset walk the
hypernym paths in order; take the first path of length >= d whose synset at
depth d (1-based, root = depth 1) is a noun, and map the token to that
synset. Tokens with no qualifying path are left out.
"""

from __future__ import annotations

import math
import os
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .errors import ConsistencyError
from .wordnet import WordNetDb


@dataclass(frozen=True)
class ClassMapParams:
    """Mapping knobs: 1-based path depth and corpus-frequency ceiling."""

    depth: int
    freq_threshold: float = math.inf  # int or math.inf

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError(f"depth must be >= 1, got {self.depth}")
        if self.freq_threshold < 0:
            raise ValueError(f"freq_threshold must be >= 0, got {self.freq_threshold}")

    @property
    def threshold_label(self) -> str:
        return "inf" if math.isinf(self.freq_threshold) else str(int(self.freq_threshold))


TokenFrequencies = dict[str, int]


def count_frequencies(tokens: Iterable[str]) -> TokenFrequencies:
    """Exact occurrence counts for a pre-tokenized stream."""
    return dict(Counter(tokens))


@dataclass(frozen=True)
class ClassMap:
    """token -> hypernym-class synset id, plus the parameters that built it."""

    mapping: dict[str, str]
    params: ClassMapParams
    wordnet_version: str = "unknown"
    corpus_id: str = "unknown"

    def __len__(self) -> int:
        return len(self.mapping)

    def class_ids(self) -> set[str]:
        return set(self.mapping.values())


def build_classmap(freqs: TokenFrequencies, db: WordNetDb, params: ClassMapParams,
                   corpus_id: str = "unknown") -> ClassMap:
    """Map every eligible token to its hypernym class.

    Deterministic: tokens are visited in sorted order and the result is keyed
    by token, so the output is independent of the input dict's history.
    """
    d = params.depth
    mapping: dict[str, str] = {}
    for token in sorted(freqs):
        if freqs[token] > params.freq_threshold:
            continue
        chosen = None
        for synset in db.synsets_for(token):
            for path in db.hypernym_paths(synset):
                if len(path) >= d and path.at_depth(d).pos == "n":
                    chosen = path.at_depth(d).id
                    break
            if chosen is not None:
                break
        if chosen is not None:
            mapping[token] = chosen
    return ClassMap(mapping=mapping, params=params,
                    wordnet_version=db.version, corpus_id=corpus_id)


@dataclass(frozen=True)
class ClassMapStats:
    num_classes: int
    num_mapped_tokens: int
    size_histogram: dict[int, int]  # class size -> number of classes with that size

    def as_dict(self) -> dict:
        return {
            "num_classes": self.num_classes,
            "num_mapped_tokens": self.num_mapped_tokens,
            "size_histogram": {str(k): v for k, v in sorted(self.size_histogram.items())},
        }


def classmap_stats(cmap: ClassMap) -> ClassMapStats:
    sizes = Counter(cmap.mapping.values())
    hist = Counter(sizes.values())
    return ClassMapStats(num_classes=len(sizes), num_mapped_tokens=len(cmap.mapping),
                         size_histogram=dict(hist))


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def save_classmap(cmap: ClassMap, path: str | os.PathLike, extra_headers: dict[str, str] | None = None):
    """Write TSV: header comments then sorted `token<TAB>class_id` rows."""
    lines = [
        f"# d={cmap.params.depth} f={cmap.params.threshold_label} "
        f"wordnet={cmap.wordnet_version} corpus={cmap.corpus_id}",
    ]
    for k, v in (extra_headers or {}).items():
        lines.append(f"# {k}={v}")
    for token in sorted(cmap.mapping):
        lines.append(f"{token}\t{cmap.mapping[token]}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


_HEADER_RE = re.compile(r"#\s*d=(\d+)\s+f=(\S+)\s+wordnet=(\S+)\s+corpus=(\S+)")


def load_classmap(path: str | os.PathLike) -> tuple[ClassMap, dict[str, str]]:
    """Read a classmap TSV; returns the map and any extra `# key=value` headers."""
    params = None
    version, corpus_id = "unknown", "unknown"
    extras: dict[str, str] = {}
    mapping: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                m = _HEADER_RE.match(line)
                if m:
                    thr = math.inf if m.group(2) == "inf" else int(m.group(2))
                    params = ClassMapParams(depth=int(m.group(1)), freq_threshold=thr)
                    version, corpus_id = m.group(3), m.group(4)
                else:
                    kv = re.match(r"#\s*(\S+?)=(\S+)", line)
                    if kv:
                        extras[kv.group(1)] = kv.group(2)
                continue
            token, class_id = line.split("\t")
            mapping[token] = class_id
    if params is None:
        raise ConsistencyError(f"{path}: missing classmap parameter header")
    return ClassMap(mapping, params, version, corpus_id), extras


def save_frequencies(freqs: TokenFrequencies, path: str | os.PathLike,
                     corpus_id: str = "unknown", extra_headers: dict[str, str] | None = None):
    lines = [f"# corpus={corpus_id} total={sum(freqs.values())}"]
    for k, v in (extra_headers or {}).items():
        lines.append(f"# {k}={v}")
    for token in sorted(freqs):
        lines.append(f"{token}\t{freqs[token]}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_frequencies(path: str | os.PathLike) -> tuple[TokenFrequencies, dict[str, str]]:
    freqs: TokenFrequencies = {}
    extras: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                kv = re.match(r"#\s*(\S+?)=(\S+)", line)
                if kv:
                    extras[kv.group(1)] = kv.group(2)
                continue
            token, count = line.split("\t")
            freqs[token] = int(count)
    return freqs, extras
