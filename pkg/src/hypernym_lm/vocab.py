"""Partitioned vocabulary (mappable tokens / other tokens / hypernym classes)
and batch-level hypernym substitution.

Id layout: token ids first (specials, then frequency-descending), class ids
appended after — so class membership is the contiguous range
[n_tokens, n_tokens + n_classes) and softmax-support masks are cheap.
"""

from __future__ import annotations

import enum
import hashlib
import os
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .classmap import ClassMap, TokenFrequencies
from .errors import ConsistencyError, ValidationError

UNK = "<unk>"
EOS = "<eos>"
_SPECIALS = (UNK, EOS)


class StepKind(str, enum.Enum):
    TOKEN = "token"
    HCP = "hcp"


@dataclass
class Batch:
    """A training/eval slice: next-token targets are inputs shifted by one."""

    inputs: np.ndarray   # [batch, seq_len] int32
    targets: np.ndarray  # same shape
    step_kind: StepKind = StepKind.TOKEN


class VocabPartition:
    """Immutable id spaces for tokens and hypernym classes."""

    def __init__(self, token_names: list[str], class_names: list[str],
                 mapped_token_ids: np.ndarray, class_of: dict[int, int],
                 wordnet_version: str = "unknown", corpus_id: str = "unknown"):
        self.token_names = list(token_names)
        self.class_names = list(class_names)
        self.n_tokens = len(token_names)
        self.n_classes = len(class_names)
        self.total = self.n_tokens + self.n_classes
        self.token_ids = {name: i for i, name in enumerate(token_names)}
        self.class_ids = {name: self.n_tokens + i for i, name in enumerate(class_names)}
        self.class_of = dict(class_of)
        self.wordnet_version = wordnet_version
        self.corpus_id = corpus_id

        self.in_mapped = np.zeros(self.total, dtype=bool)   # V_x membership
        self.in_mapped[mapped_token_ids] = True
        self.in_class = np.zeros(self.total, dtype=bool)    # V_h membership
        self.in_class[self.n_tokens:] = True
        self.in_unmapped = ~(self.in_mapped | self.in_class)  # V_notx membership

        # id -> id substitution table: V_x ids map to their class, rest map to self
        self.substitution = np.arange(self.total, dtype=np.int32)
        for tid, cid in self.class_of.items():
            self.substitution[tid] = cid

        self.unk_id = self.token_ids[UNK]
        self.eos_id = self.token_ids[EOS]

    # -- derived views -------------------------------------------------------

    @property
    def n_mapped(self) -> int:
        return int(self.in_mapped.sum())

    def name_of(self, idx: int) -> str:
        if idx < self.n_tokens:
            return self.token_names[idx]
        return self.class_names[idx - self.n_tokens]

    def encode(self, tokens, dtype=np.int32) -> np.ndarray:
        """Token strings to ids; unknown forms become <unk>."""
        return np.fromiter((self.token_ids.get(t, self.unk_id) for t in tokens),
                           dtype=dtype, count=len(tokens))

    def members_of_class(self, class_id: int) -> np.ndarray:
        """Mapped-token ids sharing one class id (ascending)."""
        return np.array(sorted(t for t, c in self.class_of.items() if c == class_id),
                        dtype=np.int64)

    def content_hash(self) -> str:
        h = hashlib.sha256()
        for row in self._rows():
            h.update(row.encode("utf-8"))
            h.update(b"\n")
        return h.hexdigest()[:16]

    def _rows(self):
        for i, name in enumerate(self.token_names):
            yield f"{i}\t{name}\t{'x' if self.in_mapped[i] else 'notx'}"
        for j, name in enumerate(self.class_names):
            yield f"{self.n_tokens + j}\t{name}\th"


def build_partition(freqs: TokenFrequencies, cmap: ClassMap,
                    unk_threshold: int = 1) -> VocabPartition:
    """Assign ids and split the vocabulary around the class map.

    Tokens with frequency < unk_threshold collapse into <unk>. Specials get
    the first ids; surviving tokens follow in frequency-descending order
    (ties broken lexicographically); class ids come last.
    """
    for key in cmap.mapping:
        if key not in freqs:
            raise ConsistencyError(f"classmap token {key!r} missing from frequency table")

    survivors = [t for t in freqs
                 if t not in _SPECIALS and freqs[t] >= unk_threshold]
    survivors.sort(key=lambda t: (-freqs[t], t))
    token_names = list(_SPECIALS) + survivors

    token_ids = {name: i for i, name in enumerate(token_names)}
    mapped_token_ids = []
    mapped_pairs = []  # (token_id, class_name)
    for t in survivors:
        cls = cmap.mapping.get(t)
        if cls is not None:
            mapped_token_ids.append(token_ids[t])
            mapped_pairs.append((token_ids[t], cls))

    # classes ordered by aggregate member frequency (descending), then name
    class_weight: dict[str, int] = {}
    for t in survivors:
        cls = cmap.mapping.get(t)
        if cls is not None:
            class_weight[cls] = class_weight.get(cls, 0) + freqs[t]
    class_names = sorted(class_weight, key=lambda c: (-class_weight[c], c))
    class_index = {c: len(token_names) + i for i, c in enumerate(class_names)}

    class_of = {tid: class_index[cls] for tid, cls in mapped_pairs}
    return VocabPartition(token_names, class_names,
                          np.array(mapped_token_ids, dtype=np.int64),
                          class_of,
                          wordnet_version=cmap.wordnet_version,
                          corpus_id=cmap.corpus_id)


def substitute(batch: Batch, part: VocabPartition) -> Batch:
    """Replace every mappable-token id with its hypernym-class id.

    Applies to inputs and targets alike and marks the result as an HCP batch.
    Idempotent: class ids are not mappable-token ids.
    """
    for arr in (batch.inputs, batch.targets):
        if arr.size and (arr.min() < 0 or arr.max() >= part.total):
            raise ValidationError(
                f"batch contains id outside vocabulary [0, {part.total})")
    return Batch(inputs=part.substitution[batch.inputs],
                 targets=part.substitution[batch.targets],
                 step_kind=StepKind.HCP)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def save_partition(part: VocabPartition, path: str | os.PathLike,
                   extra_headers: dict[str, str] | None = None):
    lines = [f"# wordnet={part.wordnet_version} corpus={part.corpus_id}"]
    for k, v in (extra_headers or {}).items():
        lines.append(f"# {k}={v}")
    lines.extend(part._rows())
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_partition(path: str | os.PathLike,
                   cmap: ClassMap | None = None) -> tuple[VocabPartition, dict[str, str]]:
    """Restore a partition from its TSV.

    The token->class pairing is not part of the vocab file, so pass the
    classmap whenever substitution (class_of) is needed, not just membership.
    """
    token_rows: list[tuple[int, str, str]] = []
    class_rows: list[tuple[int, str]] = []
    extras: dict[str, str] = {}
    version, corpus_id = "unknown", "unknown"
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                m = re.match(r"#\s*wordnet=(\S+)\s+corpus=(\S+)", line)
                if m:
                    version, corpus_id = m.group(1), m.group(2)
                else:
                    kv = re.match(r"#\s*(\S+?)=(\S+)", line)
                    if kv:
                        extras[kv.group(1)] = kv.group(2)
                continue
            idx, name, kind = line.split("\t")
            if kind == "h":
                class_rows.append((int(idx), name))
            else:
                token_rows.append((int(idx), name, kind))
    token_rows.sort()
    class_rows.sort()
    token_names = [name for _, name, _ in token_rows]
    class_names = [name for _, name in class_rows]
    mapped = np.array([i for i, (_, _, kind) in enumerate(token_rows) if kind == "x"],
                      dtype=np.int64)
    class_of: dict[int, int] = {}
    if cmap is not None:
        mapped_set = set(mapped.tolist())
        token_index = {name: i for i, name in enumerate(token_names)}
        class_index = {name: len(token_names) + j for j, name in enumerate(class_names)}
        for token, cls in cmap.mapping.items():
            tid = token_index.get(token)
            if tid is not None and tid in mapped_set:
                if cls not in class_index:
                    raise ConsistencyError(f"classmap class {cls!r} absent from vocab file")
                class_of[tid] = class_index[cls]
    part = VocabPartition(token_names, class_names, mapped, class_of,
                          wordnet_version=version, corpus_id=corpus_id)
    return part, extras
