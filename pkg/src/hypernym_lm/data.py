"""Corpus reading and deterministic batch assembly.

Corpora are UTF-8 plain text, whitespace-tokenized, one document per
blank-line-separated block. ``<unk>`` literals pass through. When encoding
for the model, an ``<eos>`` marker is appended to each document; raw token
streams (used for frequency counting) never include it.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .vocab import Batch, EOS, StepKind, VocabPartition


def read_documents(path: str | os.PathLike) -> list[list[str]]:
    """Blank-line-separated documents as token lists."""
    text = Path(path).read_text(encoding="utf-8")
    docs = []
    for block in text.split("\n\n"):
        tokens = block.split()
        if tokens:
            docs.append(tokens)
    return docs


def read_token_stream(path: str | os.PathLike) -> list[str]:
    """The raw token stream, without document markers."""
    return Path(path).read_text(encoding="utf-8").split()


def encode_corpus(path: str | os.PathLike, part: VocabPartition) -> np.ndarray:
    """Document tokens to ids, with <eos> closing every document."""
    ids: list[int] = []
    for doc in read_documents(path):
        ids.extend(part.token_ids.get(t, part.unk_id) for t in doc)
        ids.append(part.eos_id)
    return np.array(ids, dtype=np.int32)


class TrainBatcher:
    """Deterministic batch sequence over a contiguous id stream.

    The stream is split into ``batch_size`` contiguous rows; step t reads the
    window starting at (t * seq_len) mod (row length - seq_len), so the t-th
    batch is a pure function of t — substitution, resume, or producer threads
    can never change which data a step consumes.
    """

    def __init__(self, ids: np.ndarray, batch_size: int, seq_len: int):
        if batch_size < 1 or seq_len < 1:
            raise ValidationError("batch_size and seq_len must be >= 1")
        row_len = ids.shape[0] // batch_size
        if row_len < seq_len + 1:
            raise ValidationError(
                f"corpus too small: {ids.shape[0]} ids for batch_size={batch_size}, "
                f"seq_len={seq_len}")
        self.rows = ids[: batch_size * row_len].reshape(batch_size, row_len)
        self.seq_len = seq_len
        self.span = row_len - seq_len  # valid window starts: [0, span)

    def batch(self, t: int) -> Batch:
        if t < 0:
            raise ValidationError(f"step index must be >= 0, got {t}")
        start = (t * self.seq_len) % self.span
        window = self.rows[:, start: start + self.seq_len + 1]
        return Batch(inputs=window[:, :-1].copy(), targets=window[:, 1:].copy(),
                     step_kind=StepKind.TOKEN)


def eval_windows(ids: np.ndarray, seq_len: int):
    """Non-overlapping evaluation windows covering every target exactly once.

    Yields (inputs, targets) pairs; consecutive windows share one boundary
    token so all ids except the very first appear as a target exactly once.
    """
    n = ids.shape[0]
    if n < 2:
        raise ValidationError("evaluation stream needs at least 2 tokens")
    for start in range(0, n - 1, seq_len):
        chunk = ids[start: start + seq_len + 1]
        if chunk.shape[0] < 2:
            break
        yield chunk[:-1][None, :], chunk[1:][None, :]
