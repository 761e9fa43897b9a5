"""Perplexity reports (overall / replaced / non-replaced / frequency strata)
and pairwise model comparison.

Evaluation always scores the token distribution (class prediction is a
training-time device only). Strata are disjoint frequency bands
(0, b1], (b1, b2], ..., (b_last, inf) over the training-corpus frequency of
the target, so group token counts partition the evaluated tokens and the
overall NLL is exactly the count-weighted mean of the group NLLs.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .classmap import TokenFrequencies
from .data import eval_windows
from .errors import ConsistencyError, ValidationError
from .train import LanguageModel
from .vocab import EOS, VocabPartition

DEFAULT_STRATA = (20, 50, 100, 300, 500)


@dataclass
class GroupStat:
    count: int
    nll: float | None  # mean NLL; None when the group is empty

    @property
    def ppl(self) -> float | None:
        return None if self.nll is None else math.exp(self.nll)


@dataclass
class EvalReport:
    overall: GroupStat
    rep: GroupStat      # targets in the mappable set (replaced during training)
    nonrep: GroupStat   # everything else
    strata: list[tuple[float, GroupStat]]  # (upper bound, stats) disjoint bands
    meta: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        def g(s: GroupStat):
            return {"count": s.count, "nll": s.nll, "ppl": s.ppl}

        return {
            "overall": g(self.overall),
            "rep": g(self.rep),
            "nonrep": g(self.nonrep),
            "strata": [{"upper_bound": "inf" if math.isinf(u) else u, **g(s)}
                       for u, s in self.strata],
            "meta": self.meta,
        }


def _encode_with_freqs(docs: list[list[str]], part: VocabPartition,
                       freqs: TokenFrequencies):
    """Id stream with <eos> per document, plus per-position training frequency."""
    ids: list[int] = []
    tf: list[int] = []
    for doc in docs:
        for tok in doc:
            ids.append(part.token_ids.get(tok, part.unk_id))
            tf.append(freqs.get(tok, 0))
        ids.append(part.eos_id)
        tf.append(freqs.get(EOS, 0))
    if len(ids) < 2:
        raise ValidationError("evaluation corpus must contain at least 2 tokens")
    return np.array(ids, dtype=np.int32), np.array(tf, dtype=np.int64)


def _target_nll_stream(model: LanguageModel, ids: np.ndarray,
                       window_batch: int = 8) -> np.ndarray:
    """-log p(target) for every stream position (targets are ids[1:]).

    Same-length windows are stacked up to window_batch for throughput; each
    window's NLLs land in its own slice of the output, so results are
    independent of the batching.
    """
    out = np.empty(ids.shape[0] - 1, dtype=np.float64)
    pending: list[tuple[int, np.ndarray, np.ndarray]] = []

    def flush():
        if not pending:
            return
        starts = [p[0] for p in pending]
        inputs = np.concatenate([p[1] for p in pending], axis=0)
        targets = np.concatenate([p[2] for p in pending], axis=0)
        logp = model.target_log_probs(inputs, targets)
        for row, start in enumerate(starts):
            n = targets.shape[1]
            out[start: start + n] = -logp[row]
        pending.clear()

    pos = 0
    for inputs, targets in eval_windows(ids, model.config.seq_len):
        if pending and (targets.shape[1] != pending[0][2].shape[1]
                        or len(pending) >= max(1, window_batch)):
            flush()
        pending.append((pos, inputs, targets))
        pos += targets.size
    flush()
    assert pos == out.shape[0]
    return out


def _band_index(tf: np.ndarray, bounds: tuple[float, ...]) -> np.ndarray:
    """Disjoint band index per position; band i is (prev, bounds[i]], last is open."""
    edges = np.array(list(bounds), dtype=np.float64)
    return np.searchsorted(edges, tf, side="left").astype(np.int64)


def _group(nlls: np.ndarray, mask: np.ndarray) -> GroupStat:
    c = int(mask.sum())
    if c == 0:
        return GroupStat(count=0, nll=None)
    return GroupStat(count=c, nll=float(nlls[mask].sum() / c))


def perplexity(model: LanguageModel, docs: list[list[str]], freqs: TokenFrequencies,
               strata: tuple[float, ...] = DEFAULT_STRATA,
               meta: dict | None = None, window_batch: int = 8) -> EvalReport:
    """Score a corpus and break the NLL down by replacement status and
    target-frequency band."""
    part = model.part
    ids, tf = _encode_with_freqs(docs, part, freqs)
    nlls = _target_nll_stream(model, ids, window_batch=window_batch)
    targets = ids[1:]
    tfreq = tf[1:]

    rep_mask = part.in_mapped[targets]
    bands = _band_index(tfreq, tuple(strata))
    bounds = list(strata) + [math.inf]
    strata_stats = [(float(bounds[i]), _group(nlls, bands == i))
                    for i in range(len(bounds))]
    report = EvalReport(
        overall=_group(nlls, np.ones_like(rep_mask)),
        rep=_group(nlls, rep_mask),
        nonrep=_group(nlls, ~rep_mask),
        strata=strata_stats,
        meta=dict(meta or {}),
    )
    report.meta.setdefault("total_tokens", int(nlls.shape[0]))
    report.meta.setdefault("objective", model.objective)
    return report


# ---------------------------------------------------------------------------
# pairwise comparison
# ---------------------------------------------------------------------------


@dataclass
class PairwiseStratum:
    upper_bound: float
    occurrences: int
    win_a: int
    tie: int
    win_b: int

    def percentages(self) -> tuple[float, float, float]:
        if self.occurrences == 0:
            return (0.0, 0.0, 0.0)
        n = self.occurrences
        return (100.0 * self.win_a / n, 100.0 * self.tie / n, 100.0 * self.win_b / n)


@dataclass
class PairwiseReport:
    strata: list[PairwiseStratum]
    overall: PairwiseStratum
    tie_epsilon: float
    meta: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        def s(x: PairwiseStratum):
            pa, pt, pb = x.percentages()
            return {"upper_bound": "inf" if math.isinf(x.upper_bound) else x.upper_bound,
                    "occurrences": x.occurrences, "win_a": x.win_a, "tie": x.tie,
                    "win_b": x.win_b, "pct_win_a": pa, "pct_tie": pt, "pct_win_b": pb}

        return {"strata": [s(x) for x in self.strata], "overall": s(self.overall),
                "tie_epsilon": self.tie_epsilon, "meta": self.meta}


def tally_outcomes(logp_a: np.ndarray, logp_b: np.ndarray, tie_epsilon: float):
    """Per-occurrence outcome arrays (win_a, tie, win_b); tie iff the
    log-probability gap is within tie_epsilon."""
    diff = logp_a - logp_b
    tie = np.abs(diff) <= tie_epsilon
    win_a = (diff > 0) & ~tie
    win_b = (diff < 0) & ~tie
    return win_a, tie, win_b


def pairwise_compare(model_a: LanguageModel, model_b: LanguageModel,
                     docs: list[list[str]], freqs: TokenFrequencies,
                     strata: tuple[float, ...] = DEFAULT_STRATA,
                     tie_epsilon: float = 1e-9, meta: dict | None = None) -> PairwiseReport:
    """Compare per-occurrence target probabilities of two models sharing a
    vocabulary partition; only mappable-token targets are tallied."""
    if model_a.part.content_hash() != model_b.part.content_hash():
        raise ConsistencyError("models do not share a vocabulary partition")
    part = model_a.part
    ids, tf = _encode_with_freqs(docs, part, freqs)
    lp_a = -_target_nll_stream(model_a, ids)
    lp_b = -_target_nll_stream(model_b, ids)
    assert lp_a.shape == lp_b.shape
    targets = ids[1:]
    tfreq = tf[1:]

    keep = part.in_mapped[targets]
    win_a, tie, win_b = tally_outcomes(lp_a[keep], lp_b[keep], tie_epsilon)
    bands = _band_index(tfreq[keep], tuple(strata))
    bounds = list(strata) + [math.inf]
    strata_out = []
    for i, upper in enumerate(bounds):
        m = bands == i
        strata_out.append(PairwiseStratum(
            upper_bound=float(upper), occurrences=int(m.sum()),
            win_a=int(win_a[m].sum()), tie=int(tie[m].sum()), win_b=int(win_b[m].sum())))
    overall = PairwiseStratum(upper_bound=math.inf, occurrences=int(keep.sum()),
                              win_a=int(win_a.sum()), tie=int(tie.sum()),
                              win_b=int(win_b.sum()))
    return PairwiseReport(strata=strata_out, overall=overall,
                          tie_epsilon=tie_epsilon, meta=dict(meta or {}))


# ---------------------------------------------------------------------------
# report files
# ---------------------------------------------------------------------------


def write_eval_report(report: EvalReport, out_dir: str | os.PathLike) -> tuple[Path, Path]:
    """report.json (summary) + strata.csv (plot-ready table)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    json_path = out / "report.json"
    json_path.write_text(json.dumps(report.as_dict(), indent=2) + "\n", encoding="utf-8")
    csv_path = out / "strata.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["upper_bound", "token_count", "nll", "ppl"])
        for upper, stat in report.strata:
            w.writerow(["inf" if math.isinf(upper) else int(upper), stat.count,
                        "" if stat.nll is None else f"{stat.nll:.9f}",
                        "" if stat.ppl is None else f"{stat.ppl:.6f}"])
    return json_path, csv_path


def write_pairwise_report(report: PairwiseReport, out_dir: str | os.PathLike) -> tuple[Path, Path]:
    """pairwise.json + pairwise.csv (stratum -> win/tie/loss percentages)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    json_path = out / "pairwise.json"
    json_path.write_text(json.dumps(report.as_dict(), indent=2) + "\n", encoding="utf-8")
    csv_path = out / "pairwise.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["upper_bound", "occurrences", "pct_win_a", "pct_tie", "pct_win_b"])
        for s in report.strata:
            pa, pt, pb = s.percentages()
            w.writerow(["inf" if math.isinf(s.upper_bound) else int(s.upper_bound),
                        s.occurrences, f"{pa:.6f}", f"{pt:.6f}", f"{pb:.6f}"])
    return json_path, csv_path
