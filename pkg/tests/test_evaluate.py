"""Perplexity reports and pairwise comparison."""

from __future__ import annotations

import json
import math
from types import SimpleNamespace

import numpy as np
import pytest

from hypernym_lm.classmap import ClassMap, ClassMapParams
from hypernym_lm.errors import ConsistencyError
from hypernym_lm.evaluate import (
    pairwise_compare,
    perplexity,
    tally_outcomes,
    write_eval_report,
    write_pairwise_report,
)
from hypernym_lm.model import ModelConfig, init_params
from hypernym_lm.train import LanguageModel
from hypernym_lm.vocab import build_partition


def tiny_partition():
    freqs = {"the": 400, "iron": 9, "desk": 30, "market": 70, "dog": 550,
             "rare1": 3, "mid": 120}
    cmap = ClassMap({"iron": "metal.n.01", "desk": "thing.n.01", "dog": "animal.n.01"},
                    ClassMapParams(depth=6))
    part = build_partition(freqs, cmap)
    return part, freqs


class FixedProbModel:
    """Duck-typed stand-in assigning one fixed probability per token id."""

    def __init__(self, part, probs_by_id, seq_len=4):
        self.part = part
        self.config = SimpleNamespace(seq_len=seq_len)
        self.objective = "baseline"
        self._logp = np.log(probs_by_id)

    def target_log_probs(self, inputs, targets):
        return self._logp[targets]


def uniform_model(part, seq_len=4):
    n_active = int((part.in_mapped | part.in_unmapped).sum())
    probs = np.full(part.total, 1.0 / n_active)
    return FixedProbModel(part, probs, seq_len), n_active


class TestPerplexity:
    def test_uniform_model_ppl_equals_vocab_size(self):
        part, freqs = tiny_partition()
        model, n_active = uniform_model(part)
        report = perplexity(model, [["the", "iron", "desk", "market"]], freqs)
        assert report.overall.ppl == pytest.approx(n_active, rel=1e-12)

    def test_repeated_token_perfect_model(self):
        part, freqs = tiny_partition()
        probs = np.full(part.total, 1e-9)
        probs[part.token_ids["the"]] = 1.0
        probs[part.eos_id] = 1.0
        model = FixedProbModel(part, probs)
        report = perplexity(model, [["the"] * 50], freqs)
        assert report.overall.ppl == pytest.approx(1.0, abs=1e-12)

    def test_four_token_hand_computed(self):
        part, freqs = tiny_partition()
        probs = np.full(part.total, 0.001)
        p_vals = {"iron": 0.5, "desk": 0.25, "market": 0.125}
        for tok, p in p_vals.items():
            probs[part.token_ids[tok]] = p
        probs[part.eos_id] = 0.0625
        model = FixedProbModel(part, probs)
        # stream: the iron desk market <eos>; targets = iron desk market <eos>
        report = perplexity(model, [["the", "iron", "desk", "market"]], freqs)
        hand = math.exp(-(math.log(0.5) + math.log(0.25) + math.log(0.125)
                          + math.log(0.0625)) / 4)
        assert report.overall.ppl == pytest.approx(hand, rel=1e-12)
        assert report.meta["total_tokens"] == 4

    def test_rep_nonrep_split_and_counts(self):
        part, freqs = tiny_partition()
        model, _ = uniform_model(part)
        docs = [["the", "iron", "dog"], ["market", "desk"]]
        report = perplexity(model, docs, freqs)
        # targets: iron dog <eos> | desk <eos>  (first token of each doc is
        # context only for its own window; doc 2 target stream continues)
        assert report.rep.count + report.nonrep.count == report.overall.count
        assert report.rep.count == 3  # iron, dog, desk

    def test_accounting_identity_exact(self, prepared):
        cfg = ModelConfig(n_layers=1, n_heads=2, hidden_size=32, ffn_size=64,
                          seq_len=32, vocab_size=prepared.part.total)
        model = LanguageModel(params=init_params(cfg, seed=0), config=cfg,
                              part=prepared.part, objective="baseline")
        report = perplexity(model, prepared.valid_docs, prepared.freqs)
        total = sum(s.count for _, s in report.strata)
        assert total == report.overall.count
        weighted = sum(s.count * s.nll for _, s in report.strata if s.count)
        assert weighted / total == pytest.approx(report.overall.nll, abs=1e-9)
        assert report.rep.count + report.nonrep.count == total

    def test_batch_size_invariance(self, prepared):
        cfg = ModelConfig(n_layers=1, n_heads=2, hidden_size=32, ffn_size=64,
                          seq_len=32, vocab_size=prepared.part.total)
        model = LanguageModel(params=init_params(cfg, seed=1), config=cfg,
                              part=prepared.part, objective="baseline")
        docs = prepared.valid_docs[:40]
        r1 = perplexity(model, docs, prepared.freqs, window_batch=1)
        r7 = perplexity(model, docs, prepared.freqs, window_batch=7)
        assert json.dumps(r1.as_dict()) == json.dumps(r7.as_dict())

    def test_unknown_tokens_counted_as_unk(self):
        part, freqs = tiny_partition()
        probs = np.full(part.total, 0.001)
        probs[part.unk_id] = 0.125
        probs[part.eos_id] = 0.125
        model = FixedProbModel(part, probs)
        report = perplexity(model, [["the", "neverseen", "alsonew"]], freqs)
        # targets: neverseen -> unk, alsonew -> unk, <eos>
        assert report.overall.ppl == pytest.approx(8.0, rel=1e-12)

    def test_empty_band_reports_absent_not_nan(self):
        part, freqs = tiny_partition()
        model, _ = uniform_model(part)
        report = perplexity(model, [["the", "dog"]], freqs, strata=(20, 50))
        empties = [s for _, s in report.strata if s.count == 0]
        assert empties and all(s.ppl is None and s.nll is None for s in empties)
        blob = report.as_dict()
        assert json.dumps(blob)  # serializable, no NaN
        assert any(x["ppl"] is None for x in blob["strata"])

    def test_report_files(self, tmp_path):
        part, freqs = tiny_partition()
        model, _ = uniform_model(part)
        report = perplexity(model, [["the", "iron", "dog", "market"]], freqs)
        json_path, csv_path = write_eval_report(report, tmp_path)
        data = json.loads(json_path.read_text())
        assert data["overall"]["count"] == 4
        rows = csv_path.read_text().splitlines()
        assert rows[0] == "upper_bound,token_count,nll,ppl"
        assert len(rows) == 1 + len(report.strata)


class TestPairwise:
    def test_self_comparison_all_tie(self):
        part, freqs = tiny_partition()
        model, _ = uniform_model(part)
        report = pairwise_compare(model, model, [["the", "iron", "dog", "desk"]], freqs)
        assert report.overall.tie == report.overall.occurrences > 0
        for s in report.strata:
            pa, pt, pb = s.percentages()
            if s.occurrences:
                assert pt == 100.0 and pa == 0.0 and pb == 0.0

    def test_strictly_better_model_wins_everywhere(self):
        part, freqs = tiny_partition()
        base = np.full(part.total, 1.0 / part.total)
        model_a = FixedProbModel(part, base * 1.5)
        model_b = FixedProbModel(part, base)
        docs = [["the", "iron", "dog", "desk", "market"]]
        report = pairwise_compare(model_a, model_b, docs, freqs)
        assert report.overall.win_a == report.overall.occurrences > 0
        pa, pt, pb = report.overall.percentages()
        assert (pa, pt, pb) == (100.0, 0.0, 0.0)

    def test_three_occurrence_tally(self):
        lp_a = np.log(np.array([0.5, 0.2, 0.4]))
        lp_b = np.log(np.array([0.4, 0.3, 0.3]))
        win_a, tie, win_b = tally_outcomes(lp_a, lp_b, tie_epsilon=1e-9)
        assert (int(win_a.sum()), int(tie.sum()), int(win_b.sum())) == (2, 0, 1)
        pct = (100 * win_a.sum() / 3, 100 * tie.sum() / 3, 100 * win_b.sum() / 3)
        assert pct[0] == pytest.approx(66.7, abs=0.05)
        assert pct[2] == pytest.approx(33.3, abs=0.05)

    def test_percentages_sum_to_100(self, prepared):
        cfg = ModelConfig(n_layers=1, n_heads=2, hidden_size=32, ffn_size=64,
                          seq_len=32, vocab_size=prepared.part.total)
        model_a = LanguageModel(params=init_params(cfg, seed=0), config=cfg,
                                part=prepared.part, objective="baseline")
        model_b = LanguageModel(params=init_params(cfg, seed=1), config=cfg,
                                part=prepared.part, objective="baseline")
        report = pairwise_compare(model_a, model_b, prepared.valid_docs[:30],
                                  prepared.freqs)
        for s in report.strata + [report.overall]:
            if s.occurrences:
                assert sum(s.percentages()) == pytest.approx(100.0, abs=1e-9)
            assert s.win_a + s.tie + s.win_b == s.occurrences

    def test_only_mapped_targets_enter_tally(self):
        part, freqs = tiny_partition()
        model, _ = uniform_model(part)
        docs = [["the", "market", "the", "market"]]  # no mappable targets
        report = pairwise_compare(model, model, docs, freqs)
        assert report.overall.occurrences == 0

    def test_partition_mismatch_rejected(self):
        part_a, freqs = tiny_partition()
        cmap = ClassMap({"iron": "metal.n.01"}, ClassMapParams(depth=6))
        part_b = build_partition({k: v for k, v in freqs.items()}, cmap)
        model_a, _ = uniform_model(part_a)
        model_b, _ = uniform_model(part_b)
        with pytest.raises(ConsistencyError):
            pairwise_compare(model_a, model_b, [["the"]], freqs)

    def test_tie_epsilon_widens_ties(self):
        part, freqs = tiny_partition()
        base = np.full(part.total, 1.0 / part.total)
        model_a = FixedProbModel(part, base * 1.0001)
        model_b = FixedProbModel(part, base)
        docs = [["the", "iron", "dog"]]
        strict = pairwise_compare(model_a, model_b, docs, freqs, tie_epsilon=1e-9)
        loose = pairwise_compare(model_a, model_b, docs, freqs, tie_epsilon=1e-3)
        assert strict.overall.win_a == strict.overall.occurrences
        assert loose.overall.tie == loose.overall.occurrences

    def test_report_files(self, tmp_path):
        part, freqs = tiny_partition()
        model, _ = uniform_model(part)
        report = pairwise_compare(model, model, [["the", "iron", "dog"]], freqs)
        json_path, csv_path = write_pairwise_report(report, tmp_path)
        data = json.loads(json_path.read_text())
        assert data["overall"]["occurrences"] == report.overall.occurrences
        header = csv_path.read_text().splitlines()[0]
        assert header == "upper_bound,occurrences,pct_win_a,pct_tie,pct_win_b"
