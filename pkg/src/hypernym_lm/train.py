"""Training loop: curriculum-scheduled steps, Adam with warmup+cosine decay,
JSON-lines metrics, versioned checkpoints with resume.

Single-threaded and deterministic: with a fixed seed the metrics log is
bit-identical across runs. The t-th step always consumes the t-th batch of
the deterministic batch sequence.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import baselines
from .config import OptimizerConfig, RunConfig, config_hash
from .curriculum import PacingSchedule, draw_step_kind
from .data import TrainBatcher, eval_windows
from .errors import ConfigError, ConsistencyError, TrainingDivergedError
from .model import (
    Mode,
    ModelConfig,
    SoftmaxSupport,
    forward_hidden,
    head_forward,
    init_params,
    lm_loss_and_grads,
    masked_log_softmax,
    zeros_like_params,
)
from .vocab import Batch, StepKind, VocabPartition, substitute

CHECKPOINT_FORMAT = 1


def lr_at(opt: OptimizerConfig, step: int, total_steps: int) -> float:
    """Linear warmup to opt.lr, then cosine decay to opt.min_lr."""
    if opt.warmup_steps > 0 and step < opt.warmup_steps:
        return opt.lr * (step + 1) / opt.warmup_steps
    span = max(1, total_steps - opt.warmup_steps)
    progress = min(1.0, (step - opt.warmup_steps) / span)
    return opt.min_lr + 0.5 * (opt.lr - opt.min_lr) * (1.0 + math.cos(math.pi * progress))


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def fresh(cls, params: dict[str, np.ndarray]) -> "AdamState":
        return cls(m=zeros_like_params(params), v=zeros_like_params(params), t=0)


def clip_global_norm(grads: dict[str, np.ndarray], max_norm: float) -> float:
    total = math.sqrt(sum(float((g.astype(np.float64) ** 2).sum()) for g in grads.values()))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / (total + 1e-12)
        for g in grads.values():
            g *= scale
    return total

def adam_update(params: dict, grads: dict, state: AdamState, opt: OptimizerConfig, lr: float):
    state.t += 1
    b1, b2 = opt.beta1, opt.beta2
    bias1 = 1.0 - b1 ** state.t
    bias2 = 1.0 - b2 ** state.t
    for k, p in params.items():
        g = grads[k]
        if opt.weight_decay > 0.0 and p.ndim >= 2:
            p -= lr * opt.weight_decay * p
        m = state.m[k]
        v = state.v[k]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        p -= lr * (m / bias1) / (np.sqrt(v / bias2) + opt.eps)


# ---------------------------------------------------------------------------
# the trained-model bundle used by evaluation
# ---------------------------------------------------------------------------


@dataclass
class LanguageModel:
    """Parameters plus everything needed to produce token probabilities."""

    params: dict[str, np.ndarray]
    config: ModelConfig
    part: VocabPartition
    objective: str = "baseline"

    def target_log_probs(self, inputs: np.ndarray, targets: np.ndarray) -> np.ndarray:
        """log P(target | context) per position, in token mode.

        Adaptive-softmax models use their two-stage factorization — that IS
        their token distribution; everything else uses the token-mode softmax.
        """
        if self.objective == "adaptive_softmax":
            return baselines.adaptive_target_log_probs(
                self.params, self.config, inputs, targets, self.part)
        support = SoftmaxSupport.from_partition(self.part, Mode.TOKEN)
        cache = forward_hidden(self.params, self.config, inputs)
        logits, _ = head_forward(self.params, cache.hiddens[-1])
        logp, _ = masked_log_softmax(logits, support)
        flat = targets.reshape(-1)
        rows = np.arange(flat.shape[0])
        return logp.reshape(-1, logp.shape[-1])[rows, flat].reshape(targets.shape)


def validation_perplexity(model: LanguageModel, valid_ids: np.ndarray) -> float:
    """Token-mode perplexity over non-overlapping windows."""
    total_nll = 0.0
    count = 0
    for inputs, targets in eval_windows(valid_ids, model.config.seq_len):
        logp = model.target_log_probs(inputs, targets)
        total_nll += float(-logp.sum())
        count += targets.size
    return math.exp(total_nll / count)


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------


def save_checkpoint(path: str | os.PathLike, params: dict, state: AdamState, *,
                    step: int, stage_hash: str, vocab_hash: str, cfg: RunConfig):
    from .config import canonical_dict

    meta = {
        "format": CHECKPOINT_FORMAT,
        "step": step,
        "adam_t": state.t,
        "stage_hash": stage_hash,
        "vocab_hash": vocab_hash,
        "config": canonical_dict(cfg),
    }
    arrays = {"__meta__": np.array(json.dumps(meta))}
    for k, v in params.items():
        arrays[f"p/{k}"] = v
    for k, v in state.m.items():
        arrays[f"m/{k}"] = v
    for k, v in state.v.items():
        arrays[f"v/{k}"] = v
    tmp = Path(str(path) + ".tmp")
    with open(tmp, "wb") as fh:
        np.savez_compressed(fh, **arrays)
    os.replace(tmp, path)


def load_checkpoint(path: str | os.PathLike):
    """Returns (params, AdamState, meta)."""
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(str(z["__meta__"]))
        if meta.get("format") != CHECKPOINT_FORMAT:
            raise ConsistencyError(
                f"unsupported checkpoint format {meta.get('format')} in {path}")
        params = {k[2:]: z[k] for k in z.files if k.startswith("p/")}
        m = {k[2:]: z[k] for k in z.files if k.startswith("m/")}
        v = {k[2:]: z[k] for k in z.files if k.startswith("v/")}
    state = AdamState(m=m, v=v, t=int(meta["adam_t"]))
    return params, state, meta


# ---------------------------------------------------------------------------
# the loop
# ---------------------------------------------------------------------------


@dataclass
class TrainResult:
    model: LanguageModel
    metrics_path: Path
    checkpoint_path: Path
    steps_run: int


def _step_loss_and_grads(cfg: RunConfig, mcfg: ModelConfig, params: dict, batch: Batch,
                         part: VocabPartition, kind: StepKind,
                         rng: np.random.Generator | None):
    objective = cfg.training.objective
    if objective in ("baseline", "hcp"):
        if kind is StepKind.HCP:
            batch = substitute(batch, part)
        step_loss, grads = lm_loss_and_grads(params, mcfg, batch, part, train=True, rng=rng)
        return step_loss, grads
    if objective == "multi_objective":
        step_loss, grads, _ = baselines.multi_objective_loss_and_grads(
            params, mcfg, batch, part, weight=cfg.multi_objective.weight,
            tap_layer=cfg.tap_layer, mix_vocab=cfg.multi_objective.mix_vocab,
            train=True, rng=rng)
        return step_loss, grads
    if objective == "adaptive_softmax":
        step_loss, grads, _ = baselines.adaptive_loss_and_grads(
            params, mcfg, batch, part, train=True, rng=rng)
        return step_loss, grads
    raise ConfigError(f"unknown objective {objective!r}")


def train(cfg: RunConfig, part: VocabPartition, train_ids: np.ndarray,
          valid_ids: np.ndarray | None, out_dir: str | os.PathLike,
          resume: bool = False, initial_params: dict | None = None,
          stop_after: int | None = None) -> TrainResult:
    """Run (or resume) a training job, writing metrics.jsonl and checkpoint.npz.

    ``stop_after`` interrupts the run after that many steps (checkpointing at
    the stop point) so it can be resumed later.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    metrics_path = out / "metrics.jsonl"
    checkpoint_path = out / "checkpoint.npz"

    mcfg = ModelConfig(**{**cfg.model.__dict__, "vocab_size": part.total})
    stage_hash = config_hash(cfg, "train")
    vocab_hash = part.content_hash()
    tcfg = cfg.training
    schedule = PacingSchedule(kind=cfg.pacing.kind, a=cfg.pacing.a, b=cfg.pacing.b,
                              total_steps=tcfg.steps, seed=tcfg.seed)
    batcher = TrainBatcher(train_ids, tcfg.batch_size, mcfg.seq_len)

    start_step = 0
    if resume:
        if not checkpoint_path.exists():
            raise ConfigError(f"cannot resume: {checkpoint_path} does not exist")
        params, adam, meta = load_checkpoint(checkpoint_path)
        if meta["stage_hash"] != stage_hash:
            raise ConsistencyError(
                f"checkpoint config hash {meta['stage_hash']} does not match "
                f"current config {stage_hash}; refusing to resume")
        if meta["vocab_hash"] != vocab_hash:
            raise ConsistencyError("checkpoint vocabulary does not match this partition")
        start_step = int(meta["step"])
    else:
        params = initial_params if initial_params is not None \
            else init_params(mcfg, seed=tcfg.seed)
        adam = AdamState.fresh(params)

    model = LanguageModel(params=params, config=mcfg, part=part,
                          objective=tcfg.objective)
    stop_at = tcfg.steps if stop_after is None else min(tcfg.steps, start_step + stop_after)
    mode = "a" if resume else "w"
    with open(metrics_path, mode, encoding="utf-8") as log:
        for t in range(start_step, stop_at):
            if tcfg.objective == "hcp":
                kind = draw_step_kind(schedule, t)
            else:
                kind = StepKind.TOKEN
            batch = batcher.batch(t)
            rng = None
            if mcfg.dropout > 0.0:
                rng = np.random.Generator(
                    np.random.Philox(key=np.array([tcfg.seed ^ 0xD0D0, t], dtype=np.uint64)))
            step_loss, grads = _step_loss_and_grads(cfg, mcfg, params, batch, part, kind, rng)
            if not math.isfinite(step_loss):
                raise TrainingDivergedError(
                    f"non-finite loss {step_loss} at step {t} "
                    f"(kind={kind.value}, lr={lr_at(cfg.optimizer, t, tcfg.steps):.3g})")
            clip_global_norm(grads, cfg.optimizer.grad_clip)
            lr = lr_at(cfg.optimizer, t, tcfg.steps)
            adam_update(params, grads, adam, cfg.optimizer, lr)
            log.write(json.dumps({"step": t, "kind": kind.value,
                                  "loss": step_loss, "lr": lr}) + "\n")
            if (valid_ids is not None and tcfg.eval_interval > 0
                    and (t + 1) % tcfg.eval_interval == 0):
                ppl = validation_perplexity(model, valid_ids)
                log.write(json.dumps({"step": t, "valid_ppl": ppl}) + "\n")
            if tcfg.checkpoint_interval > 0 and (t + 1) % tcfg.checkpoint_interval == 0:
                save_checkpoint(out / f"checkpoint_{t + 1:07d}.npz", params, adam,
                                step=t + 1, stage_hash=stage_hash,
                                vocab_hash=vocab_hash, cfg=cfg)
    save_checkpoint(checkpoint_path, params, adam, step=stop_at,
                    stage_hash=stage_hash, vocab_hash=vocab_hash, cfg=cfg)
    return TrainResult(model=model, metrics_path=metrics_path,
                       checkpoint_path=checkpoint_path, steps_run=stop_at - start_step)
