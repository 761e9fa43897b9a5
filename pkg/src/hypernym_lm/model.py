"""Minimal autoregressive transformer LM with tied embeddings and a
switchable softmax support, written against numpy with hand-derived
backward passes.

The output projection is the token/class embedding matrix transposed; there
is no separate output matrix, so the embedding gradient accumulates from
both the input gather and the output projection. All softmaxes are taken
over the full union vocabulary with a boolean support mask: inactive ids get
probability exactly 0.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ValidationError
from .vocab import Batch, StepKind, VocabPartition

_LN_EPS = 1e-5


class Mode(enum.Enum):
    TOKEN = "token"            # all token ids (mappable + other)
    HCP = "hcp"                # class ids + unmappable token ids
    CLASS_ONLY = "class_only"  # class ids only (used by the multi-objective head)


class SoftmaxSupport:
    """An output mode and the boolean mask of ids it may emit."""

    def __init__(self, mode: Mode, mask: np.ndarray):
        if not mask.any():
            raise ValidationError(f"empty softmax support for mode {mode}")
        self.mode = mode
        self.mask = mask
        # additive form: 0 at active ids, -inf at inactive (saves a where());
        # float32 so it never upcasts float32 scores
        self.bias = np.where(mask, np.float32(0.0), np.float32(-np.inf))

    @property
    def size(self) -> int:
        return int(self.mask.sum())

    @classmethod
    def from_partition(cls, part: VocabPartition, mode: Mode) -> "SoftmaxSupport":
        if mode is Mode.TOKEN:
            mask = part.in_mapped | part.in_unmapped
        elif mode is Mode.HCP:
            mask = part.in_class | part.in_unmapped
        else:
            mask = part.in_class
        return cls(mode=mode, mask=mask)

    @classmethod
    def for_step_kind(cls, part: VocabPartition, kind: StepKind) -> "SoftmaxSupport":
        return cls.from_partition(part, Mode.TOKEN if kind is StepKind.TOKEN else Mode.HCP)


@dataclass
class ModelConfig:
    n_layers: int = 2
    n_heads: int = 4
    hidden_size: int = 64
    ffn_size: int = 256
    seq_len: int = 64
    vocab_size: int = 0  # |V_x| + |V_notx| + |V_h|; set from the partition
    dropout: float = 0.0
    dtype: str = "float32"

    def __post_init__(self):
        sizes = (self.n_layers, self.n_heads, self.hidden_size, self.ffn_size, self.seq_len)
        if any(s < 1 for s in sizes):
            raise ConfigError(f"model sizes must be >= 1, got {sizes}")
        if self.hidden_size % self.n_heads != 0:
            raise ConfigError(
                f"hidden_size {self.hidden_size} not divisible by n_heads {self.n_heads}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError(f"dtype must be float32 or float64, got {self.dtype!r}")

    @property
    def np_dtype(self):
        return np.float32 if self.dtype == "float32" else np.float64

    @property
    def head_size(self) -> int:
        return self.hidden_size // self.n_heads


def init_params(cfg: ModelConfig, seed: int = 0) -> dict[str, np.ndarray]:
    """normal(0, 0.02) matrices, zero biases, unit layer-norm gains."""
    if cfg.vocab_size < 1:
        raise ConfigError("vocab_size must be set before initializing parameters")
    rng = np.random.default_rng(seed)
    dt = cfg.np_dtype
    d, f = cfg.hidden_size, cfg.ffn_size

    def mat(*shape):
        return rng.normal(0.0, 0.02, size=shape).astype(dt)

    p: dict[str, np.ndarray] = {
        "tok_emb": mat(cfg.vocab_size, d),
        "pos_emb": mat(cfg.seq_len, d),
        "lnf.g": np.ones(d, dtype=dt),
        "lnf.b": np.zeros(d, dtype=dt),
    }
    for i in range(1, cfg.n_layers + 1):
        p[f"l{i}.ln1.g"] = np.ones(d, dtype=dt)
        p[f"l{i}.ln1.b"] = np.zeros(d, dtype=dt)
        p[f"l{i}.attn.w"] = mat(d, 3 * d)
        p[f"l{i}.attn.b"] = np.zeros(3 * d, dtype=dt)
        p[f"l{i}.attn.wo"] = mat(d, d)
        p[f"l{i}.attn.bo"] = np.zeros(d, dtype=dt)
        p[f"l{i}.ln2.g"] = np.ones(d, dtype=dt)
        p[f"l{i}.ln2.b"] = np.zeros(d, dtype=dt)
        p[f"l{i}.ffn.w1"] = mat(d, f)
        p[f"l{i}.ffn.b1"] = np.zeros(f, dtype=dt)
        p[f"l{i}.ffn.w2"] = mat(f, d)
        p[f"l{i}.ffn.b2"] = np.zeros(d, dtype=dt)
    return p


def zeros_like_params(params: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in params.items()}


# ---------------------------------------------------------------------------
# primitive forward/backward pairs
# ---------------------------------------------------------------------------


def _layernorm_f(x, g, b):
    mu = x.mean(-1, keepdims=True)
    var = x.var(-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + _LN_EPS)
    xhat = (x - mu) * inv
    return xhat * g + b, (xhat, inv, g)


def _layernorm_b(dy, cache):
    xhat, inv, g = cache
    dg = (dy * xhat).sum(axis=tuple(range(dy.ndim - 1)))
    db = dy.sum(axis=tuple(range(dy.ndim - 1)))
    dxhat = dy * g
    m1 = dxhat.mean(-1, keepdims=True)
    m2 = (dxhat * xhat).mean(-1, keepdims=True)
    dx = inv * (dxhat - m1 - xhat * m2)
    return dx, dg, db


def _relu_f(u):
    return np.maximum(u, 0.0)


def _relu_b(dy, u):
    return np.where(u > 0, dy, 0.0)


def _dropout_f(x, p, rng):
    keep = (rng.random(x.shape) >= p).astype(x.dtype) / (1.0 - p)
    return x * keep, keep


_causal_bias_cache: dict[tuple[int, str], np.ndarray] = {}


def _causal_bias(t: int, dtype) -> np.ndarray:
    """[t, t] additive mask: -inf strictly above the diagonal."""
    key = (t, np.dtype(dtype).name)
    bias = _causal_bias_cache.get(key)
    if bias is None:
        bias = np.where(np.triu(np.ones((t, t), dtype=bool), k=1),
                        dtype.type(-np.inf), dtype.type(0.0))
        _causal_bias_cache[key] = bias
    return bias


def _split_heads(x, n_heads):
    b, t, d = x.shape
    return x.reshape(b, t, n_heads, d // n_heads).transpose(0, 2, 1, 3)


def _merge_heads(x):
    b, h, t, s = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, t, h * s)


def _attention_f(cfg: ModelConfig, x, w, b, wo, bo):
    bsz, t, d = x.shape
    qkv = x @ w + b
    q, k, v = (_split_heads(a, cfg.n_heads) for a in np.split(qkv, 3, axis=-1))
    scale = 1.0 / math.sqrt(cfg.head_size)
    scores = (q @ k.transpose(0, 1, 3, 2)) * scale
    scores += _causal_bias(t, scores.dtype)
    scores -= scores.max(-1, keepdims=True)
    a = np.exp(scores)
    a /= a.sum(-1, keepdims=True)
    ctx = _merge_heads(a @ v)
    out = ctx @ wo + bo
    cache = (x, q, k, v, a, ctx, w, wo, scale)
    return out, cache


def _attention_b(cfg: ModelConfig, dout, cache, grads, prefix):
    x, q, k, v, a, ctx, w, wo, scale = cache
    bsz, t, d = x.shape
    d2 = dout.reshape(-1, d)
    grads[f"{prefix}.wo"] += ctx.reshape(-1, d).T @ d2
    grads[f"{prefix}.bo"] += d2.sum(0)
    dctx = _split_heads(dout @ wo.T, cfg.n_heads)
    da = dctx @ v.transpose(0, 1, 3, 2)
    dv = a.transpose(0, 1, 3, 2) @ dctx
    ds = a * (da - (da * a).sum(-1, keepdims=True))
    dq = (ds @ k) * scale
    dk = (ds.transpose(0, 1, 3, 2) @ q) * scale
    dqkv = np.concatenate([_merge_heads(g) for g in (dq, dk, dv)], axis=-1)
    grads[f"{prefix}.w"] += x.reshape(-1, d).T @ dqkv.reshape(-1, 3 * d)
    grads[f"{prefix}.b"] += dqkv.reshape(-1, 3 * d).sum(0)
    return dqkv @ w.T


def _ffn_f(x, w1, b1, w2, b2, drop_p, rng):
    u = x @ w1 + b1
    g = _relu_f(u)
    y = g @ w2 + b2
    keep = None
    if drop_p > 0.0 and rng is not None:
        y, keep = _dropout_f(y, drop_p, rng)
    return y, (x, u, g, w1, w2, keep)


def _ffn_b(dy, cache, grads, prefix):
    x, u, g, w1, w2, keep = cache
    if keep is not None:
        dy = dy * keep
    d_in = x.shape[-1]
    f = u.shape[-1]
    dy2 = dy.reshape(-1, dy.shape[-1])
    grads[f"{prefix}.w2"] += g.reshape(-1, f).T @ dy2
    grads[f"{prefix}.b2"] += dy2.sum(0)
    dg = dy @ w2.T
    du = _relu_b(dg, u)
    du2 = du.reshape(-1, f)
    grads[f"{prefix}.w1"] += x.reshape(-1, d_in).T @ du2
    grads[f"{prefix}.b1"] += du2.sum(0)
    return du @ w1.T


# ---------------------------------------------------------------------------
# backbone
# ---------------------------------------------------------------------------


@dataclass
class BackboneCache:
    ids: np.ndarray
    emb_keep: np.ndarray | None
    layer_caches: list
    hiddens: list  # residual-stream values h_0 .. h_L (h_i = output of layer i)


def forward_hidden(params: dict, cfg: ModelConfig, ids: np.ndarray,
                   train: bool = False, rng: np.random.Generator | None = None
                   ) -> BackboneCache:
    """Run the stack; returns every layer's residual-stream output (no final LN)."""
    if ids.ndim != 2:
        raise ValidationError(f"expected [batch, time] ids, got shape {ids.shape}")
    t = ids.shape[1]
    if t > cfg.seq_len:
        raise ValidationError(f"sequence length {t} exceeds configured {cfg.seq_len}")
    drop = cfg.dropout if train else 0.0
    h = params["tok_emb"][ids] + params["pos_emb"][:t]
    emb_keep = None
    if drop > 0.0 and rng is not None:
        h, emb_keep = _dropout_f(h, drop, rng)
    hiddens = [h]
    layer_caches = []
    for i in range(1, cfg.n_layers + 1):
        x1, c_ln1 = _layernorm_f(h, params[f"l{i}.ln1.g"], params[f"l{i}.ln1.b"])
        attn_out, c_attn = _attention_f(cfg, x1, params[f"l{i}.attn.w"], params[f"l{i}.attn.b"],
                                        params[f"l{i}.attn.wo"], params[f"l{i}.attn.bo"])
        h = h + attn_out
        x2, c_ln2 = _layernorm_f(h, params[f"l{i}.ln2.g"], params[f"l{i}.ln2.b"])
        ffn_out, c_ffn = _ffn_f(x2, params[f"l{i}.ffn.w1"], params[f"l{i}.ffn.b1"],
                                params[f"l{i}.ffn.w2"], params[f"l{i}.ffn.b2"], drop, rng)
        h = h + ffn_out
        layer_caches.append((c_ln1, c_attn, c_ln2, c_ffn))
        hiddens.append(h)
    return BackboneCache(ids=ids, emb_keep=emb_keep, layer_caches=layer_caches, hiddens=hiddens)


def backbone_backward(params: dict, cfg: ModelConfig, cache: BackboneCache,
                      d_hidden_by_layer: dict[int, np.ndarray],
                      grads: dict[str, np.ndarray]) -> None:
    """Backprop through the stack.

    d_hidden_by_layer maps a 1-based layer index to the gradient arriving at
    that layer's residual-stream output (index n_layers = the top). Heads
    inject their gradients here; taps for auxiliary heads use inner indices.
    """
    d_h = np.zeros_like(cache.hiddens[-1])
    for i in range(cfg.n_layers, 0, -1):
        extra = d_hidden_by_layer.get(i)
        if extra is not None:
            d_h = d_h + extra
        c_ln1, c_attn, c_ln2, c_ffn = cache.layer_caches[i - 1]
        dx2 = _ffn_b(d_h, c_ffn, grads, f"l{i}.ffn")
        d_h1, dg2, db2 = _layernorm_b(dx2, c_ln2)
        grads[f"l{i}.ln2.g"] += dg2
        grads[f"l{i}.ln2.b"] += db2
        d_h = d_h + d_h1
        dx1 = _attention_b(cfg, d_h, c_attn, grads, f"l{i}.attn")
        d_h0, dg1, db1 = _layernorm_b(dx1, c_ln1)
        grads[f"l{i}.ln1.g"] += dg1
        grads[f"l{i}.ln1.b"] += db1
        d_h = d_h + d_h0
    if cache.emb_keep is not None:
        d_h = d_h * cache.emb_keep
    t = cache.ids.shape[1]
    np.add.at(grads["tok_emb"], cache.ids, d_h)
    grads["pos_emb"][:t] += d_h.sum(0)


# ---------------------------------------------------------------------------
# tied output head and masked softmax
# ---------------------------------------------------------------------------


def head_forward(params: dict, h: np.ndarray):
    """Final layer norm then tied projection: logits over the union vocabulary."""
    x, c_ln = _layernorm_f(h, params["lnf.g"], params["lnf.b"])
    return x @ params["tok_emb"].T, (x, c_ln)


def head_backward(params: dict, head_cache, dlogits: np.ndarray,
                  grads: dict[str, np.ndarray]) -> np.ndarray:
    """Gradient w.r.t. the pre-layer-norm hidden the head consumed."""
    x, c_ln = head_cache
    d = x.shape[-1]
    v = dlogits.shape[-1]
    grads["tok_emb"] += dlogits.reshape(-1, v).T @ x.reshape(-1, d)
    dx = dlogits @ params["tok_emb"]
    d_h, dg, db = _layernorm_b(dx, c_ln)
    grads["lnf.g"] += dg
    grads["lnf.b"] += db
    return d_h


def masked_softmax(scores: np.ndarray, support: SoftmaxSupport) -> np.ndarray:
    """Softmax restricted to the active ids; inactive ids get exactly 0.

    Stabilized by subtracting the max over the active set.
    """
    if scores.shape[-1] != support.mask.shape[0]:
        raise ValidationError(
            f"scores last dim {scores.shape[-1]} != vocab size {support.mask.shape[0]}")
    with np.errstate(invalid="ignore"):
        s = scores + support.bias
        s -= s.max(-1, keepdims=True)
        z = np.exp(s)
    return z / z.sum(-1, keepdims=True)


def masked_log_softmax(scores: np.ndarray, support: SoftmaxSupport):
    """(log_probs, probs) over the active support; -inf / 0 at inactive ids."""
    with np.errstate(invalid="ignore"):
        s = scores + support.bias
        s -= s.max(-1, keepdims=True)
        z = np.exp(s)
        denom = z.sum(-1, keepdims=True)
        logp = s - np.log(denom)
    return logp, z / denom


def cross_entropy(logits: np.ndarray, targets: np.ndarray, support: SoftmaxSupport,
                  weights: np.ndarray | None = None):
    """Masked-softmax NLL, averaged over (weighted) positions.

    Targets at zero-weight positions are ignored; any weighted target outside
    the active support is an error, never silently masked.

    Returns (loss, dlogits, nll) with nll per position.
    """
    flat_logits = logits.reshape(-1, logits.shape[-1])
    flat_targets = targets.reshape(-1)
    n = flat_targets.shape[0]
    if weights is None:
        w = np.ones(n, dtype=logits.dtype)
    else:
        w = weights.reshape(-1).astype(logits.dtype)
    active = support.mask[flat_targets]
    if not np.all(active[w > 0]):
        bad = flat_targets[(~active) & (w > 0)][0]
        raise ValidationError(
            f"target id {int(bad)} outside the active softmax support ({support.mode})")
    total_w = w.sum()
    if total_w <= 0:
        return 0.0, np.zeros_like(logits), np.zeros(n, dtype=logits.dtype)
    logp, p = masked_log_softmax(flat_logits, support)
    rows = np.arange(n)
    nll = np.where(w > 0, -logp[rows, flat_targets], 0.0)
    loss = float((nll * w).sum() / total_w)
    dflat = p * (w / total_w)[:, None]
    dflat[rows[w > 0], flat_targets[w > 0]] -= (w / total_w)[w > 0]
    return loss, dflat.reshape(logits.shape), nll.reshape(targets.shape)


# ---------------------------------------------------------------------------
# whole-model conveniences
# ---------------------------------------------------------------------------


@dataclass
class ForwardOutput:
    """Final hidden states plus per-position log-probabilities over the
    active support (-inf, i.e. probability exactly 0, at inactive ids)."""

    hidden: np.ndarray
    log_probs: np.ndarray
    support: SoftmaxSupport

    def probs(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_probs)


def forward(params: dict, cfg: ModelConfig, batch: Batch, part: VocabPartition) -> ForwardOutput:
    """Inference pass; the softmax support follows the batch's step kind."""
    support = SoftmaxSupport.for_step_kind(part, batch.step_kind)
    for name, arr in (("inputs", batch.inputs), ("targets", batch.targets)):
        if arr.size and not np.all(support.mask[arr.reshape(-1)]):
            raise ValidationError(
                f"batch {name} contain ids outside the {support.mode} support "
                "(substitution bug?)")
    cache = forward_hidden(params, cfg, batch.inputs)
    logits, head_cache = head_forward(params, cache.hiddens[-1])
    logp, _ = masked_log_softmax(logits, support)
    x, _ = head_cache
    return ForwardOutput(hidden=x, log_probs=logp, support=support)


def loss(out: ForwardOutput, targets: np.ndarray) -> float:
    """Mean NLL of targets under a ForwardOutput's distributions."""
    flat = targets.reshape(-1)
    if not np.all(out.support.mask[flat]):
        bad = flat[~out.support.mask[flat]][0]
        raise ValidationError(
            f"target id {int(bad)} outside the active softmax support ({out.support.mode})")
    logp = out.log_probs.reshape(-1, out.log_probs.shape[-1])
    return float(-logp[np.arange(flat.shape[0]), flat].mean())


def lm_loss_and_grads(params: dict, cfg: ModelConfig, batch: Batch, part: VocabPartition,
                      train: bool = False, rng: np.random.Generator | None = None):
    """One training step's loss and full parameter gradients."""
    support = SoftmaxSupport.for_step_kind(part, batch.step_kind)
    cache = forward_hidden(params, cfg, batch.inputs, train=train, rng=rng)
    logits, head_cache = head_forward(params, cache.hiddens[-1])
    step_loss, dlogits, _ = cross_entropy(logits, batch.targets, support)
    grads = zeros_like_params(params)
    d_h = head_backward(params, head_cache, dlogits, grads)
    backbone_backward(params, cfg, cache, {cfg.n_layers: d_h}, grads)
    return step_loss, grads


# ---------------------------------------------------------------------------
# finite-difference gradient checking
# ---------------------------------------------------------------------------


@dataclass
class GradCheckEntry:
    param: str
    index: tuple
    analytic: float
    numeric: float
    rel_err: float


@dataclass
class GradCheckReport:
    mode: str
    max_rel_err: float
    worst: GradCheckEntry | None
    tolerance: float
    samples: int

    @property
    def passed(self) -> bool:
        return self.max_rel_err <= self.tolerance


def finite_difference_check(loss_fn, params: dict, grads: dict, *, eps: float = 1e-5,
                            samples_per_tensor: int = 4, seed: int = 0,
                            tolerance: float = 1e-4, label: str = "loss") -> GradCheckReport:
    """Compare analytic grads against central finite differences.

    loss_fn(params) -> float must be deterministic. Entries are sampled per
    tensor with a seeded RNG; the report carries the worst offender.
    """
    rng = np.random.default_rng(seed)
    worst: GradCheckEntry | None = None
    max_err = 0.0
    n_samples = 0
    for name in sorted(params):
        arr = params[name]
        k = min(samples_per_tensor, arr.size)
        flat_idx = rng.choice(arr.size, size=k, replace=False)
        for fi in flat_idx:
            idx = np.unravel_index(fi, arr.shape)
            orig = arr[idx]
            arr[idx] = orig + eps
            up = loss_fn(params)
            arr[idx] = orig - eps
            down = loss_fn(params)
            arr[idx] = orig
            numeric = (up - down) / (2 * eps)
            analytic = float(grads[name][idx])
            denom = max(1e-8, abs(analytic) + abs(numeric))
            rel = abs(analytic - numeric) / denom
            n_samples += 1
            if rel > max_err:
                max_err = rel
                worst = GradCheckEntry(name, tuple(int(i) for i in idx),
                                       analytic, numeric, rel)
    return GradCheckReport(mode=label, max_rel_err=max_err, worst=worst,
                           tolerance=tolerance, samples=n_samples)


def _toy_partition(n_plain: int = 5, n_mapped: int = 5, n_classes: int = 3) -> VocabPartition:
    """Small synthetic partition for self-contained engine checks."""
    from .vocab import VocabPartition as VP

    token_names = ["<unk>", "<eos>"] + [f"w{i}" for i in range(n_plain + n_mapped)]
    class_names = [f"c{i}.n.01" for i in range(n_classes)]
    mapped_ids = np.arange(2 + n_plain, 2 + n_plain + n_mapped, dtype=np.int64)
    class_of = {int(tid): len(token_names) + (j % n_classes)
                for j, tid in enumerate(mapped_ids)}
    return VP(token_names, class_names, mapped_ids, class_of)


def gradient_check(cfg: ModelConfig | None = None, tolerance: float = 1e-4,
                   seed: int = 0) -> list[GradCheckReport]:
    """Finite-difference gate for the whole engine, token and HCP modes.

    Uses a tiny double-precision model; raises nothing, returns one report
    per mode (check .passed).
    """
    from .vocab import substitute

    part = _toy_partition()
    if cfg is None:
        cfg = ModelConfig(n_layers=2, n_heads=2, hidden_size=16, ffn_size=32,
                          seq_len=8, vocab_size=part.total, dtype="float64")
    if cfg.dtype != "float64":
        raise ConfigError("gradient_check requires a float64 config")
    if cfg.vocab_size != part.total:
        cfg = ModelConfig(**{**cfg.__dict__, "vocab_size": part.total})
    params = init_params(cfg, seed=seed)
    rng = np.random.default_rng(seed + 1)
    token_ids = np.where(part.in_mapped | part.in_unmapped)[0]
    ids = rng.choice(token_ids, size=(2, cfg.seq_len + 1)).astype(np.int32)
    token_batch = Batch(inputs=ids[:, :-1], targets=ids[:, 1:], step_kind=StepKind.TOKEN)
    hcp_batch = substitute(token_batch, part)

    reports = []
    for batch, label in ((token_batch, "token"), (hcp_batch, "hcp")):
        _, grads = lm_loss_and_grads(params, cfg, batch, part)

        def fn(p, _b=batch):
            support = SoftmaxSupport.for_step_kind(part, _b.step_kind)
            cache = forward_hidden(p, cfg, _b.inputs)
            logits, _ = head_forward(p, cache.hiddens[-1])
            l, _, _ = cross_entropy(logits, _b.targets, support)
            return l

        reports.append(finite_difference_check(fn, params, grads, tolerance=tolerance,
                                               seed=seed, label=label))
    return reports
