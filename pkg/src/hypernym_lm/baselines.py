"""Alternative hypernym-integration strategies kept for ablation parity:
a multi-objective (auxiliary class-prediction) loss and a two-stage
class-then-token adaptive softmax. Both reuse the tied embedding rows; no
extra projection parameters are introduced.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, ValidationError
from .model import (
    Mode,
    ModelConfig,
    SoftmaxSupport,
    backbone_backward,
    cross_entropy,
    forward_hidden,
    head_backward,
    head_forward,
    masked_log_softmax,
    zeros_like_params,
)
from .vocab import Batch, VocabPartition

# ---------------------------------------------------------------------------
# multi-objective training
# ---------------------------------------------------------------------------


def hypernym_targets(targets: np.ndarray, part: VocabPartition):
    """Class-id targets for the auxiliary head.

    Positions whose target is outside the mappable set get weight 0 and are
    skipped by the loss.
    """
    weights = part.in_mapped[targets].astype(np.float64)
    return part.substitution[targets], weights


def multi_objective_loss(out_token, out_hyp, targets: np.ndarray, part: VocabPartition,
                         weight: float = 0.2):
    """total = token NLL + weight * auxiliary class NLL.

    ``out_token`` must carry token-mode log-probs from the last layer;
    ``out_hyp`` the auxiliary head's log-probs (class-only or mixed support).
    Returns (total, token_loss, hyp_loss).
    """
    from .model import loss as nll_loss

    token_loss = nll_loss(out_token, targets)
    cls_targets, w = hypernym_targets(targets, part)
    flat = cls_targets.reshape(-1)
    wf = w.reshape(-1)
    sel = wf > 0
    if not np.all(out_hyp.support.mask[flat[sel]]):
        raise ValidationError("auxiliary target outside the hypernym head's support")
    logp = out_hyp.log_probs.reshape(-1, out_hyp.log_probs.shape[-1])
    if sel.any():
        picked = logp[np.where(sel)[0], flat[sel]]
        hyp_loss = float(-(picked * wf[sel]).sum() / wf[sel].sum())
    else:
        hyp_loss = 0.0
    return token_loss + weight * hyp_loss, token_loss, hyp_loss


def multi_objective_loss_and_grads(params: dict, cfg: ModelConfig, batch: Batch,
                                   part: VocabPartition, weight: float, tap_layer: int,
                                   mix_vocab: bool, train: bool = False,
                                   rng: np.random.Generator | None = None):
    """Training step for the multi-objective ablation.

    The batch stays un-substituted; the auxiliary head reads the tap layer's
    residual stream through the shared final layer norm and the tied class
    embedding rows.
    """
    if not 1 <= tap_layer <= cfg.n_layers:
        raise ConfigError(f"tap_layer must be in [1, {cfg.n_layers}], got {tap_layer}")
    token_support = SoftmaxSupport.from_partition(part, Mode.TOKEN)
    hyp_support = SoftmaxSupport.from_partition(part, Mode.HCP if mix_vocab else Mode.CLASS_ONLY)

    cache = forward_hidden(params, cfg, batch.inputs, train=train, rng=rng)
    logits_tok, head_tok = head_forward(params, cache.hiddens[-1])
    token_loss, dlogits_tok, _ = cross_entropy(logits_tok, batch.targets, token_support)

    cls_targets, w = hypernym_targets(batch.targets, part)
    logits_hyp, head_hyp = head_forward(params, cache.hiddens[tap_layer])
    hyp_loss, dlogits_hyp, _ = cross_entropy(logits_hyp, cls_targets, hyp_support, weights=w)

    grads = zeros_like_params(params)
    d_by_layer: dict[int, np.ndarray] = {}
    d_by_layer[cfg.n_layers] = head_backward(params, head_tok, dlogits_tok, grads)
    d_tap = head_backward(params, head_hyp, weight * dlogits_hyp, grads)
    if tap_layer in d_by_layer:
        d_by_layer[tap_layer] = d_by_layer[tap_layer] + d_tap
    else:
        d_by_layer[tap_layer] = d_tap
    backbone_backward(params, cfg, cache, d_by_layer, grads)
    total = token_loss + weight * hyp_loss
    return total, grads, {"token_loss": token_loss, "hyp_loss": hyp_loss}


# ---------------------------------------------------------------------------
# adaptive softmax (class-first factorization)
# ---------------------------------------------------------------------------


def _first_stage_target(target: int, part: VocabPartition) -> int:
    return int(part.substitution[target])


def class_members(part: VocabPartition) -> dict[int, np.ndarray]:
    """class id -> sorted member token ids."""
    members: dict[int, list[int]] = {}
    for tid, cid in part.class_of.items():
        members.setdefault(cid, []).append(tid)
    return {cid: np.array(sorted(ts), dtype=np.int64) for cid, ts in members.items()}


def adaptive_softmax_prob(scores: np.ndarray, target: int, part: VocabPartition) -> float:
    """Two-stage probability of one token given its score vector.

    Stage one is a softmax over classes plus unmappable tokens; stage two,
    reached only for mappable targets, is a softmax over the tokens sharing
    the target's class (degenerate single-member classes yield factor 1).
    """
    if scores.ndim != 1 or scores.shape[0] != part.total:
        raise ValidationError(f"expected a [{part.total}] score vector")
    if not (part.in_mapped[target] or part.in_unmapped[target]):
        raise ValidationError(f"adaptive softmax target {target} must be a token id")
    support1 = SoftmaxSupport.from_partition(part, Mode.HCP)
    logp1, _ = masked_log_softmax(scores[None, :], support1)
    first = _first_stage_target(target, part)
    log_p = float(logp1[0, first])
    if part.in_mapped[target]:
        members = part.members_of_class(int(part.substitution[target]))
        sub = scores[members]
        sub = sub - sub.max()
        z = np.exp(sub)
        log_p += float(sub[members == target][0] - np.log(z.sum()))
    return float(np.exp(log_p))


def adaptive_target_log_probs(params: dict, cfg: ModelConfig, inputs: np.ndarray,
                              targets: np.ndarray, part: VocabPartition) -> np.ndarray:
    """log P(target) per position under the two-stage factorization."""
    cache = forward_hidden(params, cfg, inputs)
    logits, _ = head_forward(params, cache.hiddens[-1])
    return _adaptive_log_probs_from_logits(logits, targets, part)


def _adaptive_log_probs_from_logits(logits: np.ndarray, targets: np.ndarray,
                                    part: VocabPartition) -> np.ndarray:
    support1 = SoftmaxSupport.from_partition(part, Mode.HCP)
    flat_logits = logits.reshape(-1, logits.shape[-1])
    flat_targets = targets.reshape(-1)
    if not np.all(part.in_mapped[flat_targets] | part.in_unmapped[flat_targets]):
        raise ValidationError("adaptive softmax targets must be token ids")
    logp1, _ = masked_log_softmax(flat_logits, support1)
    rows = np.arange(flat_targets.shape[0])
    out = logp1[rows, part.substitution[flat_targets]]
    members_by_class = class_members(part)
    mapped_rows = np.where(part.in_mapped[flat_targets])[0]
    for r in mapped_rows:
        cid = int(part.substitution[flat_targets[r]])
        members = members_by_class[cid]
        sub = flat_logits[r, members]
        sub = sub - sub.max()
        z = np.exp(sub)
        out[r] += float(sub[members == flat_targets[r]][0] - np.log(z.sum()))
    return out.reshape(targets.shape)


def adaptive_loss_and_grads(params: dict, cfg: ModelConfig, batch: Batch,
                            part: VocabPartition, train: bool = False,
                            rng: np.random.Generator | None = None):
    """Training step for the adaptive-softmax ablation.

    Loss per position is -log p1(class or token) - log p2(token | class); the
    second term exists only for mappable targets.
    """
    support1 = SoftmaxSupport.from_partition(part, Mode.HCP)
    cache = forward_hidden(params, cfg, batch.inputs, train=train, rng=rng)
    logits, head_cache = head_forward(params, cache.hiddens[-1])

    first_targets = part.substitution[batch.targets]
    loss1, dlogits, _ = cross_entropy(logits, first_targets, support1)

    # second stage, grouped by class for vectorized softmaxes
    flat_logits = logits.reshape(-1, logits.shape[-1])
    flat_targets = batch.targets.reshape(-1)
    n = flat_targets.shape[0]
    dflat = dlogits.reshape(-1, dlogits.shape[-1])
    loss2_sum = 0.0
    members_by_class = class_members(part)
    mapped_rows = np.where(part.in_mapped[flat_targets])[0]
    by_class: dict[int, list[int]] = {}
    for r in mapped_rows:
        by_class.setdefault(int(part.substitution[flat_targets[r]]), []).append(int(r))
    for cid, rows in by_class.items():
        members = members_by_class[cid]
        rows_arr = np.array(rows, dtype=np.int64)
        sub = flat_logits[np.ix_(rows_arr, members)]
        sub = sub - sub.max(-1, keepdims=True)
        z = np.exp(sub)
        p2 = z / z.sum(-1, keepdims=True)
        tgt_cols = np.searchsorted(members, flat_targets[rows_arr])
        logp2 = np.log(p2[np.arange(rows_arr.shape[0]), tgt_cols])
        loss2_sum += float(-logp2.sum())
        dsub = p2.copy()
        dsub[np.arange(rows_arr.shape[0]), tgt_cols] -= 1.0
        np.add.at(dflat, (rows_arr[:, None], members[None, :]), dsub / n)
    loss2 = loss2_sum / n
    total = loss1 + loss2

    grads = zeros_like_params(params)
    d_h = head_backward(params, head_cache, dflat.reshape(logits.shape), grads)
    backbone_backward(params, cfg, cache, {cfg.n_layers: d_h}, grads)
    return total, grads, {"stage1_loss": loss1, "stage2_loss": loss2}
