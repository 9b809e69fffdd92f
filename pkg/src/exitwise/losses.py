"""Training objectives: summed per-exit source classification, adversarial
domain confusion through the reversal gates, and the annealing schedules."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cascade import MultiExitNet, backprop_exits, forward_all
from .errors import EmptyDomainError
from .numerics import as_matrix, binary_cross_entropy, cross_entropy


@dataclass
class LossReport:
    """One step's (or epoch's) loss decomposition under fixed alpha/beta."""

    l_s: float
    l_d: float
    l_t: float
    alpha: float
    beta: float
    total: float
    per_exit_ls: list = field(default_factory=list)
    per_exit_ld: list = field(default_factory=list)

    @classmethod
    def combine(cls, l_s, l_d, l_t, alpha, beta, per_exit_ls=None, per_exit_ld=None):
        return cls(
            l_s=l_s,
            l_d=l_d,
            l_t=l_t,
            alpha=alpha,
            beta=beta,
            total=l_s + alpha * l_d + beta * l_t,
            per_exit_ls=list(per_exit_ls or []),
            per_exit_ld=list(per_exit_ld or []),
        )


def grl_schedule(progress: float) -> float:
    """Reversal strength ramp 2/(1+exp(-10 p)) - 1, monotone from 0 to ~1."""
    if not 0.0 <= progress <= 1.0:
        raise ValueError(f"progress must lie in [0, 1], got {progress}")
    return 2.0 / (1.0 + math.exp(-10.0 * progress)) - 1.0


def annealed_lr(lr0: float, progress: float) -> float:
    """Learning-rate decay lr0 / (1 + 10 p)^0.75."""
    if not 0.0 <= progress <= 1.0:
        raise ValueError(f"progress must lie in [0, 1], got {progress}")
    return lr0 / (1.0 + 10.0 * progress) ** 0.75


def source_loss(net: MultiExitNet, batch, labels, weight: float = 1.0):
    """Mean over samples of the summed cross-entropy across all exits.

    Gradients (scaled by `weight`) accumulate into every head and the trunk.
    Returns (loss, per-exit losses).
    """
    _, cache = forward_all(net, batch)
    per_exit = []
    head_grads = []
    for probs in cache.probs:
        loss_k, dlogits = cross_entropy(probs, labels)
        per_exit.append(loss_k)
        head_grads.append(weight * dlogits)
    backprop_exits(net, cache, head_grads=head_grads)
    return float(sum(per_exit)), per_exit


def domain_loss(
    net: MultiExitNet, source_batch, target_batch, grl_lambda: float, weight: float = 1.0
):
    """Per-exit discriminator BCE, source rows labeled 0 and target rows 1,
    averaged within each domain and summed over exits and domains.

    Discriminator parameters receive the minimizing gradient; the trunk
    receives the reversal-gate gradient scaled by grl_lambda. Both are
    additionally scaled by `weight`. Returns (loss, per-exit losses).
    """
    xs = as_matrix(source_batch)
    xt = as_matrix(target_batch)
    if xs.shape[0] == 0 or xt.shape[0] == 0:
        raise EmptyDomainError("domain loss needs non-empty source and target batches")
    net.set_grl_strength(grl_lambda)
    _, cache_s = forward_all(net, xs)
    _, cache_t = forward_all(net, xt)
    per_exit = []
    feat_grads_s = []
    feat_grads_t = []
    for k, disc in enumerate(net.discs):
        loss_k = 0.0
        for cache, label, sink in (
            (cache_s, 0.0, feat_grads_s),
            (cache_t, 1.0, feat_grads_t),
        ):
            probs, disc_cache = disc.forward(cache.feats[k])
            bce, dlogits = binary_cross_entropy(probs, label)
            loss_k += bce
            sink.append(disc.backward(disc_cache, weight * dlogits))
        per_exit.append(loss_k)
    backprop_exits(net, cache_s, feature_grads=feat_grads_s)
    backprop_exits(net, cache_t, feature_grads=feat_grads_t)
    return float(sum(per_exit)), per_exit
