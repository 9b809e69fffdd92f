"""Multi-exit network: a shared dense trunk with a classifier head and a
domain discriminator hanging off every block, plus an exact MAC cost model.

Block k maps the previous width to `hidden_width` through ReLU; head k maps
those features to class probabilities; discriminator k is a two-layer MLP
behind a gradient-reversal gate ending in a single sigmoid unit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError
from .numerics import (
    DenseLayer,
    GrlGate,
    affine_backward,
    affine_forward,
    as_matrix,
    ensure_finite,
    relu,
    relu_backward,
    sigmoid,
    softmax_rows,
)
from .seeds import stream


@dataclass
class CascadeConfig:
    input_dim: int = 2
    exit_count: int = 4
    hidden_width: int = 16
    disc_width: int = 16
    class_count: int = 2

    def validate(self) -> None:
        # exit_count == 1 is allowed so single-exit baselines can run.
        if self.exit_count < 1:
            raise ConfigError(f"exit_count must be >= 1, got {self.exit_count}")
        if min(self.input_dim, self.hidden_width, self.disc_width) < 1:
            raise ConfigError("input_dim and widths must be >= 1")
        if self.class_count < 2:
            raise ConfigError(f"class_count must be >= 2, got {self.class_count}")


class CostModel:
    """Per-sample multiply-accumulate counts for every part of the cascade.

    Inference cost through exit k charges trunk blocks 1..k and every head
    1..k (earlier heads run to test exit conditions on the way down).
    Discriminators only run during training and are tracked separately.
    """

    def __init__(self, config: CascadeConfig):
        h, d = config.hidden_width, config.input_dim
        self.trunk_macs = [d * h] + [h * h] * (config.exit_count - 1)
        self.head_macs = [h * config.class_count] * config.exit_count
        self.disc_macs = [h * config.disc_width + config.disc_width] * config.exit_count

    def cumulative_inference_macs(self, k: int) -> int:
        """Total MACs to produce exit k's prediction (1-based k)."""
        if not 1 <= k <= len(self.trunk_macs):
            raise IndexError(f"exit {k} out of range [1, {len(self.trunk_macs)}]")
        return sum(self.trunk_macs[:k]) + sum(self.head_macs[:k])


class Discriminator:
    """Per-exit domain classifier: GRL -> dense -> ReLU -> dense -> sigmoid."""

    def __init__(self, feature_dim: int, hidden: int, rng: np.random.Generator):
        self.gate = GrlGate(1.0)
        self.fc1 = DenseLayer(feature_dim, hidden, rng)
        self.fc2 = DenseLayer(hidden, 1, rng)

    def forward(self, features: np.ndarray):
        """Return per-row domain probabilities and the cache for backward."""
        gated = self.gate.forward(as_matrix(features))
        z1 = affine_forward(self.fc1, gated)
        a1 = relu(z1)
        probs = sigmoid(affine_forward(self.fc2, a1)).ravel()
        return probs, (gated, z1, a1)

    def backward(self, cache, dlogits: np.ndarray) -> np.ndarray:
        """Accumulate discriminator grads; return the reversed feature grad."""
        gated, z1, a1 = cache
        g = affine_backward(self.fc2, a1, dlogits.reshape(-1, 1))
        g = relu_backward(z1, g)
        g = affine_backward(self.fc1, gated, g)
        return self.gate.backward(g)


@dataclass
class PredictionPanel:
    """All K exit distributions per sample, plus their mean and score.

    `confidence` stays None until scored (see selftrain.confidence_scores).
    """

    probs: np.ndarray       # (n, K, C)
    mean_pred: np.ndarray   # (n, C)
    pseudo_label: np.ndarray  # (n,) argmax of mean_pred, lowest index on ties
    confidence: np.ndarray | None = None

    @property
    def n_samples(self) -> int:
        return self.probs.shape[0]

    @property
    def exit_count(self) -> int:
        return self.probs.shape[1]

    @property
    def class_count(self) -> int:
        return self.probs.shape[2]


@dataclass
class ForwardCache:
    """Per-block activations kept for backward and discriminator input."""

    x: np.ndarray
    pre: list = field(default_factory=list)    # block pre-activations
    feats: list = field(default_factory=list)  # post-ReLU features per block
    probs: list = field(default_factory=list)  # softmax rows per exit


class MultiExitNet:
    def __init__(self, config: CascadeConfig, seed: int = 0):
        config.validate()
        self.config = config
        rng = stream(seed, "net-init")
        h = config.hidden_width
        dims = [config.input_dim] + [h] * (config.exit_count - 1)
        self.blocks = [DenseLayer(d, h, rng) for d in dims]
        self.heads = [DenseLayer(h, config.class_count, rng) for _ in range(config.exit_count)]
        self.discs = [Discriminator(h, config.disc_width, rng) for _ in range(config.exit_count)]
        self.cost_model = CostModel(config)

    @property
    def exit_count(self) -> int:
        return self.config.exit_count

    def named_layers(self):
        """Canonical (name, layer) order used by the optimizer and checkpoints."""
        for k, layer in enumerate(self.blocks, start=1):
            yield f"block{k}", layer
        for k, layer in enumerate(self.heads, start=1):
            yield f"head{k}", layer
        for k, disc in enumerate(self.discs, start=1):
            yield f"disc{k}.fc1", disc.fc1
            yield f"disc{k}.fc2", disc.fc2

    def zero_grads(self) -> None:
        for _, layer in self.named_layers():
            layer.zero_grad()

    def set_grl_strength(self, strength: float) -> None:
        for disc in self.discs:
            disc.gate.strength = float(strength)


def forward_all(net: MultiExitNet, batch) -> tuple[PredictionPanel, ForwardCache]:
    """Run every block and head; return the prediction panel and the cache."""
    x = as_matrix(batch)
    if x.shape[1] != net.config.input_dim:
        raise DimensionError(
            f"batch has {x.shape[1]} features, network expects {net.config.input_dim}"
        )
    cache = ForwardCache(x=x)
    h = x
    for block, head in zip(net.blocks, net.heads):
        z = affine_forward(block, h)
        a = relu(z)
        p = softmax_rows(affine_forward(head, a))
        cache.pre.append(z)
        cache.feats.append(a)
        cache.probs.append(p)
        h = a
    panel_probs = ensure_finite("exit probabilities", np.stack(cache.probs, axis=1))
    mean_pred = panel_probs.mean(axis=1)
    panel = PredictionPanel(
        probs=panel_probs,
        mean_pred=mean_pred,
        pseudo_label=mean_pred.argmax(axis=1),
    )
    return panel, cache


def forward_to_exit(net: MultiExitNet, sample, k: int) -> tuple[np.ndarray, int]:
    """Evaluate trunk blocks and heads 1..k for one sample.

    Returns exit k's probability vector and the MACs spent, which charge
    every head along the way (each is evaluated to test exit conditions).
    """
    if not 1 <= k <= net.exit_count:
        raise IndexError(f"exit {k} out of range [1, {net.exit_count}]")
    h = as_matrix(sample)
    probs = None
    for i in range(k):
        h = relu(affine_forward(net.blocks[i], h))
        probs = softmax_rows(affine_forward(net.heads[i], h))
    return probs[0], net.cost_model.cumulative_inference_macs(k)


def discriminate(net: MultiExitNet, features, k: int) -> np.ndarray:
    """Domain probability of discriminator k for rows of block-k features."""
    if not 1 <= k <= net.exit_count:
        raise IndexError(f"exit {k} out of range [1, {net.exit_count}]")
    probs, _ = net.discs[k - 1].forward(features)
    return probs


def backprop_exits(net, cache: ForwardCache, head_grads=None, feature_grads=None):
    """Push exit-level gradients back through the trunk.

    head_grads[k] is dL/dlogits at exit k+1 (None to skip); feature_grads[k]
    is an extra dL/dfeatures_k injection, e.g. a discriminator's reversed
    gradient. Parameter gradients accumulate in place; returns dL/dinput
    (None when nothing flowed).
    """
    n_exits = len(net.blocks)
    head_grads = head_grads or [None] * n_exits
    feature_grads = feature_grads or [None] * n_exits
    g = None
    for k in reversed(range(n_exits)):
        parts = []
        if g is not None:
            parts.append(g)
        if head_grads[k] is not None:
            parts.append(affine_backward(net.heads[k], cache.feats[k], head_grads[k]))
        if feature_grads[k] is not None:
            parts.append(feature_grads[k])
        if not parts:
            g = None
            continue
        gk = parts[0].copy()
        for extra in parts[1:]:
            gk += extra
        dz = relu_backward(cache.pre[k], gk)
        below = cache.feats[k - 1] if k > 0 else cache.x
        g = affine_backward(net.blocks[k], below, dz)
    return g
