"""Dense float64 matrix primitives with layer-local backpropagation.

Everything operates on plain row-major numpy arrays. Layers own their
parameters together with gradient accumulators and momentum buffers; each
backward call accumulates into the gradient buffers and returns the gradient
with respect to its input, so arbitrary stacks can be differentiated without
a graph.
"""

from __future__ import annotations

import numpy as np

from .errors import DegenerateInputError, DimensionError

# Probabilities are clamped here before any log to keep losses finite even on
# adversarially confident outputs.
PROB_FLOOR = 1e-12


def as_matrix(x) -> np.ndarray:
    """Coerce input to a 2-D float64 array; a 1-D vector becomes one row."""
    m = np.asarray(x, dtype=np.float64)
    if m.ndim == 1:
        m = m[np.newaxis, :]
    if m.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {m.shape}")
    return m


def ensure_finite(name: str, arr: np.ndarray) -> np.ndarray:
    if not np.isfinite(arr).all():
        raise DegenerateInputError(f"{name} contains NaN or Inf entries")
    return arr


class DenseLayer:
    """Fully connected layer y = x @ w + b.

    Gradient accumulators (gw, gb) and momentum buffers (vw, vb) shape-match
    the parameters. Weights are drawn uniform(-1/sqrt(d_in), +1/sqrt(d_in))
    when a generator is supplied, zero otherwise; biases start at zero.
    """

    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator | None = None):
        if d_in < 1 or d_out < 1:
            raise DimensionError(f"layer dims must be positive, got {d_in}x{d_out}")
        if rng is None:
            self.w = np.zeros((d_in, d_out))
        else:
            limit = 1.0 / np.sqrt(d_in)
            self.w = rng.uniform(-limit, limit, size=(d_in, d_out))
        self.b = np.zeros(d_out)
        self.vw = np.zeros_like(self.w)
        self.vb = np.zeros_like(self.b)
        self.gw = np.zeros_like(self.w)
        self.gb = np.zeros_like(self.b)

    @property
    def d_in(self) -> int:
        return self.w.shape[0]

    @property
    def d_out(self) -> int:
        return self.w.shape[1]

    @property
    def mac_cost(self) -> int:
        """Per-sample multiply-accumulates; bias adds are excluded."""
        return self.d_in * self.d_out

    def zero_grad(self) -> None:
        self.gw[:] = 0.0
        self.gb[:] = 0.0


class GrlGate:
    """Gradient reversal: exact identity forward, -strength * grad backward."""

    def __init__(self, strength: float = 1.0):
        if strength < 0.0:
            raise ValueError(f"reversal strength must be nonnegative, got {strength}")
        self.strength = float(strength)

    def forward(self, x: np.ndarray) -> np.ndarray:
        return x

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        return -self.strength * grad_out


def affine_forward(layer: DenseLayer, x) -> np.ndarray:
    x = as_matrix(x)
    if x.shape[1] != layer.d_in:
        raise DimensionError(
            f"affine input has shape {x.shape}, layer expects (*, {layer.d_in})"
        )
    return x @ layer.w + layer.b


def affine_backward(layer: DenseLayer, x: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    """Accumulate parameter gradients of y = x @ w + b; return dL/dx."""
    expected = (x.shape[0], layer.d_out)
    if grad_out.shape != expected:
        raise DimensionError(
            f"upstream gradient shape {grad_out.shape} does not match output {expected}"
        )
    layer.gw += x.T @ grad_out
    layer.gb += grad_out.sum(axis=0)
    return grad_out @ layer.w.T


def relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0)


def relu_backward(z: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    # Subgradient at exactly 0 is taken as 0.
    return np.where(z > 0.0, grad_out, 0.0)


def softmax_rows(logits) -> np.ndarray:
    """Row-wise softmax, max-shifted for stability."""
    z = as_matrix(logits)
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(probs, labels) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood and its gradient w.r.t. the logits.

    `probs` must already be softmax rows; the returned gradient is the fused
    softmax + NLL form (probs - onehot) / n_rows.
    """
    p = as_matrix(probs)
    y = np.asarray(labels, dtype=np.int64).ravel()
    n, c = p.shape
    if n == 0:
        raise DimensionError("cross_entropy over an empty batch")
    if y.shape[0] != n:
        raise DimensionError(f"{y.shape[0]} labels for {n} probability rows")
    if y.min() < 0 or y.max() >= c:
        raise IndexError(f"class label out of range [0, {c})")
    rows = np.arange(n)
    picked = p[rows, y]
    loss = float(-np.log(np.maximum(picked, PROB_FLOOR)).mean())
    grad = p.copy()
    grad[rows, y] -= 1.0
    grad /= n
    return loss, grad


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def binary_cross_entropy(probs, target: float) -> tuple[float, np.ndarray]:
    """Mean BCE of sigmoid outputs against one constant domain label.

    Returns the loss and the gradient w.r.t. the pre-sigmoid logits,
    (p - target) / n.
    """
    p = np.asarray(probs, dtype=np.float64).ravel()
    if p.size == 0:
        raise DimensionError("binary_cross_entropy over an empty batch")
    clamped = np.clip(p, PROB_FLOOR, 1.0 - PROB_FLOOR)
    loss = float(-(target * np.log(clamped) + (1.0 - target) * np.log(1.0 - clamped)).mean())
    dlogits = (p - target) / p.size
    return loss, dlogits


def cosine_similarity(a, b) -> float:
    va = np.asarray(a, dtype=np.float64).ravel()
    vb = np.asarray(b, dtype=np.float64).ravel()
    if va.shape != vb.shape:
        raise DimensionError(f"cosine of shapes {va.shape} and {vb.shape}")
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na == 0.0 or nb == 0.0:
        raise DegenerateInputError("cosine similarity of a zero-norm vector")
    return float(va @ vb / (na * nb))


def sgd_momentum_step(
    layer: DenseLayer, lr: float, momentum: float, weight_decay: float = 0.0
) -> None:
    """Classical heavy-ball update from the layer's gradient buffers:

        v <- momentum * v + g;  theta <- theta - lr * v
    """
    if layer.gw.shape != layer.w.shape or layer.gb.shape != layer.b.shape:
        raise DimensionError("gradient buffers do not shape-match parameters")
    gw = layer.gw if weight_decay == 0.0 else layer.gw + weight_decay * layer.w
    layer.vw *= momentum
    layer.vw += gw
    layer.w -= lr * layer.vw
    layer.vb *= momentum
    layer.vb += layer.gb
    layer.b -= lr * layer.vb
