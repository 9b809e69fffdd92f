"""Cross-exit confidence scoring and class-balanced pseudo-label selection.

A sample's confidence is the max of its mean prediction times the summed
cosine agreement between each exit's distribution and that mean; per-class
caps derived from class-wise mean confidence keep the selected pool balanced
before entries are scattered randomly across exits for self-training.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cascade import MultiExitNet, PredictionPanel, backprop_exits, forward_all
from .errors import DegenerateInputError, UnassignedExitError
from .numerics import PROB_FLOOR
from .seeds import resolve_rng


@dataclass
class SelfTrainEntry:
    sample_index: int
    pseudo_label: int
    confidence: float
    assigned_exit: int | None = None


@dataclass
class SelfTrainSet:
    """Selected pseudo-labeled target samples.

    `per_class_caps` and `control_factor` are None for the handcrafted
    threshold baseline, which does not balance classes.
    """

    entries: list[SelfTrainEntry]
    per_class_caps: np.ndarray | None = None
    control_factor: float | None = None

    def __len__(self) -> int:
        return len(self.entries)

    def class_counts(self, class_count: int) -> np.ndarray:
        counts = np.zeros(class_count, dtype=np.int64)
        for e in self.entries:
            counts[e.pseudo_label] += 1
        return counts

    def sample_indices(self) -> np.ndarray:
        return np.asarray([e.sample_index for e in self.entries], dtype=np.int64)


def confidence_scores(panel: PredictionPanel) -> np.ndarray:
    """Score every sample: max(mean_pred) times the summed cosine similarity
    of each exit's distribution with the mean. Fills panel.confidence and
    refreshes panel.pseudo_label."""
    probs = panel.probs
    mean = panel.mean_pred
    dots = np.einsum("nkc,nc->nk", probs, mean)
    exit_norms = np.linalg.norm(probs, axis=2)
    mean_norms = np.linalg.norm(mean, axis=1)
    cosines = dots / (exit_norms * mean_norms[:, None])
    v = mean.max(axis=1) * cosines.sum(axis=1)
    panel.confidence = v
    panel.pseudo_label = mean.argmax(axis=1)
    return v


def class_confidence(panel: PredictionPanel) -> np.ndarray:
    """Mean confidence per pseudo-label class; 0 for classes never predicted."""
    if panel.confidence is None:
        confidence_scores(panel)
    e = np.zeros(panel.class_count)
    for c in range(panel.class_count):
        mask = panel.pseudo_label == c
        if mask.any():
            e[c] = panel.confidence[mask].mean()
    return e


def class_thresholds(e, n_target: int, mu: float) -> np.ndarray:
    """Real-valued per-class selection caps: n_target * mu * e_c / sum(e)."""
    if not 0.0 < mu <= 1.0:
        raise ValueError(f"control factor must lie in (0, 1], got {mu}")
    e = np.asarray(e, dtype=np.float64)
    total = e.sum()
    if total <= 0.0:
        raise DegenerateInputError("all class confidences are zero; predictions collapsed")
    return n_target * mu * e / total


def confidence_order(panel: PredictionPanel) -> np.ndarray:
    """Sample indices by descending confidence, ties broken by ascending index."""
    if panel.confidence is None:
        confidence_scores(panel)
    return np.lexsort((np.arange(panel.n_samples), -panel.confidence))


def select_balanced(panel: PredictionPanel, caps) -> SelfTrainSet:
    """Greedy pass in confidence order: admit a sample while its pseudo-label
    class still has fewer picks than its (strict) cap."""
    caps = np.asarray(caps, dtype=np.float64)
    counts = np.zeros(panel.class_count, dtype=np.int64)
    entries = []
    v = panel.confidence
    for j in confidence_order(panel):
        c = int(panel.pseudo_label[j])
        if counts[c] < caps[c]:
            entries.append(SelfTrainEntry(int(j), c, float(v[j])))
            counts[c] += 1
    return SelfTrainSet(
        entries,
        per_class_caps=caps,
        control_factor=float(caps.sum()) / panel.n_samples,
    )


def select_by_threshold(panel: PredictionPanel, tau: float) -> SelfTrainSet:
    """Handcrafted baseline: admit samples whose mean-prediction max exceeds
    tau. No class balancing."""
    if not 0.0 < tau < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {tau}")
    if panel.confidence is None:
        confidence_scores(panel)
    maxima = panel.mean_pred.max(axis=1)
    entries = [
        SelfTrainEntry(int(j), int(panel.pseudo_label[j]), float(panel.confidence[j]))
        for j in np.flatnonzero(maxima > tau)
    ]
    return SelfTrainSet(entries)


def assign_exits(selected: SelfTrainSet, exit_count: int, seed) -> SelfTrainSet:
    """Draw each entry's training exit independently and uniformly from
    {1..exit_count}; deterministic per seed. Reassigned fresh every epoch."""
    if exit_count < 1:
        raise ValueError(f"exit_count must be >= 1, got {exit_count}")
    rng = resolve_rng(seed, "exit-assign")
    draws = rng.integers(1, exit_count + 1, size=len(selected.entries))
    for entry, k in zip(selected.entries, draws):
        entry.assigned_exit = int(k)
    return selected


def target_loss(
    net: MultiExitNet, batch_entries, target_features, weight: float = 1.0
) -> float:
    """Mean cross-entropy of each entry's assigned exit against its pseudo
    label; gradients flow only into head k_j and trunk blocks 1..k_j."""
    entries = list(batch_entries)
    if not entries:
        return 0.0
    for e in entries:
        if e.assigned_exit is None:
            raise UnassignedExitError(
                f"sample {e.sample_index} has no assigned exit; run assign_exits first"
            )
    rows = np.asarray([e.sample_index for e in entries], dtype=np.int64)
    _, cache = forward_all(net, np.asarray(target_features)[rows])
    n = len(entries)
    loss = 0.0
    head_grads = [None] * net.exit_count
    for k in range(1, net.exit_count + 1):
        at_k = [i for i, e in enumerate(entries) if e.assigned_exit == k]
        if not at_k:
            continue
        probs = cache.probs[k - 1]
        grad = np.zeros_like(probs)
        for i in at_k:
            y = entries[i].pseudo_label
            loss += -float(np.log(max(probs[i, y], PROB_FLOOR)))
            grad[i] = probs[i]
            grad[i, y] -= 1.0
        head_grads[k - 1] = grad * (weight / n)
    backprop_exits(net, cache, head_grads=head_grads)
    return loss / n
