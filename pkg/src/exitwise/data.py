"""Synthetic domain pairs, delimited feature files, and mixed-batch assembly.

CSV layout: one row per sample, first field an integer class label (-1 for
unlabeled), remaining fields decimal features. Comma-delimited, '.' decimal
separator, no header, LF line endings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, CsvFormatError, DimensionError, EmptyDomainError
from .seeds import resolve_rng

UNLABELED = -1

SOURCE = "source"
TARGET = "target"


@dataclass
class DomainSet:
    """A feature matrix with per-row class labels (or the UNLABELED sentinel).

    Target sets used for adaptation expose every row as UNLABELED; their
    ground truth, when known, lives in `shadow_labels` and is read only by
    evaluation code.
    """

    features: np.ndarray
    labels: np.ndarray
    domain_tag: str
    class_count: int
    shadow_labels: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def validate(self) -> None:
        if self.features.ndim != 2:
            raise DimensionError(f"features must be 2-D, got {self.features.shape}")
        if self.labels.shape != (self.n,):
            raise DimensionError("labels must be one per feature row")
        if self.class_count < 1:
            raise ConfigError(f"class_count must be positive, got {self.class_count}")
        labeled = self.labels[self.labels != UNLABELED]
        if labeled.size and (labeled.min() < 0 or labeled.max() >= self.class_count):
            raise ConfigError(f"labels outside [0, {self.class_count})")
        if self.domain_tag == SOURCE and (self.labels == UNLABELED).any():
            raise ConfigError("source sets must be fully labeled")
        if not np.isfinite(self.features).all():
            raise ConfigError("features contain NaN or Inf")

    def eval_labels(self) -> np.ndarray:
        """Labels usable for scoring: exposed ones, else the shadow copy."""
        if (self.labels != UNLABELED).all():
            return self.labels
        if self.shadow_labels is not None:
            return self.shadow_labels
        from .errors import MissingLabelsError

        raise MissingLabelsError(f"{self.domain_tag} set has no usable labels")


def _balanced_counts(n: int, classes: int) -> list[int]:
    return [n // classes + (1 if c < n % classes else 0) for c in range(classes)]


def _rotation(deg: float) -> np.ndarray:
    t = math.radians(deg)
    return np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])


def gen_two_moons_shift(
    n_per_domain: int, rotation_deg: float, noise_sigma: float, seed
) -> tuple[DomainSet, DomainSet]:
    """Two interleaving half-circles; the target is the same draw rotated
    about the origin. Target labels are kept as shadows only."""
    if n_per_domain < 2:
        raise ConfigError("n_per_domain must be >= 2")
    if noise_sigma < 0:
        raise ConfigError("noise_sigma must be >= 0")
    rng = resolve_rng(seed, "two-moons")
    n_outer, n_inner = _balanced_counts(n_per_domain, 2)
    t_out = np.linspace(0.0, math.pi, n_outer)
    t_in = np.linspace(0.0, math.pi, n_inner)
    pts = np.concatenate(
        [
            np.column_stack([np.cos(t_out), np.sin(t_out)]),
            np.column_stack([1.0 - np.cos(t_in), 0.5 - np.sin(t_in)]),
        ]
    )
    labels = np.concatenate([np.zeros(n_outer, np.int64), np.ones(n_inner, np.int64)])
    pts = pts + rng.normal(0.0, noise_sigma, size=pts.shape) if noise_sigma > 0 else pts
    order = rng.permutation(n_per_domain)
    pts, labels = pts[order], labels[order]

    target_pts = pts @ _rotation(rotation_deg).T
    source = DomainSet(pts, labels.copy(), SOURCE, 2)
    target = DomainSet(
        target_pts,
        np.full(n_per_domain, UNLABELED, np.int64),
        TARGET,
        2,
        shadow_labels=labels.copy(),
    )
    source.validate()
    target.validate()
    return source, target


def gen_blobs_shift(
    n_per_domain: int, class_count: int, dim: int, shift_vector, seed
) -> tuple[DomainSet, DomainSet]:
    """Unit-variance Gaussian class blobs; the target is the same draw
    translated by shift_vector."""
    if class_count < 2 or dim < 1:
        raise ConfigError("need class_count >= 2 and dim >= 1")
    shift = np.asarray(shift_vector, dtype=np.float64).ravel()
    if shift.shape != (dim,):
        raise DimensionError(f"shift_vector must have {dim} entries, got {shift.shape}")
    rng = resolve_rng(seed, "blobs")
    centers = rng.uniform(-5.0, 5.0, size=(class_count, dim))
    counts = _balanced_counts(n_per_domain, class_count)
    labels = np.concatenate([np.full(m, c, np.int64) for c, m in enumerate(counts)])
    pts = centers[labels] + rng.normal(0.0, 1.0, size=(n_per_domain, dim))
    order = rng.permutation(n_per_domain)
    pts, labels = pts[order], labels[order]

    source = DomainSet(pts, labels.copy(), SOURCE, class_count)
    target = DomainSet(
        pts + shift,
        np.full(n_per_domain, UNLABELED, np.int64),
        TARGET,
        class_count,
        shadow_labels=labels.copy(),
    )
    source.validate()
    target.validate()
    return source, target


def save_csv(dataset: DomainSet, path, labels: np.ndarray | None = None) -> None:
    """Write the set in the delimited layout; `labels` overrides the exposed
    column (used to emit shadow labels into evaluation files)."""
    out = dataset.labels if labels is None else labels
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row, lab in zip(dataset.features, out):
            fields = [str(int(lab))] + [repr(float(v)) for v in row]
            fh.write(",".join(fields) + "\n")


def load_csv(path, domain_tag: str = SOURCE, class_count: int | None = None) -> DomainSet:
    features: list[list[float]] = []
    labels: list[int] = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) < 2:
                raise CsvFormatError(f"{path}:{lineno}: need a label and >=1 feature")
            if width is None:
                width = len(parts)
            elif len(parts) != width:
                raise CsvFormatError(
                    f"{path}:{lineno}: expected {width} fields, found {len(parts)}"
                )
            try:
                labels.append(int(parts[0]))
                features.append([float(v) for v in parts[1:]])
            except ValueError as exc:
                raise CsvFormatError(f"{path}:{lineno}: {exc}") from exc
    if not features:
        raise CsvFormatError(f"{path}: no data rows")
    lab = np.asarray(labels, dtype=np.int64)
    if class_count is None:
        labeled = lab[lab != UNLABELED]
        if labeled.size == 0:
            raise ConfigError(f"{path} is fully unlabeled; pass class_count explicitly")
        class_count = int(labeled.max()) + 1
    ds = DomainSet(np.asarray(features, dtype=np.float64), lab, domain_tag, class_count)
    ds.validate()
    return ds


@dataclass
class BatchPlan:
    """Mixed-batch recipe: total rows per batch and the pseudo-label share."""

    batch_size: int = 36
    pseudo_fraction: float = 1.0 / 3.0

    def validate(self) -> None:
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0.0 <= self.pseudo_fraction <= 1.0:
            raise ConfigError(f"pseudo_fraction must lie in [0, 1], got {self.pseudo_fraction}")

    @property
    def pseudo_quota(self) -> int:
        # Half-up rounding so the quota is portable across platforms.
        return int(math.floor(self.batch_size * self.pseudo_fraction + 0.5))


@dataclass
class MixedBatch:
    """One optimization step's worth of rows.

    `entries` are the pseudo-labeled picks for this batch (empty during
    warm-up); `target_x` is the unlabeled block paired with the source rows
    for the domain loss.
    """

    source_x: np.ndarray
    source_y: np.ndarray
    target_x: np.ndarray
    entries: list = field(default_factory=list)


def batches_per_epoch(n_source: int, plan: BatchPlan, with_pseudo: bool) -> int:
    quota = plan.pseudo_quota if with_pseudo else 0
    per_batch = plan.batch_size - quota
    if per_batch < 1:
        raise ConfigError("pseudo quota leaves no room for source rows in a batch")
    return math.ceil(n_source / per_batch)


def make_mixed_batches(
    source: DomainSet, target: DomainSet, selftrain, plan: BatchPlan, seed
) -> list[MixedBatch]:
    """Assemble one epoch of batches.

    Every source row appears at least once (the last batch wraps around the
    shuffled order); each batch carries the full pseudo quota by cycling the
    self-training set, and a same-sized unlabeled target block for the
    domain loss.
    """
    plan.validate()
    if source.n == 0:
        raise EmptyDomainError("source set is empty")
    if target.n == 0:
        raise EmptyDomainError("target set is empty")
    rng = resolve_rng(seed, "batches")
    entries = list(selftrain.entries) if selftrain is not None else []
    quota = plan.pseudo_quota if entries else 0
    per_batch_source = plan.batch_size - quota
    if per_batch_source < 1:
        raise ConfigError("pseudo quota leaves no room for source rows in a batch")

    source_order = rng.permutation(source.n)
    target_order = rng.permutation(target.n)
    if entries:
        entry_order = rng.permutation(len(entries))
        entries = [entries[i] for i in entry_order]

    n_batches = math.ceil(source.n / per_batch_source)
    batches = []
    entry_cursor = 0
    target_cursor = 0
    for b in range(n_batches):
        src_idx = source_order[
            np.arange(b * per_batch_source, (b + 1) * per_batch_source) % source.n
        ]
        tgt_idx = target_order[
            np.arange(target_cursor, target_cursor + plan.batch_size) % target.n
        ]
        target_cursor = (target_cursor + plan.batch_size) % target.n
        picked = []
        for _ in range(quota):
            picked.append(entries[entry_cursor % len(entries)])
            entry_cursor += 1
        batches.append(
            MixedBatch(
                source_x=source.features[src_idx],
                source_y=source.labels[src_idx],
                target_x=target.features[tgt_idx],
                entries=picked,
            )
        )
    return batches
