"""Two-step training: domain-confusion warm-up, then iterated class-balanced
self-training, with per-epoch metrics and a shared annealing schedule.

The annealing progress variable runs over the combined warm-up plus
self-training step budget, so learning rate and reversal strength evolve
continuously across the two phases.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .cascade import CascadeConfig, MultiExitNet, forward_all
from .data import BatchPlan, DomainSet, batches_per_epoch, make_mixed_batches
from .errors import ConfigError, EmptyDomainError
from .losses import LossReport, annealed_lr, domain_loss, grl_schedule, source_loss
from .numerics import sgd_momentum_step
from .seeds import stream
from .selftrain import (
    SelfTrainSet,
    assign_exits,
    class_confidence,
    class_thresholds,
    confidence_scores,
    select_balanced,
    target_loss,
)

WARMUP = "warmup"
SELFTRAIN = "selftrain"


@dataclass
class TrainConfig:
    alpha: float = 1.0
    beta: float = 1.0
    mu: float = 0.8
    warmup_epochs: int = 20
    selftrain_epochs: int = 30
    batch_size: int = 36
    pseudo_fraction: float = 1.0 / 3.0
    lr0: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 0.0
    seed: int = 0
    lr_anneal: bool = True
    grl_anneal: bool = True
    grl_lambda: float = 1.0  # fixed strength when grl_anneal is off
    source_val_fraction: float = 0.1

    def validate(self) -> None:
        if self.alpha < 0 or self.beta < 0:
            raise ConfigError("alpha and beta must be >= 0")
        if not 0.0 < self.mu <= 1.0:
            raise ConfigError(f"mu must lie in (0, 1], got {self.mu}")
        if self.warmup_epochs < 0 or self.selftrain_epochs < 0:
            raise ConfigError("epoch counts must be >= 0")
        if self.lr0 <= 0:
            raise ConfigError("lr0 must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError(f"momentum must lie in [0, 1), got {self.momentum}")
        if not 0.0 <= self.source_val_fraction < 1.0:
            raise ConfigError("source_val_fraction must lie in [0, 1)")
        BatchPlan(self.batch_size, self.pseudo_fraction).validate()

    @property
    def plan(self) -> BatchPlan:
        return BatchPlan(self.batch_size, self.pseudo_fraction)


@dataclass
class EpochMetrics:
    epoch: int
    phase: str
    lr: float
    grl_lambda: float
    report: LossReport
    source_val_acc: list
    target_acc: list | None
    selected_size: int
    selected_per_class: list
    pseudo_label_acc: float | None
    wall_ms: float  # not serialized; run outputs must be byte-reproducible


class TrainSchedule:
    """Global step counter mapping onto [0, 1] progress for both anneals."""

    def __init__(self, cfg: TrainConfig, total_steps: int):
        self.cfg = cfg
        self.total_steps = max(total_steps, 1)
        self.step = 0

    @classmethod
    def for_run(cls, cfg: TrainConfig, n_source: int) -> "TrainSchedule":
        plan = cfg.plan
        total = cfg.warmup_epochs * batches_per_epoch(n_source, plan, with_pseudo=False)
        total += cfg.selftrain_epochs * batches_per_epoch(n_source, plan, with_pseudo=True)
        return cls(cfg, total)

    @property
    def progress(self) -> float:
        return min(self.step / self.total_steps, 1.0)

    def lr(self) -> float:
        if self.cfg.lr_anneal:
            return annealed_lr(self.cfg.lr0, self.progress)
        return self.cfg.lr0

    def grl(self) -> float:
        if self.cfg.grl_anneal:
            return grl_schedule(self.progress)
        return self.cfg.grl_lambda


def exit_accuracies(net: MultiExitNet, features, labels) -> list:
    """Per-exit argmax accuracy over a labeled set."""
    panel, _ = forward_all(net, features)
    y = np.asarray(labels)
    return [float((panel.probs[:, k, :].argmax(axis=1) == y).mean()) for k in range(net.exit_count)]


def _train_one_epoch(net, batches, target_features, cfg, schedule):
    sums = {"l_s": 0.0, "l_d": 0.0, "l_t": 0.0, "total": 0.0}
    per_ls = np.zeros(net.exit_count)
    per_ld = np.zeros(net.exit_count)
    for batch in batches:
        lr = schedule.lr()
        lam = schedule.grl()
        net.zero_grads()
        l_s, exit_ls = source_loss(net, batch.source_x, batch.source_y)
        l_d, exit_ld = domain_loss(net, batch.source_x, batch.target_x, lam, weight=cfg.alpha)
        l_t = target_loss(net, batch.entries, target_features, weight=cfg.beta)
        for _, layer in net.named_layers():
            sgd_momentum_step(layer, lr, cfg.momentum, cfg.weight_decay)
        schedule.step += 1
        sums["l_s"] += l_s
        sums["l_d"] += l_d
        sums["l_t"] += l_t
        sums["total"] += l_s + cfg.alpha * l_d + cfg.beta * l_t
        per_ls += exit_ls
        per_ld += exit_ld
    n = len(batches)
    return LossReport(
        l_s=sums["l_s"] / n,
        l_d=sums["l_d"] / n,
        l_t=sums["l_t"] / n,
        alpha=cfg.alpha,
        beta=cfg.beta,
        total=sums["total"] / n,
        per_exit_ls=list(per_ls / n),
        per_exit_ld=list(per_ld / n),
    )


def _epoch_metrics(net, cfg, epoch, phase, lr, lam, report, source_val, target, selected):
    src_acc = exit_accuracies(net, source_val.features, source_val.labels)
    tgt_acc = None
    pseudo_acc = None
    if target.shadow_labels is not None:
        tgt_acc = exit_accuracies(net, target.features, target.shadow_labels)
        if selected is not None and len(selected):
            idx = selected.sample_indices()
            truth = target.shadow_labels[idx]
            guesses = np.asarray([e.pseudo_label for e in selected.entries])
            pseudo_acc = float((guesses == truth).mean())
    counts = (
        selected.class_counts(target.class_count) if selected is not None else
        np.zeros(target.class_count, dtype=np.int64)
    )
    return EpochMetrics(
        epoch=epoch,
        phase=phase,
        lr=lr,
        grl_lambda=lam,
        report=report,
        source_val_acc=src_acc,
        target_acc=tgt_acc,
        selected_size=len(selected) if selected is not None else 0,
        selected_per_class=[int(c) for c in counts],
        pseudo_label_acc=pseudo_acc,
        wall_ms=0.0,
    )


def step1_warmup(
    net: MultiExitNet,
    source: DomainSet,
    target: DomainSet,
    cfg: TrainConfig,
    schedule: TrainSchedule | None = None,
    source_val: DomainSet | None = None,
    epoch_offset: int = 0,
):
    """Optimize source classification plus weighted domain confusion.

    With warmup_epochs == 0 the network is returned untouched.
    """
    cfg.validate()
    if source.n == 0 or target.n == 0:
        raise EmptyDomainError("warm-up needs non-empty source and target sets")
    metrics = []
    if cfg.warmup_epochs == 0:
        return net, metrics
    if schedule is None:
        schedule = TrainSchedule(
            cfg, cfg.warmup_epochs * batches_per_epoch(source.n, cfg.plan, with_pseudo=False)
        )
    val = source_val if source_val is not None else source
    t0 = time.perf_counter()
    for e in range(cfg.warmup_epochs):
        lr, lam = schedule.lr(), schedule.grl()
        batches = make_mixed_batches(
            source, target, None, cfg.plan, stream(cfg.seed, f"batches:w{e}")
        )
        report = _train_one_epoch(net, batches, target.features, cfg, schedule)
        m = _epoch_metrics(
            net, cfg, epoch_offset + e, WARMUP, lr, lam, report, val, target, None
        )
        m.wall_ms = (time.perf_counter() - t0) * 1000.0
        t0 = time.perf_counter()
        metrics.append(m)
    return net, metrics


def build_selection(net, target: DomainSet, cfg: TrainConfig, epoch: int) -> SelfTrainSet:
    """One selection round: score the whole target set with the current
    parameters, derive caps, pick greedily, scatter exits."""
    panel, _ = forward_all(net, target.features)
    confidence_scores(panel)
    e = class_confidence(panel)
    caps = class_thresholds(e, target.n, cfg.mu)
    selected = select_balanced(panel, caps)
    return assign_exits(selected, net.exit_count, stream(cfg.seed, f"exit-assign:{epoch}"))


def step2_selftrain(
    net: MultiExitNet,
    source: DomainSet,
    target: DomainSet,
    cfg: TrainConfig,
    schedule: TrainSchedule | None = None,
    source_val: DomainSet | None = None,
    epoch_offset: int = 0,
):
    """Iterate: rebuild the pseudo-labeled pool, then run one epoch of mixed
    batches minimizing the full objective."""
    cfg.validate()
    if source.n == 0 or target.n == 0:
        raise EmptyDomainError("self-training needs non-empty source and target sets")
    metrics = []
    if cfg.selftrain_epochs == 0:
        return net, metrics
    if schedule is None:
        schedule = TrainSchedule(
            cfg, cfg.selftrain_epochs * batches_per_epoch(source.n, cfg.plan, with_pseudo=True)
        )
    val = source_val if source_val is not None else source
    t0 = time.perf_counter()
    for i in range(cfg.selftrain_epochs):
        lr, lam = schedule.lr(), schedule.grl()
        selected = build_selection(net, target, cfg, epoch_offset + i)
        batches = make_mixed_batches(
            source, target, selected, cfg.plan, stream(cfg.seed, f"batches:s{i}")
        )
        report = _train_one_epoch(net, batches, target.features, cfg, schedule)
        m = _epoch_metrics(
            net, cfg, epoch_offset + i, SELFTRAIN, lr, lam, report, val, target, selected
        )
        m.wall_ms = (time.perf_counter() - t0) * 1000.0
        t0 = time.perf_counter()
        metrics.append(m)
    return net, metrics


def split_source_val(source: DomainSet, fraction: float, seed: int):
    """Deterministically carve a held-out slice off the source set."""
    if fraction <= 0.0:
        return source, source
    n_val = int(round(fraction * source.n))
    if n_val == 0 or n_val >= source.n:
        return source, source
    order = stream(seed, "source-val").permutation(source.n)
    val_idx, train_idx = np.sort(order[:n_val]), np.sort(order[n_val:])
    make = lambda idx: DomainSet(
        source.features[idx], source.labels[idx], source.domain_tag, source.class_count
    )
    return make(train_idx), make(val_idx)


def run_training(
    source: DomainSet,
    target: DomainSet,
    cfg: TrainConfig,
    net_config: CascadeConfig,
):
    """Full two-step run on a freshly initialized network.

    Returns (net, metrics list). Target accuracy and pseudo-label accuracy
    appear in the metrics only when the target set carries shadow labels;
    they never influence training.
    """
    cfg.validate()
    net_config.validate()
    net = MultiExitNet(net_config, seed=cfg.seed)
    train_split, val_split = split_source_val(source, cfg.source_val_fraction, cfg.seed)
    schedule = TrainSchedule.for_run(cfg, train_split.n)
    net, warm_metrics = step1_warmup(
        net, train_split, target, cfg, schedule=schedule, source_val=val_split
    )
    net, self_metrics = step2_selftrain(
        net,
        train_split,
        target,
        cfg,
        schedule=schedule,
        source_val=val_split,
        epoch_offset=cfg.warmup_epochs,
    )
    return net, warm_metrics + self_metrics


def write_metrics_csv(metrics, path, exit_count: int, class_count: int) -> None:
    """Fixed-schema per-epoch CSV.

    Columns: epoch, phase, lr, grl_lambda, loss_total, loss_source,
    loss_domain, loss_selftrain, src_val_acc_exit_1..K, tgt_acc_exit_1..K,
    selected_size, selected_class_0..C-1, pseudo_label_acc. Unavailable
    oracle fields are left empty. Wall-clock time is deliberately excluded
    so repeated runs are byte-identical.
    """
    header = ["epoch", "phase", "lr", "grl_lambda", "loss_total", "loss_source",
              "loss_domain", "loss_selftrain"]
    header += [f"src_val_acc_exit_{k}" for k in range(1, exit_count + 1)]
    header += [f"tgt_acc_exit_{k}" for k in range(1, exit_count + 1)]
    header += ["selected_size"]
    header += [f"selected_class_{c}" for c in range(class_count)]
    header += ["pseudo_label_acc"]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for m in metrics:
            row = [str(m.epoch), m.phase, repr(m.lr), repr(m.grl_lambda),
                   repr(m.report.total), repr(m.report.l_s), repr(m.report.l_d),
                   repr(m.report.l_t)]
            row += [repr(a) for a in m.source_val_acc]
            row += [repr(a) for a in m.target_acc] if m.target_acc is not None else [""] * exit_count
            row += [str(m.selected_size)]
            row += [str(c) for c in m.selected_per_class]
            row += [repr(m.pseudo_label_acc) if m.pseudo_label_acc is not None else ""]
            fh.write(",".join(row) + "\n")
