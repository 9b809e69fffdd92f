"""Anytime and budgeted evaluation.

Anytime curves report every exit's accuracy against its cumulative MAC cost.
Budgeted classification calibrates a single confidence threshold shared by
exits 1..K-1 on validation data (using cost only, never labels), then
evaluates per-sample early exits on a test set.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .cascade import MultiExitNet, forward_all
from .data import DomainSet
from .errors import BudgetError, CsvFormatError
from .numerics import as_matrix, relu, softmax_rows, affine_forward


@dataclass
class AnytimeCurve:
    accuracies: list  # per exit, over the evaluation set
    macs: list        # cumulative per-sample cost per exit

    def rows(self):
        return [
            (k + 1, self.macs[k], self.accuracies[k]) for k in range(len(self.macs))
        ]


@dataclass
class BudgetProfile:
    """Calibrated early-exit policy and its measured behaviour on one set."""

    threshold: float
    expected_macs: float
    exit_fractions: np.ndarray
    accuracy: float


def eval_anytime(net: MultiExitNet, eval_set: DomainSet) -> AnytimeCurve:
    """Accuracy of each exit's argmax over the whole set, with its cost."""
    labels = eval_set.eval_labels()
    panel, _ = forward_all(net, eval_set.features)
    acc = [
        float((panel.probs[:, k, :].argmax(axis=1) == labels).mean())
        for k in range(net.exit_count)
    ]
    macs = [net.cost_model.cumulative_inference_macs(k + 1) for k in range(net.exit_count)]
    return AnytimeCurve(accuracies=acc, macs=macs)


def dynamic_forward(net: MultiExitNet, sample, threshold: float):
    """Sequential early exit for one sample.

    Walks exits in order and stops at the first whose max probability
    strictly exceeds the threshold (exit K unconditionally). Returns
    (predicted class, exit taken, MACs spent).
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    h = as_matrix(sample)
    for k in range(1, net.exit_count + 1):
        h = relu(affine_forward(net.blocks[k - 1], h))
        probs = softmax_rows(affine_forward(net.heads[k - 1], h))[0]
        if k == net.exit_count or probs.max() > threshold:
            return int(probs.argmax()), k, net.cost_model.cumulative_inference_macs(k)
    raise AssertionError("unreachable: final exit always fires")


def _exit_decisions(max_probs: np.ndarray, threshold: float) -> np.ndarray:
    """Vectorized exit choice (0-based) for rows of per-exit max probabilities."""
    n, k_total = max_probs.shape
    if k_total == 1:
        return np.zeros(n, dtype=np.int64)
    fired = max_probs[:, : k_total - 1] > threshold
    any_fired = fired.any(axis=1)
    first = fired.argmax(axis=1)
    return np.where(any_fired, first, k_total - 1)


def _panel_stats(net, eval_set):
    panel, _ = forward_all(net, eval_set.features)
    max_probs = panel.probs.max(axis=2)
    arg_probs = panel.probs.argmax(axis=2)
    cum = np.asarray(
        [net.cost_model.cumulative_inference_macs(k + 1) for k in range(net.exit_count)],
        dtype=np.float64,
    )
    return max_probs, arg_probs, cum


def profile_at_threshold(net, eval_set: DomainSet, threshold: float) -> BudgetProfile:
    """Measure the early-exit policy on a labeled set at a fixed threshold."""
    labels = eval_set.eval_labels()
    max_probs, arg_probs, cum = _panel_stats(net, eval_set)
    exits = _exit_decisions(max_probs, threshold)
    n = exits.shape[0]
    fractions = np.bincount(exits, minlength=net.exit_count) / n
    preds = arg_probs[np.arange(n), exits]
    return BudgetProfile(
        threshold=float(threshold),
        expected_macs=float(cum[exits].mean()),
        exit_fractions=fractions,
        accuracy=float((preds == labels).mean()),
    )


def calibrate_budget(net: MultiExitNet, validation_set: DomainSet, budget_macs: float) -> BudgetProfile:
    """Pick the largest shared threshold whose expected validation cost fits
    the budget. Candidates are the distinct observed max probabilities at
    exits 1..K-1 plus {0, 1}, so the sweep is exact.
    """
    min_cost = net.cost_model.cumulative_inference_macs(1)
    if budget_macs < min_cost:
        raise BudgetError(
            f"budget {budget_macs} is below the cost of the first exit ({min_cost})"
        )
    max_probs, _, cum = _panel_stats(net, validation_set)
    candidates = np.unique(
        np.concatenate([[0.0, 1.0], max_probs[:, : net.exit_count - 1].ravel()])
    )
    best = 0.0
    for tau in candidates:
        exits = _exit_decisions(max_probs, tau)
        if cum[exits].mean() <= budget_macs and tau >= best:
            best = float(tau)
    return profile_at_threshold(net, validation_set, best)


def eval_budget_curve(
    net: MultiExitNet, validation_set: DomainSet, test_set: DomainSet, budget_grid
):
    """Calibrate per budget on validation, measure on test.

    Returns one row per budget: (budget, threshold, test expected MACs, test
    accuracy, test exit fractions).
    """
    budgets = [float(b) for b in budget_grid]
    if budgets != sorted(budgets):
        raise ValueError("budget grid must be sorted ascending")
    rows = []
    for budget in budgets:
        calibrated = calibrate_budget(net, validation_set, budget)
        measured = profile_at_threshold(net, test_set, calibrated.threshold)
        rows.append(
            (budget, calibrated.threshold, measured.expected_macs,
             measured.accuracy, measured.exit_fractions)
        )
    return rows


def write_anytime_csv(curve: AnytimeCurve, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("exit,cumulative_macs,accuracy\n")
        for k, macs, acc in curve.rows():
            fh.write(f"{k},{macs},{acc!r}\n")


def load_anytime_csv(path) -> AnytimeCurve:
    macs, accs = [], []
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["exit", "cumulative_macs", "accuracy"]:
            raise CsvFormatError(f"{path}: unexpected anytime header {reader.fieldnames}")
        for rec in reader:
            macs.append(int(rec["cumulative_macs"]))
            accs.append(float(rec["accuracy"]))
    return AnytimeCurve(accuracies=accs, macs=macs)


def write_budget_csv(rows, path, exit_count: int) -> None:
    header = ["budget", "threshold", "expected_macs", "accuracy"]
    header += [f"frac_exit_{k}" for k in range(1, exit_count + 1)]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for budget, tau, macs, acc, fracs in rows:
            fields = [repr(budget), repr(tau), repr(macs), repr(acc)]
            fields += [repr(float(f)) for f in fracs]
            fh.write(",".join(fields) + "\n")


def load_budget_csv(path):
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        names = reader.fieldnames or []
        fixed = ["budget", "threshold", "expected_macs", "accuracy"]
        if names[: len(fixed)] != fixed or not all(
            n.startswith("frac_exit_") for n in names[len(fixed):]
        ):
            raise CsvFormatError(f"{path}: unexpected budget header {names}")
        for rec in reader:
            fracs = np.asarray(
                [float(rec[n]) for n in names[len(fixed):]], dtype=np.float64
            )
            rows.append(
                (float(rec["budget"]), float(rec["threshold"]),
                 float(rec["expected_macs"]), float(rec["accuracy"]), fracs)
            )
    return rows
