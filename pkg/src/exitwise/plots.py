"""Figure rendering for the report paths.

Every CLI command that writes a delimited report also drops a PNG next to it
(unless --no-plot). Uses the Agg backend so headless runs work.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

DPI = 150

plt.rcParams.update({
    "figure.figsize": (6.0, 4.0),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
})


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)


def save_anytime_figure(curve, path):
    fig, ax = plt.subplots()
    ax.plot(curve.macs, curve.accuracies, marker="o")
    for k, (m, a) in enumerate(zip(curve.macs, curve.accuracies), start=1):
        ax.annotate(f"exit {k}", (m, a), textcoords="offset points", xytext=(4, 4))
    ax.set_xlabel("cumulative MACs per sample")
    ax.set_ylabel("accuracy")
    ax.set_title("Anytime prediction")
    _finish(fig, path)


def save_budget_figure(rows, path):
    budgets = [r[0] for r in rows]
    macs = [r[2] for r in rows]
    accs = [r[3] for r in rows]
    fig, ax = plt.subplots()
    ax.plot(macs, accs, marker="o", label="measured (test)")
    ax.plot(budgets, accs, marker=".", linestyle="--", alpha=0.6, label="budget grid")
    ax.set_xlabel("MACs per sample")
    ax.set_ylabel("accuracy")
    ax.set_title("Budgeted classification")
    ax.legend()
    _finish(fig, path)


def save_metrics_figure(metrics, path):
    epochs = [m.epoch for m in metrics]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.5, 4.0))
    ax1.plot(epochs, [m.report.total for m in metrics], label="total")
    ax1.plot(epochs, [m.report.l_s for m in metrics], label="source")
    ax1.plot(epochs, [m.report.l_d for m in metrics], label="domain")
    ax1.plot(epochs, [m.report.l_t for m in metrics], label="self-train")
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("loss")
    ax1.legend()

    n_exits = len(metrics[0].source_val_acc)
    has_target = all(m.target_acc is not None for m in metrics)
    for k in range(n_exits):
        if has_target:
            ax2.plot(epochs, [m.target_acc[k] for m in metrics], label=f"target exit {k + 1}")
        else:
            ax2.plot(epochs, [m.source_val_acc[k] for m in metrics], label=f"src-val exit {k + 1}")
    ax2.set_xlabel("epoch")
    ax2.set_ylabel("accuracy" + (" (target, oracle)" if has_target else " (source val)"))
    ax2.legend()
    _finish(fig, path)


def save_selection_figure(confidence, selected_mask, path):
    confidence = np.asarray(confidence)
    selected_mask = np.asarray(selected_mask, dtype=bool)
    fig, ax = plt.subplots()
    bins = np.linspace(0.0, confidence.max() * 1.01, 40)
    ax.hist(confidence[~selected_mask], bins=bins, alpha=0.6, label="rejected")
    ax.hist(confidence[selected_mask], bins=bins, alpha=0.6, label="selected")
    ax.set_xlabel("confidence score")
    ax.set_ylabel("samples")
    ax.set_title("Self-training selection")
    ax.legend()
    _finish(fig, path)
