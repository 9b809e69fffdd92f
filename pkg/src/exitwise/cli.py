"""Command-line interface.

Commands: gen-data, train, select-dump, eval-anytime, eval-budget. Every
command is a pure function of its flags, config file, input files and seed;
repeated invocations produce byte-identical outputs. Exit status 0 on
success, 2 for usage or configuration problems, 1 for runtime errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import load_checkpoint, save_checkpoint
from .cascade import forward_all
from .config import ConfigError, build_run_config, parse_shift
from .data import (
    TARGET,
    DomainSet,
    gen_blobs_shift,
    gen_two_moons_shift,
    load_csv,
    save_csv,
)
from .errors import ExitwiseError
from .inference import (
    eval_anytime,
    eval_budget_curve,
    write_anytime_csv,
    write_budget_csv,
)
from .seeds import stream
from .selftrain import (
    assign_exits,
    class_confidence,
    class_thresholds,
    confidence_scores,
    select_balanced,
    select_by_threshold,
)
from .train import run_training, write_metrics_csv


def _budget_list(raw: str):
    try:
        budgets = [float(v) for v in raw.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad budget list '{raw}': {exc}") from exc
    if not budgets:
        raise argparse.ArgumentTypeError("budget list is empty")
    if budgets != sorted(budgets):
        raise argparse.ArgumentTypeError("budgets must be ascending")
    return budgets


def _add_common(parser):
    parser.add_argument("--config", type=Path, default=None, help="flat key=value config file")
    parser.add_argument("--seed", type=int, default=None, help="master 64-bit seed")
    parser.add_argument("--out", type=Path, default=Path("."), help="output directory")
    parser.add_argument("--no-plot", action="store_true", help="skip PNG figure rendering")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="exitwise",
        description="Multi-exit domain adaptation with budgeted inference.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write source.csv, target.csv, target_eval.csv")
    _add_common(p)
    p.add_argument("--kind", choices=["two-moons", "blobs"], default=None)
    p.add_argument("--n", type=int, default=None, help="samples per domain")
    p.add_argument("--rotate", type=float, default=None, help="target rotation, degrees")
    p.add_argument("--sigma", type=float, default=None, help="two-moons noise sigma")
    p.add_argument("--classes", type=int, default=None, help="blob class count")
    p.add_argument("--dim", type=int, default=None, help="blob feature dimension")
    p.add_argument("--shift", type=str, default=None, help="blob shift vector a,b,...")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="run warm-up + self-training; write checkpoint and metrics")
    _add_common(p)
    p.add_argument("--source", type=Path, required=True)
    p.add_argument("--target", type=Path, required=True)
    p.add_argument("--target-eval", type=Path, default=None,
                   help="row-aligned labeled copy of --target for oracle metrics")
    for name in ("alpha", "beta", "mu", "lr0", "momentum", "weight-decay",
                 "pseudo-fraction", "source-val-fraction", "grl-lambda"):
        p.add_argument(f"--{name}", type=float, default=None)
    for name in ("warmup-epochs", "selftrain-epochs", "batch-size",
                 "exit-count", "hidden-width", "disc-width"):
        p.add_argument(f"--{name}", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("select-dump", help="score the target set and dump the selection")
    _add_common(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--target", type=Path, required=True)
    p.add_argument("--mode", choices=["confidence", "threshold"], default=None)
    p.add_argument("--tau", type=float, default=None, help="threshold-mode cutoff")
    p.add_argument("--mu", type=float, default=None, help="confidence-mode control factor")
    p.set_defaults(func=cmd_select_dump)

    p = sub.add_parser("eval-anytime", help="per-exit accuracy vs cumulative cost")
    _add_common(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--eval", type=Path, required=True, help="labeled evaluation file")
    p.set_defaults(func=cmd_eval_anytime)

    p = sub.add_parser("eval-budget", help="budgeted classification curve")
    _add_common(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--eval", type=Path, required=True, help="labeled test file")
    p.add_argument("--val", type=Path, default=None,
                   help="labeled calibration file (defaults to --eval)")
    p.add_argument("--budgets", type=_budget_list, required=True,
                   help="ascending MAC budgets, comma separated")
    p.set_defaults(func=cmd_eval_budget)
    return parser


def _config_from_args(args, extra_keys=()):
    overrides = {}
    for key in ("seed",) + tuple(extra_keys):
        attr = key.replace("-", "_")
        if hasattr(args, attr) and getattr(args, attr) is not None:
            overrides[attr] = getattr(args, attr)
    return build_run_config(args.config, overrides)


def cmd_gen_data(args) -> int:
    cfg = _config_from_args(args, ("kind", "dim", "shift"))
    # short flag spellings map onto longer config keys
    if args.n is not None:
        cfg.n_per_domain = args.n
    if args.rotate is not None:
        cfg.rotation_deg = args.rotate
    if args.sigma is not None:
        cfg.noise_sigma = args.sigma
    if args.classes is not None:
        cfg.class_count = args.classes
    if cfg.kind == "two-moons":
        source, target = gen_two_moons_shift(
            cfg.n_per_domain, cfg.rotation_deg, cfg.noise_sigma, cfg.seed
        )
    else:
        shift = parse_shift(cfg.shift, cfg.dim)
        classes = cfg.class_count if cfg.class_count is not None else 3
        source, target = gen_blobs_shift(
            cfg.n_per_domain, classes, cfg.dim, shift, cfg.seed
        )
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    save_csv(source, out / "source.csv")
    save_csv(target, out / "target.csv")
    save_csv(target, out / "target_eval.csv", labels=target.shadow_labels)
    print(f"wrote {source.n} source rows, {target.n} target rows to {out}")
    return 0


def _load_target_with_shadow(target_path, eval_path, class_count):
    target = load_csv(target_path, domain_tag=TARGET, class_count=class_count)
    if eval_path is None:
        return target
    shadow = load_csv(eval_path, class_count=class_count)
    if shadow.n != target.n or not np.array_equal(shadow.features, target.features):
        raise ConfigError(
            f"{eval_path} is not a row-aligned labeled copy of {target_path}"
        )
    target.shadow_labels = shadow.labels
    return target


def cmd_train(args) -> int:
    keys = ("alpha", "beta", "mu", "lr0", "momentum", "weight-decay",
            "pseudo-fraction", "source-val-fraction", "grl-lambda",
            "warmup-epochs", "selftrain-epochs", "batch-size",
            "exit-count", "hidden-width", "disc-width")
    cfg = _config_from_args(args, keys)
    source = load_csv(args.source)
    class_count = cfg.class_count if cfg.class_count is not None else source.class_count
    target = _load_target_with_shadow(args.target, args.target_eval, class_count)
    net_config = cfg.cascade_config(source.dim, class_count)
    train_cfg = cfg.train_config()

    net, metrics = run_training(source, target, train_cfg, net_config)

    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(net, out / "model.ckpt")
    write_metrics_csv(metrics, out / "metrics.csv", net.exit_count, net_config.class_count)
    summary = {
        "epochs": len(metrics),
        "final_source_val_acc": metrics[-1].source_val_acc if metrics else [],
        "final_target_acc": metrics[-1].target_acc if metrics else None,
        "final_selected_size": metrics[-1].selected_size if metrics else 0,
        "final_selected_per_class": metrics[-1].selected_per_class if metrics else [],
        "final_pseudo_label_acc": metrics[-1].pseudo_label_acc if metrics else None,
    }
    (out / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    if not args.no_plot and metrics:
        from .plots import save_metrics_figure

        save_metrics_figure(metrics, out / "metrics.png")
    print(f"trained {len(metrics)} epochs; outputs in {out}")
    if metrics and metrics[-1].target_acc is not None:
        accs = " ".join(f"{a:.4f}" for a in metrics[-1].target_acc)
        print(f"final per-exit target accuracy (oracle): {accs}")
    return 0


def cmd_select_dump(args) -> int:
    cfg = _config_from_args(args, ("mode", "tau", "mu"))
    net = load_checkpoint(args.checkpoint)
    target = load_csv(args.target, domain_tag=TARGET, class_count=net.config.class_count)
    panel, _ = forward_all(net, target.features)
    confidence_scores(panel)
    if cfg.mode == "confidence":
        caps = class_thresholds(class_confidence(panel), target.n, cfg.mu)
        selected = select_balanced(panel, caps)
    else:
        selected = select_by_threshold(panel, cfg.tau)
    assign_exits(selected, net.exit_count, stream(cfg.seed, "select-dump"))

    chosen = {e.sample_index: e for e in selected.entries}
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    path = out / "selection.csv"
    counts = selected.class_counts(panel.class_count)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("sample_index,pseudo_label,confidence,assigned_exit,selected\n")
        for j in range(panel.n_samples):
            entry = chosen.get(j)
            exit_k = entry.assigned_exit if entry is not None else -1
            fh.write(
                f"{j},{int(panel.pseudo_label[j])},{float(panel.confidence[j])!r},"
                f"{exit_k},{1 if entry is not None else 0}\n"
            )
        fh.write(f"# selected_total={len(selected)} per_class=" +
                 ",".join(str(int(c)) for c in counts) + "\n")
    if not args.no_plot:
        from .plots import save_selection_figure

        mask = np.zeros(panel.n_samples, dtype=bool)
        mask[list(chosen)] = True
        save_selection_figure(panel.confidence, mask, out / "selection.png")
    print(f"mode={cfg.mode} selected {len(selected)}/{panel.n_samples} samples; "
          f"per-class {list(map(int, counts))}")
    return 0


def cmd_eval_anytime(args) -> int:
    cfg = _config_from_args(args)
    net = load_checkpoint(args.checkpoint)
    eval_set = load_csv(args.eval, class_count=net.config.class_count)
    curve = eval_anytime(net, eval_set)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    write_anytime_csv(curve, out / "anytime.csv")
    if not args.no_plot:
        from .plots import save_anytime_figure

        save_anytime_figure(curve, out / "anytime.png")
    for k, macs, acc in curve.rows():
        print(f"exit {k}: macs={macs} accuracy={acc:.4f}")
    return 0


def cmd_eval_budget(args) -> int:
    cfg = _config_from_args(args)
    net = load_checkpoint(args.checkpoint)
    test_set = load_csv(args.eval, class_count=net.config.class_count)
    val_set = (
        load_csv(args.val, class_count=net.config.class_count)
        if args.val is not None
        else test_set
    )
    rows = eval_budget_curve(net, val_set, test_set, args.budgets)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    write_budget_csv(rows, out / "budget_curve.csv", net.exit_count)
    if not args.no_plot:
        from .plots import save_budget_figure

        save_budget_figure(rows, out / "budget_curve.png")
    for budget, tau, macs, acc, _ in rows:
        print(f"budget {budget:.0f}: threshold={tau:.6f} "
              f"expected_macs={macs:.2f} accuracy={acc:.4f}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ExitwiseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
