"""Flat run configuration: built-in defaults, overridden by a `key = value`
config file, overridden again by command-line flags."""

from __future__ import annotations

from dataclasses import dataclass, fields

from .cascade import CascadeConfig
from .errors import ConfigError
from .train import TrainConfig


@dataclass
class RunConfig:
    """Every tunable in one place. input_dim and class_count default to None,
    meaning "infer from the loaded data"."""

    # data generation
    kind: str = "two-moons"
    n_per_domain: int = 500
    rotation_deg: float = 30.0
    noise_sigma: float = 0.1
    dim: int = 2                 # blob feature dimension
    shift: str = "1.0,1.0"       # blob translation vector, comma separated
    # cascade
    input_dim: int | None = None
    exit_count: int = 4
    hidden_width: int = 16
    disc_width: int = 16
    class_count: int | None = None
    # training
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
    lr_anneal: bool = True
    grl_anneal: bool = True
    grl_lambda: float = 1.0
    source_val_fraction: float = 0.1
    # selection inspection
    mode: str = "confidence"
    tau: float = 0.9
    # common
    seed: int = 0

    def cascade_config(self, input_dim: int, class_count: int) -> CascadeConfig:
        return CascadeConfig(
            input_dim=self.input_dim if self.input_dim is not None else input_dim,
            exit_count=self.exit_count,
            hidden_width=self.hidden_width,
            disc_width=self.disc_width,
            class_count=self.class_count if self.class_count is not None else class_count,
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            alpha=self.alpha,
            beta=self.beta,
            mu=self.mu,
            warmup_epochs=self.warmup_epochs,
            selftrain_epochs=self.selftrain_epochs,
            batch_size=self.batch_size,
            pseudo_fraction=self.pseudo_fraction,
            lr0=self.lr0,
            momentum=self.momentum,
            weight_decay=self.weight_decay,
            seed=self.seed,
            lr_anneal=self.lr_anneal,
            grl_anneal=self.grl_anneal,
            grl_lambda=self.grl_lambda,
            source_val_fraction=self.source_val_fraction,
        )


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, raw: str):
    kind = _FIELD_TYPES[key]
    if kind in ("int", "int | None"):
        return int(raw)
    if kind in ("float", "float | None"):
        return float(raw)
    if kind == "bool":
        lowered = raw.lower()
        if lowered in ("true", "1", "yes", "on"):
            return True
        if lowered in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"key '{key}' expects a boolean, got '{raw}'")
    return raw


def parse_config_file(path) -> dict:
    """Read `key = value` lines; `#` starts a comment; unknown keys rejected."""
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key not in _FIELD_TYPES:
                raise ConfigError(f"{path}:{lineno}: unknown config key '{key}'")
            try:
                values[key] = _coerce(key, value)
            except ConfigError:
                raise
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for '{key}': {exc}") from exc
    return values


def build_run_config(config_path=None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then config file, then explicit flag overrides."""
    cfg = RunConfig()
    if config_path is not None:
        for key, value in parse_config_file(config_path).items():
            setattr(cfg, key, value)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown option '{key}'")
        setattr(cfg, key, value)
    return cfg


def parse_shift(raw: str, dim: int):
    try:
        values = [float(v) for v in raw.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"bad shift vector '{raw}': {exc}") from exc
    if len(values) != dim:
        raise ConfigError(f"shift vector '{raw}' must have {dim} entries")
    return values
