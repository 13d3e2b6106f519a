"""Experiment configuration: JSON schema, validation, canonical form.

Configs are strict: every section and key is checked, unknown keys are
rejected (a typo in a scheduler parameter would otherwise silently fall
back to a default and invalidate a comparison). Every field has a
default, so ``{}`` is a complete experiment; ``to_dict`` materializes all
defaults, which makes parse -> serialize -> parse idempotent.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

DEFAULT_SEEDS = (101, 102, 103, 104, 105)
DEFAULT_SWEEP_RANGES = ((3.0, 1.0), (4.0, 2.0), (6.0, 4.0), (8.0, 4.0), (11.0, 9.0))

_SCHEDULE_KEYS = ("t_init", "t_min", "t_max")
_SCHEDULE_OPTIONAL = {"mu": 0.9, "beta": 1e-8, "cosine_amplitude": 0.5}


class ConfigError(ValueError):
    """Invalid or unparseable experiment configuration."""


def _section(raw, key, context):
    value = raw.get(key)
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"{context}.{key} must be an object")
    return value


def _check_keys(raw: dict, allowed, context):
    unknown = sorted(set(raw) - set(allowed))
    if unknown:
        raise ConfigError(f"{context}: unknown key(s) {', '.join(unknown)}")


def _number(raw, key, context, default=None):
    value = raw.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{context}.{key} must be a number, got {value!r}")
    return float(value)


def _integer(raw, key, context, default=None):
    value = raw.get(key, default)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{context}.{key} must be an integer, got {value!r}")
    return int(value)


def _int_list(raw, key, context, default=()):
    value = raw.get(key, list(default))
    if not isinstance(value, list) or any(
        isinstance(v, bool) or not isinstance(v, int) for v in value
    ):
        raise ConfigError(f"{context}.{key} must be a list of integers")
    return tuple(int(v) for v in value)


def _fmt(x: float) -> str:
    return f"{x:g}"


@dataclass
class DataSpec:
    """Synthetic generator parameters, or CSV paths that bypass them."""

    num_classes: int = 10
    per_class: int = 200
    dim: int = 16
    spread: float = 0.28
    seed: int = 7
    train_fraction: float = 0.8
    train_csv: str = None
    test_csv: str = None

    def to_dict(self) -> dict:
        out = {
            "num_classes": self.num_classes,
            "per_class": self.per_class,
            "dim": self.dim,
            "spread": self.spread,
            "seed": self.seed,
            "train_fraction": self.train_fraction,
        }
        if self.train_csv is not None:
            out["train_csv"] = self.train_csv
            out["test_csv"] = self.test_csv
        return out


def _parse_data(raw: dict) -> DataSpec:
    ctx = "data"
    _check_keys(raw, (
        "num_classes", "per_class", "dim", "spread", "seed",
        "train_fraction", "train_csv", "test_csv",
    ), ctx)
    spec = DataSpec(
        num_classes=_integer(raw, "num_classes", ctx, 10),
        per_class=_integer(raw, "per_class", ctx, 200),
        dim=_integer(raw, "dim", ctx, 16),
        spread=_number(raw, "spread", ctx, 0.28),
        seed=_integer(raw, "seed", ctx, 7),
        train_fraction=_number(raw, "train_fraction", ctx, 0.8),
        train_csv=raw.get("train_csv"),
        test_csv=raw.get("test_csv"),
    )
    if spec.num_classes < 1 or spec.per_class < 1 or spec.dim < 1:
        raise ConfigError(f"{ctx}: counts must be >= 1")
    if spec.spread < 0.0:
        raise ConfigError(f"{ctx}.spread must be >= 0")
    if not 0.0 < spec.train_fraction < 1.0:
        raise ConfigError(f"{ctx}.train_fraction must lie in (0, 1)")
    if (spec.train_csv is None) != (spec.test_csv is None):
        raise ConfigError(f"{ctx}: train_csv and test_csv go together")
    for key in ("train_csv", "test_csv"):
        value = getattr(spec, key)
        if value is not None and not isinstance(value, str):
            raise ConfigError(f"{ctx}.{key} must be a string path")
    return spec


@dataclass
class ModelSpec:
    """Architecture (hidden widths) plus SGD settings for one model.

    seed is the training seed for the teacher; student runs draw their
    seeds from the experiment-level seeds list instead, so the student
    section carries none.
    """

    hidden: tuple
    seed: int = None
    learning_rate: float = 0.1
    epochs: int = 100
    batch_size: int = 64
    milestones: tuple = (63, 87, 92)
    decay_factor: float = 0.1

    def to_dict(self) -> dict:
        out = {
            "hidden": list(self.hidden),
            "learning_rate": self.learning_rate,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "milestones": list(self.milestones),
            "decay_factor": self.decay_factor,
        }
        if self.seed is not None:
            out["seed"] = self.seed
        return out


def _parse_model(raw: dict, ctx, default_hidden, default_seed) -> ModelSpec:
    keys = ["hidden", "learning_rate", "epochs", "batch_size",
            "milestones", "decay_factor"]
    if default_seed is None and "seed" in raw:
        raise ConfigError(
            f"{ctx}.seed is not a setting; per-run seeds come from "
            "config.seeds"
        )
    if default_seed is not None:
        keys.append("seed")
    _check_keys(raw, keys, ctx)
    spec = ModelSpec(
        hidden=_int_list(raw, "hidden", ctx, default_hidden),
        seed=None if default_seed is None
        else _integer(raw, "seed", ctx, default_seed),
        learning_rate=_number(raw, "learning_rate", ctx, 0.1),
        epochs=_integer(raw, "epochs", ctx, 100),
        batch_size=_integer(raw, "batch_size", ctx, 64),
        milestones=_int_list(raw, "milestones", ctx, (63, 87, 92)),
        decay_factor=_number(raw, "decay_factor", ctx, 0.1),
    )
    if any(h < 1 for h in spec.hidden):
        raise ConfigError(f"{ctx}.hidden widths must be >= 1")
    if spec.learning_rate <= 0.0:
        raise ConfigError(f"{ctx}.learning_rate must be positive")
    if not 0.0 < spec.decay_factor <= 1.0:
        raise ConfigError(f"{ctx}.decay_factor must lie in (0, 1]")
    if spec.epochs < 0 or spec.batch_size < 1:
        raise ConfigError(f"{ctx}: epochs must be >= 0, batch_size >= 1")
    if list(spec.milestones) != sorted(spec.milestones):
        raise ConfigError(f"{ctx}.milestones must be sorted ascending")
    return spec


@dataclass
class DistillSpec:
    """Loss mixing weights and the optional scheduler-input smoothing."""

    kd_weight: float = 0.9
    ce_weight: float = 0.1
    loss_smoothing: float = 0.0

    def to_dict(self) -> dict:
        return {
            "kd_weight": self.kd_weight,
            "ce_weight": self.ce_weight,
            "loss_smoothing": self.loss_smoothing,
        }


def _parse_distill(raw: dict) -> DistillSpec:
    ctx = "distill"
    _check_keys(raw, ("kd_weight", "ce_weight", "loss_smoothing"), ctx)
    spec = DistillSpec(
        kd_weight=_number(raw, "kd_weight", ctx, 0.9),
        ce_weight=_number(raw, "ce_weight", ctx, 0.1),
        loss_smoothing=_number(raw, "loss_smoothing", ctx, 0.0),
    )
    if spec.kd_weight < 0.0 or spec.ce_weight < 0.0:
        raise ConfigError(f"{ctx}: loss weights must be >= 0")
    if spec.kd_weight == 0.0 and spec.ce_weight == 0.0:
        raise ConfigError(f"{ctx}: at least one loss weight must be positive")
    if not 0.0 <= spec.loss_smoothing < 1.0:
        raise ConfigError(f"{ctx}.loss_smoothing must lie in [0, 1)")
    return spec


@dataclass
class SchedulerSpec:
    """One temperature schedule: kind plus its parameter dict."""

    kind: str = "dts"
    params: dict = field(default_factory=lambda: {
        "t_init": 8.0, "t_min": 4.0, "t_max": 8.0,
        "mu": 0.9, "beta": 1e-8, "cosine_amplitude": 0.5,
    })
    name: str = None

    def __post_init__(self):
        if self.name is None:
            self.name = derive_name(self.kind, self.params)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "name": self.name}
        out.update(self.params)
        return out


def derive_name(kind: str, params: dict) -> str:
    if kind == "static":
        return f"static-{_fmt(params['temperature'])}"
    if kind == "linear":
        return f"linear-{_fmt(params['t_start'])}-{_fmt(params['t_end'])}"
    return f"{kind}-{_fmt(params['t_init'])}-{_fmt(params['t_min'])}"


def _parse_scheduler(raw: dict, ctx) -> SchedulerSpec:
    kind = raw.get("kind", "dts")
    if kind not in ("static", "linear", "cosine", "dts", "dts-alt"):
        raise ConfigError(f"{ctx}.kind must be one of static, linear, "
                          f"cosine, dts, dts-alt; got {kind!r}")
    name = raw.get("name")
    if name is not None and (not isinstance(name, str) or not name
                             or any(c in name for c in "/\\ ,")):
        raise ConfigError(f"{ctx}.name must be a nonempty token without "
                          "slashes, spaces, or commas")
    if kind == "static":
        _check_keys(raw, ("kind", "name", "temperature"), ctx)
        params = {"temperature": _number(raw, "temperature", ctx, 4.0)}
        if params["temperature"] <= 0.0:
            raise ConfigError(f"{ctx}.temperature must be positive")
    elif kind == "linear":
        _check_keys(raw, ("kind", "name", "t_start", "t_end"), ctx)
        params = {
            "t_start": _number(raw, "t_start", ctx, 8.0),
            "t_end": _number(raw, "t_end", ctx, 4.0),
        }
        if params["t_start"] <= 0.0 or params["t_end"] <= 0.0:
            raise ConfigError(f"{ctx}: temperatures must be positive")
    else:
        _check_keys(raw, ("kind", "name") + _SCHEDULE_KEYS
                    + tuple(_SCHEDULE_OPTIONAL), ctx)
        params = {
            "t_init": _number(raw, "t_init", ctx, 8.0),
            "t_min": _number(raw, "t_min", ctx, 4.0),
            "t_max": _number(raw, "t_max", ctx, 8.0),
        }
        for key, default in _SCHEDULE_OPTIONAL.items():
            params[key] = _number(raw, key, ctx, default)
        if not 0.0 < params["t_min"] <= params["t_init"] <= params["t_max"]:
            raise ConfigError(
                f"{ctx}: need 0 < t_min <= t_init <= t_max, got "
                f"{params['t_min']}, {params['t_init']}, {params['t_max']}"
            )
        if not 0.0 <= params["mu"] < 1.0:
            raise ConfigError(f"{ctx}.mu must lie in [0, 1)")
        if params["beta"] <= 0.0:
            raise ConfigError(f"{ctx}.beta must be positive")
    return SchedulerSpec(kind=kind, params=params, name=name)


_DEFAULT_COMPARE = (
    {"kind": "dts", "t_init": 8.0, "t_min": 4.0, "t_max": 8.0},
    {"kind": "static", "temperature": 4.0},
    {"kind": "cosine", "t_init": 8.0, "t_min": 4.0, "t_max": 8.0},
    {"kind": "linear", "t_start": 8.0, "t_end": 4.0},
)


@dataclass
class CompareSpec:
    """Scheduler roster for side-by-side runs, plus the no-transfer row."""

    schedulers: tuple = None
    student_baseline: bool = True

    def __post_init__(self):
        if self.schedulers is None:
            self.schedulers = tuple(
                _parse_scheduler(dict(raw), "compare.schedulers")
                for raw in _DEFAULT_COMPARE
            )

    def to_dict(self) -> dict:
        return {
            "schedulers": [s.to_dict() for s in self.schedulers],
            "student_baseline": self.student_baseline,
        }


def _parse_compare(raw: dict) -> CompareSpec:
    ctx = "compare"
    _check_keys(raw, ("schedulers", "student_baseline"), ctx)
    baseline = raw.get("student_baseline", True)
    if not isinstance(baseline, bool):
        raise ConfigError(f"{ctx}.student_baseline must be a boolean")
    entries = raw.get("schedulers")
    if entries is None:
        return CompareSpec(student_baseline=baseline)
    if not isinstance(entries, list) or not entries:
        raise ConfigError(f"{ctx}.schedulers must be a nonempty list")
    schedulers = []
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict):
            raise ConfigError(f"{ctx}.schedulers[{i}] must be an object")
        schedulers.append(_parse_scheduler(entry, f"{ctx}.schedulers[{i}]"))
    names = [s.name for s in schedulers]
    if len(set(names)) != len(names):
        raise ConfigError(f"{ctx}: duplicate scheduler names {names}")
    if baseline and "none" in names:
        raise ConfigError(f"{ctx}: name 'none' is reserved for the "
                          "student baseline row")
    return CompareSpec(schedulers=tuple(schedulers), student_baseline=baseline)


@dataclass
class SweepSpec:
    """Temperature ranges for the range-sensitivity sweep."""

    ranges: tuple = DEFAULT_SWEEP_RANGES
    mu: float = 0.9
    beta: float = 1e-8
    cosine_amplitude: float = 0.5

    def to_dict(self) -> dict:
        return {
            "ranges": [[hi, lo] for hi, lo in self.ranges],
            "mu": self.mu,
            "beta": self.beta,
            "cosine_amplitude": self.cosine_amplitude,
        }


def range_label(hi: float, lo: float) -> str:
    return f"{_fmt(hi)}->{_fmt(lo)}"


def _parse_sweep(raw: dict) -> SweepSpec:
    ctx = "sweep"
    _check_keys(raw, ("ranges",) + tuple(_SCHEDULE_OPTIONAL), ctx)
    entries = raw.get("ranges")
    if entries is None:
        ranges = DEFAULT_SWEEP_RANGES
    else:
        if not isinstance(entries, list) or not entries:
            raise ConfigError(f"{ctx}.ranges must be a nonempty list")
        ranges = []
        for i, pair in enumerate(entries):
            if (not isinstance(pair, list) or len(pair) != 2
                    or any(isinstance(v, bool)
                           or not isinstance(v, (int, float)) for v in pair)):
                raise ConfigError(
                    f"{ctx}.ranges[{i}] must be a [high, low] number pair"
                )
            hi, lo = float(pair[0]), float(pair[1])
            if not 0.0 < lo <= hi:
                raise ConfigError(
                    f"{ctx}.ranges[{i}]: need 0 < low <= high, got {pair}"
                )
            ranges.append((hi, lo))
        labels = [range_label(hi, lo) for hi, lo in ranges]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"{ctx}: duplicate ranges {labels}")
        ranges = tuple(ranges)
    spec = SweepSpec(
        ranges=ranges,
        mu=_number(raw, "mu", ctx, 0.9),
        beta=_number(raw, "beta", ctx, 1e-8),
        cosine_amplitude=_number(raw, "cosine_amplitude", ctx, 0.5),
    )
    if not 0.0 <= spec.mu < 1.0:
        raise ConfigError(f"{ctx}.mu must lie in [0, 1)")
    if spec.beta <= 0.0:
        raise ConfigError(f"{ctx}.beta must be positive")
    return spec


@dataclass
class ExperimentConfig:
    """Everything an experiment command needs, defaults materialized."""

    data: DataSpec = field(default_factory=DataSpec)
    teacher: ModelSpec = field(
        default_factory=lambda: ModelSpec(hidden=(64, 64), seed=1))
    student: ModelSpec = field(
        default_factory=lambda: ModelSpec(hidden=(16,)))
    distill: DistillSpec = field(default_factory=DistillSpec)
    scheduler: SchedulerSpec = field(default_factory=SchedulerSpec)
    compare: CompareSpec = field(default_factory=CompareSpec)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    seeds: tuple = DEFAULT_SEEDS
    output_dir: str = "out"

    def to_dict(self) -> dict:
        return {
            "data": self.data.to_dict(),
            "teacher": self.teacher.to_dict(),
            "student": self.student.to_dict(),
            "distill": self.distill.to_dict(),
            "scheduler": self.scheduler.to_dict(),
            "compare": self.compare.to_dict(),
            "sweep": self.sweep.to_dict(),
            "seeds": list(self.seeds),
            "output_dir": self.output_dir,
        }

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def parse_config(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("top level must be a JSON object")
    _check_keys(raw, (
        "data", "teacher", "student", "distill", "scheduler",
        "compare", "sweep", "seeds", "output_dir",
    ), "config")
    seeds = _int_list(raw, "seeds", "config", DEFAULT_SEEDS)
    if not seeds:
        raise ConfigError("config.seeds: need at least one seed")
    if len(set(seeds)) != len(seeds):
        raise ConfigError(f"config.seeds: duplicates in {list(seeds)}")
    output_dir = raw.get("output_dir", "out")
    if not isinstance(output_dir, str) or not output_dir:
        raise ConfigError("config.output_dir must be a nonempty string")
    return ExperimentConfig(
        data=_parse_data(_section(raw, "data", "config")),
        teacher=_parse_model(
            _section(raw, "teacher", "config"), "teacher", (64, 64), 1),
        student=_parse_model(
            _section(raw, "student", "config"), "student", (16,), None),
        distill=_parse_distill(_section(raw, "distill", "config")),
        scheduler=_parse_scheduler(
            _section(raw, "scheduler", "config"), "scheduler"),
        compare=_parse_compare(_section(raw, "compare", "config")),
        sweep=_parse_sweep(_section(raw, "sweep", "config")),
        seeds=seeds,
        output_dir=output_dir,
    )


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return parse_config(raw)


def save_config(config: ExperimentConfig, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(config.canonical_json() + "\n")
