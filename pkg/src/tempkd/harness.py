"""Experiment orchestration: data/teacher preparation, distillation runs,
scheduler comparisons, temperature-range sweeps, gradient verification.

Every command is a pure function of (config, seeds): reruns write
byte-identical artifacts. The one exception is manifest.txt, which holds
the timestamp along with the config snapshot, seeds, and versions, so
nothing else may contain wall-clock state.

Output layout under the output directory:
    data/train.csv, data/test.csv        (generate-data)
    runs/teacher/{model.bin,metrics.csv,result.csv}
    runs/<name>-s<seed>/{model.bin,metrics.csv,result.csv}
    summary.csv                           (compare)
    sweep.csv                             (sweep)
    manifest.txt                          (rewritten by every command)
"""

from __future__ import annotations

import hashlib
import math
import os
import platform
import time
from dataclasses import dataclass

import numpy as np

from ._kernels import backend_name
from .config import ExperimentConfig, SchedulerSpec, range_label
from .data import Dataset, load_csv, make_blobs, save_csv, split
from .distill import (
    DistillConfig,
    distill,
    evaluate,
    write_metrics,
)
from .model import (
    Model,
    SgdConfig,
    assign_flat_params,
    backward,
    flat_params,
    forward,
    init_model,
    load_model,
    model_fingerprint,
    save_model,
    train_supervised,
)
from .numerics import (
    cross_entropy,
    cross_entropy_grad,
    kd_loss,
    kd_loss_grad,
)
from .verify import finite_diff

RESULT_FIELDS = (
    "name", "scheduler", "kind", "seed",
    "train_accuracy", "test_accuracy", "train_ce", "test_ce",
)

EPOCH_FIELDS = ("epoch", "lr", "mean_ce", "accuracy")


@dataclass
class RunResult:
    """Final measurements of one training run."""

    name: str
    scheduler: str
    kind: str
    seed: int
    train_accuracy: float
    test_accuracy: float
    train_ce: float
    test_ce: float


def _run_dir(output_dir, name) -> str:
    path = os.path.join(output_dir, "runs", name)
    os.makedirs(path, exist_ok=True)
    return path


def _write_result(result: RunResult, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(RESULT_FIELDS) + "\n")
        fh.write(",".join([
            result.name,
            result.scheduler,
            result.kind,
            str(result.seed),
            repr(float(result.train_accuracy)),
            repr(float(result.test_accuracy)),
            repr(float(result.train_ce)),
            repr(float(result.test_ce)),
        ]) + "\n")


def read_result_csv(path) -> RunResult:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if tuple(header.split(",")) != RESULT_FIELDS:
            raise ValueError(f"{path}:1: unexpected result header {header!r}")
        cells = fh.readline().strip().split(",")
        if len(cells) != len(RESULT_FIELDS):
            raise ValueError(f"{path}:2: malformed result row")
    return RunResult(
        name=cells[0], scheduler=cells[1], kind=cells[2], seed=int(cells[3]),
        train_accuracy=float(cells[4]), test_accuracy=float(cells[5]),
        train_ce=float(cells[6]), test_ce=float(cells[7]),
    )


def _write_epoch_metrics(records, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(EPOCH_FIELDS) + "\n")
        for r in records:
            fh.write(",".join([
                str(r.epoch),
                repr(float(r.lr)),
                repr(float(r.mean_ce)),
                repr(float(r.accuracy)),
            ]) + "\n")


def build_datasets(config: ExperimentConfig):
    """(train, test) datasets: loaded from CSV paths if the config names
    them, generated deterministically otherwise."""
    d = config.data
    if d.train_csv is not None:
        return (
            load_csv(d.train_csv, num_classes=d.num_classes),
            load_csv(d.test_csv, num_classes=d.num_classes),
        )
    full = make_blobs(d.num_classes, d.per_class, d.dim, d.spread, d.seed)
    # Split entropy is derived from, not equal to, the generator seed.
    return split(
        full, d.train_fraction,
        np.random.SeedSequence(entropy=d.seed, spawn_key=(1,)),
    )


def write_manifest(output_dir, command, config: ExperimentConfig,
                   extra_lines=()) -> str:
    from . import __version__

    blob = config.canonical_json()
    digest = hashlib.sha256(blob.encode("utf-8")).hexdigest()
    path = os.path.join(output_dir, "manifest.txt")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"created: {time.strftime('%Y-%m-%dT%H:%M:%SZ', time.gmtime())}\n")
        fh.write(f"command: {command}\n")
        fh.write(f"package: tempkd {__version__}\n")
        fh.write(f"python: {platform.python_version()}\n")
        fh.write(f"numpy: {np.__version__}\n")
        fh.write(f"backend: {backend_name()}\n")
        fh.write(f"seeds: {','.join(str(s) for s in config.seeds)}\n")
        fh.write(f"config-sha256: {digest}\n")
        for line in extra_lines:
            fh.write(line + "\n")
        fh.write("config:\n")
        fh.write(blob + "\n")
    return path


def run_generate_data(config: ExperimentConfig, output_dir) -> dict:
    """Generate and save the synthetic train/test CSVs."""
    train, test = build_datasets(config)
    data_dir = os.path.join(output_dir, "data")
    os.makedirs(data_dir, exist_ok=True)
    train_path = os.path.join(data_dir, "train.csv")
    test_path = os.path.join(data_dir, "test.csv")
    save_csv(train, train_path)
    save_csv(test, test_path)
    write_manifest(output_dir, "generate-data", config)
    return {
        "train_path": train_path,
        "test_path": test_path,
        "train_rows": len(train),
        "test_rows": len(test),
        "num_classes": train.num_classes,
        "dim": train.dim,
    }


def teacher_checkpoint_path(output_dir) -> str:
    return os.path.join(output_dir, "runs", "teacher", "model.bin")


def _teacher_sizes(config: ExperimentConfig):
    return (config.data.dim, *config.teacher.hidden, config.data.num_classes)


def _student_sizes(config: ExperimentConfig):
    return (config.data.dim, *config.student.hidden, config.data.num_classes)


def run_train_teacher(config: ExperimentConfig, output_dir,
                      datasets=None) -> RunResult:
    """Train the teacher; writes checkpoint, per-epoch metrics, result."""
    train, test = datasets if datasets is not None else build_datasets(config)
    spec = config.teacher
    model = init_model(_teacher_sizes(config), spec.seed)
    sgd = SgdConfig(
        learning_rate=spec.learning_rate,
        epochs=spec.epochs,
        batch_size=spec.batch_size,
        seed=spec.seed,
        milestones=spec.milestones,
        decay_factor=spec.decay_factor,
    )
    model, records = train_supervised(model, train, sgd)
    run_dir = _run_dir(output_dir, "teacher")
    save_model(model, os.path.join(run_dir, "model.bin"))
    _write_epoch_metrics(records, os.path.join(run_dir, "metrics.csv"))
    train_acc, train_ce = evaluate(model, train)
    test_acc, test_ce = evaluate(model, test)
    result = RunResult(
        name="teacher", scheduler="teacher", kind="supervised",
        seed=spec.seed, train_accuracy=train_acc, test_accuracy=test_acc,
        train_ce=train_ce, test_ce=test_ce,
    )
    _write_result(result, os.path.join(run_dir, "result.csv"))
    if datasets is None:
        write_manifest(output_dir, "train-teacher", config)
    return result


def _ensure_teacher(config: ExperimentConfig, output_dir, datasets,
                    train_if_missing: bool = True) -> Model:
    """Load the shared teacher checkpoint, training it first if absent."""
    path = teacher_checkpoint_path(output_dir)
    if not os.path.exists(path):
        if not train_if_missing:
            raise RuntimeError(
                f"{path}: teacher checkpoint not found; "
                "run the train-teacher command first"
            )
        run_train_teacher(config, output_dir, datasets=datasets)
    teacher = load_model(path)
    expected = _teacher_sizes(config)
    if teacher.layer_sizes != expected:
        raise RuntimeError(
            f"{path}: checkpoint layers {teacher.layer_sizes} do not match "
            f"the configured teacher {expected}; remove it or fix the config"
        )
    return teacher


def _student_sgd(config: ExperimentConfig, seed: int) -> SgdConfig:
    spec = config.student
    return SgdConfig(
        learning_rate=spec.learning_rate,
        epochs=spec.epochs,
        batch_size=spec.batch_size,
        seed=seed,
        milestones=spec.milestones,
        decay_factor=spec.decay_factor,
    )


def run_distill_single(config: ExperimentConfig, output_dir, teacher: Model,
                       datasets, scheduler_spec: SchedulerSpec,
                       seed: int) -> RunResult:
    """One distillation run; init and shuffling both derive from seed."""
    train, test = datasets
    name = f"{scheduler_spec.name}-s{seed}"
    student = init_model(_student_sizes(config), seed)
    dconf = DistillConfig(
        sgd=_student_sgd(config, seed),
        scheduler_kind=scheduler_spec.kind,
        scheduler_params=scheduler_spec.params,
        kd_weight=config.distill.kd_weight,
        ce_weight=config.distill.ce_weight,
        loss_smoothing=config.distill.loss_smoothing,
    )
    student, records = distill(teacher, student, train, dconf)
    run_dir = _run_dir(output_dir, name)
    save_model(student, os.path.join(run_dir, "model.bin"))
    write_metrics(records, os.path.join(run_dir, "metrics.csv"))
    train_acc, train_ce = evaluate(student, train)
    test_acc, test_ce = evaluate(student, test)
    result = RunResult(
        name=name, scheduler=scheduler_spec.name, kind=scheduler_spec.kind,
        seed=seed, train_accuracy=train_acc, test_accuracy=test_acc,
        train_ce=train_ce, test_ce=test_ce,
    )
    _write_result(result, os.path.join(run_dir, "result.csv"))
    return result


def run_student_baseline(config: ExperimentConfig, output_dir, datasets,
                         seed: int) -> RunResult:
    """Label-only student run (no teacher), the no-transfer reference."""
    train, test = datasets
    name = f"none-s{seed}"
    student = init_model(_student_sizes(config), seed)
    student, records = train_supervised(student, train,
                                        _student_sgd(config, seed))
    run_dir = _run_dir(output_dir, name)
    save_model(student, os.path.join(run_dir, "model.bin"))
    _write_epoch_metrics(records, os.path.join(run_dir, "metrics.csv"))
    train_acc, train_ce = evaluate(student, train)
    test_acc, test_ce = evaluate(student, test)
    result = RunResult(
        name=name, scheduler="none", kind="supervised", seed=seed,
        train_accuracy=train_acc, test_accuracy=test_acc,
        train_ce=train_ce, test_ce=test_ce,
    )
    _write_result(result, os.path.join(run_dir, "result.csv"))
    return result


def run_distill(config: ExperimentConfig, output_dir) -> list:
    """Distill with the configured scheduler, one run per seed.

    Unlike compare/sweep this does not train a missing teacher; it
    requires the train-teacher checkpoint to exist already.
    """
    datasets = build_datasets(config)
    teacher = _ensure_teacher(config, output_dir, datasets,
                              train_if_missing=False)
    results = [
        run_distill_single(config, output_dir, teacher, datasets,
                           config.scheduler, seed)
        for seed in config.seeds
    ]
    lines = [
        f"run {r.name}: test_accuracy={repr(r.test_accuracy)}"
        for r in results
    ]
    write_manifest(output_dir, "distill", config, lines)
    return results


@dataclass
class CompareRow:
    """Aggregated accuracy of one scheduler across seeds."""

    scheduler: str
    kind: str
    mean_accuracy: float
    stddev_accuracy: float
    seeds_used: int
    failures: list


def run_compare(config: ExperimentConfig, output_dir):
    """All configured schedulers (plus the no-transfer baseline) across all
    seeds; returns (rows, failures, summary_path)."""
    datasets = build_datasets(config)
    teacher = _ensure_teacher(config, output_dir, datasets)
    roster = [(spec.name, spec.kind, spec) for spec in
              config.compare.schedulers]
    if config.compare.student_baseline:
        roster.append(("none", "supervised", None))
    rows = []
    failures = []
    manifest_lines = []
    for label, kind, spec in roster:
        accs = []
        for seed in config.seeds:
            try:
                if spec is None:
                    result = run_student_baseline(config, output_dir,
                                                  datasets, seed)
                else:
                    result = run_distill_single(config, output_dir, teacher,
                                                datasets, spec, seed)
                accs.append(result.test_accuracy)
                manifest_lines.append(
                    f"run {label}-s{seed}: "
                    f"test_accuracy={repr(result.test_accuracy)} status=ok"
                )
            except Exception as exc:  # per-cell tolerance, table survives
                failures.append((label, seed, f"{type(exc).__name__}: {exc}"))
                manifest_lines.append(f"run {label}-s{seed}: status=failed")
        rows.append(CompareRow(
            scheduler=label,
            kind=kind,
            mean_accuracy=float(np.mean(accs)) if accs else math.nan,
            stddev_accuracy=float(np.std(accs)) if accs else math.nan,
            seeds_used=len(accs),
            failures=[f for f in failures if f[0] == label],
        ))
    rows.sort(key=lambda r: (-(r.mean_accuracy
                               if not math.isnan(r.mean_accuracy)
                               else -math.inf), r.scheduler))
    summary_path = os.path.join(output_dir, "summary.csv")
    with open(summary_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("scheduler,kind,mean_test_accuracy,"
                 "stddev_test_accuracy,seeds_used\n")
        for r in rows:
            fh.write(",".join([
                r.scheduler,
                r.kind,
                repr(float(r.mean_accuracy)),
                repr(float(r.stddev_accuracy)),
                str(r.seeds_used),
            ]) + "\n")
    write_manifest(output_dir, "compare", config, manifest_lines)
    return rows, failures, summary_path


def compare_table(rows) -> str:
    """Ranked aligned-text rendering of compare results."""
    header = ("rank", "scheduler", "kind", "mean_acc", "stddev", "seeds")
    body = []
    for rank, r in enumerate(rows, start=1):
        if math.isnan(r.mean_accuracy):
            mean, std = "failed", "-"
        else:
            mean = f"{r.mean_accuracy:.4f}"
            std = f"{r.stddev_accuracy:.4f}"
        body.append((str(rank), r.scheduler, r.kind, mean, std,
                     str(r.seeds_used)))
    widths = [max(len(row[i]) for row in [header] + body)
              for i in range(len(header))]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()]
    for row in body:
        lines.append("  ".join(c.ljust(w)
                               for c, w in zip(row, widths)).rstrip())
    return "\n".join(lines)


def _optimizer_line(config: ExperimentConfig) -> str:
    s = config.student
    d = config.distill
    return (
        f"optimizer lr={s.learning_rate:g} epochs={s.epochs} "
        f"batch_size={s.batch_size} "
        f"milestones={','.join(str(m) for m in s.milestones) or 'none'} "
        f"decay={s.decay_factor:g} kd_weight={d.kd_weight:g} "
        f"ce_weight={d.ce_weight:g} smoothing={d.loss_smoothing:g}"
    )


def run_sweep(config: ExperimentConfig, output_dir):
    """The dynamic scheduler across each temperature range, optimizer fixed.

    Returns (rows, sweep_path) where rows are (label, mean_accuracy).
    """
    datasets = build_datasets(config)
    teacher = _ensure_teacher(config, output_dir, datasets)
    sweep = config.sweep
    optimizer = _optimizer_line(config)
    teacher_tag = model_fingerprint(teacher)[:12]
    rows = []
    manifest_lines = []
    for hi, lo in sweep.ranges:
        label = range_label(hi, lo)
        spec = SchedulerSpec(
            kind="dts",
            params={
                "t_init": hi, "t_min": lo, "t_max": hi,
                "mu": sweep.mu, "beta": sweep.beta,
                "cosine_amplitude": sweep.cosine_amplitude,
            },
            name=f"sweep-{hi:g}-{lo:g}",
        )
        accs = [
            run_distill_single(config, output_dir, teacher, datasets,
                               spec, seed).test_accuracy
            for seed in config.seeds
        ]
        mean = float(np.mean(accs))
        rows.append((label, mean))
        manifest_lines.append(
            f"range {label}: {optimizer} mu={sweep.mu:g} "
            f"beta={sweep.beta:g} amplitude={sweep.cosine_amplitude:g} "
            f"teacher={teacher_tag}"
        )
    sweep_path = os.path.join(output_dir, "sweep.csv")
    with open(sweep_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("range,mean_accuracy\n")
        for label, mean in rows:
            fh.write(f"{label},{repr(mean)}\n")
    write_manifest(output_dir, "sweep", config, manifest_lines)
    return rows, sweep_path


def _relative_error(analytic, reference) -> float:
    analytic = np.asarray(analytic, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    scale = max(1.0, float(np.max(np.abs(reference))))
    return float(np.max(np.abs(analytic - reference))) / scale


@dataclass
class GradCheckResult:
    """Outcome of one finite-difference comparison suite."""

    label: str
    instances: int
    worst_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.worst_error < self.tolerance

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"{self.label}: worst relative error {self.worst_error:.3e} "
            f"over {self.instances} instances (tolerance "
            f"{self.tolerance:.0e}) {status}"
        )


def run_grad_check(seed: int = 0, perturb: bool = False):
    """Finite-difference verification of every analytic gradient.

    Compares the cross-entropy and transfer-loss logit gradients, and the
    full-model parameter gradient of the combined objective, against
    central differences. ``perturb`` deliberately corrupts each analytic
    gradient first (negative control: the suite must then fail).
    Returns (all_passed, [GradCheckResult, ...]).
    """
    rng = np.random.default_rng(seed)
    poke = 1e-4 if perturb else 0.0
    results = []

    worst = 0.0
    n_ce = 40
    for _ in range(n_ce):
        n, c = int(rng.integers(2, 9)), int(rng.integers(2, 7))
        logits = rng.normal(0.0, 2.0, size=(n, c))
        labels = rng.integers(0, c, size=n)
        grad = cross_entropy_grad(logits, labels).ravel() + poke
        fd = finite_diff(
            lambda v: cross_entropy(np.reshape(v, (n, c)), labels),
            logits.ravel(),
        )
        worst = max(worst, _relative_error(grad, fd))
    results.append(GradCheckResult(
        "cross-entropy gradient vs logits", n_ce, worst, 1e-6))

    worst = 0.0
    n_kd = 40
    for _ in range(n_kd):
        n, c = int(rng.integers(2, 9)), int(rng.integers(2, 7))
        teacher = rng.normal(0.0, 2.0, size=(n, c))
        student = rng.normal(0.0, 2.0, size=(n, c))
        t = float(rng.uniform(0.5, 8.0))
        grad = kd_loss_grad(teacher, student, t).ravel() + poke
        fd = finite_diff(
            lambda v: kd_loss(teacher, np.reshape(v, (n, c)), t),
            student.ravel(),
        )
        worst = max(worst, _relative_error(grad, fd))
    results.append(GradCheckResult(
        "transfer-loss gradient vs student logits", n_kd, worst, 1e-6))

    worst = 0.0
    n_model = 30
    kd_w, ce_w = 0.9, 0.1
    for i in range(n_model):
        student = init_model((2, 8, 3), int(rng.integers(0, 2**31)))
        teacher = init_model((2, 8, 3), int(rng.integers(0, 2**31)))
        x = rng.normal(0.0, 1.0, size=(5, 2))
        y = rng.integers(0, 3, size=5)
        t = float(rng.uniform(0.5, 8.0))
        teacher_logits = forward(teacher, x)

        logits = forward(student, x)
        upstream = (ce_w * cross_entropy_grad(logits, y)
                    + kd_w * kd_loss_grad(teacher_logits, logits, t))
        grads = backward(student, upstream)
        analytic = np.concatenate(
            [g.ravel() for pair in zip(grads.weights, grads.biases)
             for g in pair]
        ) + poke

        theta0 = flat_params(student)

        def objective(theta, _m=student, _x=x, _y=y, _tl=teacher_logits,
                      _t=t):
            assign_flat_params(_m, theta)
            out = forward(_m, _x)
            return (ce_w * cross_entropy(out, _y)
                    + kd_w * kd_loss(_tl, out, _t))

        fd = finite_diff(objective, theta0)
        assign_flat_params(student, theta0)
        worst = max(worst, _relative_error(analytic, fd))
    results.append(GradCheckResult(
        "combined objective gradient vs model parameters",
        n_model, worst, 1e-5))

    return all(r.passed for r in results), results
