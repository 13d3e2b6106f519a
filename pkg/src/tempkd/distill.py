"""Teacher-student distillation loop and its metrics log.

Per batch, in this exact order: compute global progress, run the frozen
teacher and the student on the batch, take both plain cross-entropies,
feed them (optionally smoothed) to the temperature scheduler, evaluate
the tempered transfer loss at the returned temperature, blend gradients,
and apply one SGD step. The order is load-bearing: the metrics rows must
let ``verify.replay_scheduler`` reproduce the temperature column
bit-for-bit when loss smoothing is off.

With ``kd_weight == 0`` the transfer path is skipped entirely and the
parameter trajectory is bit-identical to ``model.train_supervised`` under
the same SGD settings (the kd_loss column records 0.0 in that case).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import (
    Model,
    SgdConfig,
    backward,
    epoch_rng,
    forward,
    lr_at_epoch,
    minibatch_slices,
    sgd_step,
)
from .numerics import cross_entropy, cross_entropy_grad, kd_loss, kd_loss_grad
from .scheduler import make_scheduler

METRICS_FIELDS = (
    "epoch",
    "batch",
    "temperature",
    "alpha",
    "d_loss",
    "teacher_ce",
    "student_ce",
    "kd_loss",
    "total_loss",
    "lr",
)


@dataclass
class DistillConfig:
    """Distillation knobs on top of the student's SGD settings.

    The default 0.9 / 0.1 transfer-to-label weighting follows common
    distillation practice. loss_smoothing is an exponential-moving-average
    coefficient applied to the cross-entropies the scheduler sees (0
    disables smoothing; the logged teacher_ce / student_ce columns stay
    raw either way, so replay from the log only holds at 0).
    """

    sgd: SgdConfig
    scheduler_kind: str = "dts"
    scheduler_params: dict = None
    kd_weight: float = 0.9
    ce_weight: float = 0.1
    loss_smoothing: float = 0.0

    def __post_init__(self):
        if self.scheduler_params is None:
            self.scheduler_params = {"t_init": 8.0, "t_min": 4.0, "t_max": 8.0}
        if self.kd_weight < 0.0 or self.ce_weight < 0.0:
            raise ValueError(
                f"loss weights must be >= 0, got kd {self.kd_weight}, "
                f"ce {self.ce_weight}"
            )
        if self.kd_weight == 0.0 and self.ce_weight == 0.0:
            raise ValueError("at least one loss weight must be positive")
        if not 0.0 <= self.loss_smoothing < 1.0:
            raise ValueError(
                f"loss_smoothing must lie in [0, 1), got {self.loss_smoothing}"
            )

    def build_scheduler(self):
        return make_scheduler(self.scheduler_kind, self.scheduler_params)


@dataclass
class MetricsRecord:
    """One minibatch row of the distillation log."""

    epoch: int
    batch: int
    temperature: float
    alpha: float
    d_loss: float
    teacher_ce: float
    student_ce: float
    kd_loss: float
    total_loss: float
    lr: float


def distill(teacher: Model, student: Model, dataset, config: DistillConfig,
            scheduler=None):
    """Train the student against the frozen teacher; returns (student, log).

    The temperature scheduler is built fresh from the config unless an
    already-constructed one is injected (schedulers are stateful, so a
    passed-in instance must be new).
    """
    if scheduler is None:
        scheduler = config.build_scheduler()
    if teacher.input_dim != student.input_dim:
        raise ValueError(
            f"teacher input {teacher.input_dim} != student input "
            f"{student.input_dim}"
        )
    if teacher.num_classes != student.num_classes:
        raise ValueError(
            f"teacher has {teacher.num_classes} outputs, student "
            f"{student.num_classes}"
        )
    features = dataset.features
    labels = dataset.labels
    if features.shape[1] != student.input_dim:
        raise ValueError(
            f"dataset width {features.shape[1]} != model input "
            f"{student.input_dim}"
        )
    if dataset.num_classes != student.num_classes:
        raise ValueError(
            f"dataset has {dataset.num_classes} classes, model "
            f"{student.num_classes}"
        )
    sgd = config.sgd
    total_epochs = max(sgd.epochs, 1)
    batches = minibatch_slices(features.shape[0], sgd.batch_size)
    num_batches = len(batches)
    smooth = config.loss_smoothing
    sched_lt = sched_ls = None
    records = []
    for epoch in range(sgd.epochs):
        lr = lr_at_epoch(sgd, epoch)
        order = epoch_rng(sgd.seed, epoch).permutation(features.shape[0])
        for b_idx, batch in enumerate(batches):
            idx = order[batch]
            x, y = features[idx], labels[idx]
            progress = (epoch + b_idx / num_batches) / total_epochs

            teacher_logits = forward(teacher, x)
            student_logits = forward(student, x)
            teacher_ce = cross_entropy(teacher_logits, y)
            student_ce = cross_entropy(student_logits, y)

            if smooth == 0.0 or sched_lt is None:
                sched_lt, sched_ls = teacher_ce, student_ce
            else:
                sched_lt = smooth * sched_lt + (1.0 - smooth) * teacher_ce
                sched_ls = smooth * sched_ls + (1.0 - smooth) * student_ce
            temperature = scheduler.update(progress, sched_lt, sched_ls)

            if config.kd_weight != 0.0:
                transfer = kd_loss(teacher_logits, student_logits, temperature)
                grad = config.ce_weight * cross_entropy_grad(student_logits, y)
                grad += config.kd_weight * kd_loss_grad(
                    teacher_logits, student_logits, temperature
                )
            else:
                transfer = 0.0
                grad = config.ce_weight * cross_entropy_grad(student_logits, y)
            total = config.ce_weight * student_ce + config.kd_weight * transfer

            sgd_step(student, backward(student, grad), lr)
            records.append(MetricsRecord(
                epoch=epoch,
                batch=b_idx,
                temperature=temperature,
                alpha=float(scheduler.last_alpha),
                d_loss=sched_lt - sched_ls,
                teacher_ce=teacher_ce,
                student_ce=student_ce,
                kd_loss=transfer,
                total_loss=total,
                lr=lr,
            ))
    return student, records


def evaluate(model: Model, dataset):
    """(top-1 accuracy, mean cross-entropy) on the full dataset.

    argmax breaks ties toward the lower class index.
    """
    logits = forward(model, dataset.features)
    accuracy = float(np.mean(np.argmax(logits, axis=1) == dataset.labels))
    return accuracy, cross_entropy(logits, dataset.labels)


def write_metrics(records, path) -> None:
    """Write the per-batch log; repr keeps every float round-trip exact."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(METRICS_FIELDS) + "\n")
        for r in records:
            fh.write(",".join([
                str(r.epoch),
                str(r.batch),
                repr(float(r.temperature)),
                repr(float(r.alpha)),
                repr(float(r.d_loss)),
                repr(float(r.teacher_ce)),
                repr(float(r.student_ce)),
                repr(float(r.kd_loss)),
                repr(float(r.total_loss)),
                repr(float(r.lr)),
            ]) + "\n")


def read_metrics(path):
    """Inverse of ``write_metrics``; parse errors name the offending line."""
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if tuple(header.split(",")) != METRICS_FIELDS:
            raise ValueError(f"{path}:1: unexpected metrics header {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if len(cells) != len(METRICS_FIELDS):
                raise ValueError(
                    f"{path}:{lineno}: expected {len(METRICS_FIELDS)} "
                    f"columns, found {len(cells)}"
                )
            try:
                records.append(MetricsRecord(
                    epoch=int(cells[0]),
                    batch=int(cells[1]),
                    temperature=float(cells[2]),
                    alpha=float(cells[3]),
                    d_loss=float(cells[4]),
                    teacher_ce=float(cells[5]),
                    student_ce=float(cells[6]),
                    kd_loss=float(cells[7]),
                    total_loss=float(cells[8]),
                    lr=float(cells[9]),
                ))
            except ValueError:
                raise ValueError(f"{path}:{lineno}: unparseable cell") from None
    return records
