"""Temperature schedules for distillation.

The centerpiece is a dynamic, loss-aware schedule: a cosine curriculum
from an initial temperature down toward a floor, amplified when the
student's cross-entropy lags the teacher's by more than one nat, clamped
to configured bounds, and smoothed with momentum so the temperature never
jumps abruptly. It is a pure state machine: feed it training progress and
the two cross-entropy losses, get back a temperature.

Baselines live here too: a static temperature, the cosine curriculum with
amplification disabled, and a momentum-free linear decay.

The update's evaluation order is pinned (see ``tempkd.verify``, which
re-simulates it independently for bit-exact replay of logged traces):

    s      = amplitude * (1.0 + cos(pi * clamp01(progress)))
    d      = teacher_ce - student_ce
    alpha  = d / (d + 1.0 + beta)          (capped near the pole)
    target = t_init * s * alpha  if alpha > 1.0  else  t_init * s
    target = min/max-clamped to [t_min, t_max]
    t      = mu * t_prev + (1.0 - mu) * target
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

# Divergences within this window of the alpha pole are capped rather than
# divided out; the clamp step bounds the damage of any large alpha anyway.
ALPHA_POLE_WINDOW = 1e-12
ALPHA_CEILING = 10.0


def clamp01(value: float) -> float:
    """Training progress clamped to [0, 1]."""
    p = float(value)
    if p < 0.0:
        return 0.0
    if p > 1.0:
        return 1.0
    return p


def _check_finite(name, value) -> float:
    v = float(value)
    if not math.isfinite(v):
        raise ValueError(f"{name} must be finite, got {value!r}")
    return v


@dataclass
class ScheduleParams:
    """Bounds and smoothing constants for the scheduled temperature."""

    t_init: float
    t_min: float
    t_max: float
    mu: float = 0.9
    beta: float = 1e-8
    cosine_amplitude: float = 0.5
    total_epochs: int = 1

    def __post_init__(self):
        for name in ("t_init", "t_min", "t_max", "mu", "beta",
                     "cosine_amplitude"):
            setattr(self, name, _check_finite(name, getattr(self, name)))
        self.total_epochs = int(self.total_epochs)
        if not 0.0 < self.t_min <= self.t_init <= self.t_max:
            raise ValueError(
                "need 0 < t_min <= t_init <= t_max, got "
                f"t_min={self.t_min}, t_init={self.t_init}, t_max={self.t_max}"
            )
        if not 0.0 <= self.mu < 1.0:
            raise ValueError(f"mu must lie in [0, 1), got {self.mu}")
        if self.beta <= 0.0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.cosine_amplitude <= 0.0:
            raise ValueError(
                f"cosine_amplitude must be positive, got {self.cosine_amplitude}"
            )
        if self.total_epochs < 1:
            raise ValueError(
                f"total_epochs must be >= 1, got {self.total_epochs}"
            )


@dataclass
class SchedulerState:
    """Mutable state of a scheduled temperature between updates."""

    params: ScheduleParams
    t_current: float = field(init=False)
    last_target: float = field(init=False)
    last_alpha: float = field(init=False, default=0.0)
    last_d_loss: float = field(init=False, default=0.0)
    step_count: int = field(init=False, default=0)

    def __post_init__(self):
        self.t_current = self.params.t_init
        self.last_target = self.params.t_init


def cosine_schedule(progress, amplitude: float = 0.5) -> float:
    """Cosine decay from 1 at progress 0 to 0 at progress 1."""
    p = clamp01(progress)
    return amplitude * (1.0 + math.cos(math.pi * p))


def loss_divergence(teacher_ce, student_ce) -> float:
    """Teacher cross-entropy minus student cross-entropy.

    Negative while the student lags the teacher, which is the regime the
    amplification branch reacts to.
    """
    t = _check_finite("teacher_ce", teacher_ce)
    s = _check_finite("student_ce", student_ce)
    return t - s


def adaptive_alpha(d_loss, beta, ceiling: float = ALPHA_CEILING) -> float:
    """Bounded transform d / (d + 1 + beta) of the loss divergence.

    Exceeds 1 exactly when the student's loss lags the teacher's by more
    than 1 + beta. Near the pole d = -(1 + beta) the value is capped at
    +/-ceiling to keep telemetry finite.
    """
    d = _check_finite("d_loss", d_loss)
    b = _check_finite("beta", beta)
    if b <= 0.0:
        raise ValueError(f"beta must be positive, got {beta}")
    denom = d + 1.0 + b
    if abs(denom) < ALPHA_POLE_WINDOW:
        return math.copysign(ceiling, d)
    return d / denom


def _momentum_step(state: SchedulerState, target: float) -> float:
    p = state.params
    if target < p.t_min:
        target = p.t_min
    elif target > p.t_max:
        target = p.t_max
    state.t_current = p.mu * state.t_current + (1.0 - p.mu) * target
    state.last_target = target
    state.step_count += 1
    return state.t_current


def dts_update(state: SchedulerState, progress, teacher_ce,
               student_ce) -> float:
    """Advance the dynamic schedule one step; returns the new temperature.

    Cosine-scaled target, amplified by alpha when alpha > 1, clamped to
    [t_min, t_max], then blended with the previous temperature.
    """
    p = state.params
    s = cosine_schedule(progress, p.cosine_amplitude)
    d = loss_divergence(teacher_ce, student_ce)
    alpha = adaptive_alpha(d, p.beta)
    if alpha > 1.0:
        target = p.t_init * s * alpha
    else:
        target = p.t_init * s
    state.last_alpha = alpha
    state.last_d_loss = d
    return _momentum_step(state, target)


def dts_update_alt(state: SchedulerState, progress, teacher_ce,
                   student_ce) -> float:
    """Alternative update rule kept selectable for side-by-side comparison.

    Differs from ``dts_update`` in two ways: the divergence is measured as
    student minus teacher, and both target branches carry an extra factor
    of t_init (the cosine term is already scaled by t_init before the
    branch multiplies by t_init again). Inspectable, not recommended: with
    t_init well above 1 the squared factor pins the target at t_max until
    late in training.
    """
    p = state.params
    s = cosine_schedule(progress, p.cosine_amplitude)
    t_cos = p.t_init * s
    d = loss_divergence(student_ce, teacher_ce)
    alpha = adaptive_alpha(d, p.beta)
    if alpha > 1.0:
        target = p.t_init * t_cos * alpha
    else:
        target = p.t_init * t_cos
    state.last_alpha = alpha
    state.last_d_loss = d
    return _momentum_step(state, target)


def cosine_only_update(state: SchedulerState, progress, teacher_ce,
                       student_ce) -> float:
    """Dynamic update with amplification disabled (alpha pinned to 0).

    Same cosine target, clamping, and momentum as ``dts_update``; isolates
    the curriculum from the loss-reactive branch.
    """
    p = state.params
    s = cosine_schedule(progress, p.cosine_amplitude)
    state.last_alpha = 0.0
    state.last_d_loss = loss_divergence(teacher_ce, student_ce)
    return _momentum_step(state, p.t_init * s)


class DynamicTemperature:
    """Stateful wrapper around ``dts_update`` with a uniform interface."""

    def __init__(self, params: ScheduleParams, variant: str = "default"):
        if variant not in ("default", "alt"):
            raise ValueError(f"unknown variant {variant!r}")
        self.kind = "dts" if variant == "default" else "dts-alt"
        self.state = SchedulerState(params)
        self._update = dts_update if variant == "default" else dts_update_alt

    @property
    def params(self) -> ScheduleParams:
        return self.state.params

    @property
    def temperature(self) -> float:
        return self.state.t_current

    @property
    def last_alpha(self) -> float:
        return self.state.last_alpha

    @property
    def last_d_loss(self) -> float:
        return self.state.last_d_loss

    def update(self, progress, teacher_ce, student_ce) -> float:
        return self._update(self.state, progress, teacher_ce, student_ce)


class CosineTemperature:
    """Cosine curriculum between the configured bounds; never amplifies."""

    kind = "cosine"

    def __init__(self, params: ScheduleParams):
        self.state = SchedulerState(params)

    @property
    def params(self) -> ScheduleParams:
        return self.state.params

    @property
    def temperature(self) -> float:
        return self.state.t_current

    @property
    def last_alpha(self) -> float:
        return self.state.last_alpha

    @property
    def last_d_loss(self) -> float:
        return self.state.last_d_loss

    def update(self, progress, teacher_ce, student_ce) -> float:
        return cosine_only_update(self.state, progress, teacher_ce,
                                  student_ce)


class StaticTemperature:
    """Fixed temperature; the classical baseline."""

    kind = "static"
    last_alpha = float("nan")
    last_d_loss = float("nan")

    def __init__(self, temperature):
        t = _check_finite("temperature", temperature)
        if t <= 0.0:
            raise ValueError(f"temperature must be positive, got {temperature}")
        self.temperature = t

    def update(self, progress, teacher_ce, student_ce) -> float:
        return self.temperature


class LinearDecay:
    """Momentum-free linear interpolation from t_start to t_end."""

    kind = "linear"
    last_alpha = float("nan")
    last_d_loss = float("nan")

    def __init__(self, t_start, t_end, total_epochs: int = 1):
        self.t_start = _check_finite("t_start", t_start)
        self.t_end = _check_finite("t_end", t_end)
        if self.t_start <= 0.0 or self.t_end <= 0.0:
            raise ValueError(
                f"temperatures must be positive, got {t_start}, {t_end}"
            )
        self.total_epochs = int(total_epochs)
        self.temperature = self.t_start

    def update(self, progress, teacher_ce, student_ce) -> float:
        p = clamp01(progress)
        self.temperature = self.t_start + (self.t_end - self.t_start) * p
        return self.temperature


def make_scheduler(kind: str, params: dict):
    """Build a scheduler from a config-style (kind, params) pair."""
    if kind == "static":
        return StaticTemperature(params["temperature"])
    if kind == "linear":
        return LinearDecay(
            params["t_start"], params["t_end"],
            params.get("total_epochs", 1),
        )
    if kind in ("cosine", "dts", "dts-alt"):
        schedule = ScheduleParams(
            t_init=params["t_init"],
            t_min=params["t_min"],
            t_max=params["t_max"],
            mu=params.get("mu", 0.9),
            beta=params.get("beta", 1e-8),
            cosine_amplitude=params.get("cosine_amplitude", 0.5),
            total_epochs=params.get("total_epochs", 1),
        )
        if kind == "cosine":
            return CosineTemperature(schedule)
        variant = "default" if kind == "dts" else "alt"
        return DynamicTemperature(schedule, variant=variant)
    raise ValueError(f"unknown scheduler kind {kind!r}")
