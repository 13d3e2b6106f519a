"""Independent oracles backing the test suite and the grad-check command.

Everything here is deliberately written with plain Python floats and
loops and shares no arithmetic with the modules it checks: central
finite differences for gradients, a brute-force KL divergence, and a
straight-line re-simulation of the dynamic temperature update for
bit-exact replay of logged temperature traces.

Bit-exact replay works because both this module and ``tempkd.scheduler``
pin the same evaluation order for the update rule:

    s      = amplitude * (1.0 + cos(pi * clamp01(progress)))
    d      = teacher_ce - student_ce
    alpha  = d / (d + 1.0 + beta)          (capped near the pole)
    target = t_init * s * alpha  if alpha > 1.0  else  t_init * s
    target = min/max-clamped to [t_min, t_max]
    t      = mu * t_prev + (1.0 - mu) * target
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass
class FdSpec:
    """Finite-difference settings used by the gradient checks."""

    step: float = 1e-5
    scheme: str = "central"
    param_tolerance: float = 1e-5
    logit_tolerance: float = 1e-6

    def __post_init__(self):
        if self.step <= 0.0:
            raise ValueError(f"step must be positive, got {self.step}")
        if self.scheme != "central":
            raise ValueError(f"unsupported scheme {self.scheme!r}")


def finite_diff(loss_fn, point, step: float = 1e-5):
    """Central-difference gradient of a scalar function of a flat vector.

    Returns a list of per-coordinate derivatives
    (f(x + h e_i) - f(x - h e_i)) / 2h.
    """
    if step <= 0.0:
        raise ValueError(f"step must be positive, got {step}")
    x = [float(v) for v in point]
    grad = []
    for i in range(len(x)):
        orig = x[i]
        x[i] = orig + step
        f_plus = float(loss_fn(x))
        x[i] = orig - step
        f_minus = float(loss_fn(x))
        x[i] = orig
        if not (math.isfinite(f_plus) and math.isfinite(f_minus)):
            raise ValueError(
                f"loss evaluated non-finite while perturbing coordinate {i}"
            )
        grad.append((f_plus - f_minus) / (2.0 * step))
    return grad


def kl_reference(p, q) -> float:
    """Brute-force KL(p || q) over two probability vectors.

    0 * log 0 is taken as 0; q must be strictly positive.
    """
    p = [float(v) for v in p]
    q = [float(v) for v in q]
    if len(p) != len(q):
        raise ValueError(f"length mismatch: {len(p)} vs {len(q)}")
    for name, vec in (("p", p), ("q", q)):
        total = math.fsum(vec)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"{name} is not normalized: sums to {total}")
    total = 0.0
    for pi, qi in zip(p, q):
        if qi <= 0.0:
            raise ValueError(f"q must be strictly positive, got {qi}")
        if pi > 0.0:
            total += pi * math.log(pi / qi)
    return total


def replay_scheduler(params, trace, adaptive: bool = True):
    """Re-run the dynamic temperature update over a logged trace.

    ``trace`` is a sequence of (progress, teacher_ce, student_ce) tuples;
    the return value is the corresponding temperature sequence. This is a
    standalone re-implementation (no code shared with tempkd.scheduler)
    that reproduces the live scheduler bit-for-bit thanks to the pinned
    evaluation order documented above. ``adaptive=False`` replays the
    cosine-only variant, which never amplifies.
    """
    t_init = float(params.t_init)
    t_min = float(params.t_min)
    t_max = float(params.t_max)
    mu = float(params.mu)
    beta = float(params.beta)
    amplitude = float(params.cosine_amplitude)

    temperatures = []
    t = t_init
    for progress, teacher_ce, student_ce in trace:
        p = float(progress)
        if p < 0.0:
            p = 0.0
        elif p > 1.0:
            p = 1.0
        for value in (teacher_ce, student_ce):
            if not math.isfinite(float(value)):
                raise ValueError(f"non-finite loss in trace: {value!r}")
        s = amplitude * (1.0 + math.cos(math.pi * p))
        d = float(teacher_ce) - float(student_ce)
        denom = d + 1.0 + beta
        if abs(denom) < 1e-12:
            alpha = math.copysign(10.0, d)
        else:
            alpha = d / denom
        if adaptive and alpha > 1.0:
            target = t_init * s * alpha
        else:
            target = t_init * s
        if target < t_min:
            target = t_min
        elif target > t_max:
            target = t_max
        t = mu * t + (1.0 - mu) * target
        temperatures.append(t)
    return temperatures
