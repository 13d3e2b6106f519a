"""Temperature schedules: hand traces, anchors, bounds, reductions."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tempkd.scheduler import (
    ALPHA_CEILING,
    CosineTemperature,
    DynamicTemperature,
    LinearDecay,
    ScheduleParams,
    SchedulerState,
    StaticTemperature,
    adaptive_alpha,
    clamp01,
    cosine_schedule,
    dts_update,
    dts_update_alt,
    loss_divergence,
    make_scheduler,
)


def _params(**over):
    base = dict(t_init=8.0, t_min=4.0, t_max=8.0, mu=0.9, beta=1e-8)
    base.update(over)
    return ScheduleParams(**base)


# --- pure helpers -------------------------------------------------------

def test_clamp01():
    assert clamp01(-0.5) == 0.0
    assert clamp01(1.5) == 1.0
    assert clamp01(0.25) == 0.25


def test_cosine_anchors_exact():
    assert cosine_schedule(0.0) == 1.0
    assert cosine_schedule(1.0) == 0.0
    assert cosine_schedule(0.5) == 0.5


def test_cosine_monotone_decreasing():
    grid = np.linspace(0.0, 1.0, 101)
    values = [cosine_schedule(p) for p in grid]
    assert all(b < a for a, b in zip(values, values[1:]))


def test_cosine_amplitude_scales():
    assert cosine_schedule(0.0, amplitude=0.25) == 0.5


def test_loss_divergence_values():
    assert loss_divergence(2.0, 2.0) == 0.0
    assert loss_divergence(1.0, 3.0) == -2.0
    assert loss_divergence(3.0, 1.0) == 2.0


def test_loss_divergence_rejects_non_finite():
    with pytest.raises(ValueError):
        loss_divergence(math.nan, 1.0)
    with pytest.raises(ValueError):
        loss_divergence(1.0, math.inf)


def test_adaptive_alpha_values():
    assert adaptive_alpha(0.0, 1e-8) == 0.0
    assert adaptive_alpha(1.0, 1e-15) == pytest.approx(0.5, rel=1e-12)
    assert adaptive_alpha(-2.0, 1e-15) == pytest.approx(2.0, rel=1e-12)
    assert adaptive_alpha(-2.0, 1e-15) == 2.000000000000002


def test_adaptive_alpha_pole_is_capped():
    beta = 1e-8
    at_pole = -(1.0 + beta)
    assert adaptive_alpha(at_pole, beta) == -ALPHA_CEILING
    assert adaptive_alpha(at_pole + 1e-13, beta) == -ALPHA_CEILING
    # outside the window the plain ratio applies again
    assert abs(adaptive_alpha(at_pole + 1e-9, beta)) > ALPHA_CEILING


def test_adaptive_alpha_rejects_bad_beta():
    with pytest.raises(ValueError, match="beta"):
        adaptive_alpha(1.0, 0.0)
    with pytest.raises(ValueError, match="beta"):
        adaptive_alpha(1.0, -1e-8)


def test_amplification_triggers_iff_student_lags_by_over_one_nat():
    beta = 1e-8
    threshold = 1.0 + beta
    for gap in np.linspace(0.0, 3.0, 301):
        d = -float(gap)  # d_loss = L_t - L_s, student lags when negative
        if abs(d + threshold) < 1e-6:
            continue  # skip the pole neighborhood, tested separately
        amplified = adaptive_alpha(d, beta) > 1.0
        assert amplified == (gap > threshold)


# --- ScheduleParams / SchedulerState ------------------------------------

def test_params_validation():
    with pytest.raises(ValueError, match="t_min"):
        _params(t_min=9.0)
    with pytest.raises(ValueError, match="t_min"):
        _params(t_init=3.0)  # below t_min
    with pytest.raises(ValueError, match="t_min"):
        _params(t_min=0.0, t_init=0.0, t_max=0.0)
    with pytest.raises(ValueError, match="mu"):
        _params(mu=1.0)
    with pytest.raises(ValueError, match="mu"):
        _params(mu=-0.1)
    with pytest.raises(ValueError, match="beta"):
        _params(beta=0.0)
    with pytest.raises(ValueError, match="cosine_amplitude"):
        _params(cosine_amplitude=0.0)
    with pytest.raises(ValueError, match="total_epochs"):
        _params(total_epochs=0)
    with pytest.raises(ValueError, match="finite"):
        _params(t_init=math.nan)


def test_state_starts_at_t_init():
    state = SchedulerState(_params())
    assert state.t_current == 8.0
    assert state.last_target == 8.0
    assert state.step_count == 0


# --- dts_update hand traces ---------------------------------------------

def test_hand_trace_equal_losses_at_start():
    state = SchedulerState(_params())
    t = dts_update(state, 0.0, 2.3, 2.3)
    assert t == pytest.approx(8.0, abs=1e-12)
    assert state.last_alpha == 0.0
    assert state.last_target == 8.0


def test_hand_trace_equal_losses_at_end():
    # cosine hits 0, target clamps up to t_min, momentum blends 0.9/0.1
    state = SchedulerState(_params())
    t = dts_update(state, 1.0, 2.3, 2.3)
    assert t == pytest.approx(7.6, abs=1e-12)
    assert state.last_target == 4.0


def test_hand_trace_amplification_clamped():
    state = SchedulerState(_params())
    t = dts_update(state, 0.0, 1.0, 3.5)
    assert t == pytest.approx(8.0, abs=1e-12)
    assert state.last_d_loss == -2.5
    assert state.last_alpha == pytest.approx(1.6666666777777779, rel=1e-12)
    assert state.last_alpha > 1.0
    # the raw amplified target exceeds t_max before clamping
    assert 8.0 * 1.0 * state.last_alpha == pytest.approx(
        13.333333422222223, rel=1e-12
    )
    assert state.last_target == 8.0


def test_amplification_changes_target_when_room_exists():
    # with t_max above t_init the amplified target survives the clamp
    params = _params(t_init=6.0, t_max=12.0)
    state = SchedulerState(params)
    dts_update(state, 0.0, 1.0, 3.5)
    amplified_target = state.last_target
    state2 = SchedulerState(params)
    dts_update(state2, 0.0, 1.0, 1.0)
    assert amplified_target > state2.last_target
    assert amplified_target == pytest.approx(6.0 * state.last_alpha, rel=1e-12)


# --- trajectory properties ----------------------------------------------

def test_equal_loss_reduction_bitwise():
    dts = DynamicTemperature(_params())
    cosine = CosineTemperature(_params())
    rng = np.random.default_rng(7)
    for p in np.linspace(0.0, 1.0, 100):
        loss = float(rng.uniform(0.1, 4.0))
        assert dts.update(p, loss, loss) == cosine.update(p, loss, loss)


def test_monotone_under_cosine_regime():
    # alpha <= 1 throughout, so the temperature can only decay
    sched = DynamicTemperature(_params())
    previous = sched.temperature
    for p in np.linspace(0.0, 1.0, 200):
        t = sched.update(p, 2.0, 2.5)  # lag below the amplification bar
        assert t <= previous + 1e-15
        previous = t


def test_momentum_limits_step_size():
    params = _params(mu=0.9)
    sched = DynamicTemperature(params)
    rng = np.random.default_rng(8)
    bound = (1.0 - params.mu) * (params.t_max - params.t_min)
    previous = sched.temperature
    for _ in range(500):
        t = sched.update(
            float(rng.uniform(0.0, 1.0)),
            float(rng.uniform(0.0, 8.0)),
            float(rng.uniform(0.0, 8.0)),
        )
        assert abs(t - previous) <= bound * (1.0 + 1e-12)
        previous = t


@settings(max_examples=200, deadline=None)
@given(
    st.floats(0.01, 4.9),
    st.floats(5.0, 20.0),
    st.floats(0.0, 0.99),
    st.lists(
        st.tuples(
            st.floats(0.0, 1.0), st.floats(0.0, 30.0), st.floats(0.0, 30.0)
        ),
        min_size=1,
        max_size=30,
    ),
)
def test_bounds_hold_for_any_loss_sequence(t_min, t_max, mu, steps):
    t_init = 0.5 * (t_min + t_max)
    sched = DynamicTemperature(
        ScheduleParams(t_init=t_init, t_min=t_min, t_max=t_max, mu=mu)
    )
    for progress, lt, ls in steps:
        t = sched.update(progress, lt, ls)
        assert t_min - 1e-12 <= t <= t_max + 1e-12


def test_determinism_two_instances_identical():
    trace = [(p, 1.0 + p, 2.0 - p) for p in np.linspace(0.0, 1.0, 64)]
    a = DynamicTemperature(_params())
    b = DynamicTemperature(_params())
    assert [a.update(*s) for s in trace] == [b.update(*s) for s in trace]


# --- alternative update rule --------------------------------------------

def test_alt_variant_reverses_divergence_sign():
    state = SchedulerState(_params())
    dts_update_alt(state, 0.0, 1.0, 3.5)
    assert state.last_d_loss == 2.5  # student minus teacher
    assert state.last_alpha == pytest.approx(2.5 / 3.500000010, rel=1e-9)
    assert state.last_alpha < 1.0  # lagging student no longer amplifies


def test_alt_variant_double_t_init_pins_early_target():
    # t_init enters the target twice, so early targets hit t_max and stay
    state = SchedulerState(_params())
    t = dts_update_alt(state, 0.0, 2.0, 2.0)
    assert state.last_target == 8.0
    assert t == pytest.approx(8.0, abs=1e-12)
    # even at 3/4 progress the squared factor keeps the target at t_max:
    # 8 * (8 * 0.1464...) = 9.37 > 8
    state2 = SchedulerState(_params())
    dts_update_alt(state2, 0.75, 2.0, 2.0)
    assert state2.last_target == 8.0


def test_alt_variant_amplifies_when_teacher_lags():
    state = SchedulerState(_params(t_max=200.0))
    dts_update_alt(state, 0.0, 3.5, 1.0)  # teacher worse by 2.5 nats
    assert state.last_alpha > 1.0
    expected = 8.0 * (8.0 * 1.0) * state.last_alpha
    assert state.last_target == pytest.approx(expected, rel=1e-12)


# --- cosine-only, static, linear ----------------------------------------

def test_cosine_only_ignores_losses():
    a = CosineTemperature(_params())
    b = CosineTemperature(_params())
    for p in np.linspace(0.0, 1.0, 40):
        assert a.update(p, 0.0, 9.0) == b.update(p, 9.0, 0.0)
    assert a.last_alpha == 0.0


def test_cosine_only_midpoint_without_momentum():
    sched = CosineTemperature(
        ScheduleParams(t_init=8.0, t_min=4.0, t_max=8.0, mu=0.0)
    )
    assert sched.update(0.5, 1.0, 1.0) == 4.0


def test_cosine_only_converges_geometrically_to_floor():
    params = _params(mu=0.9)
    sched = CosineTemperature(params)
    gap = 8.0 - 4.0
    for k in range(1, 60):
        t = sched.update(1.0, 1.0, 1.0)
        assert t - 4.0 == pytest.approx(gap * 0.9 ** k, rel=1e-9)


def test_static_temperature():
    sched = StaticTemperature(4.0)
    assert sched.kind == "static"
    assert sched.update(0.0, 1.0, 9.0) == 4.0
    assert sched.update(0.99, 5.0, 5.0) == 4.0
    assert math.isnan(sched.last_alpha)
    one = StaticTemperature(1.0)
    assert one.update(0.5, 2.0, 2.0) == 1.0


@pytest.mark.parametrize("bad", [0.0, -4.0, math.nan])
def test_static_rejects_non_positive(bad):
    with pytest.raises(ValueError):
        StaticTemperature(bad)


def test_linear_decay_endpoints_and_midpoint():
    sched = LinearDecay(8.0, 4.0)
    assert sched.update(0.0, 1.0, 1.0) == 8.0
    assert sched.update(0.5, 1.0, 1.0) == 6.0
    assert sched.update(1.0, 1.0, 1.0) == 4.0
    assert sched.update(2.0, 1.0, 1.0) == 4.0  # progress clamped


def test_linear_decay_rejects_non_positive():
    with pytest.raises(ValueError):
        LinearDecay(0.0, 4.0)
    with pytest.raises(ValueError):
        LinearDecay(8.0, -1.0)


# --- factory ------------------------------------------------------------

def test_make_scheduler_kinds():
    assert make_scheduler("static", {"temperature": 4.0}).kind == "static"
    assert make_scheduler("linear", {"t_start": 8.0, "t_end": 4.0}).kind == "linear"
    assert make_scheduler(
        "cosine", {"t_init": 8.0, "t_min": 4.0, "t_max": 8.0}
    ).kind == "cosine"
    assert make_scheduler(
        "dts", {"t_init": 8.0, "t_min": 4.0, "t_max": 8.0}
    ).kind == "dts"
    assert make_scheduler(
        "dts-alt", {"t_init": 8.0, "t_min": 4.0, "t_max": 8.0}
    ).kind == "dts-alt"


def test_make_scheduler_forwards_optional_params():
    sched = make_scheduler(
        "dts", {"t_init": 6.0, "t_min": 2.0, "t_max": 7.0, "mu": 0.5,
                "beta": 1e-6, "cosine_amplitude": 0.4},
    )
    assert sched.params.mu == 0.5
    assert sched.params.beta == 1e-6
    assert sched.params.cosine_amplitude == 0.4


def test_make_scheduler_rejects_unknown_kind():
    with pytest.raises(ValueError, match="unknown scheduler kind"):
        make_scheduler("exponential", {})


def test_dynamic_temperature_rejects_unknown_variant():
    with pytest.raises(ValueError, match="variant"):
        DynamicTemperature(_params(), variant="experimental")
