"""Resilient sign-step and fixed-step maximizers."""

import numpy as np

from gmsynth.optim import (
    AscentConfig,
    RpropConfig,
    gradient_ascent_maximize,
    rprop_maximize,
    rprop_step,
)

CFG = RpropConfig()


def test_same_sign_grows_step_capped():
    delta = np.array([0.1])
    grad = np.array([1.0])
    # first step: no previous gradient, delta unchanged
    step, delta, stored = rprop_step(delta, grad, np.array([0.0]), CFG)
    assert delta[0] == 0.1 and step[0] == 0.1
    # second step with the same sign multiplies by eta_plus
    step, delta, stored = rprop_step(delta, grad, stored, CFG)
    assert np.isclose(delta[0], 0.12)
    # growth saturates at delta_max
    big = np.array([49.0])
    _, big, _ = rprop_step(big, grad, grad, CFG)
    assert big[0] == 50.0


def test_sign_flip_shrinks_and_suppresses():
    delta = np.array([0.2])
    step, delta, stored = rprop_step(delta, np.array([-1.0]), np.array([1.0]), CFG)
    assert np.isclose(delta[0], 0.1)
    assert stored[0] == 0.0  # zeroed gradient, no step this round
    assert step[0] == 0.0


def test_zero_gradient_means_no_motion():
    calls = []

    def objective(x):
        calls.append(x.copy())
        return 1.0, np.zeros_like(x)

    result = rprop_maximize(objective, np.array([3.0, -2.0]), RpropConfig(max_iters=20))
    assert np.array_equal(result.x, [3.0, -2.0])
    result = gradient_ascent_maximize(objective, np.array([3.0]), AscentConfig(max_iters=20))
    assert np.array_equal(result.x, [3.0])


def quadratic(x):
    target = np.array([1.5, -0.5, 2.0])
    diff = x - target
    return -float(diff @ diff), -2.0 * diff


def test_rprop_converges_on_quadratic():
    result = rprop_maximize(quadratic, np.zeros(3), RpropConfig(max_iters=300))
    assert np.allclose(result.x, [1.5, -0.5, 2.0], atol=1e-4)
    assert result.value == max(result.history)


def test_ascent_converges_on_quadratic():
    result = gradient_ascent_maximize(quadratic, np.zeros(3), AscentConfig(max_iters=2000, step=1e-2))
    assert np.allclose(result.x, [1.5, -0.5, 2.0], atol=1e-4)
    assert result.value == max(result.history)


def test_history_starts_at_init_and_best_is_returned():
    result = rprop_maximize(quadratic, np.zeros(3), RpropConfig(max_iters=50))
    assert result.history[0] == quadratic(np.zeros(3))[0]
    assert result.value >= result.history[0]
    assert len(result.history) == 51


def test_bounds_are_respected():
    result = rprop_maximize(
        quadratic,
        np.zeros(3),
        RpropConfig(max_iters=200),
        lower=np.array([-1.0, -1.0, -1.0]),
        upper=np.array([1.0, 1.0, 1.0]),
    )
    assert np.all(result.x <= 1.0) and np.all(result.x >= -1.0)
    # clipped coordinates sit on the boundary nearest the optimum
    assert np.isclose(result.x[0], 1.0) and np.isclose(result.x[2], 1.0)


def test_non_finite_objective_is_survivable():
    def spiky(x):
        if x[0] > 1.0:
            return float("nan"), np.array([1.0])
        return -float(x[0] ** 2) + 2 * x[0], np.array([-2.0 * x[0] + 2.0])

    result = rprop_maximize(spiky, np.array([0.0]), RpropConfig(max_iters=100))
    assert np.isfinite(result.value)
    assert result.value == max(v for v in result.history if np.isfinite(v))
