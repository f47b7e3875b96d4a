"""Sign-based and fixed-step maximizers for log-likelihood surfaces.

The resilient variant adapts one step size per coordinate from the sign
history of the gradient: consistent signs grow the step multiplicatively,
a sign flip shrinks it and suppresses the step for that coordinate on the
current iteration (the stored gradient is zeroed, no step is reverted).
This makes progress depend only on gradient signs, which is what keeps the
method usable when length scales, signal variance and noise live on very
different curvature scales.
"""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class RpropConfig:
    max_iters: int = 200
    delta0: float = 0.1
    delta_min: float = 1e-6
    delta_max: float = 50.0
    eta_plus: float = 1.2
    eta_minus: float = 0.5


@dataclass
class AscentConfig:
    max_iters: int = 200
    step: float = 1e-2


@dataclass
class OptimResult:
    """Best iterate of a maximization run plus its objective trajectory."""

    x: np.ndarray
    value: float
    history: list = field(default_factory=list)


def _evaluate(fun_and_grad, x):
    value, grad = fun_and_grad(x)
    value = float(value)
    grad = np.asarray(grad, dtype=np.float64)
    if not np.isfinite(value):
        return -np.inf, np.zeros_like(grad)
    return value, np.where(np.isfinite(grad), grad, 0.0)


def rprop_step(delta, grad, prev_grad, config):
    """One resilient update for maximization.

    Returns ``(step, new_delta, stored_grad)``; ``stored_grad`` is the
    gradient to remember for the next sign comparison (zeroed where the
    sign flipped).
    """
    prod = grad * prev_grad
    new_delta = np.where(prod > 0, np.minimum(delta * config.eta_plus, config.delta_max), delta)
    new_delta = np.where(prod < 0, np.maximum(delta * config.eta_minus, config.delta_min), new_delta)
    stored = np.where(prod < 0, 0.0, grad)
    step = np.sign(stored) * new_delta
    return step, new_delta, stored


def rprop_maximize(fun_and_grad, x0, config=None, lower=None, upper=None):
    """Maximize ``fun_and_grad`` from ``x0`` with resilient sign steps.

    ``fun_and_grad(x)`` must return ``(value, gradient)``.  Optional box
    bounds keep iterates out of overflow territory.  The returned iterate
    is the best one visited, so ``result.value == max(result.history)``.
    """
    config = config or RpropConfig()
    x = np.array(x0, dtype=np.float64)
    delta = np.full_like(x, config.delta0)
    prev_grad = np.zeros_like(x)
    value, grad = _evaluate(fun_and_grad, x)
    history = [value]
    best_x, best_value = x.copy(), value
    for _ in range(config.max_iters):
        step, delta, prev_grad = rprop_step(delta, grad, prev_grad, config)
        x = x + step
        if lower is not None or upper is not None:
            x = np.clip(x, lower, upper)
        value, grad = _evaluate(fun_and_grad, x)
        history.append(value)
        if value > best_value:
            best_x, best_value = x.copy(), value
    return OptimResult(x=best_x, value=best_value, history=history)


def gradient_ascent_maximize(fun_and_grad, x0, config=None, lower=None, upper=None):
    """Fixed-step gradient ascent baseline with the same result contract."""
    config = config or AscentConfig()
    x = np.array(x0, dtype=np.float64)
    value, grad = _evaluate(fun_and_grad, x)
    history = [value]
    best_x, best_value = x.copy(), value
    for _ in range(config.max_iters):
        x = x + config.step * grad
        if lower is not None or upper is not None:
            x = np.clip(x, lower, upper)
        value, grad = _evaluate(fun_and_grad, x)
        history.append(value)
        if value > best_value:
            best_x, best_value = x.copy(), value
    return OptimResult(x=best_x, value=best_value, history=history)
