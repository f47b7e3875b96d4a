"""Gaussian process regression over material parameter vectors.

The preference function is modeled as a zero-mean GP with a squared
exponential kernel carrying one length scale per input dimension, so the
optimizer can effectively discard coordinates a user never reacts to.
Hyperparameters (signal variance, per-dimension length scales, and the
score-noise term) are optimized in log space by maximizing the marginal
likelihood, by default with resilient sign-based steps; a fixed-step ascent
baseline is kept around for optimizer comparisons.

The predictive mean and variance for an unseen material come in closed form
from the cached Cholesky factor of the training covariance, so scoring a
candidate is a single triangular solve.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from gmsynth.errors import DimensionMismatch, GmsError, NotFitted
from gmsynth.linalg import chol_inverse, chol_logdet, chol_solve, jittered_cholesky
from gmsynth.materials import MaterialParams
from gmsynth.optim import (
    AscentConfig,
    OptimResult,
    RpropConfig,
    gradient_ascent_maximize,
    rprop_maximize,
)

# Log-hyperparameters are clipped to this box during optimization; the
# bounds are far outside anything a [0,1]^m domain with scores in [0,10]
# can support, they only exist to keep exp() finite.
LOG_BOUND = 20.0


def as_param_matrix(inputs):
    """Coerce a sequence of materials (or an (n, m) array) to a 2-D array."""
    if isinstance(inputs, np.ndarray) and inputs.ndim == 2:
        return np.ascontiguousarray(inputs, dtype=np.float64)
    rows = [x.values if isinstance(x, MaterialParams) else np.asarray(x, dtype=np.float64) for x in inputs]
    return np.ascontiguousarray(np.stack(rows))


def as_param_vector(x):
    v = x.values if isinstance(x, MaterialParams) else np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionMismatch(f"expected a single parameter vector, got shape {v.shape}")
    return v


@dataclass(frozen=True)
class KernelParams:
    """Squared exponential kernel parameters, all strictly positive.

    ``signal_variance`` scales the kernel, ``length_scales`` holds one
    positive scale per input dimension, and ``noise`` is the variance of
    the score observations (the diagonal addition).
    """

    signal_variance: float
    length_scales: np.ndarray
    noise: float

    def __post_init__(self):
        ls = np.ascontiguousarray(np.atleast_1d(self.length_scales), dtype=np.float64)
        ls.flags.writeable = False
        if self.signal_variance <= 0 or self.noise <= 0 or np.any(ls <= 0):
            raise GmsError("kernel parameters must be strictly positive")
        object.__setattr__(self, "signal_variance", float(self.signal_variance))
        object.__setattr__(self, "noise", float(self.noise))
        object.__setattr__(self, "length_scales", ls)

    @property
    def m(self):
        return self.length_scales.size

    @classmethod
    def wide_prior(cls, m, noise=0.05):
        """Default initialization: unit variance and length scales."""
        return cls(signal_variance=1.0, length_scales=np.ones(m), noise=noise)

    def to_log_vector(self):
        """Pack as [log sigma_f^2, log l_1..l_m, log noise]."""
        return np.concatenate(
            [[np.log(self.signal_variance)], np.log(self.length_scales), [np.log(self.noise)]]
        )

    @classmethod
    def from_log_vector(cls, v):
        v = np.asarray(v, dtype=np.float64)
        return cls(
            signal_variance=float(np.exp(v[0])),
            length_scales=np.exp(v[1:-1]),
            noise=float(np.exp(v[-1])),
        )


@dataclass(frozen=True)
class Prediction:
    mean: float
    variance: float


def kernel_eval(a, b, k, add_noise=False):
    """Covariance between two materials.

    ``sigma_f^2 * exp(-0.5 * sum_d (a_d - b_d)^2 / l_d^2)``, plus the noise
    term when ``add_noise`` is set (training-diagonal semantics only).
    """
    av, bv = as_param_vector(a), as_param_vector(b)
    if av.size != bv.size or av.size != k.m:
        raise DimensionMismatch(
            f"dimension mismatch: a has {av.size}, b has {bv.size}, kernel has {k.m}"
        )
    q = np.sum(((av - bv) / k.length_scales) ** 2)
    value = k.signal_variance * np.exp(-0.5 * q)
    return float(value + (k.noise if add_noise else 0.0))


def cross_covariance(X, query, k):
    """Noise-free covariances between each row of ``X`` and ``query`` rows."""
    X = np.asarray(X, dtype=np.float64)
    Q = np.atleast_2d(np.asarray(query, dtype=np.float64))
    if X.shape[1] != k.m or Q.shape[1] != k.m:
        raise DimensionMismatch("input dimensionality does not match the kernel")
    d = (X[:, None, :] - Q[None, :, :]) / k.length_scales
    return k.signal_variance * np.exp(-0.5 * np.sum(d * d, axis=2))


def build_covariance(inputs, k):
    """Full training covariance: noise-free off-diagonals, noisy diagonal."""
    X = as_param_matrix(inputs)
    K = cross_covariance(X, X, k)
    K[np.diag_indices_from(K)] += k.noise
    return K


@dataclass(frozen=True)
class PreferenceModel:
    """Fitted GPR state: training data, kernel, and cached factorization."""

    training_inputs: np.ndarray
    training_scores: np.ndarray
    kernel: KernelParams
    chol: np.ndarray
    weights: np.ndarray  # K^{-1} U, reused by every prediction
    jitter: float = 0.0
    fit_history: tuple = ()

    @classmethod
    def build(cls, inputs, scores, kernel, fit_history=()):
        X = as_param_matrix(inputs)
        U = np.ascontiguousarray(np.asarray(scores, dtype=np.float64).reshape(-1))
        if X.shape[0] != U.size:
            raise DimensionMismatch("inputs and scores disagree on sample count")
        if X.shape[0] < 1:
            raise GmsError("a preference model needs at least one sample")
        if X.shape[1] != kernel.m:
            raise DimensionMismatch("kernel dimensionality does not match inputs")
        K = build_covariance(X, kernel)
        L, jitter = jittered_cholesky(K)
        alpha = chol_solve(L, U)
        X.flags.writeable = False
        U.flags.writeable = False
        return cls(
            training_inputs=X,
            training_scores=U,
            kernel=kernel,
            chol=L,
            weights=alpha,
            jitter=jitter,
            fit_history=tuple(fit_history),
        )

    @property
    def n(self):
        return self.training_scores.size

    @property
    def m(self):
        return self.training_inputs.shape[1]


def log_marginal_likelihood(model):
    """Marginal log-likelihood of the training scores under the kernel."""
    U = model.training_scores
    n = U.size
    return float(
        -0.5 * U @ model.weights - 0.5 * chol_logdet(model.chol) - 0.5 * n * np.log(2.0 * np.pi)
    )


def _likelihood_value_and_gradient(X, U, log_params, sqdiff=None):
    """Log-likelihood and its gradient over log-hyperparameters.

    The gradient is ``0.5 tr((alpha alpha^T - K^{-1}) dK/dtheta)`` per
    hyperparameter, chain-ruled into log space.  ``sqdiff`` is the optional
    precomputed (m, n, n) tensor of squared coordinate differences.
    """
    kernel = KernelParams.from_log_vector(log_params)
    n, m = X.shape
    if sqdiff is None:
        diff = X[:, None, :] - X[None, :, :]
        sqdiff = np.ascontiguousarray(np.moveaxis(diff * diff, 2, 0))
    Kf = kernel.signal_variance * np.exp(
        -0.5 * np.tensordot(1.0 / kernel.length_scales**2, sqdiff, axes=(0, 0))
    )
    K = Kf + kernel.noise * np.eye(n)
    L, _ = jittered_cholesky(K)
    alpha = chol_solve(L, U)
    value = -0.5 * U @ alpha - 0.5 * chol_logdet(L) - 0.5 * n * np.log(2.0 * np.pi)
    A = np.outer(alpha, alpha) - chol_inverse(L)
    AKf = A * Kf
    grad = np.empty(m + 2)
    grad[0] = 0.5 * np.sum(AKf)
    grad[1:-1] = 0.5 * np.tensordot(AKf, sqdiff, axes=((0, 1), (1, 2))) / kernel.length_scales**2
    grad[-1] = 0.5 * kernel.noise * np.trace(A)
    return float(value), grad


def likelihood_gradient(model):
    """Gradient of the marginal log-likelihood at the model's kernel.

    Ordered [d/dlog sigma_f^2, d/dlog l_1 .. l_m, d/dlog noise].
    """
    _, grad = _likelihood_value_and_gradient(
        model.training_inputs, model.training_scores, model.kernel.to_log_vector()
    )
    return grad


@dataclass(frozen=True)
class FitConfig:
    """Shared fit options: iteration budget plus frozen-coordinate flags."""

    max_iters: int = 200
    freeze_signal: bool = False
    freeze_noise: bool = False
    rprop: RpropConfig = field(default_factory=RpropConfig)
    ascent: AscentConfig = field(default_factory=AscentConfig)


def _run_fit(inputs, scores, init, config, optimizer):
    X = as_param_matrix(inputs)
    U = np.asarray(scores, dtype=np.float64).reshape(-1)
    if X.shape[0] < 2:
        raise GmsError("fitting requires at least 2 samples")
    if init.m != X.shape[1]:
        raise DimensionMismatch("init kernel dimensionality does not match inputs")
    diff = X[:, None, :] - X[None, :, :]
    sqdiff = np.ascontiguousarray(np.moveaxis(diff * diff, 2, 0))

    x0 = init.to_log_vector()
    frozen = np.zeros(x0.size, dtype=bool)
    if config.freeze_signal:
        frozen[0] = True
    if config.freeze_noise:
        frozen[-1] = True
    lower = np.where(frozen, x0, -LOG_BOUND)
    upper = np.where(frozen, x0, LOG_BOUND)

    def objective(v):
        value, grad = _likelihood_value_and_gradient(X, U, v, sqdiff)
        return value, np.where(frozen, 0.0, grad)

    result = optimizer(objective, x0, lower=lower, upper=upper)
    kernel = KernelParams.from_log_vector(result.x)
    return PreferenceModel.build(X, U, kernel, fit_history=result.history)


def fit_rprop(inputs, scores, init=None, config=None):
    """Fit hyperparameters by resilient sign-based likelihood ascent."""
    config = config or FitConfig()
    X = as_param_matrix(inputs)
    init = init or KernelParams.wide_prior(X.shape[1])
    rp = replace(config.rprop, max_iters=config.max_iters)
    return _run_fit(
        X, scores, init, config,
        lambda f, x0, lower, upper: rprop_maximize(f, x0, rp, lower=lower, upper=upper),
    )


def fit_gradient_ascent(inputs, scores, init=None, config=None):
    """Fixed-step ascent baseline with the same interface as fit_rprop."""
    config = config or FitConfig()
    X = as_param_matrix(inputs)
    init = init or KernelParams.wide_prior(X.shape[1])
    ac = replace(config.ascent, max_iters=config.max_iters)
    return _run_fit(
        X, scores, init, config,
        lambda f, x0, lower, upper: gradient_ascent_maximize(f, x0, ac, lower=lower, upper=upper),
    )


def predict_batch(model, queries):
    """Predictive means and variances for an (q, m) array of materials."""
    Q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    Ks = cross_covariance(model.training_inputs, Q, model.kernel)
    mean = Ks.T @ model.weights
    V = chol_solve(model.chol, Ks)
    k_ss = model.kernel.signal_variance + model.kernel.noise
    var = np.maximum(k_ss - np.sum(Ks * V, axis=0), 0.0)
    return mean, var


def predict(model, x):
    """Predictive mean and variance of the preference score at ``x``."""
    if model is None or model.chol is None:
        raise NotFitted("preference model is not fitted")
    v = as_param_vector(x)
    if v.size != model.m:
        raise DimensionMismatch(f"query has {v.size} dims, model has {model.m}")
    mean, var = predict_batch(model, v[None, :])
    return Prediction(mean=float(mean[0]), variance=float(var[0]))


# ---------------------------------------------------------------------------
# Serialization: versioned JSON document, factorization recomputed on load.

MODEL_HEADER = "gms-model v1"


def model_to_document(model):
    return {
        "header": MODEL_HEADER,
        "m": model.m,
        "n": model.n,
        "inputs": [[float(v) for v in row] for row in model.training_inputs],
        "scores": [float(v) for v in model.training_scores],
        "log_hyperparameters": [
            float(v) for v in np.concatenate(
                [[np.log(model.kernel.signal_variance)], np.log(model.kernel.length_scales)]
            )
        ],
        "noise": float(model.kernel.noise),
    }


def model_from_document(doc):
    if doc.get("header") != MODEL_HEADER:
        raise GmsError(f"expected header '{MODEL_HEADER}', got {doc.get('header')!r}")
    log_hp = np.asarray(doc["log_hyperparameters"], dtype=np.float64)
    kernel = KernelParams(
        signal_variance=float(np.exp(log_hp[0])),
        length_scales=np.exp(log_hp[1:]),
        noise=float(doc["noise"]),
    )
    return PreferenceModel.build(np.asarray(doc["inputs"]), np.asarray(doc["scores"]), kernel)
