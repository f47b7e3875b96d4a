"""2-D latent embedding of high-scoring materials with GP back-projection.

Each column of the observed matrix is treated as an independent GP over
shared 2-D latent coordinates with one isotropic kernel, so the data
log-likelihood is a sum of per-column GP likelihoods.  Latent coordinates
and kernel hyperparameters are optimized jointly (resilient sign steps,
same machinery as the preference model) starting from a PCA projection.

The reverse mapping from a latent point to material space reuses the
cached factorization, so projecting is one kernel row and one dot product
per query; that is what keeps dragging through the latent plane real-time.
"""

from dataclasses import dataclass, field

import numpy as np

from gmsynth.errors import DegenerateData, DimensionMismatch, GmsError, NotFitted
from gmsynth.gpr import LOG_BOUND, KernelParams, as_param_matrix
from gmsynth.linalg import chol_inverse, chol_logdet, chol_solve, jittered_cholesky
from gmsynth.materials import MaterialParams
from gmsynth.optim import RpropConfig, rprop_maximize

LATENT_DIM = 2
DEFAULT_Z = 16


@dataclass(frozen=True)
class GplvmConfig:
    max_iters: int = 200
    init_noise: float = 0.05
    rprop: RpropConfig = field(default_factory=RpropConfig)


@dataclass(frozen=True)
class LatentModel:
    """Fitted latent embedding: data, coordinates, kernel, factorization."""

    observed: np.ndarray  # (z, m) high-scoring materials
    latents: np.ndarray  # (z, 2)
    kernel: KernelParams  # isotropic over latent space (2 equal scales)
    chol: np.ndarray
    weights: np.ndarray  # (K' + noise I)^{-1} X, reused by every projection
    jitter: float = 0.0
    fit_history: tuple = ()

    @property
    def z(self):
        return self.observed.shape[0]

    @property
    def m(self):
        return self.observed.shape[1]


@dataclass(frozen=True)
class Projection:
    """Back-projected material: clamped for rendering, raw for analysis."""

    params: MaterialParams
    raw: np.ndarray
    variance: float


def pca_init(X):
    """Project mean-centered rows onto their top-2 principal directions."""
    X = as_param_matrix(X)
    if X.shape[0] < 2:
        raise GmsError("latent embedding needs at least 2 rows")
    centered = X - X.mean(axis=0)
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    if svals[0] <= 1e-12:
        raise DegenerateData("all rows identical, no principal directions")
    take = min(LATENT_DIM, vt.shape[0])
    L = centered @ vt[:take].T
    if take < LATENT_DIM:
        L = np.hstack([L, np.zeros((X.shape[0], LATENT_DIM - take))])
    return L


def _latent_sqdist(L):
    d = L[:, None, :] - L[None, :, :]
    return np.sum(d * d, axis=2)


def _unpack(v, z):
    kernel = KernelParams(
        signal_variance=float(np.exp(v[0])),
        length_scales=np.exp(np.full(LATENT_DIM, v[1])),
        noise=float(np.exp(v[2])),
    )
    L = v[3:].reshape(z, LATENT_DIM)
    return kernel, L


def _log_likelihood_and_gradient(X, v):
    """Joint objective over [log sigma_f^2, log scale, log noise, latents]."""
    z, m = X.shape
    kernel, L = _unpack(v, z)
    scale2 = float(kernel.length_scales[0]) ** 2
    D2 = _latent_sqdist(L)
    Kf = kernel.signal_variance * np.exp(-0.5 * D2 / scale2)
    K = Kf + kernel.noise * np.eye(z)
    Lc, _ = jittered_cholesky(K)
    W = chol_solve(Lc, X)
    value = (
        -0.5 * np.sum(X * W)
        - 0.5 * m * chol_logdet(Lc)
        - 0.5 * z * m * np.log(2.0 * np.pi)
    )
    G = 0.5 * (W @ W.T - m * chol_inverse(Lc))
    GKf = G * Kf
    grad = np.empty(v.size)
    grad[0] = np.sum(GKf)
    grad[1] = np.sum(GKf * D2) / scale2
    grad[2] = kernel.noise * np.trace(G)
    rowsum = GKf.sum(axis=1)
    grad_L = -2.0 / scale2 * (L * rowsum[:, None] - GKf @ L)
    grad[3:] = grad_L.ravel()
    return float(value), grad


def assemble_latent_model(X, L, kernel, fit_history=()):
    """Cache the factorization and weights for given data and latents."""
    X = np.ascontiguousarray(np.asarray(X, dtype=np.float64))
    L = np.ascontiguousarray(np.asarray(L, dtype=np.float64))
    if L.shape != (X.shape[0], LATENT_DIM):
        raise DimensionMismatch(f"latents must be ({X.shape[0]}, {LATENT_DIM})")
    D2 = _latent_sqdist(L)
    K = kernel.signal_variance * np.exp(-0.5 * D2 / kernel.length_scales[0] ** 2)
    K[np.diag_indices_from(K)] += kernel.noise
    Lc, jitter = jittered_cholesky(K)
    W = chol_solve(Lc, X)
    X.flags.writeable = False
    L.flags.writeable = False
    return LatentModel(
        observed=X,
        latents=L,
        kernel=kernel,
        chol=Lc,
        weights=W,
        jitter=jitter,
        fit_history=tuple(fit_history),
    )


def fit_gplvm(X, config=None):
    """Jointly optimize latent coordinates and kernel hyperparameters."""
    config = config or GplvmConfig()
    X = as_param_matrix(X)
    z, m = X.shape
    if z < 2:
        raise GmsError("latent embedding needs at least 2 rows")
    L0 = pca_init(X)

    x0 = np.concatenate([[0.0, 0.0, np.log(config.init_noise)], L0.ravel()])
    lower = np.concatenate([[-LOG_BOUND] * 3, np.full(z * LATENT_DIM, -1e6)])
    upper = np.concatenate([[LOG_BOUND] * 3, np.full(z * LATENT_DIM, 1e6)])

    def objective(v):
        return _log_likelihood_and_gradient(X, v)

    rp = RpropConfig(
        max_iters=config.max_iters,
        delta0=config.rprop.delta0,
        delta_min=config.rprop.delta_min,
        delta_max=config.rprop.delta_max,
        eta_plus=config.rprop.eta_plus,
        eta_minus=config.rprop.eta_minus,
    )
    result = rprop_maximize(objective, x0, rp, lower=lower, upper=upper)
    kernel, L = _unpack(result.x, z)
    return assemble_latent_model(X, L, kernel, fit_history=result.history)


def latent_cross_covariance(model, queries):
    """Noise-free kernel values between training latents and query points."""
    Q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    if Q.shape[1] != LATENT_DIM:
        raise DimensionMismatch(f"latent points have {LATENT_DIM} coordinates")
    d = model.latents[:, None, :] - Q[None, :, :]
    q = np.sum(d * d, axis=2) / model.kernel.length_scales[0] ** 2
    return model.kernel.signal_variance * np.exp(-0.5 * q)


def project_batch(model, queries):
    """Means (raw, unclamped) and the shared scalar variance per query."""
    if model is None or model.chol is None:
        raise NotFitted("latent model is not fitted")
    Ks = latent_cross_covariance(model, queries)
    means = Ks.T @ model.weights
    V = chol_solve(model.chol, Ks)
    k_ss = model.kernel.signal_variance + model.kernel.noise
    variances = np.maximum(k_ss - np.sum(Ks * V, axis=0), 0.0)
    return means, variances


def project(model, latent_point):
    """Map one latent point back to material space."""
    point = np.asarray(latent_point, dtype=np.float64).reshape(-1)
    if point.size != LATENT_DIM:
        raise DimensionMismatch(f"latent points have {LATENT_DIM} coordinates")
    means, variances = project_batch(model, point[None, :])
    raw = means[0]
    return Projection(
        params=MaterialParams(np.clip(raw, 0.0, 1.0)),
        raw=raw,
        variance=float(variances[0]),
    )


# ---------------------------------------------------------------------------
# Serialization mirrors the preference-model document plus a latent block.

LATENT_HEADER = "gms-latent v1"


def latent_to_document(model):
    return {
        "header": LATENT_HEADER,
        "m": model.m,
        "z": model.z,
        "observed": [[float(v) for v in row] for row in model.observed],
        "latents": [[float(v) for v in row] for row in model.latents],
        "log_hyperparameters": [
            float(np.log(model.kernel.signal_variance)),
            float(np.log(model.kernel.length_scales[0])),
        ],
        "noise": float(model.kernel.noise),
    }


def latent_from_document(doc):
    if doc.get("header") != LATENT_HEADER:
        raise GmsError(f"expected header '{LATENT_HEADER}', got {doc.get('header')!r}")
    log_hp = doc["log_hyperparameters"]
    kernel = KernelParams(
        signal_variance=float(np.exp(log_hp[0])),
        length_scales=np.exp(np.full(LATENT_DIM, log_hp[1])),
        noise=float(doc["noise"]),
    )
    return assemble_latent_model(
        np.asarray(doc["observed"], dtype=np.float64),
        np.asarray(doc["latents"], dtype=np.float64),
        kernel,
    )
