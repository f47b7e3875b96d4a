"""Material parameter space, uniform sampling, and synthetic scoring users.

A material is an ``m``-dimensional vector with every coordinate normalized
to [0, 1]; physical ranges (index of refraction, emission intensity, ...)
are affine-mapped inside the renderer.  The default space has m=19 with the
slot assignment below, which the renderer and the tests both rely on:

====  =========================
slot  meaning
====  =========================
0-2   diffuse albedo RGB
3     metallic
4     specular weight
5     roughness
6     index-of-refraction blend
7     transmission weight
8-10  transmission tint RGB
11    translucency weight
12-14 scatter tint RGB
15    emission weight
16-18 emission RGB
====  =========================

Synthetic users stand in for a human scoring a gallery: mixtures of
isotropic Gaussian bumps with a hard zero floor, which reproduces the
sparse-score regime where most uniform samples score 0.
"""

import itertools
from dataclasses import dataclass

import numpy as np

from gmsynth.errors import DimensionMismatch, GmsError
from gmsynth.seeding import derive_rng

DEFAULT_M = 19

SLOT_NAMES = (
    "diffuse_r", "diffuse_g", "diffuse_b",
    "metallic",
    "specular_weight",
    "roughness",
    "ior_blend",
    "transmission_weight",
    "transmission_r", "transmission_g", "transmission_b",
    "translucency_weight",
    "scatter_r", "scatter_g", "scatter_b",
    "emission_weight",
    "emission_r", "emission_g", "emission_b",
)

SCORE_MIN = 0.0
SCORE_MAX = 10.0


def _readonly(a):
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class MaterialParams:
    """An m-dimensional material parameter vector, coordinates in [0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        v = _readonly(np.atleast_1d(self.values))
        if v.ndim != 1 or v.size < 1:
            raise GmsError("material parameters must be a non-empty 1-D vector")
        if np.any(v < 0.0) or np.any(v > 1.0) or not np.all(np.isfinite(v)):
            raise GmsError("material coordinates must lie in [0, 1]")
        object.__setattr__(self, "values", v)

    @property
    def m(self):
        return self.values.size

    def __eq__(self, other):
        if not isinstance(other, MaterialParams):
            return NotImplemented
        return self.values.shape == other.values.shape and bool(
            np.all(self.values == other.values)
        )

    def __hash__(self):
        return hash(self.values.tobytes())


@dataclass(frozen=True)
class PreferenceSample:
    """A material together with its user- or oracle-assigned score."""

    params: MaterialParams
    score: float

    def __post_init__(self):
        s = float(self.score)
        if not (SCORE_MIN <= s <= SCORE_MAX):
            raise GmsError(f"score {s} outside [{SCORE_MIN}, {SCORE_MAX}]")
        object.__setattr__(self, "score", s)


@dataclass(frozen=True)
class SyntheticUser:
    """Deterministic preference oracle: Gaussian bumps with a zero floor.

    ``raw(x) = 10 * sum_i weights[i] * exp(-||x - centers[i]||^2 / (2 widths[i]^2))``
    clamped to [0, 10]; the score is 0 whenever raw falls below ``floor``.
    """

    centers: tuple
    widths: tuple
    weights: tuple
    floor: float = 0.0
    name: str = "synthetic"

    def __post_init__(self):
        centers = tuple(
            c if isinstance(c, MaterialParams) else MaterialParams(np.asarray(c))
            for c in self.centers
        )
        if len(centers) < 1:
            raise GmsError("a synthetic user needs at least one center")
        m = centers[0].m
        if any(c.m != m for c in centers):
            raise DimensionMismatch("all centers must share one dimensionality")
        widths = tuple(float(w) for w in self.widths)
        weights = tuple(float(w) for w in self.weights)
        if len(widths) != len(centers) or len(weights) != len(centers):
            raise GmsError("centers, widths and weights must have equal length")
        if any(w <= 0 for w in widths) or any(w <= 0 for w in weights):
            raise GmsError("widths and weights must be positive")
        if not (SCORE_MIN <= float(self.floor) < SCORE_MAX):
            raise GmsError("floor must lie in [0, 10)")
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "widths", widths)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "floor", float(self.floor))

    @property
    def m(self):
        return self.centers[0].m


def sample_uniform(m, seed):
    """Draw one material with every coordinate independently uniform on [0, 1]."""
    if m < 1:
        raise GmsError(f"dimensionality must be at least 1, got {m}")
    rng = derive_rng(seed, "material-space/uniform")
    return MaterialParams(rng.random(int(m)))


def raw_score(user, x):
    """Bump-mixture score before the floor cutoff, clamped to [0, 10]."""
    v = x.values if isinstance(x, MaterialParams) else np.asarray(x, dtype=np.float64)
    if v.shape[-1] != user.m:
        raise DimensionMismatch(f"expected m={user.m}, got {v.shape[-1]}")
    total = np.zeros(v.shape[:-1])
    for center, width, weight in zip(user.centers, user.widths, user.weights):
        d2 = np.sum((v - center.values) ** 2, axis=-1)
        total = total + weight * np.exp(-d2 / (2.0 * width * width))
    return np.clip(10.0 * total, SCORE_MIN, SCORE_MAX)


def oracle_score(user, x):
    """Deterministic oracle score of ``x`` under ``user``, in [0, 10]."""
    raw = raw_score(user, x)
    out = np.where(raw < user.floor, 0.0, raw)
    return float(out) if np.ndim(out) == 0 else out


_COMB_POSITIONS = (0.1, 0.3, 0.5, 0.7, 0.9)
_COMB_DIMS = 3


def _calibrated_user(label, m, seed, zero_rate, width=None, calibration_draws=10_000,
                     peak_quantile=0.998, peak_score=9.5):
    """Bump-mixture user with some coordinates made (nearly) irrelevant.

    The mixture shares one random anchor point; along the last three
    coordinates the anchor is replicated over a dense grid of positions,
    which makes the summed bumps close to constant there (a taste that
    ignores those slots, e.g. emission hue for a glassy look).  The bump
    weight is calibrated so scores peak near the top of the scale, then
    the floor is set to the ``zero_rate`` quantile of raw scores over
    uniform draws.
    """
    if width is None:
        # keeps the bump overlap usable as dimensionality grows
        width = 0.48 * ((m - _COMB_DIMS) / 16.0) ** 0.73
    rng = derive_rng(seed, f"material-space/{label}")
    anchor = rng.random(m)
    comb_dims = list(range(m - _COMB_DIMS, m))
    centers = []
    for combo in itertools.product(_COMB_POSITIONS, repeat=_COMB_DIMS):
        c = anchor.copy()
        c[comb_dims] = combo
        centers.append(MaterialParams(c))
    probe = rng.random((calibration_draws, m))
    total = np.zeros(calibration_draws)
    for c in centers:
        d2 = np.sum((probe - c.values) ** 2, axis=1)
        total += np.exp(-d2 / (2.0 * width * width))
    weight = peak_score / (10.0 * float(np.quantile(total, peak_quantile)))
    user = SyntheticUser(
        centers=tuple(centers),
        widths=(width,) * len(centers),
        weights=(weight,) * len(centers),
        floor=0.0,
        name=f"{label}-m{m}",
    )
    floor = float(np.quantile(raw_score(user, probe), zero_rate))
    return SyntheticUser(
        centers=user.centers,
        widths=user.widths,
        weights=user.weights,
        floor=floor,
        name=user.name,
    )


def default_glassy_user(m=DEFAULT_M, seed=0, zero_rate=0.80):
    """Default ground-truth user: sparse scores, three irrelevant slots.

    Roughly ``zero_rate`` of uniform samples score exactly 0; the rest
    climb toward 10 near the preference bumps.
    """
    return _calibrated_user("glassy-user", m, seed, zero_rate)


def default_translucent_user(m=DEFAULT_M, seed=0, zero_rate=0.90):
    """Harder ground truth: 90% of uniform draws score 0."""
    return _calibrated_user("translucent-user", m, seed, zero_rate)


# ---------------------------------------------------------------------------
# Scored-sample files: one record per line, `c0,c1,...,c(m-1);score`.

SAMPLES_HEADER_PREFIX = "gms-samples v1 m="


def format_samples(samples):
    """Serialize samples to the scored-sample text format."""
    samples = list(samples)
    if not samples:
        raise GmsError("cannot serialize an empty sample set")
    m = samples[0].params.m
    lines = [f"{SAMPLES_HEADER_PREFIX}{m}"]
    for s in samples:
        if s.params.m != m:
            raise DimensionMismatch("mixed dimensionalities in one sample file")
        coords = ",".join(repr(float(v)) for v in s.params.values)
        lines.append(f"{coords};{repr(float(s.score))}")
    return "\n".join(lines) + "\n"


def parse_samples(text):
    """Parse the scored-sample text format back into PreferenceSamples."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith(SAMPLES_HEADER_PREFIX):
        raise GmsError("missing 'gms-samples v1' header")
    m = int(lines[0][len(SAMPLES_HEADER_PREFIX):])
    samples = []
    for ln in lines[1:]:
        coords_text, _, score_text = ln.partition(";")
        values = np.array([float(tok) for tok in coords_text.split(",")])
        if values.size != m:
            raise DimensionMismatch(f"record has {values.size} coordinates, header says {m}")
        samples.append(PreferenceSample(MaterialParams(values), float(score_text)))
    return samples


def write_samples(path, samples):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_samples(samples))


def read_samples(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_samples(fh.read())
