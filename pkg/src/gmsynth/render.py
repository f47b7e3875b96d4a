"""Deterministic analytic reference renderer: one shaded sphere per material.

Maps a 19-slot parameter vector to a small RGB image of a unit sphere over
a gray gradient background, lit by one fixed directional light plus an
ambient floor.  The shading model is intentionally simple but smooth in
every material coordinate, which is what the preview decoder needs from
its training targets.  The exact formula is written down in
``docs/shading.md`` and is normative: the single-pixel oracle in the test
suite re-implements it independently, scalar by scalar.

Images are low dynamic range, clamped to [0, 1].  Optional additive
Gaussian pixel noise emulates an unconverged stochastic render of the same
scene and is deterministic given the seed.
"""

from dataclasses import dataclass

import numpy as np

from gmsynth.errors import DimensionMismatch, GmsError
from gmsynth.materials import DEFAULT_M, MaterialParams
from gmsynth.seeding import derive_rng

SPHERE_RADIUS = 0.78
LIGHT_DIR = np.array([0.45, 0.55, 0.70]) / np.linalg.norm([0.45, 0.55, 0.70])
VIEW_DIR = np.array([0.0, 0.0, 1.0])
_H = LIGHT_DIR + VIEW_DIR
HALF_DIR = _H / np.linalg.norm(_H)
AMBIENT = 0.08
BG_BOTTOM, BG_TOP = 0.30, 0.55
RIM_TINT = np.array([0.85, 0.90, 0.95])


@dataclass(frozen=True)
class ImageBuffer:
    """Row-major RGB image with channel values in [0, 1]."""

    pixels: np.ndarray  # (height, width, 3)

    def __post_init__(self):
        p = np.ascontiguousarray(self.pixels, dtype=np.float64)
        if p.ndim != 3 or p.shape[2] != 3:
            raise GmsError(f"expected (h, w, 3) pixel array, got {p.shape}")
        if np.any(p < 0.0) or np.any(p > 1.0) or not np.all(np.isfinite(p)):
            raise GmsError("channel values must lie in [0, 1]")
        p.flags.writeable = False
        object.__setattr__(self, "pixels", p)

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def height(self):
        return self.pixels.shape[0]

    def flat(self):
        """Pixels as one vector: (row * width + col) * 3 + channel."""
        return self.pixels.reshape(-1)

    def to_ppm_bytes(self):
        """Binary PPM (P6, maxval 255), rounding half-up."""
        quantized = np.floor(self.pixels * 255.0 + 0.5).astype(np.uint8)
        header = f"P6\n{self.width} {self.height}\n255\n".encode("ascii")
        return header + quantized.tobytes()


def ppm_to_image(data):
    """Parse a P6 PPM produced by ``ImageBuffer.to_ppm_bytes``."""
    if not data.startswith(b"P6"):
        raise GmsError("not a binary PPM stream")
    parts = data.split(b"\n", 3)
    width, height = (int(t) for t in parts[1].split())
    maxval = int(parts[2])
    pixels = np.frombuffer(parts[3], dtype=np.uint8, count=width * height * 3)
    return ImageBuffer(pixels.reshape(height, width, 3).astype(np.float64) / maxval)


def _background(res):
    v = 1.0 - (np.arange(res) + 0.5) / res * 2.0  # +1 at top row, -1 at bottom
    shade = BG_BOTTOM + (BG_TOP - BG_BOTTOM) * (v + 1.0) / 2.0
    return np.repeat(shade[:, None, None], 3, axis=2) * np.ones((1, res, 1))


def render_reference(x, res=32, noise_sigma=0.0, seed=0):
    """Shade the reference sphere for material ``x`` at ``res`` x ``res``.

    Deterministic for noise_sigma=0; with noise, additive Gaussian pixel
    noise of the given standard deviation is applied before the final
    clamp, deterministically in the seed.
    """
    v = x.values if isinstance(x, MaterialParams) else np.asarray(x, dtype=np.float64)
    if v.size != DEFAULT_M:
        raise DimensionMismatch(f"renderer expects m={DEFAULT_M}, got {v.size}")
    if res < 8:
        raise GmsError("resolution must be at least 8")

    albedo = v[0:3]
    metallic, spec_weight, roughness, ior_blend, trans_weight = v[3:8]
    trans_tint = v[8:11]
    scatter_weight = v[11]
    scatter_tint = v[12:15]
    emission_weight = v[15]
    emission = v[16:19]

    cols = (np.arange(res) + 0.5) / res * 2.0 - 1.0
    rows = 1.0 - (np.arange(res) + 0.5) / res * 2.0
    u, w = np.meshgrid(cols, rows)  # w is the vertical ndc coordinate
    r2 = (u * u + w * w) / SPHERE_RADIUS**2
    mask = r2 <= 1.0

    img = _background(res).copy()

    nx = u / SPHERE_RADIUS
    ny = w / SPHERE_RADIUS
    nz = np.sqrt(np.clip(1.0 - r2, 0.0, None))
    ndl_signed = nx * LIGHT_DIR[0] + ny * LIGHT_DIR[1] + nz * LIGHT_DIR[2]
    ndl = np.maximum(ndl_signed, 0.0)
    backlit = np.maximum(-ndl_signed, 0.0)
    ndh = np.maximum(nx * HALF_DIR[0] + ny * HALF_DIR[1] + nz * HALF_DIR[2], 0.0)
    ndv = nz

    diffuse = albedo[None, None, :] * (AMBIENT + (1.0 - 0.6 * metallic) * ndl)[:, :, None]
    exponent = 4.0 + 60.0 * (1.0 - roughness)
    spec_tint = (1.0 - metallic) * np.ones(3) + metallic * albedo
    specular = spec_weight * (ndh**exponent)[:, :, None] * spec_tint[None, None, :]

    color = diffuse + specular
    rim = (ior_blend * (1.0 - ndv) ** 2)[:, :, None]
    color = color * (1.0 - rim) + rim * RIM_TINT[None, None, :]
    color = color * (1.0 - trans_weight) + trans_weight * trans_tint[None, None, :] * img
    color = color + scatter_weight * scatter_tint[None, None, :] * (0.25 + 0.75 * backlit)[:, :, None]
    color = color + emission_weight * emission[None, None, :]

    img[mask] = color[mask]
    img = np.clip(img, 0.0, 1.0)

    if noise_sigma > 0.0:
        rng = derive_rng(seed, "renderer/noise")
        img = np.clip(img + rng.normal(0.0, noise_sigma, img.shape), 0.0, 1.0)
    return ImageBuffer(img)


def generate_dataset(count, res=32, noise_sigma=0.0, seed=0):
    """Yield ``count`` (material, render) pairs, deterministic given seed.

    Pairs are produced lazily in index order; materials are uniform draws.
    """
    if count < 1:
        raise GmsError("count must be at least 1")
    rng = derive_rng(seed, "renderer/dataset")
    for _ in range(count):
        params = MaterialParams(rng.random(DEFAULT_M))
        pair_seed = int(rng.integers(2**62))
        yield params, render_reference(params, res=res, noise_sigma=noise_sigma, seed=pair_seed)
