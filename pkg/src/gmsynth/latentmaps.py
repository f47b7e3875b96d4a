"""Color-coded latent grids and interpolated queries.

Three codings over the 2-D latent plane: expected preference (GP score of
the back-projected material), similarity to a chosen material (decoder
image distance, mapped through exp(-d/median) so the grid uses the full
[0,1] range), and their elementwise product, which highlights variants
that are both similar and well liked.  Grid values live at lattice nodes
spanning the training-latent bounding box padded by 10%; queries between
nodes are bilinear.
"""

import json
from dataclasses import dataclass

import numpy as np

from gmsynth.decoder import forward, forward_raw
from gmsynth.errors import DimensionMismatch, GmsError
from gmsynth.gplvm import project, project_batch
from gmsynth.gpr import predict_batch
from gmsynth.materials import MaterialParams
from gmsynth.render import ImageBuffer

PREFERENCE_RESOLUTION = 50
SIMILARITY_RESOLUTION = 20
BOUNDS_PAD = 0.10


@dataclass(frozen=True)
class GridLayer:
    """One r x r coding of the latent plane.

    ``bounds`` is (xmin, xmax, ymin, ymax); ``values[i, j]`` sits at
    ``(xmin + j*dx, ymin + i*dy)`` with nodes on the bounds themselves.
    """

    kind: str
    bounds: tuple
    values: np.ndarray
    distances: np.ndarray = None  # raw image distances, similarity grids only

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1] or v.shape[0] < 2:
            raise GmsError(f"grid must be square with r >= 2, got {v.shape}")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "bounds", tuple(float(b) for b in self.bounds))

    @property
    def resolution(self):
        return self.values.shape[0]


@dataclass(frozen=True)
class BilinearSample:
    value: float
    clamped: bool


@dataclass(frozen=True)
class LatentGrid:
    """Preference, similarity and product codings sharing one lattice."""

    bounds: tuple
    preference: GridLayer
    similarity: GridLayer  # resampled to the preference resolution
    product: GridLayer
    similarity_native: GridLayer  # at its own (coarser) resolution

    @property
    def resolution(self):
        return self.preference.resolution


def latent_bounds(model, pad=BOUNDS_PAD):
    """Axis-aligned box around the training latents, padded per side."""
    lo = model.latents.min(axis=0)
    hi = model.latents.max(axis=0)
    span = np.maximum(hi - lo, 1e-9)
    lo = lo - pad * span
    hi = hi + pad * span
    return (float(lo[0]), float(hi[0]), float(lo[1]), float(hi[1]))


def grid_points(bounds, r):
    """Lattice nodes in row-major order: row i varies y, column j varies x."""
    xmin, xmax, ymin, ymax = bounds
    xs = np.linspace(xmin, xmax, r)
    ys = np.linspace(ymin, ymax, r)
    gx, gy = np.meshgrid(xs, ys)
    return np.stack([gx.ravel(), gy.ravel()], axis=1)


def preference_map(pref_model, latent_model, r=PREFERENCE_RESOLUTION, bounds=None):
    """Expected preference of the back-projected material at each node."""
    bounds = bounds or latent_bounds(latent_model)
    points = grid_points(bounds, r)
    means, _ = project_batch(latent_model, points)
    materials = np.clip(means, 0.0, 1.0)
    scores, _ = predict_batch(pref_model, materials)
    return GridLayer(kind="preference", bounds=bounds, values=scores.reshape(r, r))


def similarity_map(net, latent_model, x_star, r=SIMILARITY_RESOLUTION, bounds=None,
                   batch_size=64):
    """Image-space similarity of each node's material to ``x_star``.

    Distances are L2 norms between clamped decoder images; the similarity
    is exp(-d / median distance) so a median-distance cell reads exp(-1).
    """
    bounds = bounds or latent_bounds(latent_model)
    points = grid_points(bounds, r)
    means, _ = project_batch(latent_model, points)
    materials = np.clip(means, 0.0, 1.0)

    star = x_star.values if isinstance(x_star, MaterialParams) else np.asarray(x_star)
    ref = np.clip(forward_raw(net, star[None, :]).astype(np.float64), 0.0, 1.0)
    distances = np.empty(points.shape[0])
    for start in range(0, points.shape[0], batch_size):
        out = forward_raw(net, materials[start : start + batch_size])
        imgs = np.clip(out.astype(np.float64), 0.0, 1.0)
        distances[start : start + batch_size] = np.linalg.norm(imgs - ref, axis=1)
    sigma = max(float(np.median(distances)), 1e-12)
    values = np.exp(-distances / sigma)
    return GridLayer(
        kind="similarity",
        bounds=bounds,
        values=values.reshape(r, r),
        distances=distances.reshape(r, r),
    )


def product_map(preference, similarity):
    """Elementwise product of two equal-shape grids."""
    pv = preference.values if isinstance(preference, GridLayer) else np.asarray(preference)
    sv = similarity.values if isinstance(similarity, GridLayer) else np.asarray(similarity)
    if pv.shape != sv.shape:
        raise DimensionMismatch(f"grid shapes differ: {pv.shape} vs {sv.shape}")
    bounds = preference.bounds if isinstance(preference, GridLayer) else (0, 1, 0, 1)
    return GridLayer(kind="product", bounds=bounds, values=pv * sv)


def query_bilinear(grid, point):
    """Bilinear blend of the four nodes around ``point``.

    Out-of-bounds points are clamped to the lattice and flagged.
    """
    x, y = float(point[0]), float(point[1])
    xmin, xmax, ymin, ymax = grid.bounds
    r = grid.resolution
    tx = (x - xmin) / (xmax - xmin) * (r - 1)
    ty = (y - ymin) / (ymax - ymin) * (r - 1)
    clamped = not (0.0 <= tx <= r - 1 and 0.0 <= ty <= r - 1)
    tx = min(max(tx, 0.0), float(r - 1))
    ty = min(max(ty, 0.0), float(r - 1))
    j0 = min(int(np.floor(tx)), r - 2)
    i0 = min(int(np.floor(ty)), r - 2)
    fx = tx - j0
    fy = ty - i0
    v = grid.values
    value = (
        (1 - fy) * ((1 - fx) * v[i0, j0] + fx * v[i0, j0 + 1])
        + fy * ((1 - fx) * v[i0 + 1, j0] + fx * v[i0 + 1, j0 + 1])
    )
    return BilinearSample(value=float(value), clamped=clamped)


def resample_bilinear(grid, r):
    """Resample a grid to resolution ``r`` over the same bounds."""
    points = grid_points(grid.bounds, r)
    values = np.array([query_bilinear(grid, p).value for p in points])
    return GridLayer(kind=grid.kind, bounds=grid.bounds, values=values.reshape(r, r))


def build_latent_grid(pref_model, latent_model, net, x_star,
                      r_preference=PREFERENCE_RESOLUTION,
                      r_similarity=SIMILARITY_RESOLUTION):
    """Build all three codings over a shared bounding box."""
    bounds = latent_bounds(latent_model)
    pref = preference_map(pref_model, latent_model, r_preference, bounds)
    sim_native = similarity_map(net, latent_model, x_star, r_similarity, bounds)
    sim = resample_bilinear(sim_native, r_preference)
    prod = product_map(pref, sim)
    return LatentGrid(
        bounds=bounds,
        preference=pref,
        similarity=sim,
        product=prod,
        similarity_native=sim_native,
    )


@dataclass(frozen=True)
class ExploreResult:
    params: MaterialParams
    raw: np.ndarray
    preview: ImageBuffer


def explore(latent_model, net, origin, displacement=(0.0, 0.0)):
    """Project ``origin + displacement`` and decode its preview image."""
    point = np.asarray(origin, dtype=np.float64) + np.asarray(displacement, dtype=np.float64)
    projection = project(latent_model, point)
    preview = forward(net, projection.params)
    return ExploreResult(params=projection.params, raw=projection.raw, preview=preview)


# ---------------------------------------------------------------------------
# Text export: one row per line, space-separated decimals, JSON sidecar.


def grid_to_text(grid):
    return "\n".join(" ".join(repr(float(v)) for v in row) for row in grid.values) + "\n"


def grid_sidecar(grid):
    return json.dumps(
        {"r": grid.resolution, "bounds": list(grid.bounds), "kind": grid.kind}, indent=0
    )


def write_grid(path, grid):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(grid_to_text(grid))
    with open(str(path) + ".meta", "w", encoding="utf-8") as fh:
        fh.write(grid_sidecar(grid))


def read_grid(path):
    with open(str(path) + ".meta", "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    values = np.loadtxt(path, ndmin=2)
    return GridLayer(kind=meta["kind"], bounds=tuple(meta["bounds"]), values=values)
