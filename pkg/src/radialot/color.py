"""Image color work: palette fitting, transfer maps, the subsampled transport
error metric, color averaging over barycenter weights, and density grids for
interpolation figures.

Pixels live in normalized RGB, the cube [0, 1]^3, with no gamma handling;
mapped colors are clamped back into the cube before writing PNGs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from PIL import Image, UnidentifiedImageError

from . import estimation, gmm, rw2
from . import generators as gen
from .discrete_ot import empirical_w2, sinkhorn_barycenter_grid
from .errors import ConfigurationError, DomainError, UnsupportedError
from .mixture import RadialMixture, mixture_density
from .radial import RadialDistribution

__all__ = [
    "ColorCloud",
    "TransferReport",
    "load_image",
    "save_image",
    "fit_palette",
    "transfer",
    "eval_error",
    "average_colors",
    "interpolate_demo",
]

RMM_DEFAULT_COMPONENTS = 15
GMM_DEFAULT_COMPONENTS = 10
AVERAGE_DEFAULT_COMPONENTS = 14
DEFAULT_GENERATOR = gen.imq(3.0)


@dataclass
class ColorCloud:
    """Per-pixel RGB triples in [0,1]^3 plus the grid shape for rebuilding."""

    width: int
    height: int
    pixels: np.ndarray  # (height*width, 3), row-major

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=float).reshape(-1, 3)
        if self.pixels.shape[0] != self.width * self.height:
            raise DomainError(
                f"{self.pixels.shape[0]} pixels do not fill a {self.width}x{self.height} grid"
            )
        if np.any(self.pixels < 0) or np.any(self.pixels > 1):
            raise DomainError("pixel channels must lie in [0, 1]")

    def with_pixels(self, pixels: np.ndarray) -> "ColorCloud":
        return ColorCloud(self.width, self.height, np.clip(pixels, 0.0, 1.0))


@dataclass
class TransferReport:
    """Subsampled squared-transport error of a transfer output against the
    target palette, with the untransferred source as a baseline."""

    error_mean: float
    error_std: float
    samples: int
    repetitions: int
    seed: int
    baseline_mean: float
    baseline_std: float


def load_image(path) -> ColorCloud:
    try:
        with Image.open(path) as img:
            rgb = img.convert("RGB")
            arr = np.asarray(rgb, dtype=float) / 255.0
    except (UnidentifiedImageError, FileNotFoundError, OSError) as exc:
        raise OSError(f"cannot read image {path}: {exc}") from exc
    h, w, _ = arr.shape
    return ColorCloud(width=w, height=h, pixels=arr.reshape(-1, 3))


def save_image(cloud: ColorCloud, path) -> None:
    arr = np.clip(np.round(cloud.pixels * 255.0), 0, 255).astype(np.uint8)
    img = Image.fromarray(arr.reshape(cloud.height, cloud.width, 3), mode="RGB")
    try:
        img.save(path, format="PNG")
    except OSError as exc:
        raise OSError(f"cannot write image {path}: {exc}") from exc


def fit_palette(cloud: ColorCloud, kind: str = "rmm", generator: gen.Generator | None = None,
                n_components: int | None = None, seed: int = 0, batch_size: int = 100,
                max_iter: int = 1500, c_floor: float | None = None, log_path=None):
    """Fit a palette model to the pixel cloud; returns the mixture object."""
    if kind == "rmm":
        g = generator if generator is not None else DEFAULT_GENERATOR
        K = n_components if n_components is not None else RMM_DEFAULT_COMPONENTS
        config = estimation.EMConfig(
            n_components=K,
            batch_size=min(batch_size, cloud.pixels.shape[0]),
            max_iter=max_iter,
            seed=seed,
            c_floor=c_floor,
        )
        return estimation.minibatch_em(cloud.pixels, g, config, log_path=log_path)
    if kind == "gmm":
        K = n_components if n_components is not None else GMM_DEFAULT_COMPONENTS
        return gmm.gmm_em(cloud.pixels, K, seed=seed)
    raise ConfigurationError(f"unknown model kind {kind!r}")


def transfer(source: ColorCloud, source_model, target_model, map_kind: str = "mean",
             seed: int = 0) -> ColorCloud:
    """Recolor the source image by mapping each pixel through the optimal
    component plan between the two palette models."""
    if map_kind not in ("mean", "rand"):
        raise ConfigurationError(f"map kind must be 'mean' or 'rand', got {map_kind!r}")
    rmm_pair = isinstance(source_model, RadialMixture) and isinstance(target_model, RadialMixture)
    gmm_pair = isinstance(source_model, gmm.GaussianMixture) and isinstance(target_model, gmm.GaussianMixture)
    if not (rmm_pair or gmm_pair):
        raise ConfigurationError("source and target models must both be radial or both Gaussian")
    if source_model.dim != 3 or target_model.dim != 3:
        raise ConfigurationError("color models must be 3-dimensional")
    if rmm_pair:
        res = rw2.rw2_distance(source_model, target_model)
        if map_kind == "mean":
            mapped = rw2.t_mean(source_model, target_model, res, source.pixels)
        else:
            mapped = rw2.t_rand(source_model, target_model, res, source.pixels, seed=seed)
    else:
        res = gmm.gw2_distance(source_model, target_model)
        if map_kind == "mean":
            mapped = gmm.gmm_t_mean(source_model, target_model, res, source.pixels)
        else:
            mapped = gmm.gmm_t_rand(source_model, target_model, res, source.pixels, seed=seed)
    return source.with_pixels(mapped)


def eval_error(source: ColorCloud, target: ColorCloud, transferred: ColorCloud,
               m: int = 1000, reps: int = 10, seed: int = 0,
               method: str = "exact", epsilon: float | None = None) -> TransferReport:
    """Mean and spread of the subsampled squared transport cost between the
    transferred palette and the target palette (plus the source baseline)."""
    if reps < 1:
        raise DomainError("at least one repetition is required")
    n_min = min(source.pixels.shape[0], target.pixels.shape[0], transferred.pixels.shape[0])
    if m > n_min:
        raise DomainError(f"m={m} exceeds the smallest pixel count {n_min}")
    if method == "exact" and m > 2000:
        raise DomainError("m > 2000 needs method='sinkhorn' with an epsilon")
    rng = np.random.default_rng(seed)
    errors, baselines = [], []
    for _ in range(reps):
        idx_t = rng.choice(target.pixels.shape[0], m, replace=False)
        idx_o = rng.choice(transferred.pixels.shape[0], m, replace=False)
        idx_s = rng.choice(source.pixels.shape[0], m, replace=False)
        tgt = target.pixels[idx_t]
        errors.append(empirical_w2(transferred.pixels[idx_o], tgt, method=method, epsilon=epsilon))
        baselines.append(empirical_w2(source.pixels[idx_s], tgt, method=method, epsilon=epsilon))
    errors = np.asarray(errors)
    baselines = np.asarray(baselines)
    return TransferReport(
        error_mean=float(errors.mean()),
        error_std=float(errors.std(ddof=1) if reps > 1 else 0.0),
        samples=m,
        repetitions=reps,
        seed=seed,
        baseline_mean=float(baselines.mean()),
        baseline_std=float(baselines.std(ddof=1) if reps > 1 else 0.0),
    )


def average_colors(clouds: list[ColorCloud], reference: int, weight_grid,
                   generator: gen.Generator | None = None,
                   n_components: int = AVERAGE_DEFAULT_COMPONENTS,
                   seed: int = 0, batch_size: int = 100, max_iter: int = 1500):
    """Recolor the reference image toward barycenters of all palettes.

    One radial mixture is fitted per image; for every weight vector the
    palette barycenter is computed and the reference image is mapped onto it.
    Returns the list of recolored clouds, in weight-grid order.
    """
    clouds = list(clouds)
    if not 0 <= reference < len(clouds):
        raise DomainError(f"reference index {reference} out of range")
    g = generator if generator is not None else DEFAULT_GENERATOR
    models = [
        fit_palette(c, "rmm", g, n_components, seed=seed + i, batch_size=batch_size, max_iter=max_iter)
        for i, c in enumerate(clouds)
    ]
    outputs = []
    for w in weight_grid:
        w = np.asarray(w, dtype=float)
        if w.shape != (len(clouds),):
            raise DomainError("each weight vector needs one entry per image")
        bary, _ = rw2.rw2_barycenter(models, w)
        outputs.append(transfer(clouds[reference], models[reference], bary, map_kind="mean"))
    return outputs


def _mixture_span(mu: RadialMixture, cover: float = 0.9999):
    los, his = [], []
    for c in mu.components:
        r = c.scale * c.profile.quantile(cover)
        los.append(c.center - r)
        his.append(c.center + r)
    return np.min(los, axis=0), np.max(his, axis=0)


def interpolate_demo(mix_a: RadialMixture, mix_b: RadialMixture, ts,
                     grid_points: int | None = None, sinkhorn_compare: bool = False,
                     epsilon: float | None = None):
    """Density grids along the geodesic between two mixtures (1-D or 2-D).

    Returns (rows, columns): each row is one grid point at one time, carrying
    the geodesic mixture density and, optionally, the entropic grid
    barycenter density computed with the usual regularization (5e-4 in 1-D,
    5e-3 in 2-D).
    """
    d = mix_a.dim
    if d not in (1, 2) or mix_b.dim != d:
        raise UnsupportedError("density grids support matching 1-D or 2-D mixtures only")
    n_pts = grid_points if grid_points is not None else (100 if d == 1 else 50)
    lo_a, hi_a = _mixture_span(mix_a)
    lo_b, hi_b = _mixture_span(mix_b)
    lo, hi = np.minimum(lo_a, lo_b), np.maximum(hi_a, hi_b)
    axes = [np.linspace(lo[j], hi[j], n_pts) for j in range(d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    cell = math.prod(float(ax[1] - ax[0]) for ax in axes)

    eps = epsilon if epsilon is not None else (5e-4 if d == 1 else 5e-3)
    base = rw2.rw2_distance(mix_a, mix_b)
    wa = None
    if sinkhorn_compare:
        da = mixture_density(mix_a, pts).reshape([n_pts] * d)
        db = mixture_density(mix_b, pts).reshape([n_pts] * d)
        wa, wb = da / da.sum(), db / db.sum()

    rows = []
    for t in ts:
        if not 0.0 <= t <= 1.0:
            raise DomainError(f"interpolation time must lie in [0, 1], got {t}")
        mt = rw2.rw2_geodesic(mix_a, mix_b, t, result=base)
        dens = np.atleast_1d(mixture_density(mt, pts))
        w2_dens = None
        if sinkhorn_compare:
            q = sinkhorn_barycenter_grid([wa, wb], [1.0 - t, t], axes, eps)
            w2_dens = q.ravel() / cell
        for i in range(pts.shape[0]):
            row = {"t": float(t)}
            for j in range(d):
                row["xy"[j]] = float(pts[i, j])
            row["density"] = float(dens[i])
            if w2_dens is not None:
                row["w2_density"] = float(w2_dens[i])
            rows.append(row)
    columns = ["t"] + ["xy"[j] for j in range(d)] + ["density"]
    if sinkhorn_compare:
        columns.append("w2_density")
    return rows, columns


def write_rows_csv(rows, columns, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(repr(row[c]) for c in columns) + "\n")


def demo_preset_mixtures():
    """A pair of 1-D heavy-tail mixtures for the interpolation demo."""
    g = gen.imq(2.0)
    a = RadialMixture(
        [0.3, 0.7],
        [RadialDistribution([-3.0], 0.6, g), RadialDistribution([0.5], 0.4, g)],
    )
    b = RadialMixture(
        [0.5, 0.5],
        [RadialDistribution([2.0], 0.3, g), RadialDistribution([4.0], 0.8, g)],
    )
    return a, b
