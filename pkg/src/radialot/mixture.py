"""The radial mixture model object: densities, sampling, validation, JSON.

A mixture is simplex weights over radially contoured components.  Components
may carry different generators (distances and maps support that); exact
duplicates are forbidden because identifiability is what makes the mixture
transport distance a metric, so construction offers a merge step that sums
the weights of structurally identical components.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import generators as gen
from ._kernels import KIND_CODES, component_log_densities
from .errors import DomainError
from .radial import RadialDistribution
from .radial import sample as sample_component

__all__ = [
    "RadialMixture",
    "mixture_density",
    "sample_mixture",
    "validate",
    "merge_duplicates",
    "mixture_to_json",
    "mixture_from_json",
    "save_mixture",
    "load_mixture",
]

DUPLICATE_TOL = 1e-12


@dataclass(eq=False)
class RadialMixture:
    """Simplex weights plus K radially contoured components in R^d."""

    weights: np.ndarray
    components: list[RadialDistribution]
    dim: int = 0
    _param_cache: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        self.weights = w
        self.components = list(self.components)
        if not self.components:
            raise DomainError("a mixture needs at least one component")
        if w.shape != (len(self.components),):
            raise DomainError("one weight per component is required")
        if not self.dim:
            self.dim = self.components[0].dim

    @property
    def size(self) -> int:
        return len(self.components)

    def log_densities(self, X: np.ndarray) -> np.ndarray:
        """(n, K) log component densities (normalized, no mixture weights)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self._param_cache is None:
            self._param_cache = _pack_components(self.components)
        packed = self._param_cache
        if packed is not None:
            centers, scales, kinds, betas, log_norms = packed
            return component_log_densities(X, centers, scales, kinds, betas, log_norms)
        cols = [np.log(np.maximum(c.density(X), 0.0)) for c in self.components]
        with np.errstate(divide="ignore"):
            return np.stack(cols, axis=1)

    def density(self, x) -> float | np.ndarray:
        return mixture_density(self, x)

    def mean(self) -> np.ndarray:
        return sum(w * c.center for w, c in zip(self.weights, self.components))


def _pack_components(components):
    """Parallel parameter arrays for the kernel backend; None when a
    tabulated component forces the generic path."""
    if any(c.generator.kind == "tabulated" for c in components):
        return None
    centers = np.stack([c.center for c in components])
    scales = np.array([c.scale for c in components])
    kinds = np.array([KIND_CODES[c.generator.kind] for c in components], dtype=np.int64)
    betas = np.array([c.generator.beta if c.generator.beta is not None else 0.0 for c in components])
    log_norms = np.log([c.normalizer for c in components])
    return centers, scales, kinds, betas, log_norms


def mixture_density(mu: RadialMixture, x) -> float | np.ndarray:
    """Mixture density at one point or an (n, d) array."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    if pts.shape[1] != mu.dim:
        raise DomainError(f"points have dimension {pts.shape[1]}, mixture has {mu.dim}")
    logs = mu.log_densities(pts)
    vals = np.exp(logs, where=np.isfinite(logs), out=np.zeros_like(logs)) @ mu.weights
    return float(vals[0]) if single else vals


def sample_mixture(mu: RadialMixture, n: int, seed: int) -> np.ndarray:
    """n points from the mixture; categorical component draw then radial sampling."""
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(n, mu.weights / mu.weights.sum())
    blocks = []
    for k, cnt in enumerate(counts):
        if cnt:
            blocks.append(sample_component(mu.components[k], cnt, seed=int(rng.integers(2**63))))
    out = np.concatenate(blocks, axis=0)
    return out[rng.permutation(n)]


def validate(mu: RadialMixture) -> list[str]:
    """Diagnostic check; returns a list of violations (empty = ok)."""
    problems = []
    w = mu.weights
    if np.any(w < 0):
        problems.append("negative mixture weight")
    if abs(float(w.sum()) - 1.0) > 1e-12:
        problems.append(f"weights sum to {w.sum()!r}, not 1")
    for k, c in enumerate(mu.components):
        if c.dim != mu.dim:
            problems.append(f"component {k} has dimension {c.dim}, mixture has {mu.dim}")
        if not c.scale > 0:
            problems.append(f"component {k} has nonpositive scale")
        try:
            gen.moment_cache(c.generator, c.dim, allow_heavy_tail=c.allow_heavy_tail)
        except gen.DivergenceError as exc:  # type: ignore[attr-defined]
            problems.append(f"component {k}: {exc}")
    for i in range(mu.size):
        for j in range(i + 1, mu.size):
            if mu.components[i].same_law(mu.components[j], tol=DUPLICATE_TOL):
                problems.append(f"components {i} and {j} are duplicates; merge their weights")
    return problems


def merge_duplicates(weights, components, tol: float = DUPLICATE_TOL) -> RadialMixture:
    """Build a mixture, summing weights of structurally identical components."""
    out_w: list[float] = []
    out_c: list[RadialDistribution] = []
    for w, c in zip(weights, components):
        for i, kept in enumerate(out_c):
            if kept.same_law(c, tol=tol):
                out_w[i] += float(w)
                break
        else:
            out_w.append(float(w))
            out_c.append(c)
    return RadialMixture(np.asarray(out_w), out_c)


def mixture_to_json(mu: RadialMixture) -> dict:
    default = gen.generator_to_json(mu.components[0].generator)
    comps = []
    for w, c in zip(mu.weights, mu.components):
        entry = {"weight": float(w), "center": [float(v) for v in c.center], "scale": c.scale}
        gj = gen.generator_to_json(c.generator)
        if gj != default:
            entry["generator"] = gj
        comps.append(entry)
    return {"dim": mu.dim, "generator_default": default, "components": comps}


def mixture_from_json(obj: dict, allow_heavy_tail: bool = False) -> RadialMixture:
    try:
        dim = int(obj["dim"])
        default = gen.generator_from_json(obj["generator_default"])
        entries = obj["components"]
    except (TypeError, KeyError) as exc:
        raise DomainError(f"malformed mixture JSON: missing {exc}") from exc
    weights, comps = [], []
    for entry in entries:
        g = gen.generator_from_json(entry["generator"]) if "generator" in entry else default
        comps.append(
            RadialDistribution(
                center=np.asarray(entry["center"], dtype=float),
                scale=float(entry["scale"]),
                generator=g,
                dim=dim,
                allow_heavy_tail=allow_heavy_tail,
            )
        )
        weights.append(float(entry["weight"]))
    return RadialMixture(np.asarray(weights), comps, dim=dim)


def dumps_canonical(obj: dict) -> str:
    """Stable byte representation used for all model files."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


def save_mixture(mu: RadialMixture, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_canonical(mixture_to_json(mu)))


def load_mixture(path, allow_heavy_tail: bool = False) -> RadialMixture:
    with open(path, "r", encoding="utf-8") as fh:
        return mixture_from_json(json.load(fh), allow_heavy_tail=allow_heavy_tail)
