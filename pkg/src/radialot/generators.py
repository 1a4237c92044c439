"""Radial generator functions and their moment integrals.

A generator is a nonnegative profile ``rho`` on the half line.  Placing it at
a center ``m`` with a scale ``c`` in dimension ``d`` yields the density
``rho(|x - m| / c) / Z``.  Everything downstream (transport maps, distances,
EM fitting) is driven by the one-dimensional moments

    M_k = integral_0^inf r^k rho(r) dr,

so this module owns their computation, the normalizer ``Z``, and the
admissibility rules that keep second moments finite.

Four families are supported:

``imq``        (1 + x^2)^(-beta), heavy tailed; needs beta > d/2 to be a
               density in dimension d and beta > d/2 + 1 for a finite
               second moment.
``compact``    (1 - x^2)^(1/beta) on [0, 1], zero beyond.
``gauss``      exp(-x^2 / 2).
``tabulated``  piecewise-linear values on an increasing grid starting at 0,
               treated as compactly supported on that grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from .errors import DivergenceError, DomainError

__all__ = [
    "Generator",
    "MomentCache",
    "imq",
    "compact_poly",
    "gaussian_kernel",
    "tabulated",
    "eval_generator",
    "moment",
    "unit_sphere_area",
    "normalizer",
    "variance_factor",
    "moment_cache",
    "require_admissible",
    "generator_to_json",
    "generator_from_json",
]

# Relative mass allowed beyond the truncation radius of an unbounded profile.
TAIL_REL_TOL = 1e-12

_KINDS = ("imq", "compact", "gauss", "tabulated")


@dataclass(frozen=True)
class Generator:
    """One radial profile.  Immutable and hashable so moment caches can key on it.

    ``beta`` is meaningful for the imq/compact families; ``radii``/``values``
    only for tabulated profiles (stored as tuples to keep the value hashable).
    """

    kind: str
    beta: float | None = None
    radii: tuple[float, ...] | None = None
    values: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise DomainError(f"unknown generator kind {self.kind!r}")
        if self.kind in ("imq", "compact"):
            if self.beta is None or not self.beta > 0:
                raise DomainError(f"{self.kind} generator requires beta > 0, got {self.beta}")
        if self.kind == "tabulated":
            r = np.asarray(self.radii, dtype=float)
            v = np.asarray(self.values, dtype=float)
            if r.ndim != 1 or r.shape != v.shape or r.size < 2:
                raise DomainError("tabulated generator needs matching radii/values arrays (>= 2 points)")
            if r[0] != 0.0 or np.any(np.diff(r) <= 0):
                raise DomainError("tabulated radii must be strictly increasing and start at 0")
            if np.any(v < 0) or not np.all(np.isfinite(v)):
                raise DomainError("tabulated values must be finite and nonnegative")

    @property
    def grid(self) -> tuple[np.ndarray, np.ndarray]:
        r = np.asarray(self.radii, dtype=float)
        v = np.asarray(self.values, dtype=float)
        return r, v

    def support_radius(self) -> float:
        """Radius beyond which the profile is identically zero (inf if unbounded)."""
        if self.kind == "compact":
            return 1.0
        if self.kind == "tabulated":
            return float(self.radii[-1])
        return math.inf

    def __call__(self, x):
        return eval_generator(self, x)


def imq(beta: float) -> Generator:
    return Generator("imq", beta=float(beta))


def compact_poly(beta: float) -> Generator:
    return Generator("compact", beta=float(beta))


def gaussian_kernel() -> Generator:
    return Generator("gauss")


def tabulated(radii, values) -> Generator:
    return Generator(
        "tabulated",
        radii=tuple(float(r) for r in radii),
        values=tuple(float(v) for v in values),
    )


def eval_generator(g: Generator, x):
    """Pointwise profile value rho(x) for scalar or array x >= 0."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0):
        raise DomainError("generator argument must be nonnegative")
    if g.kind == "imq":
        out = (1.0 + arr * arr) ** (-g.beta)
    elif g.kind == "compact":
        out = np.where(arr < 1.0, np.power(np.clip(1.0 - arr * arr, 0.0, None), 1.0 / g.beta), 0.0)
    elif g.kind == "gauss":
        out = np.exp(-0.5 * arr * arr)
    else:
        r, v = g.grid
        out = np.interp(arr, r, v, left=v[0], right=0.0)
        out = np.where(arr > r[-1], 0.0, out)
    if np.isscalar(x) or arr.ndim == 0:
        return float(out)
    return out


def log_eval_generator(g: Generator, x):
    """log rho(x), -inf outside compact supports."""
    arr = np.asarray(x, dtype=float)
    if g.kind == "imq":
        return -g.beta * np.log1p(arr * arr)
    if g.kind == "compact":
        with np.errstate(divide="ignore", invalid="ignore"):
            inside = np.log1p(-np.minimum(arr * arr, 1.0)) / g.beta
        return np.where(arr < 1.0, inside, -np.inf)
    if g.kind == "gauss":
        return -0.5 * arr * arr
    with np.errstate(divide="ignore"):
        return np.log(eval_generator(g, np.abs(arr)))


def unit_sphere_area(d: int) -> float:
    """Surface measure of the unit sphere in R^d: 2 pi^(d/2) / Gamma(d/2)."""
    if d < 1:
        raise DomainError(f"dimension must be >= 1, got {d}")
    return float(2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0))


def _imq_moment_converges(beta: float, k: int) -> bool:
    # integral of r^k (1+r^2)^(-beta) converges iff 2*beta - k > 1
    return 2.0 * beta - k > 1.0


def _imq_truncation(beta: float, k: int, abs_tol: float) -> float:
    # tail bound: integral_R^inf r^(k - 2 beta) dr = R^(k+1-2b) / (2b - k - 1)
    p = 2.0 * beta - k - 1.0
    return max(10.0, (abs_tol * p) ** (-1.0 / p))


def _gauss_tail(k: int, r: float) -> float:
    # integral_r^inf s^k exp(-s^2/2) ds via the upper incomplete gamma function
    a = (k + 1) / 2.0
    return float(2.0 ** ((k - 1) / 2.0) * special.gamma(a) * special.gammaincc(a, 0.5 * r * r))


def _gauss_truncation(k: int, abs_tol: float) -> float:
    lo, hi = 1.0, 2.0
    while _gauss_tail(k, hi) > abs_tol:
        lo, hi = hi, hi * 2.0
        if hi > 1e6:
            break
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _gauss_tail(k, mid) > abs_tol:
            lo = mid
        else:
            hi = mid
    return hi


def _tabulated_moment(g: Generator, k: int) -> float:
    # exact integral of r^k * piecewise-linear(r) segment by segment
    r, v = g.grid
    r0, r1 = r[:-1], r[1:]
    v0, v1 = v[:-1], v[1:]
    dr = r1 - r0
    slope = (v1 - v0) / dr
    intercept = v0 - slope * r0
    # integral r^k (intercept + slope r) dr over [r0, r1]
    term_a = intercept * (r1 ** (k + 1) - r0 ** (k + 1)) / (k + 1)
    term_b = slope * (r1 ** (k + 2) - r0 ** (k + 2)) / (k + 2)
    return float(np.sum(term_a + term_b))


@lru_cache(maxsize=4096)
def moment(g: Generator, k: int) -> float:
    """The k-th radial moment M_k = integral_0^inf r^k rho(r) dr.

    Adaptive quadrature on the truncated range; the discarded tail is bounded
    analytically below 1e-12 of the result.  Raises DivergenceError when the
    integral does not converge.
    """
    if k < 0:
        raise DomainError(f"moment order must be >= 0, got {k}")
    if g.kind == "imq" and not _imq_moment_converges(g.beta, k):
        raise DivergenceError(
            f"moment k={k} of imq generator diverges for beta={g.beta} (requires beta > {(k + 1) / 2})"
        )
    if g.kind == "tabulated":
        return _tabulated_moment(g, k)

    def f(r):
        return r**k * eval_generator(g, r)

    if g.kind == "compact":
        val, _ = integrate.quad(f, 0.0, 1.0, epsabs=1e-14, epsrel=1e-11, limit=200)
        return float(val)
    # two-stage truncation: rough value fixes the absolute tail budget
    rough, _ = integrate.quad(f, 0.0, 10.0, epsabs=1e-14, epsrel=1e-9, limit=200)
    abs_tol = max(rough, 1e-6) * 1e-13
    if g.kind == "imq":
        rmax = _imq_truncation(g.beta, k, abs_tol)
    else:
        rmax = _gauss_truncation(k, abs_tol)
    pieces = np.unique(np.concatenate([[0.0], np.geomspace(1.0, rmax, 8)]))
    val = 0.0
    for a, b in zip(pieces[:-1], pieces[1:]):
        part, _ = integrate.quad(f, a, b, epsabs=1e-15, epsrel=1e-11, limit=200)
        val += part
    return float(val)


def require_admissible(g: Generator, d: int, second_moment: bool = True) -> None:
    """Check that rho is usable in dimension d.

    With ``second_moment`` the stricter finite-covariance rule applies
    (imq beta > d/2 + 1); without it only normalizability (beta > d/2).
    """
    if d < 1:
        raise DomainError(f"dimension must be >= 1, got {d}")
    if g.kind == "imq":
        threshold = d / 2.0 + 1.0 if second_moment else d / 2.0
        if not g.beta > threshold:
            need = "a finite second moment" if second_moment else "normalizability"
            raise DivergenceError(
                f"imq generator with beta={g.beta} lacks {need} in dimension {d} (needs beta > {threshold})"
            )


def moment_cache(g: Generator, d: int, allow_heavy_tail: bool = False) -> "MomentCache":
    return _moment_cache(g, d, allow_heavy_tail)


@dataclass(frozen=True)
class MomentCache:
    """Moments of one (generator, dimension) pair plus its truncation radius."""

    generator: Generator
    dim: int
    m_lo: float  # M_{d-1}
    m_hi: float  # M_{d+1}; inf when only density-admissible
    truncation_radius: float


@lru_cache(maxsize=4096)
def _moment_cache(g: Generator, d: int, allow_heavy_tail: bool) -> MomentCache:
    if d < 1:
        raise DomainError(f"dimension must be >= 1, got {d}")
    if g.kind == "imq":
        if not g.beta > d / 2.0:
            raise DivergenceError(
                f"imq generator with beta={g.beta} is not normalizable in dimension {d} (needs beta > {d / 2})"
            )
        if not allow_heavy_tail and not g.beta > d / 2.0 + 1.0:
            raise DivergenceError(
                f"imq generator with beta={g.beta} has no finite second moment in dimension {d} "
                f"(needs beta > {d / 2 + 1}); pass allow_heavy_tail for density-only use"
            )
    m_lo = moment(g, d - 1)
    if m_lo <= 0 or not math.isfinite(m_lo):
        raise DivergenceError(f"degenerate generator: M_{d - 1} = {m_lo}")
    heavy = g.kind == "imq" and not _imq_moment_converges(g.beta, d + 1)
    m_hi = math.inf if heavy else moment(g, d + 1)

    sup = g.support_radius()
    if math.isfinite(sup):
        rmax = sup
    else:
        k = d - 1 if heavy else d + 1
        ref = m_lo if heavy else m_hi
        if g.kind == "imq":
            rmax = _imq_truncation(g.beta, k, TAIL_REL_TOL * ref)
        else:
            rmax = _gauss_truncation(k, TAIL_REL_TOL * ref)
    return MomentCache(g, d, float(m_lo), float(m_hi), float(rmax))


def normalizer(g: Generator, d: int, c: float, allow_heavy_tail: bool = False) -> float:
    """Z such that rho(|x - m| / c) / Z integrates to 1 over R^d."""
    if c <= 0:
        raise DomainError(f"scale must be positive, got {c}")
    mc = moment_cache(g, d, allow_heavy_tail=allow_heavy_tail)
    return float(c**d * unit_sphere_area(d) * mc.m_lo)


def variance_factor(g: Generator, d: int) -> float:
    """M_{d+1} / M_{d-1}; the covariance of R_d(m, c, rho) is (c^2/d) * this * I."""
    mc = moment_cache(g, d)
    if not math.isfinite(mc.m_hi):
        raise DivergenceError(f"second moment diverges for {g.kind} generator in dimension {d}")
    return float(mc.m_hi / mc.m_lo)


def generator_to_json(g: Generator) -> dict:
    if g.kind == "imq":
        return {"kind": "imq", "beta": g.beta}
    if g.kind == "compact":
        return {"kind": "compact", "beta": g.beta}
    if g.kind == "gauss":
        return {"kind": "gauss"}
    return {"kind": "tabulated", "radii": list(g.radii), "values": list(g.values)}


def generator_from_json(obj: dict) -> Generator:
    try:
        kind = obj["kind"]
    except (TypeError, KeyError) as exc:
        raise DomainError(f"generator JSON needs a 'kind' field: {obj!r}") from exc
    if kind == "imq":
        return imq(obj["beta"])
    if kind == "compact":
        return compact_poly(obj["beta"])
    if kind == "gauss":
        return gaussian_kernel()
    if kind == "tabulated":
        return tabulated(obj["radii"], obj["values"])
    raise DomainError(f"unknown generator kind {kind!r}")
