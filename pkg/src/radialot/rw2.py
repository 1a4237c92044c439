"""Transport distance, geodesics, maps, and barycenters for radial mixtures.

A mixture is treated as a discrete measure on the space of radially
contoured components: the distance solves the transportation LP whose costs
are squared component W2 distances, the geodesic interpolates the matched
component pairs, and the two transport maps (conditional mean and randomized
pair choice) are built from the optimal plan.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import radial
from .discrete_ot import MultimarginalPlan, TransportPlan, solve_multimarginal, solve_transport
from .errors import DivergenceError, DomainError, UndefinedConditionalError, UnsupportedError
from .mixture import RadialMixture, dumps_canonical, merge_duplicates, mixture_to_json

__all__ = [
    "RW2Result",
    "rw2_distance",
    "rw2_geodesic",
    "assignment_probabilities",
    "t_mean",
    "t_rand",
    "rw2_upper_bound_gap",
    "rw2_barycenter",
]

PLAN_WEIGHT_FLOOR = 1e-15


@dataclass
class RW2Result:
    """Distance plus the optimal component pairing that produced it."""

    distance: float
    plan: TransportPlan
    component_costs: np.ndarray  # squared component W2 values, K0 x K1
    source: RadialMixture = field(repr=False, default=None)
    target: RadialMixture = field(repr=False, default=None)
    _map_cache: dict = field(default_factory=dict, repr=False)

    def component_map(self, k: int, l: int):
        """Monge map of component pair (k, l), built on first use."""
        if (k, l) not in self._map_cache:
            nu0 = self.source.components[k]
            nu1 = self.target.components[l]
            self._map_cache[(k, l)] = lambda x, a=nu0, b=nu1: radial.monge_map(a, b, x)
        return self._map_cache[(k, l)]


def _component_cost_matrix(mu0: RadialMixture, mu1: RadialMixture) -> np.ndarray:
    costs = np.empty((mu0.size, mu1.size))
    for k, a in enumerate(mu0.components):
        for l, b in enumerate(mu1.components):
            try:
                costs[k, l] = radial.pairwise_w2_sq(a, b)
            except DivergenceError as exc:
                raise DivergenceError(f"component pair ({k}, {l}): {exc}") from exc
    return costs


def rw2_distance(mu0: RadialMixture, mu1: RadialMixture) -> RW2Result:
    """Distance between two radial mixtures with the optimal component plan."""
    if mu0.dim != mu1.dim:
        raise DomainError(f"dimension mismatch: {mu0.dim} vs {mu1.dim}")
    # solve in a canonical orientation so the metric is exactly symmetric
    swap = dumps_canonical(mixture_to_json(mu0)) > dumps_canonical(mixture_to_json(mu1))
    a, b = (mu1, mu0) if swap else (mu0, mu1)
    costs = _component_cost_matrix(a, b)
    plan = solve_transport(a.weights, b.weights, costs)
    distance = math.sqrt(max(plan.objective, 0.0))
    if swap:
        costs = costs.T
        plan = TransportPlan(
            matrix=plan.matrix.T,
            row_marginal=plan.col_marginal,
            col_marginal=plan.row_marginal,
            objective=plan.objective,
        )
    return RW2Result(distance=distance, plan=plan, component_costs=costs, source=mu0, target=mu1)


def _positive_pairs(plan_matrix: np.ndarray):
    pairs = np.argwhere(plan_matrix > PLAN_WEIGHT_FLOOR)
    return [(int(k), int(l)) for k, l in pairs]


def rw2_geodesic(mu0: RadialMixture, mu1: RadialMixture, t: float,
                 result: RW2Result | None = None) -> RadialMixture:
    """Mixture at time t on the geodesic from mu0 to mu1."""
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"interpolation time must lie in [0, 1], got {t}")
    if result is None:
        result = rw2_distance(mu0, mu1)
    weights, comps = [], []
    for k, l in _positive_pairs(result.plan.matrix):
        weights.append(result.plan.matrix[k, l])
        comps.append(radial.interpolate(mu0.components[k], mu1.components[l], t))
    w = np.asarray(weights)
    return merge_duplicates(w / w.sum(), comps)


def _log_gamma_rows(mu0: RadialMixture, X: np.ndarray, fallback: bool):
    """Per-point component densities f0k(x) normalized by the mixture density.

    Points of zero mixture density either raise (fallback=False) or are
    assigned one-hot to the component with the smallest |x - m_k| / c_k.
    """
    logs = mu0.log_densities(X)
    dens = np.exp(logs, where=np.isfinite(logs), out=np.zeros_like(logs))
    md = dens @ mu0.weights
    bad = md <= 0.0
    if np.any(bad):
        if not fallback:
            raise UndefinedConditionalError(
                "mixture density is zero at the query point; no conditional assignment exists"
            )
        scores = np.stack(
            [np.linalg.norm(X - c.center, axis=1) / c.scale for c in mu0.components], axis=1
        )
        nearest = np.argmin(scores[bad], axis=1)
        dens[bad] = 0.0
        dens[np.where(bad)[0], nearest] = mu0.weights[nearest]
        md = dens @ mu0.weights
    return dens / md[:, None]


def assignment_probabilities(mu0: RadialMixture, plan: TransportPlan, x) -> np.ndarray:
    """p_{k,l}(x) = w_{k,l} f0k(x) / mixture density; sums to 1 on the support."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    gamma = _log_gamma_rows(mu0, X, fallback=False)
    probs = gamma[:, :, None] * plan.matrix[None, :, :]
    return probs[0] if single else probs


def t_mean(mu0: RadialMixture, mu1: RadialMixture, result: RW2Result, x):
    """Conditional-expectation transport map under the optimal plan."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    gamma = _log_gamma_rows(mu0, X, fallback=True)
    out = np.zeros_like(X)
    for k, l in _positive_pairs(result.plan.matrix):
        w = result.plan.matrix[k, l]
        mapped = radial.monge_map(mu0.components[k], mu1.components[l], X)
        out += (gamma[:, k] * w)[:, None] * mapped
    return out[0] if single else out


def t_rand(mu0: RadialMixture, mu1: RadialMixture, result: RW2Result, x, seed: int):
    """Randomized transport map: applies T_{kl} with probability p_{k,l}(x)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    gamma = _log_gamma_rows(mu0, X, fallback=True)
    pairs = _positive_pairs(result.plan.matrix)
    probs = np.stack([gamma[:, k] * result.plan.matrix[k, l] for k, l in pairs], axis=1)
    probs /= probs.sum(axis=1, keepdims=True)
    rng = np.random.default_rng(seed)
    draws = rng.uniform(size=X.shape[0])
    choice = (np.cumsum(probs, axis=1) < draws[:, None]).sum(axis=1)
    choice = np.minimum(choice, len(pairs) - 1)
    out = np.zeros_like(X)
    for i, (k, l) in enumerate(pairs):
        sel = choice == i
        if np.any(sel):
            out[sel] = radial.monge_map(mu0.components[k], mu1.components[l], X[sel])
    return out[0] if single else out


def rw2_upper_bound_gap(mu0: RadialMixture, mu1: RadialMixture) -> float:
    """Additive slack in the two-sided comparison with the plain W2 distance:
    W2 <= distance <= W2 + gap."""
    total = 0.0
    for mu in (mu0, mu1):
        acc = 0.0
        for w, c in zip(mu.weights, mu.components):
            acc += 2.0 * w * c.scale**2 * c.variance_factor()
        total += math.sqrt(acc)
    return float(total)


def rw2_barycenter(mixtures, lambdas) -> tuple[RadialMixture, MultimarginalPlan]:
    """Weighted barycenter of N shared-generator mixtures via the
    multimarginal LP over component barycenter costs."""
    mixtures = list(mixtures)
    lam = np.asarray(lambdas, dtype=float)
    if len(mixtures) < 1 or lam.shape != (len(mixtures),):
        raise DomainError("one weight per mixture is required")
    if np.any(lam < 0) or abs(lam.sum() - 1.0) > 1e-9:
        raise DomainError("weights must lie on the probability simplex")
    g = mixtures[0].components[0].generator
    d = mixtures[0].dim
    for j, mu in enumerate(mixtures):
        if mu.dim != d:
            raise DomainError(f"mixture {j} has dimension {mu.dim}, expected {d}")
        if any(c.generator != g for c in mu.components):
            raise UnsupportedError("barycenters require one shared generator across all components")
    vf = mixtures[0].components[0].variance_factor()

    sizes = tuple(mu.size for mu in mixtures)
    n = len(mixtures)
    centers = [np.stack([c.center for c in mu.components]) for mu in mixtures]
    scales = [np.array([c.scale for c in mu.components]) for mu in mixtures]

    def bshape(arr, j, extra):
        shape = [1] * n + list(extra)
        shape[j] = sizes[j]
        return arr.reshape(shape)

    m_star = sum(lam[j] * bshape(centers[j], j, (d,)) for j in range(n))
    c_star = sum(lam[j] * bshape(scales[j], j, ()) for j in range(n))
    cost = np.zeros(sizes)
    for j in range(n):
        diff = bshape(centers[j], j, (d,)) - m_star
        cost = cost + lam[j] * (np.sum(diff * diff, axis=-1) + (bshape(scales[j], j, ()) - c_star) ** 2 * vf)

    plan = solve_multimarginal([mu.weights for mu in mixtures], cost)
    weights, comps = [], []
    for idx, w in sorted(plan.entries.items()):
        if w <= PLAN_WEIGHT_FLOOR:
            continue
        weights.append(w)
        sel = [mixtures[j].components[idx[j]] for j in range(n)]
        comps.append(radial.barycenter_shared_generator(sel, lam))
    w = np.asarray(weights)
    return merge_duplicates(w / w.sum(), comps), plan
