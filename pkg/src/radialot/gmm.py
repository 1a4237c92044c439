"""Gaussian-mixture baseline: closed-form W2, affine Monge maps, the mixture
transport distance over Gaussian components, T_mean/T_rand, and EM fitting.

Everything mirrors the radial-mixture pipeline so the two model families can
be compared on identical tasks; the component-level formulas are the
classical Gaussian ones (Bures covariance metric, affine optimal map,
closed-form EM updates).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .discrete_ot import TransportPlan, solve_transport
from .errors import DomainError
from .mixture import dumps_canonical
from .rw2 import PLAN_WEIGHT_FLOOR, RW2Result

__all__ = [
    "GaussianComponent",
    "GaussianMixture",
    "gaussian_w2",
    "gaussian_monge",
    "gw2_distance",
    "gmm_t_mean",
    "gmm_t_rand",
    "gmm_em",
    "parameter_count",
    "gmm_to_json",
    "gmm_from_json",
]

EIG_FLOOR = 1e-10
COV_REG = 1e-6


def _sym_sqrt(mat: np.ndarray, inverse: bool = False) -> np.ndarray:
    """Matrix square root by symmetric eigendecomposition with clamping."""
    vals, vecs = np.linalg.eigh(0.5 * (mat + mat.T))
    vals = np.clip(vals, EIG_FLOOR, None)
    root = np.sqrt(vals)
    if inverse:
        root = 1.0 / root
    return (vecs * root) @ vecs.T


@dataclass(eq=False)
class GaussianComponent:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        self.mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        self.cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        d = self.mean.size
        if self.cov.shape != (d, d):
            raise DomainError(f"covariance shape {self.cov.shape} does not match mean length {d}")
        if np.max(np.abs(self.cov - self.cov.T)) > 1e-12 * max(1.0, np.max(np.abs(self.cov))):
            raise DomainError("covariance must be symmetric")
        if np.linalg.eigvalsh(0.5 * (self.cov + self.cov.T)).min() < -1e-12:
            raise DomainError("covariance must be positive semidefinite")

    @property
    def dim(self) -> int:
        return self.mean.size

    def log_density(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        d = self.dim
        chol = np.linalg.cholesky(self.cov + EIG_FLOOR * np.eye(d))
        sol = np.linalg.solve(chol, (X - self.mean).T)
        quad = np.sum(sol * sol, axis=0)
        logdet = 2.0 * np.sum(np.log(np.diag(chol)))
        return -0.5 * (quad + logdet + d * math.log(2.0 * math.pi))

    def same_law(self, other: "GaussianComponent", tol: float = 1e-12) -> bool:
        return (
            self.dim == other.dim
            and float(np.linalg.norm(self.mean - other.mean)) <= tol
            and float(np.max(np.abs(self.cov - other.cov))) <= tol
        )


@dataclass(eq=False)
class GaussianMixture:
    weights: np.ndarray
    components: list[GaussianComponent]

    def __post_init__(self):
        self.weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        self.components = list(self.components)
        if self.weights.shape != (len(self.components),):
            raise DomainError("one weight per component is required")

    @property
    def size(self) -> int:
        return len(self.components)

    @property
    def dim(self) -> int:
        return self.components[0].dim

    def log_densities(self, X: np.ndarray) -> np.ndarray:
        return np.stack([c.log_density(X) for c in self.components], axis=1)

    def density(self, x) -> float | np.ndarray:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        vals = np.exp(self.log_densities(np.atleast_2d(x))) @ self.weights
        return float(vals[0]) if single else vals

    def log_likelihood(self, X: np.ndarray) -> float:
        logs = self.log_densities(X) + np.log(self.weights)[None, :]
        m = logs.max(axis=1, keepdims=True)
        return float(np.sum(m[:, 0] + np.log(np.sum(np.exp(logs - m), axis=1))))


def gaussian_w2(nu0: GaussianComponent, nu1: GaussianComponent) -> float:
    """Closed-form W2 between Gaussians (Bures metric on covariances)."""
    s0_half = _sym_sqrt(nu0.cov)
    cross = _sym_sqrt(s0_half @ nu1.cov @ s0_half)
    val = float(np.sum((nu0.mean - nu1.mean) ** 2) + np.trace(nu0.cov + nu1.cov - 2.0 * cross))
    return math.sqrt(max(val, 0.0))


def gaussian_monge(nu0: GaussianComponent, nu1: GaussianComponent, x):
    """Affine map pushing nu0 to nu1: x -> m1 + A (x - m0)."""
    s0_half = _sym_sqrt(nu0.cov)
    s0_half_inv = _sym_sqrt(nu0.cov, inverse=True)
    mid = _sym_sqrt(s0_half @ nu1.cov @ s0_half)
    A = s0_half_inv @ mid @ s0_half_inv
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    out = (np.atleast_2d(x) - nu0.mean) @ A.T + nu1.mean
    return out[0] if single else out


def _gmm_key(mu: GaussianMixture) -> str:
    return dumps_canonical(gmm_to_json(mu))


def gw2_distance(mu0: GaussianMixture, mu1: GaussianMixture) -> RW2Result:
    """Mixture transport distance with Gaussian component costs."""
    if mu0.dim != mu1.dim:
        raise DomainError(f"dimension mismatch: {mu0.dim} vs {mu1.dim}")
    swap = _gmm_key(mu0) > _gmm_key(mu1)
    a, b = (mu1, mu0) if swap else (mu0, mu1)
    costs = np.empty((a.size, b.size))
    for k, ca in enumerate(a.components):
        for l, cb in enumerate(b.components):
            costs[k, l] = gaussian_w2(ca, cb) ** 2
    plan = solve_transport(a.weights, b.weights, costs)
    if swap:
        costs = costs.T
        plan = TransportPlan(
            matrix=plan.matrix.T,
            row_marginal=plan.col_marginal,
            col_marginal=plan.row_marginal,
            objective=plan.objective,
        )
    res = RW2Result(
        distance=math.sqrt(max(plan.objective, 0.0)),
        plan=plan,
        component_costs=costs,
    )
    res.source, res.target = mu0, mu1
    res._map_cache = _GaussMapCache(mu0, mu1)
    return res


class _GaussMapCache(dict):
    def __init__(self, mu0, mu1):
        super().__init__()
        self._mu0, self._mu1 = mu0, mu1

    def __missing__(self, key):
        k, l = key
        nu0 = self._mu0.components[k]
        nu1 = self._mu1.components[l]
        fn = lambda x, a=nu0, b=nu1: gaussian_monge(a, b, x)
        self[key] = fn
        return fn


def _gamma_rows(mu0: GaussianMixture, X: np.ndarray) -> np.ndarray:
    logs = mu0.log_densities(X) + np.log(mu0.weights)[None, :]
    m = logs.max(axis=1, keepdims=True)
    dens = np.exp(logs - m)
    gamma = dens / dens.sum(axis=1, keepdims=True)
    # divide the mixture weights back out: rows are f0k(x)/sum_j pi_j f0j(x)
    return gamma / mu0.weights[None, :]


def gmm_t_mean(mu0: GaussianMixture, mu1: GaussianMixture, result: RW2Result, x):
    """Conditional-expectation transport map for the Gaussian baseline."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    gamma = _gamma_rows(mu0, X)
    out = np.zeros_like(X)
    for k, l in np.argwhere(result.plan.matrix > PLAN_WEIGHT_FLOOR):
        w = result.plan.matrix[k, l]
        out += (gamma[:, k] * w)[:, None] * gaussian_monge(mu0.components[k], mu1.components[l], X)
    return out[0] if single else out


def gmm_t_rand(mu0: GaussianMixture, mu1: GaussianMixture, result: RW2Result, x, seed: int):
    """Randomized pair-choice transport map for the Gaussian baseline."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    gamma = _gamma_rows(mu0, X)
    pairs = [(int(k), int(l)) for k, l in np.argwhere(result.plan.matrix > PLAN_WEIGHT_FLOOR)]
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
            out[sel] = gaussian_monge(mu0.components[k], mu1.components[l], X[sel])
    return out[0] if single else out


def gmm_em(data: np.ndarray, K: int, seed: int, max_iter: int = 200, tol: float = 1e-8,
           return_history: bool = False):
    """Standard EM with k-means++ initialization and covariance regularization.

    With ``return_history`` the per-iteration log-likelihood trajectory is
    returned alongside the fitted mixture.
    """
    from .estimation import kmeans_lloyd

    X = np.atleast_2d(np.asarray(data, dtype=float))
    n, d = X.shape
    if K < 1 or K > n:
        raise DomainError(f"need 1 <= K <= n, got K={K}, n={n}")
    centers, labels = kmeans_lloyd(X, K, seed)
    weights = np.maximum(np.bincount(labels, minlength=K) / n, 1e-12)
    weights = weights / weights.sum()
    covs = []
    for k in range(K):
        pts = X[labels == k]
        c = np.cov(pts.T).reshape(d, d) if len(pts) > 1 else np.eye(d) * np.var(X)
        covs.append(_regularize(c, d))
    means = centers.copy()

    history: list[float] = []
    prev_ll = -np.inf
    for _ in range(max_iter):
        mix = GaussianMixture(weights, [GaussianComponent(m, c) for m, c in zip(means, covs)])
        ll = mix.log_likelihood(X)
        history.append(ll)
        logs = mix.log_densities(X) + np.log(weights)[None, :]
        m = logs.max(axis=1, keepdims=True)
        resp = np.exp(logs - m)
        resp /= resp.sum(axis=1, keepdims=True)
        nk = resp.sum(axis=0)
        for k in range(K):
            if nk[k] >= 1e-10:
                means[k] = resp[:, k] @ X / nk[k]
                diff = X - means[k]
                covs[k] = _regularize((resp[:, k][:, None] * diff).T @ diff / nk[k], d)
            else:
                # dead component: reseed at the point farthest from its mean
                worst = int(np.argmax(np.linalg.norm(X - means[k], axis=1)))
                means[k] = X[worst]
                covs[k] = _regularize(np.eye(d) * np.var(X), d)
                nk[k] = 1.0
        weights = nk / nk.sum()
        if abs(ll - prev_ll) < tol * max(1.0, abs(ll)):
            break
        prev_ll = ll
    out = GaussianMixture(weights, [GaussianComponent(m, c) for m, c in zip(means, covs)])
    history.append(out.log_likelihood(X))
    if return_history:
        return out, history
    return out


def _regularize(cov: np.ndarray, d: int) -> np.ndarray:
    cov = 0.5 * (cov + cov.T)
    reg = COV_REG * np.trace(cov) / d + EIG_FLOOR
    return cov + reg * np.eye(d)


def parameter_count(model) -> int:
    """Fitted scalars: (1 + 1.5 d + 0.5 d^2) n for Gaussian mixtures,
    (d + 2) n for radial mixtures."""
    d = model.dim
    n = model.size
    if isinstance(model, GaussianMixture):
        return int(round((1 + 1.5 * d + 0.5 * d * d) * n))
    return int((d + 2) * n)


def gmm_to_json(mu: GaussianMixture) -> dict:
    return {
        "dim": mu.dim,
        "components": [
            {
                "weight": float(w),
                "mean": [float(v) for v in c.mean],
                "cov": [[float(v) for v in row] for row in c.cov],
            }
            for w, c in zip(mu.weights, mu.components)
        ],
    }


def gmm_from_json(obj: dict) -> GaussianMixture:
    try:
        comps = [
            GaussianComponent(np.asarray(e["mean"], dtype=float), np.asarray(e["cov"], dtype=float))
            for e in obj["components"]
        ]
        weights = np.asarray([e["weight"] for e in obj["components"]], dtype=float)
    except (TypeError, KeyError) as exc:
        raise DomainError(f"malformed Gaussian mixture JSON: missing {exc}") from exc
    return GaussianMixture(weights, comps)


def save_gmm(mu: GaussianMixture, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_canonical(gmm_to_json(mu)))


def load_gmm(path) -> GaussianMixture:
    import json

    with open(path, "r", encoding="utf-8") as fh:
        return gmm_from_json(json.load(fh))
