"""Fitting radial mixtures to point clouds.

The E-step uses normalized component densities; the M-step maximizes the
weighted log-profile objective per component with a bounded quasi-Newton
ascent warm-started at the previous parameters (any optimizer reaching the
gradient tolerance without decreasing the objective would do).  The outer
loop is the mini-batch stochastic EM: resample a batch, E-step, weight
update, M-step.  A full-batch variant reuses the same loop with the batch
equal to the whole dataset, which restores the classical monotone
log-likelihood property.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp

from . import generators as gen
from ._kernels import KIND_CODES, mstep_value_grad
from .errors import DomainError, UnsupportedError
from .mixture import RadialMixture, merge_duplicates
from .radial import RadialDistribution

__all__ = [
    "EMConfig",
    "kmeans_lloyd",
    "kmeans_init",
    "e_step",
    "m_step",
    "minibatch_em",
    "fullbatch_em",
    "log_likelihood",
]


@dataclass(frozen=True)
class EMConfig:
    n_components: int
    batch_size: int = 100
    max_iter: int = 1500
    seed: int = 0
    opt_tol: float = 1e-6
    c_floor: float | None = None  # resolved to 1e-4 * data diameter when unset
    param_tol: float | None = None  # optional relative-change early stop
    max_inner_iter: int = 200
    # fraction of final iterations whose parameters are averaged into the
    # returned model; stochastic batches make the last iterate jitter at
    # O(c / sqrt(batch)), which tail averaging removes.  0 returns the last
    # iterate unchanged.
    tail_average: float = 0.25


def _resolve_c_floor(X: np.ndarray, c_floor: float | None) -> float:
    if c_floor is not None:
        if c_floor <= 0:
            raise DomainError("c_floor must be positive")
        return float(c_floor)
    diameter = float(np.linalg.norm(X.max(axis=0) - X.min(axis=0)))
    return max(1e-4 * diameter, 1e-12)


def kmeans_lloyd(X: np.ndarray, K: int, seed: int, max_rounds: int = 50):
    """k-means++ seeding followed by at most 50 Lloyd rounds."""
    n = X.shape[0]
    if K < 1 or K > n:
        raise DomainError(f"need 1 <= K <= n, got K={K}, n={n}")
    rng = np.random.default_rng(seed)
    centers = np.empty((K, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    sq = np.sum((X - centers[0]) ** 2, axis=1)
    for k in range(1, K):
        total = sq.sum()
        probs = sq / total if total > 0 else np.full(n, 1.0 / n)
        centers[k] = X[rng.choice(n, p=probs)]
        sq = np.minimum(sq, np.sum((X - centers[k]) ** 2, axis=1))
    labels = np.zeros(n, dtype=int)
    for _ in range(max_rounds):
        dists = np.sum((X[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        new_labels = np.argmin(dists, axis=1)
        for k in range(K):
            sel = new_labels == k
            if np.any(sel):
                centers[k] = X[sel].mean(axis=0)
            else:
                centers[k] = X[np.argmax(dists.min(axis=1))]
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return centers, labels


def kmeans_init(data: np.ndarray, K: int, seed: int, generator: gen.Generator | None = None,
                c_floor: float | None = None):
    """Initial (weights, centers, scales) from k-means clusters.

    Scales are chosen so the implied component covariance matches the
    within-cluster spread: c = rms distance / sqrt(variance factor).
    """
    X = np.atleast_2d(np.asarray(data, dtype=float))
    centers, labels = kmeans_lloyd(X, K, seed)
    d = X.shape[1]
    floor = _resolve_c_floor(X, c_floor)
    vf = gen.variance_factor(generator, d) if generator is not None else 1.0
    weights = np.bincount(labels, minlength=K) / X.shape[0]
    scales = np.empty(K)
    for k in range(K):
        sel = labels == k
        if np.any(sel):
            rms = math.sqrt(float(np.mean(np.sum((X[sel] - centers[k]) ** 2, axis=1))))
        else:
            rms = 0.0
        scales[k] = max(rms / math.sqrt(vf), floor)
    return weights, centers, scales


def e_step(model: RadialMixture, batch: np.ndarray) -> np.ndarray:
    """Row-stochastic responsibilities under normalized component densities."""
    batch = np.atleast_2d(np.asarray(batch, dtype=float))
    if batch.shape[0] == 0:
        raise DomainError("batch must be nonempty")
    logs = model.log_densities(batch) + np.log(model.weights)[None, :]
    top = logs.max(axis=1, keepdims=True)
    dead = ~np.isfinite(top[:, 0])
    safe = np.where(np.isfinite(logs), logs - np.where(np.isfinite(top), top, 0.0), -np.inf)
    tau = np.exp(safe)
    sums = tau.sum(axis=1, keepdims=True)
    tau = np.divide(tau, sums, out=np.full_like(tau, 1.0 / model.size), where=sums > 0)
    # points no component explains get uniform responsibilities
    tau[dead] = 1.0 / model.size
    return tau


def _component_kind(generator: gen.Generator):
    if generator.kind == "tabulated":
        raise UnsupportedError("the numerical M-step supports parametric generators only")
    kind = KIND_CODES[generator.kind]
    beta = generator.beta if generator.beta is not None else 0.0
    return kind, beta


def m_step(batch: np.ndarray, tau: np.ndarray, generator: gen.Generator,
           prev_centers: np.ndarray, prev_scales: np.ndarray,
           opt_tol: float = 1e-6, c_floor: float = 1e-12, max_inner_iter: int = 200):
    """Per-component maximization of the weighted log-profile objective.

    Warm-started at the previous parameters; the returned objective never
    falls below its value there.  Components whose responsibilities sum to
    zero are flagged by returning their index in the third output.
    """
    batch = np.atleast_2d(np.asarray(batch, dtype=float))
    tau = np.asarray(tau, dtype=float)
    kind, beta = _component_kind(generator)
    d = batch.shape[1]
    K = tau.shape[1]
    centers = np.array(prev_centers, dtype=float).reshape(K, d).copy()
    scales = np.array(prev_scales, dtype=float).reshape(K).copy()
    dead = []
    support = generator.support_radius()
    for k in range(K):
        col = np.ascontiguousarray(tau[:, k])
        if col.sum() <= 0:
            dead.append(k)
            continue
        m0, c0 = centers[k], scales[k]
        lo_c = c_floor
        if math.isfinite(support):
            # compact kernels must cover every weighted point
            rmax = float(np.max(np.linalg.norm(batch[col > 0] - m0, axis=1)))
            lo_c = max(lo_c, (rmax / support) * (1.0 + 1e-9) + 1e-300)
        c0 = max(c0, lo_c * (1.0 + 1e-12))

        def neg(params):
            q, grad = mstep_value_grad(batch, col, kind, beta, params[:d], float(params[d]), d)
            if not np.isfinite(q):
                return 1e300, np.zeros(d + 1)
            return -q, -grad

        x0 = np.concatenate([m0, [c0]])
        q_start = -neg(x0)[0]
        res = minimize(
            neg,
            x0,
            jac=True,
            method="L-BFGS-B",
            bounds=[(None, None)] * d + [(lo_c, None)],
            options={"maxiter": max_inner_iter, "gtol": opt_tol, "ftol": 1e-16},
        )
        q_end = -float(res.fun)
        if np.isfinite(q_end) and q_end >= q_start:
            centers[k] = res.x[:d]
            scales[k] = max(float(res.x[d]), c_floor)
    return centers, scales, dead


def log_likelihood(model: RadialMixture, X: np.ndarray) -> float:
    """Observed-data log-likelihood of X under the mixture."""
    logs = model.log_densities(np.atleast_2d(X)) + np.log(model.weights)[None, :]
    return float(np.sum(logsumexp(logs, axis=1)))


def _make_mixture(weights, centers, scales, generator, d) -> RadialMixture:
    comps = [RadialDistribution(m, c, generator, dim=d) for m, c in zip(centers, scales)]
    return RadialMixture(np.asarray(weights, dtype=float), comps, dim=d)


def minibatch_em(data: np.ndarray, generator: gen.Generator, config: EMConfig,
                 heldout: np.ndarray | None = None, log_path=None,
                 loglik_history: list | None = None) -> RadialMixture:
    """Mini-batch stochastic EM; deterministic in config.seed.

    Each iteration draws a fresh batch without replacement, computes
    responsibilities, refreshes the weights as their batch means, and runs
    the per-component M-step warm-started at the current parameters.  When
    ``loglik_history`` is a list it receives the full-data log-likelihood of
    every iterate (cheap only for small datasets).
    """
    X = np.atleast_2d(np.asarray(data, dtype=float))
    n, d = X.shape
    K = config.n_components
    if config.batch_size > n:
        raise DomainError(f"batch size {config.batch_size} exceeds dataset size {n}")
    _component_kind(generator)
    floor = _resolve_c_floor(X, config.c_floor)
    rng = np.random.default_rng(config.seed)
    weights, centers, scales = kmeans_init(X, K, int(rng.integers(2**63)), generator, floor)
    weights = np.maximum(weights, 1e-12)
    weights /= weights.sum()

    log_rows = []
    if log_path is not None and heldout is None:
        idx = rng.choice(n, min(2000, n), replace=False)
        heldout = X[idx]

    avg_start = config.max_iter - max(1, int(round(config.tail_average * config.max_iter)))
    acc = None
    for it in range(config.max_iter):
        batch = X[rng.choice(n, config.batch_size, replace=False)]
        model = _make_mixture(weights, centers, scales, generator, d)
        if loglik_history is not None:
            loglik_history.append(log_likelihood(model, X))
        tau = e_step(model, batch)
        new_weights = np.maximum(tau.mean(axis=0), 1e-12)
        new_weights /= new_weights.sum()
        new_centers, new_scales, dead = m_step(
            batch, tau, generator, centers, scales,
            opt_tol=config.opt_tol, c_floor=floor, max_inner_iter=config.max_inner_iter,
        )
        for k in dead:
            dens = model.density(batch)
            new_centers[k] = batch[int(np.argmin(dens))]
        weights, centers, scales = new_weights, new_centers, new_scales
        if config.tail_average > 0 and it >= avg_start:
            if acc is None:
                acc = [weights.copy(), centers.copy(), scales.copy(), 1]
            else:
                acc[0] += weights
                acc[1] += centers
                acc[2] += scales
                acc[3] += 1
        if log_path is not None:
            hl = log_likelihood(_make_mixture(weights, centers, scales, generator, d), heldout)
            log_rows.append((it, hl, tuple(scales)))
        if config.param_tol is not None and it > 0:
            num = np.linalg.norm(centers - model_prev_centers) + np.linalg.norm(scales - model_prev_scales)
            den = np.linalg.norm(model_prev_centers) + np.linalg.norm(model_prev_scales) + 1e-12
            if num / den < config.param_tol:
                break
        model_prev_centers, model_prev_scales = centers.copy(), scales.copy()

    if acc is not None:
        weights = acc[0] / acc[3]
        weights /= weights.sum()
        centers = acc[1] / acc[3]
        scales = np.maximum(acc[2] / acc[3], floor)

    if log_path is not None:
        with open(log_path, "w", encoding="utf-8") as fh:
            K_cols = ",".join(f"c_{k}" for k in range(K))
            fh.write(f"iter,heldout_loglik,{K_cols}\n")
            for it, hl, cs in log_rows:
                fh.write(f"{it},{hl!r},{','.join(repr(c) for c in cs)}\n")
    return merge_duplicates(weights, _make_mixture(weights, centers, scales, generator, d).components)


def fullbatch_em(data: np.ndarray, generator: gen.Generator, config: EMConfig,
                 heldout: np.ndarray | None = None, log_path=None,
                 loglik_history: list | None = None) -> RadialMixture:
    """EM with the batch equal to the whole dataset (monotone log-likelihood)."""
    X = np.atleast_2d(np.asarray(data, dtype=float))
    return minibatch_em(X, generator, replace(config, batch_size=X.shape[0]),
                        heldout=heldout, log_path=log_path, loglik_history=loglik_history)
