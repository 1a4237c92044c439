"""Exact finite optimal transport and entropic approximations.

The exact solver is a primal simplex on the transportation polytope in
revised form: a northwest-corner staircase provides the starting basis and
Bland's rule (first negative reduced cost in flat index order, lowest-index
leaving variable among ties) makes every run deterministic and cycle-free.
One implementation covers both the 2-marginal matrix case and the N-marginal
tensor case, since the former is the latter with N = 2.

Entropic routines are log-domain stabilized.  `sinkhorn` is the dense
general-purpose variant; `sinkhorn_grid` exploits the separable kernel of a
regular grid so the 2-D comparisons stay cheap; `sinkhorn_barycenter_grid`
is the iterative Bregman barycenter used by the interpolation demo.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.special import logsumexp

from .errors import CapacityError, DomainError, InfeasibleError

__all__ = [
    "TransportPlan",
    "MultimarginalPlan",
    "SinkhornResult",
    "solve_transport",
    "solve_multimarginal",
    "sinkhorn",
    "sinkhorn_grid",
    "sinkhorn_barycenter_grid",
    "empirical_w2",
    "compose_plans",
    "plan_to_json",
    "plan_from_json",
]

MARGINAL_TOL = 1e-9
VARIABLE_CAP = 10**6


@dataclass
class TransportPlan:
    """Optimal coupling of two discrete marginals."""

    matrix: np.ndarray
    row_marginal: np.ndarray
    col_marginal: np.ndarray
    objective: float

    def support(self, tol: float = 0.0) -> np.ndarray:
        return np.argwhere(self.matrix > tol)


@dataclass
class MultimarginalPlan:
    """Optimal coupling of N discrete marginals, stored sparsely."""

    entries: dict[tuple[int, ...], float]
    marginals: list[np.ndarray]
    objective: float
    shape: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if not self.shape:
            self.shape = tuple(len(m) for m in self.marginals)

    def dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        for idx, w in self.entries.items():
            out[idx] = w
        return out

    def axis_marginal(self, axis: int) -> np.ndarray:
        out = np.zeros(self.shape[axis])
        for idx, w in self.entries.items():
            out[idx[axis]] += w
        return out


def _check_simplex(pi, name):
    pi = np.asarray(pi, dtype=float)
    if pi.ndim != 1 or pi.size == 0:
        raise DomainError(f"{name} must be a nonempty vector")
    if np.any(pi < 0) or not np.all(np.isfinite(pi)):
        raise DomainError(f"{name} must be nonnegative and finite")
    return pi


def _staircase_start(marginals):
    """Northwest-corner generalization: a basic feasible staircase.

    Advances one pointer at a time, so exactly sum(K_j) - N + 1 cells come
    out (some possibly zero on degenerate input), and the incidence columns
    are triangular, hence a valid starting basis.
    """
    rem = [m.copy() for m in marginals]
    ptr = [0] * len(marginals)
    cells = [tuple(ptr)]
    values = []
    n = len(marginals)
    while True:
        w = min(rem[j][ptr[j]] for j in range(n))
        values.append(w)
        for j in range(n):
            rem[j][ptr[j]] -= w
        adv = None
        for j in range(n):
            if ptr[j] < len(rem[j]) - 1 and rem[j][ptr[j]] <= 0:
                adv = j
                break
        if adv is None:
            break
        ptr[adv] += 1
        cells.append(tuple(ptr))
    return cells, values


def _incidence_column(idx, sizes, row_of):
    col = np.zeros(len(row_of), dtype=float)
    for j, k in enumerate(idx):
        r = row_of.get((j, k))
        if r is not None:
            col[r] = 1.0
    return col


def _simplex_polytope(marginals, cost, pivot_tol=None):
    """Primal simplex over the transportation polytope; returns the basic
    optimal tensor and the objective."""
    sizes = tuple(len(m) for m in marginals)
    n = len(marginals)
    # drop the last row of every marginal after the first: those constraints
    # are implied, and dropping them makes the system full rank
    row_of = {}
    rows = []
    for j, m in enumerate(marginals):
        last = len(m) - 1
        for k in range(len(m)):
            if j > 0 and k == last:
                continue
            row_of[(j, k)] = len(rows)
            rows.append((j, k))
    b = np.array([marginals[j][k] for (j, k) in rows])
    m_rank = len(rows)

    cells, values = _staircase_start(marginals)
    basis = list(cells)
    if len(basis) != m_rank:
        raise InfeasibleError("degenerate staircase start; marginals are inconsistent")

    cost_flat = cost.reshape(-1)
    scale = float(np.max(np.abs(cost_flat))) if cost_flat.size else 1.0
    tol = pivot_tol if pivot_tol is not None else 1e-11 * max(1.0, scale)

    # per-axis index arrays of every tensor cell, for vectorized pricing
    grids = np.unravel_index(np.arange(cost_flat.size), sizes)

    for _ in range(200000):
        B = np.column_stack([_incidence_column(c, sizes, row_of) for c in basis])
        x_b = np.linalg.solve(B, b)
        y = np.linalg.solve(B.T, np.array([cost[c] for c in basis]))
        # reduced cost of cell (k1..kN) = cost - sum_j y[(j, k_j)]
        dual_sum = np.zeros(cost_flat.size)
        for j in range(n):
            yj = np.zeros(sizes[j])
            for k in range(sizes[j]):
                r = row_of.get((j, k))
                if r is not None:
                    yj[k] = y[r]
            dual_sum += yj[grids[j]]
        rc = cost_flat - dual_sum
        candidates = rc < -tol
        if not candidates.any():
            break
        enter_flat = int(np.argmax(candidates))  # first True: Bland's rule
        enter = tuple(int(g[enter_flat]) for g in grids)
        a_col = _incidence_column(enter, sizes, row_of)
        direction = np.linalg.solve(B, a_col)
        pos = direction > 1e-12
        if not pos.any():
            raise InfeasibleError("unbounded transportation program; check the cost tensor")
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.where(pos, x_b / np.where(pos, direction, 1.0), np.inf)
        theta = ratios[pos].min()
        ties = np.where(np.abs(ratios - theta) <= 1e-15 * max(1.0, theta))[0]
        # lowest flat variable index leaves: Bland's anti-cycling choice
        leave_pos = min(ties, key=lambda i: np.ravel_multi_index(basis[i], sizes))
        basis[leave_pos] = enter
    else:
        raise InfeasibleError("simplex failed to terminate")

    B = np.column_stack([_incidence_column(c, sizes, row_of) for c in basis])
    x_b = np.linalg.solve(B, b)
    plan = np.zeros(sizes)
    for c, v in zip(basis, x_b):
        plan[c] = max(float(v), 0.0)
    objective = float(sum(cost[c] * max(float(v), 0.0) for c, v in zip(basis, x_b)))
    return plan, objective


def solve_transport(pi0, pi1, cost) -> TransportPlan:
    """Exact optimum of the 2-marginal transportation LP."""
    pi0 = _check_simplex(pi0, "row marginal")
    pi1 = _check_simplex(pi1, "column marginal")
    cost = np.asarray(cost, dtype=float)
    if cost.shape != (pi0.size, pi1.size):
        raise DomainError(f"cost shape {cost.shape} does not match marginals {(pi0.size, pi1.size)}")
    if np.any(cost < 0) or not np.all(np.isfinite(cost)):
        raise DomainError("costs must be finite and nonnegative")
    if abs(pi0.sum() - pi1.sum()) > MARGINAL_TOL:
        raise InfeasibleError(f"marginal sums differ: {pi0.sum()!r} vs {pi1.sum()!r}")

    keep0 = pi0 > 0
    keep1 = pi1 > 0
    sub = _simplex_polytope([pi0[keep0], pi1[keep1]], cost[np.ix_(keep0, keep1)])
    plan = np.zeros((pi0.size, pi1.size))
    plan[np.ix_(keep0, keep1)] = sub[0]
    return TransportPlan(matrix=plan, row_marginal=pi0, col_marginal=pi1, objective=sub[1])


def solve_multimarginal(marginals, cost) -> MultimarginalPlan:
    """Exact optimum of the N-marginal transportation LP over a cost tensor."""
    marginals = [_check_simplex(m, f"marginal {j}") for j, m in enumerate(marginals)]
    if len(marginals) < 2:
        raise DomainError("at least two marginals are required")
    cost = np.asarray(cost, dtype=float)
    sizes = tuple(len(m) for m in marginals)
    if cost.shape != sizes:
        raise DomainError(f"cost tensor shape {cost.shape} does not match marginals {sizes}")
    if not np.all(np.isfinite(cost)):
        raise DomainError("costs must be finite")
    n_vars = int(np.prod(sizes))
    if n_vars > VARIABLE_CAP:
        raise CapacityError(
            f"{n_vars} variables exceed the cap of {VARIABLE_CAP}; reduce the component counts"
        )
    total = marginals[0].sum()
    for j, m in enumerate(marginals[1:], start=1):
        if abs(m.sum() - total) > MARGINAL_TOL:
            raise InfeasibleError(f"marginal {j} sums to {m.sum()!r}, marginal 0 to {total!r}")

    keeps = [m > 0 for m in marginals]
    sub_marginals = [m[k] for m, k in zip(marginals, keeps)]
    sub_cost = cost[np.ix_(*keeps)]
    plan_sub, objective = _simplex_polytope(sub_marginals, sub_cost)

    maps = [np.where(k)[0] for k in keeps]
    entries = {}
    for idx in np.argwhere(plan_sub > 0):
        full = tuple(int(maps[j][i]) for j, i in enumerate(idx))
        entries[full] = float(plan_sub[tuple(idx)])
    return MultimarginalPlan(entries=entries, marginals=marginals, objective=objective, shape=sizes)


@dataclass
class SinkhornResult:
    plan: np.ndarray
    cost: float  # <plan, cost matrix>, the unregularized transport cost
    entropic: float  # cost - epsilon * H(plan)
    iterations: int
    converged: bool
    marginal_violation: float
    history: list[float] = field(default_factory=list)


def _entropic_value(plan, cost, epsilon):
    mask = plan > 0
    ent = float(np.sum(plan[mask] * (np.log(plan[mask]) - 1.0)))
    return float(np.sum(plan * cost)) + epsilon * ent


def sinkhorn(a, b, cost, epsilon, max_iter: int = 100000, tol: float = 1e-8,
             track_objective: bool = False) -> SinkhornResult:
    """Log-domain Sinkhorn iterations for entropic optimal transport.

    Stops when the L1 marginal violation drops below tol; running out of
    iterations is reported via ``converged`` rather than raised.
    """
    if epsilon <= 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    a = _check_simplex(a, "source weights")
    b = _check_simplex(b, "target weights")
    cost = np.asarray(cost, dtype=float)
    if abs(a.sum() - b.sum()) > MARGINAL_TOL:
        raise InfeasibleError(f"weight sums differ: {a.sum()!r} vs {b.sum()!r}")

    keep_a, keep_b = a > 0, b > 0
    aa, bb = a[keep_a], b[keep_b]
    C = cost[np.ix_(keep_a, keep_b)]
    log_a, log_b = np.log(aa), np.log(bb)
    u = np.zeros(aa.size)
    v = np.zeros(bb.size)
    history: list[float] = []
    it = 0
    violation = np.inf
    for it in range(1, max_iter + 1):
        base = (-C + v[None, :]) / epsilon
        u = epsilon * (log_a - logsumexp(base, axis=1))
        base = (-C + u[:, None]) / epsilon
        v = epsilon * (log_b - logsumexp(base, axis=0))
        log_plan = (-C + u[:, None] + v[None, :]) / epsilon
        plan = np.exp(log_plan)
        violation = float(np.abs(plan.sum(axis=1) - aa).sum() + np.abs(plan.sum(axis=0) - bb).sum())
        if track_objective:
            history.append(_entropic_value(plan, C, epsilon))
        if violation <= tol:
            break
    full = np.zeros(cost.shape)
    full[np.ix_(keep_a, keep_b)] = plan
    return SinkhornResult(
        plan=full,
        cost=float(np.sum(full * cost)),
        entropic=_entropic_value(full, cost, epsilon),
        iterations=it,
        converged=violation <= tol,
        marginal_violation=violation,
        history=history,
    )


def _grid_lse_apply(T, axis_costs, epsilon):
    """logsumexp contraction of T against the separable Gibbs kernel.

    Axis-symmetric costs make the source/target direction interchangeable:
    the result, indexed by the opposite side, is lse_J(T_J - C_IJ / eps).
    """
    out = T
    for ax, c in enumerate(axis_costs):
        mats = c / epsilon
        moved = np.moveaxis(out, ax, 0)
        stacked = -mats[:, :, None] + moved[None, :, :].reshape(1, moved.shape[0], -1)
        red = logsumexp(stacked, axis=1).reshape((mats.shape[0],) + moved.shape[1:])
        out = np.moveaxis(red, 0, ax)
    return out


def sinkhorn_grid(a, b, axes, epsilon, max_iter: int = 100000, tol: float = 1e-8):
    """Sinkhorn between two weight tensors on a shared regular grid.

    ``axes`` is the list of 1-D coordinate arrays; the squared-Euclidean
    cost separates across them, so each iteration costs a few small
    matrix-sized logsumexp contractions instead of a dense kernel pass.
    The full plan is materialized once at the end to report the transport
    cost and marginal violation.  Returns (cost, violation, iterations).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    shape = tuple(len(ax) for ax in axes)
    if a.shape != shape or b.shape != shape:
        raise DomainError("weights must live on the grid defined by axes")
    n_cells = int(np.prod(shape))
    if n_cells > 4096:
        raise CapacityError(f"grid with {n_cells} cells is too large to materialize the plan")
    axis_costs = [(ax[:, None] - ax[None, :]) ** 2 for ax in axes]
    neg_inf = -1e300
    with np.errstate(divide="ignore"):
        log_a = np.where(a > 0, np.log(np.where(a > 0, a, 1.0)), neg_inf)
        log_b = np.where(b > 0, np.log(np.where(b > 0, b, 1.0)), neg_inf)
    f = np.zeros(shape)
    g = np.zeros(shape)
    it = 0
    for it in range(1, max_iter + 1):
        f = epsilon * (log_a - _grid_lse_apply(g / epsilon, axis_costs, epsilon))
        g = epsilon * (log_b - _grid_lse_apply(f / epsilon, axis_costs, epsilon))
        if it % 10 == 0 or it == max_iter:
            row = _grid_lse_apply(g / epsilon, axis_costs, epsilon) + f / epsilon
            if float(np.abs(np.exp(row) - a).sum()) <= tol:
                break
    # dense materialization: log P[I, J] = (f_I + g_J - C_IJ) / eps
    cost_flat = np.zeros((n_cells, n_cells))
    grids = np.unravel_index(np.arange(n_cells), shape)
    for ax, c in enumerate(axis_costs):
        cost_flat += c[np.ix_(grids[ax], grids[ax])]
    log_plan = (f.ravel()[:, None] + g.ravel()[None, :] - cost_flat) / epsilon
    plan = np.exp(log_plan)
    violation = float(
        np.abs(plan.sum(axis=1) - a.ravel()).sum() + np.abs(plan.sum(axis=0) - b.ravel()).sum()
    )
    return float(np.sum(plan * cost_flat)), violation, it


def sinkhorn_barycenter_grid(weights_list, lambdas, axes, epsilon,
                             max_iter: int = 2000, tol: float = 1e-7) -> np.ndarray:
    """Entropic barycenter of grid measures via iterative Bregman projections."""
    lambdas = np.asarray(lambdas, dtype=float)
    axis_costs = [(ax[:, None] - ax[None, :]) ** 2 for ax in axes]
    shape = tuple(len(ax) for ax in axes)
    neg_inf = -1e300
    logs_a = []
    for w in weights_list:
        w = np.asarray(w, dtype=float)
        with np.errstate(divide="ignore"):
            lw = np.log(w)
        logs_a.append(np.where(np.isfinite(lw), lw, neg_inf))
    us = [np.zeros(shape) for _ in weights_list]
    log_q = np.full(shape, -np.log(np.prod(shape)))
    for _ in range(max_iter):
        log_q_prev = log_q
        cols = []
        for k, la in enumerate(logs_a):
            uk = la - _grid_lse_apply(us[k], axis_costs, epsilon)
            col = _grid_lse_apply(uk, axis_costs, epsilon)
            cols.append(col)
        log_q = sum(lam * (c + u) for lam, c, u in zip(lambdas, cols, us))
        log_q = log_q - logsumexp(log_q)
        for k in range(len(us)):
            us[k] = log_q - cols[k]
        if float(np.abs(np.exp(log_q) - np.exp(log_q_prev)).sum()) <= tol:
            break
    return np.exp(log_q)


def empirical_w2(X, Y, method: str = "exact", epsilon: float | None = None) -> float:
    """Exact squared W2 between two equal-size uniform point clouds.

    1-D clouds use the sorted monotone coupling; higher dimensions use an
    exact assignment solve.  Beyond 2000 points callers must opt into the
    entropic approximation explicitly with method="sinkhorn".
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.ndim != 2 or Y.ndim != 2 or X.shape[1] != Y.shape[1]:
        raise DomainError("point clouds must be (n, d) arrays of equal dimension")
    if X.shape[0] != Y.shape[0]:
        raise DomainError(f"clouds must have equal sizes, got {X.shape[0]} and {Y.shape[0]}; resample upstream")
    n, d = X.shape
    if d == 1:
        xs = np.sort(X[:, 0])
        ys = np.sort(Y[:, 0])
        return float(np.mean((xs - ys) ** 2))
    cost = np.sum((X[:, None, :] - Y[None, :, :]) ** 2, axis=2)
    if method == "exact":
        if n > 2000:
            raise DomainError(
                f"{n} points exceed the exact-solve limit of 2000; pass method='sinkhorn' with an epsilon"
            )
        rows, cols = linear_sum_assignment(cost)
        return float(cost[rows, cols].mean())
    if method == "sinkhorn":
        if epsilon is None:
            raise DomainError("sinkhorn mode requires an epsilon")
        w = np.full(n, 1.0 / n)
        res = sinkhorn(w, w, cost, epsilon)
        return float(res.cost)
    raise DomainError(f"unknown method {method!r}")


def compose_plans(w01: np.ndarray, w12: np.ndarray, pi1: np.ndarray) -> np.ndarray:
    """Glue two plans through the middle marginal: w02 = w01 diag(1/pi1) w12."""
    pi1 = np.asarray(pi1, dtype=float)
    inv = np.where(pi1 > 0, 1.0 / np.where(pi1 > 0, pi1, 1.0), 0.0)
    return (w01 * inv[None, :]) @ w12


def plan_to_json(plan) -> dict:
    if isinstance(plan, TransportPlan):
        entries = [
            {"idx": [int(i), int(j)], "w": float(plan.matrix[i, j])}
            for i, j in np.argwhere(plan.matrix > 0)
        ]
        return {"entries": entries, "objective": plan.objective}
    entries = [{"idx": [int(i) for i in idx], "w": float(w)} for idx, w in sorted(plan.entries.items())]
    return {"entries": entries, "objective": plan.objective}


def plan_from_json(obj: dict) -> MultimarginalPlan:
    entries = {tuple(int(i) for i in e["idx"]): float(e["w"]) for e in obj["entries"]}
    ndim = len(next(iter(entries)))
    shape = tuple(max(idx[j] for idx in entries) + 1 for j in range(ndim))
    marginals = []
    for j in range(ndim):
        m = np.zeros(shape[j])
        for idx, w in entries.items():
            m[idx[j]] += w
        marginals.append(m)
    return MultimarginalPlan(entries=entries, marginals=marginals, objective=float(obj["objective"]), shape=shape)
