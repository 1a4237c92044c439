"""NumPy reference implementation of the hot kernels.

Kind codes: 0 = imq, 1 = compact, 2 = gauss (see KIND_CODES in __init__).
"""

import numpy as np


def component_log_densities(X, centers, scales, kinds, betas, log_norms):
    """log f_k(x_i) for every point/component pair.

    Parameters are parallel arrays over K components: centers (K, d),
    scales (K,), kinds (K,) int codes, betas (K,), log_norms (K,) the log
    normalizers.  Returns an (N, K) array; compact components give -inf
    outside their support.
    """
    X = np.asarray(X, dtype=float)
    diff = X[:, None, :] - centers[None, :, :]
    u = np.sqrt(np.einsum("nkd,nkd->nk", diff, diff)) / scales[None, :]
    out = np.empty(u.shape)
    for k in range(centers.shape[0]):
        col = u[:, k]
        kind = kinds[k]
        if kind == 0:
            vals = -betas[k] * np.log1p(col * col)
        elif kind == 1:
            with np.errstate(divide="ignore", invalid="ignore"):
                vals = np.where(col < 1.0, np.log1p(-np.minimum(col * col, 1.0)) / betas[k], -np.inf)
        else:
            vals = -0.5 * col * col
        out[:, k] = vals - log_norms[k]
    return out


def mstep_value_grad(X, tau, kind, beta, m, c, dim):
    """Weighted log-profile objective and its gradient in (m, c).

    Q = sum_i tau_i * (log rho(|x_i - m| / c) - dim * log c); returns
    (Q, grad) with grad[:d] = dQ/dm and grad[d] = dQ/dc.  Compact kernels
    return Q = -inf when any weighted point falls outside the support.
    """
    X = np.asarray(X, dtype=float)
    tau = np.asarray(tau, dtype=float)
    diff = X - m
    r = np.linalg.norm(diff, axis=1)
    u = r / c
    d = X.shape[1]
    grad = np.zeros(d + 1)
    if kind == 0:
        logs = -beta * np.log1p(u * u)
        phi = -2.0 * beta / (1.0 + u * u)
    elif kind == 1:
        if np.any((u >= 1.0) & (tau > 0.0)):
            return -np.inf, grad
        usq = np.minimum(u * u, 1.0 - 1e-300)
        logs = np.log1p(-usq) / beta
        phi = -2.0 / (beta * (1.0 - usq))
    else:
        logs = -0.5 * u * u
        phi = np.full(u.shape, -1.0)
    q = float(np.dot(tau, logs) - dim * np.log(c) * tau.sum())
    w = tau * phi
    grad[:d] = (w @ (m - X)) / (c * c)
    grad[d] = -(np.dot(w, u * u) + dim * tau.sum()) / c
    return q, grad
