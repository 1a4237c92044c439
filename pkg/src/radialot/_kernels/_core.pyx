# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled implementation of the hot kernels; mirrors _fallback exactly."""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, log, log1p, sqrt

cnp.import_array()


def component_log_densities(X, centers, scales, kinds, betas, log_norms):
    """log f_k(x_i) for every point/component pair; see _fallback for the contract."""
    cdef double[:, ::1] x = np.ascontiguousarray(X, dtype=np.float64)
    cdef double[:, ::1] ce = np.ascontiguousarray(centers, dtype=np.float64)
    cdef double[::1] sc = np.ascontiguousarray(scales, dtype=np.float64)
    cdef long[::1] kd = np.ascontiguousarray(kinds, dtype=np.int64)
    cdef double[::1] bt = np.ascontiguousarray(betas, dtype=np.float64)
    cdef double[::1] ln = np.ascontiguousarray(log_norms, dtype=np.float64)

    cdef Py_ssize_t n = x.shape[0], d = x.shape[1], kk = ce.shape[0]
    out_arr = np.empty((n, kk), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, k
    cdef double acc, diff, u, usq, val

    with nogil:
        for i in range(n):
            for k in range(kk):
                acc = 0.0
                for j in range(d):
                    diff = x[i, j] - ce[k, j]
                    acc += diff * diff
                u = sqrt(acc) / sc[k]
                usq = u * u
                if kd[k] == 0:
                    val = -bt[k] * log1p(usq)
                elif kd[k] == 1:
                    if u < 1.0:
                        val = log1p(-usq) / bt[k]
                    else:
                        val = -INFINITY
                else:
                    val = -0.5 * usq
                out[i, k] = val - ln[k]
    return out_arr


def mstep_value_grad(X, tau, kind, beta, m, c, dim):
    """Weighted log-profile objective and gradient; see _fallback for the contract."""
    cdef double[:, ::1] x = np.ascontiguousarray(X, dtype=np.float64)
    cdef double[::1] t = np.ascontiguousarray(tau, dtype=np.float64)
    cdef double[::1] mv = np.ascontiguousarray(m, dtype=np.float64)
    cdef long kindc = kind
    cdef double betac = beta, cc = c
    cdef long dimc = dim

    cdef Py_ssize_t n = x.shape[0], d = x.shape[1]
    grad_arr = np.zeros(d + 1, dtype=np.float64)
    cdef double[::1] grad = grad_arr
    cdef Py_ssize_t i, j
    cdef double acc, diff, u, usq, q = 0.0, tsum = 0.0, phi, w, gc = 0.0
    cdef bint infeasible = 0

    with nogil:
        for i in range(n):
            acc = 0.0
            for j in range(d):
                diff = x[i, j] - mv[j]
                acc += diff * diff
            u = sqrt(acc) / cc
            usq = u * u
            if kindc == 0:
                q += t[i] * (-betac * log1p(usq))
                phi = -2.0 * betac / (1.0 + usq)
            elif kindc == 1:
                if u >= 1.0:
                    if t[i] > 0.0:
                        infeasible = 1
                        break
                    phi = 0.0
                else:
                    q += t[i] * (log1p(-usq) / betac)
                    phi = -2.0 / (betac * (1.0 - usq))
            else:
                q += t[i] * (-0.5 * usq)
                phi = -1.0
            tsum += t[i]
            w = t[i] * phi
            for j in range(d):
                grad[j] += w * (mv[j] - x[i, j])
            gc += w * usq

    if infeasible:
        grad_arr[:] = 0.0
        return -np.inf, grad_arr
    for j in range(d):
        grad_arr[j] /= cc * cc
    grad_arr[d] = -(gc + dimc * tsum) / cc
    q -= dimc * log(cc) * tsum
    return q, grad_arr
