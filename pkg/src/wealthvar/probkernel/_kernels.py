"""Compiled inner loops for random-walk state-space models.

The kernels never draw random numbers themselves: callers pass standard
normals drawn from a seeded numpy stream, which keeps runs reproducible.
Status codes: 0 ok, 1 innovation covariance not PD, 2 smoothing covariance
lost positive semi-definiteness.
"""

import numpy as np
from numba import njit

LOG2PI = np.log(2.0 * np.pi)


@njit(cache=True)
def max_diag(A):
    d = 0.0
    for i in range(A.shape[0]):
        if A[i, i] > d:
            d = A[i, i]
    return d


@njit(cache=True)
def chol_psd(A, ref_scale, rel_tol):
    """Semi-definite Cholesky: pivots below ``rel_tol * ref_scale`` become zero columns.

    ``ref_scale`` is the magnitude the matrix was computed from (e.g. the
    predicted covariance), so round-off residue of an exactly singular result
    is recognised as zero. Returns (L, status); status 2 flags a clearly
    negative pivot.
    """
    n = A.shape[0]
    L = np.zeros((n, n))
    dmax = max(max_diag(A), ref_scale)
    tol = rel_tol * dmax
    status = 0
    for j in range(n):
        d = A[j, j]
        for l in range(j):
            d -= L[j, l] * L[j, l]
        if d <= tol:
            if d < -1e-6 * dmax - 1e-300:
                status = 2
            continue
        ljj = np.sqrt(d)
        L[j, j] = ljj
        for i in range(j + 1, n):
            s = A[i, j]
            for l in range(j):
                s -= L[i, l] * L[j, l]
            L[i, j] = s / ljj
    return L, status


@njit(cache=True)
def rw_filter(y, Z, R, Q, b0, P0):
    """Kalman filter for b_t = b_{t-1} + eta_t, y_t = Z_t b_t + e_t.

    Returns filtered means (T, k), filtered covs (T, k, k), predicted covs
    (T, k, k), log-likelihood, status and the failing period (or -1).
    """
    T, m = y.shape
    k = b0.shape[0]
    bf = np.empty((T, k))
    Pf = np.empty((T, k, k))
    Pp = np.empty((T, k, k))
    b = b0.copy()
    P = P0.copy()
    ll = 0.0
    for t in range(T):
        P = P + Q
        Pp[t] = P
        Zt = Z[t]
        v = y[t] - Zt @ b
        PZ = P @ Zt.T
        F = Zt @ PZ + R[t]
        F = 0.5 * (F + F.T)
        Lf, st = chol_psd(F, 0.0, 0.0)
        for i in range(m):
            if Lf[i, i] <= 0.0:
                return bf, Pf, Pp, ll, 1, t
        # K = P Z' F^{-1}
        Linv = np.linalg.inv(Lf)
        Finv = Linv.T @ Linv
        K = PZ @ Finv
        b = b + K @ v
        P = P - K @ PZ.T
        P = 0.5 * (P + P.T)
        bf[t] = b
        Pf[t] = P
        logdet = 0.0
        for i in range(m):
            logdet += 2.0 * np.log(Lf[i, i])
        ll += -0.5 * (m * LOG2PI + logdet + v @ Finv @ v)
    return bf, Pf, Pp, ll, 0, -1


@njit(cache=True)
def rw_backward_sample(bf, Pf, Pp, b0, P0, eps, q_is_zero):
    """Carter-Kohn backward pass; returns states for t = 0..T (row 0 is the initial state).

    eps has shape (T + 1, k): row t+1 is used for period t, row 0 for the initial state.
    """
    T, k = bf.shape
    out = np.empty((T + 1, k))
    L, st = chol_psd(Pf[T - 1], max_diag(Pp[T - 1]), 1e-12)
    if st != 0:
        return out, 2, T - 1
    out[T] = bf[T - 1] + L @ eps[T]
    for t in range(T - 2, -2, -1):
        if t >= 0:
            mean_f = bf[t]
            P = Pf[t]
            ref = max_diag(Pp[t])
        else:
            mean_f = b0
            P = P0
            ref = max_diag(P0)
        if q_is_zero:
            out[t + 1] = out[t + 2]
            continue
        # G = P Pp[t+1]^{-1}
        G = np.linalg.solve(Pp[t + 1], P).T
        mean = mean_f + G @ (out[t + 2] - mean_f)
        cov = P - G @ P
        cov = 0.5 * (cov + cov.T)
        L, st = chol_psd(cov, ref, 1e-12)
        if st != 0:
            return out, 2, t
        out[t + 1] = mean + L @ eps[t + 1]
    return out, 0, -1


@njit(cache=True)
def rw_smoother(bf, Pf, Pp, b0, P0, q_is_zero):
    """Rauch-Tung-Striebel smoother means and covariances for t = 0..T."""
    T, k = bf.shape
    bs = np.empty((T + 1, k))
    Ps = np.empty((T + 1, k, k))
    bs[T] = bf[T - 1]
    Ps[T] = Pf[T - 1]
    for t in range(T - 2, -2, -1):
        if t >= 0:
            mean_f = bf[t]
            P = Pf[t]
        else:
            mean_f = b0
            P = P0
        if q_is_zero:
            bs[t + 1] = bs[t + 2]
            Ps[t + 1] = Ps[t + 2]
            continue
        G = np.linalg.solve(Pp[t + 1], P).T
        bs[t + 1] = mean_f + G @ (bs[t + 2] - mean_f)
        Ps[t + 1] = P + G @ (Ps[t + 2] - Pp[t + 1]) @ G.T
    return bs, Ps
