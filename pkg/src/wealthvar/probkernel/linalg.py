"""Dense linear-algebra contracts: jittered Cholesky, PSD factors, companion form."""

from __future__ import annotations

import logging

import numpy as np

from ..errors import NumericalError

log = logging.getLogger(__name__)

JITTER_LEVELS = (1e-12, 1e-11, 1e-10, 1e-9, 1e-8)


def symmetrize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def chol(a, *, return_jitter: bool = False, context: str = ""):
    """Lower Cholesky factor, escalating diagonal jitter on failure.

    Jitter levels run from 1e-12 to 1e-8 and are scaled by the mean absolute
    diagonal, so the policy is unit-free. Any jitter used is logged.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.shape[0] != a.shape[1]:
        raise NumericalError(f"cholesky of non-square matrix {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NumericalError(f"cholesky of matrix with non-finite entries{' ' + context if context else ''}")
    a = symmetrize(a)
    try:
        L = np.linalg.cholesky(a)
        return (L, 0.0) if return_jitter else L
    except np.linalg.LinAlgError:
        pass
    scale = float(np.mean(np.abs(np.diag(a)))) or 1.0
    eye = np.eye(a.shape[0])
    for eps in JITTER_LEVELS:
        try:
            L = np.linalg.cholesky(a + eps * scale * eye)
        except np.linalg.LinAlgError:
            continue
        log.warning("cholesky needed jitter %.0e (scale %.3g)%s", eps, scale, f" [{context}]" if context else "")
        return (L, eps * scale) if return_jitter else L
    raise NumericalError(f"matrix is not positive definite even after jitter 1e-8{' [' + context + ']' if context else ''}")


def sample_factor(cov: np.ndarray) -> np.ndarray:
    """A factor F with F F' = cov for a positive semi-definite ``cov``.

    Uses Cholesky when it succeeds and a clipped eigen-decomposition otherwise,
    so exactly singular covariances (including zero) sample without noise.
    """
    cov = symmetrize(np.atleast_2d(np.asarray(cov, dtype=float)))
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    vals, vecs = np.linalg.eigh(cov)
    tol = 1e-10 * max(float(np.max(np.abs(vals))), 1e-300)
    if np.min(vals) < -tol * 1e2:
        raise NumericalError(f"covariance has a negative eigenvalue {np.min(vals):.3g}")
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def companion(coefs: np.ndarray, p: int, has_constant: bool = True) -> np.ndarray:
    """Companion matrix of a VAR(p) in the ``Y = X B`` layout.

    ``coefs`` is (k, n) with rows ``[const?, y_{t-1}', ..., y_{t-p}']``.
    """
    B = np.asarray(coefs, dtype=float)
    off = 1 if has_constant else 0
    n = B.shape[1]
    if B.shape[0] != off + n * p:
        raise ValueError(f"coefficient rows {B.shape[0]} inconsistent with n={n}, p={p}")
    F = np.zeros((n * p, n * p))
    F[:n, :] = B[off:, :].T
    if p > 1:
        F[n:, :-n] = np.eye(n * (p - 1))
    return F


def spectral_radius(F: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(F)))) if F.size else 0.0


def is_stable(F: np.ndarray) -> bool:
    return spectral_radius(F) < 1.0


def lag_blocks(coefs: np.ndarray, p: int, has_constant: bool = True) -> np.ndarray:
    """Lag matrices A_l (p, n, n) with y_t = c + sum_l A_l y_{t-l}."""
    B = np.asarray(coefs, dtype=float)
    off = 1 if has_constant else 0
    n = B.shape[1]
    return np.stack([B[off + l * n: off + (l + 1) * n, :].T for l in range(p)])


def ma_coefficients(coefs: np.ndarray, p: int, horizon: int, has_constant: bool = True) -> np.ndarray:
    """Reduced-form moving-average matrices Psi_0..Psi_H, shape (H+1, n, n).

    Psi_h is the top-left n x n block of the companion matrix raised to h.
    """
    F = companion(coefs, p, has_constant)
    n = F.shape[0] // p
    psi = np.empty((horizon + 1, n, n))
    Fh = np.eye(F.shape[0])
    for h in range(horizon + 1):
        psi[h] = Fh[:n, :n]
        Fh = Fh @ F
    return psi
