"""VAR with drifting coefficients and stochastic volatility.

    y_t = (I_n kron x_t') B_t + A_t^{-1} H_t^{1/2} e_t
    B_t = B_{t-1} + eta_t,  a_t = a_{t-1} + tau_t,  ln h_t = ln h_{t-1} + n_t

A_t is unit lower triangular with free elements a_t (row by row), H_t is
diagonal with entries h_t. B_t stacks the columns of the (k, n) coefficient
matrix, so equation j occupies block j.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..bvar.model import VarSpec, lag_matrix, ols_xy
from ..errors import ConfigError, InsufficientDataError, NumericalError
from ..probkernel import RngStream, chol, draw_inverse_gamma, draw_inverse_wishart, sample_states

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TvpPriorSpec:
    """Training-sample priors and switches that freeze parts of the time variation.

    ``fix_q_zero`` / ``fix_s_zero`` / ``fix_z_zero`` pin the corresponding
    innovation covariance at zero, turning the matching states constant.
    """

    training_periods: int = 40
    coef_var_scale: float = 4.0
    rho: float = 1e-4
    logvol_var: float = 10.0
    a_var_scale: float = 10.0
    a_var_floor: float = 1e-6
    s_scale: float = 1e-3
    z_shape: float = 0.5
    z_scale: float = 0.0001 / 2
    fix_q_zero: bool = False
    fix_s_zero: bool = False
    fix_z_zero: bool = False

    def __post_init__(self):
        for name in ("coef_var_scale", "rho", "logvol_var", "a_var_scale", "a_var_floor", "s_scale",
                     "z_shape", "z_scale"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"TVP prior {name} must be positive")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class TvpPrior:
    b0: np.ndarray          # (n k,)
    P0: np.ndarray          # (n k, n k)
    Q_scale: np.ndarray     # T0 * Qbar
    Q_dof: float
    a0: np.ndarray          # (n (n - 1) / 2,)
    a0_var: np.ndarray
    S_scales: list          # per block j = 1..n-1, (j, j)
    S_dof: float
    lh0_mean: np.ndarray    # (n,)
    lh0_var: float


def a_blocks(n: int) -> list[slice]:
    """Slices of a_t belonging to rows 2..n of A_t."""
    out, start = [], 0
    for j in range(1, n):
        out.append(slice(start, start + j))
        start += j
    return out


def unit_lower(a: np.ndarray, n: int) -> np.ndarray:
    """A_t (..., n, n) from free elements a (..., n (n - 1) / 2)."""
    A = np.zeros(a.shape[:-1] + (n, n))
    A[..., np.arange(n), np.arange(n)] = 1.0
    il = np.tril_indices(n, -1)
    A[..., il[0], il[1]] = a
    return A


def omega_from(a: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Omega_t = A_t^{-1} H_t A_t^{-1}' for stacked periods."""
    n = h.shape[-1]
    Ainv = np.linalg.inv(unit_lower(a, n))
    out = Ainv * h[..., None, :] @ np.swapaxes(Ainv, -1, -2)
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def build_tvp_prior(spec: VarSpec, train: np.ndarray, ps: TvpPriorSpec) -> TvpPrior:
    n, k = spec.n, spec.k
    Yt, Xt = lag_matrix(train, spec.lags, spec.include_constant)
    if Yt.shape[0] <= k:
        raise InsufficientDataError(f"training sample of {train.shape[0]} periods is too short for {k} regressors")
    r = ols_xy(Yt, Xt)
    V = np.kron(r.sigma, np.linalg.inv(Xt.T @ Xt))
    T0 = Yt.shape[0]
    K = chol(r.sigma, context="training-sample covariance")
    A = np.linalg.inv(K / np.diag(K))
    a0 = A[np.tril_indices(n, -1)]
    a_var = np.maximum(ps.a_var_scale * np.abs(a0), ps.a_var_floor)
    s_el = np.maximum(ps.s_scale * np.abs(a0), ps.s_scale * ps.a_var_floor)
    S_scales = [np.diag(s_el[sl]) for sl in a_blocks(n)]
    return TvpPrior(r.coefs.T.ravel(), ps.coef_var_scale * V, T0 * ps.rho * V, float(T0), a0, a_var,
                    S_scales, float(T0), np.log(np.diag(K) ** 2), ps.logvol_var)


@dataclass(frozen=True)
class TvpDraws:
    """Retained TVP draws over the estimation periods (training sample excluded)."""

    spec: VarSpec
    coefs: np.ndarray       # (D, T, n k), equation blocks
    a: np.ndarray           # (D, T, n (n - 1) / 2)
    h: np.ndarray           # (D, T, n) variances
    Q: np.ndarray           # (D, n k, n k)
    S: np.ndarray           # (D, na, na) block diagonal
    Z: np.ndarray           # (D, n)
    data: np.ndarray        # full data including training sample
    first_period: int       # data row of the first estimation period
    h_acceptance: float
    prior: dict
    seed: int

    @property
    def n_draws(self) -> int:
        return self.coefs.shape[0]

    @property
    def n_periods(self) -> int:
        return self.coefs.shape[1]

    def coef_matrices(self, d: int) -> np.ndarray:
        """(T, k, n) coefficient matrices of draw d."""
        k, n = self.spec.k, self.spec.n
        return self.coefs[d].reshape(-1, n, k).transpose(0, 2, 1)

    def omega(self, d: int) -> np.ndarray:
        return omega_from(self.a[d], self.h[d])


def _sample_logvol(lh, eps2, Z, m0, V0, g, z_zero: bool):
    """One sweep over ln h (T + 1, n), row 0 the initial state. Returns (lh, accepted, proposed).

    Interior periods propose from the lognormal implied by both neighbours
    (mean of the two, variance Z / 2), the last period from its predecessor
    (variance Z); acceptance is the ratio of h^{-1/2} exp(-e^2 / 2h). Odd and
    even periods are conditionally independent and updated in two blocks.
    """
    T = eps2.shape[0]
    n = eps2.shape[1]
    if z_zero:
        # common log level: random-walk MH against the prior
        lvl = lh[0].copy()
        step = 2.4 / np.sqrt(max(T / 2.0, 1.0))
        prop = lvl + step * g.standard_normal(n)

        def logpost(l):
            return -0.5 * T * l - 0.5 * np.exp(-l) * eps2.sum(axis=0) - 0.5 * (l - m0) ** 2 / V0
        acc = np.log(g.random(n)) < logpost(prop) - logpost(lvl)
        lvl = np.where(acc, prop, lvl)
        return np.broadcast_to(lvl, lh.shape).copy(), int(acc.sum()), n
    sd = np.sqrt(Z)
    accepted = proposed = 0
    for first in (1, 2):
        ts = np.arange(first, T + 1, 2)
        if ts.size == 0:
            continue
        interior = ts < T
        mu = np.where(interior[:, None], 0.5 * (lh[ts - 1] + lh[np.minimum(ts + 1, T)]), lh[ts - 1])
        scale = np.where(interior[:, None], sd / np.sqrt(2.0), sd)
        new = mu + scale * g.standard_normal(mu.shape)
        old = lh[ts]
        e2 = eps2[ts - 1]
        logr = -0.5 * (new - old) - 0.5 * e2 * (np.exp(-new) - np.exp(-old))
        acc = np.log(g.random(mu.shape)) < logr
        lh[ts] = np.where(acc, new, old)
        accepted += int(acc.sum())
        proposed += acc.size
    v = 1.0 / (1.0 / V0 + 1.0 / Z)
    lh[0] = v * (m0 / V0 + lh[1] / Z) + np.sqrt(v) * g.standard_normal(n)
    lh = _level_shift(lh, eps2, m0, V0, g)
    return lh, accepted, proposed


def _level_shift(lh, eps2, m0, V0, g):
    """Metropolis move shifting each whole log-volatility path by a common constant.

    Random-walk increments are unchanged by the shift, so only the likelihood
    and the prior on the initial state enter the ratio. The single-period
    sweep alone moves the overall level very slowly when Z is small.
    """
    T, n = eps2.shape
    c = 2.4 * np.sqrt(2.0 / T) * g.standard_normal(n)
    cur = lh[1:]
    logr = (-0.5 * T * c - 0.5 * (eps2 * (np.exp(-(cur + c)) - np.exp(-cur))).sum(axis=0)
            - 0.5 * ((lh[0] + c - m0) ** 2 - (lh[0] - m0) ** 2) / V0)
    acc = np.log(g.random(n)) < logr
    return lh + np.where(acc, c, 0.0)


def tvp_gibbs(spec: VarSpec, data: np.ndarray, priors: TvpPriorSpec | None = None, rng: RngStream | None = None,
              iters: int = 100_000, burn_in: int = 60_000, thin: int = 10) -> TvpDraws:
    """Gibbs sampler cycling B_t, a_t, h_t, then (Q, S, Z).

    The first ``priors.training_periods`` rows set the priors; the remaining
    rows (with their lags) are the estimation sample.
    """
    ps = priors or TvpPriorSpec()
    if rng is None:
        raise ConfigError("tvp_gibbs needs a random stream")
    if not (iters > burn_in >= 0 and thin >= 1):
        raise ConfigError("need iters > burn_in >= 0 and thin >= 1")
    data = np.asarray(data, dtype=float)
    n, k, p = spec.n, spec.k, spec.lags
    T0 = ps.training_periods
    if T0 < p + k + 1 or data.shape[0] - T0 < 2:
        raise InsufficientDataError(f"need a training sample longer than {p + k} and estimation periods after it; "
                                    f"got {T0} of {data.shape[0]} rows")
    prior = build_tvp_prior(spec, data[:T0], ps)
    Yall, Xall = lag_matrix(data, p, spec.include_constant)
    Y = np.ascontiguousarray(Yall[T0 - p:])
    X = Xall[T0 - p:]
    T = Y.shape[0]
    nk = n * k
    Zb = np.zeros((T, n, nk))
    for j in range(n):
        Zb[:, j, j * k:(j + 1) * k] = X
    g = rng.generator
    blocks = a_blocks(n)
    na = n * (n - 1) // 2

    # state initialisation at prior means
    Bt = np.tile(prior.b0, (T + 1, 1))
    at = np.tile(prior.a0, (T + 1, 1))
    lh = np.tile(prior.lh0_mean, (T + 1, 1))
    Q = np.zeros((nk, nk)) if ps.fix_q_zero else prior.Q_scale / (prior.Q_dof + nk + 1)
    Sb = [np.zeros_like(s) if ps.fix_s_zero else s / (prior.S_dof + s.shape[0] + 1) for s in prior.S_scales]
    Z = np.zeros(n) if ps.fix_z_zero else np.full(n, 0.01)

    nkeep = (iters - burn_in) // thin
    out_B = np.empty((nkeep, T, nk))
    out_a = np.empty((nkeep, T, na))
    out_h = np.empty((nkeep, T, n))
    out_Q = np.empty((nkeep, nk, nk))
    out_S = np.zeros((nkeep, na, na))
    out_Z = np.empty((nkeep, n))
    acc_n = prop_n = 0
    keep = 0
    a_P0 = [np.diag(prior.a0_var[sl]) for sl in blocks]
    for it in range(iters):
        # 1. coefficient states
        Om = omega_from(at[1:], np.exp(lh[1:]))
        Bt = sample_states(Y, Zb, Om, Q, prior.b0, prior.P0, g, context=f"coefficients, iteration {it}")
        resid = Y - np.einsum("tjk,tk->tj", Zb, Bt[1:])
        # 2. contemporaneous relations, equation by equation
        for j, sl in enumerate(blocks, start=1):
            yj = np.ascontiguousarray(resid[:, j:j + 1])
            Zj = np.ascontiguousarray(-resid[:, None, :j])
            Rj = np.exp(lh[1:, j])[:, None, None].copy()
            at[:, sl] = sample_states(yj, Zj, Rj, Sb[j - 1], prior.a0[sl], a_P0[j - 1], g,
                                      context=f"covariance states equation {j + 1}, iteration {it}")
        # 3. volatilities
        A = unit_lower(at[1:], n)
        eps = np.einsum("tij,tj->ti", A, resid)
        lh, acc, prop = _sample_logvol(lh, eps ** 2, Z, prior.lh0_mean, prior.lh0_var, g, ps.fix_z_zero)
        if it >= burn_in:
            acc_n += acc
            prop_n += prop
        # 4. hyperparameters
        if not ps.fix_q_zero:
            eta = np.diff(Bt, axis=0)
            Q = draw_inverse_wishart(prior.Q_scale + eta.T @ eta, T + prior.Q_dof, g)
        if not ps.fix_s_zero:
            tau = np.diff(at, axis=0)
            Sb = [draw_inverse_wishart(prior.S_scales[b] + tau[:, sl].T @ tau[:, sl], T + prior.S_dof, g)
                  for b, sl in enumerate(blocks)]
        if not ps.fix_z_zero:
            dl = np.diff(lh, axis=0)
            Z = draw_inverse_gamma(ps.z_shape + T / 2.0, ps.z_scale + 0.5 * (dl ** 2).sum(axis=0), g)
        if it >= burn_in and (it - burn_in + 1) % thin == 0 and keep < nkeep:
            out_B[keep], out_a[keep], out_h[keep] = Bt[1:], at[1:], np.exp(lh[1:])
            out_Q[keep], out_Z[keep] = Q, Z
            for b, sl in enumerate(blocks):
                out_S[keep, sl, sl] = Sb[b]
            keep += 1
    if not np.all(np.isfinite(out_B)):
        raise NumericalError("TVP sampler produced non-finite coefficient states")
    rate = acc_n / prop_n if prop_n else float("nan")
    return TvpDraws(spec, out_B, out_a, out_h, out_Q, out_S, out_Z, data, T0, rate, ps.to_dict(), int(rng.seed))
