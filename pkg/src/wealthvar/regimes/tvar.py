"""Two-regime threshold VAR with a Metropolis step on the threshold."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.linalg import cho_solve, solve_triangular

from ..bvar.model import VarSpec, lag_matrix, ols_xy
from ..bvar.priors import DummyObsPriorSpec
from ..errors import ConfigError, InsufficientDataError
from ..probkernel import RngStream, chol, draw_inverse_wishart
from ..structural.identification import IdentificationScheme
from ..structural.responses import irf
from ..structural.results import ImpulseResponseSet, write_frame


@dataclass(frozen=True)
class TvarSpec:
    """Threshold variable, delay and sampler settings.

    The regime is 1 when the threshold variable ``delay`` periods back is at
    or below Y*, else 2. Each regime must keep ``n p + 1 + min_extra``
    observations; proposals that violate this are rejected.
    """

    threshold_variable: str
    delay: int = 2
    tightness: float = 0.1
    training_periods: int | None = None
    target_acceptance: float = 0.30
    init_step: float | None = None
    min_extra: int = 5

    def __post_init__(self):
        if self.delay < 1:
            raise ConfigError(f"threshold delay must be >= 1, got {self.delay}")
        if not 0 < self.target_acceptance < 1:
            raise ConfigError("target acceptance must lie in (0, 1)")
        if not self.tightness > 0:
            raise ConfigError("prior tightness must be positive")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def ar1_coefficients(data: np.ndarray) -> np.ndarray:
    """OLS slope of an AR(1) with constant, per column."""
    out = np.empty(data.shape[1])
    for j in range(data.shape[1]):
        Y, X = lag_matrix(data[:, [j]], 1, True)
        out[j] = ols_xy(Y, X).coefs[1, 0]
    return out


@dataclass(frozen=True)
class TvarData:
    Y: np.ndarray
    X: np.ndarray
    z: np.ndarray          # threshold variable lagged by the delay, aligned with Y
    rows: np.ndarray       # data row of each observation


def tvar_data(spec: VarSpec, ts: TvarSpec, data: np.ndarray) -> TvarData:
    p, d = spec.lags, ts.delay
    j = spec.index(ts.threshold_variable)
    Yall, Xall = lag_matrix(data, p, spec.include_constant)
    s = max(p, d)
    rows = np.arange(s, data.shape[0])
    return TvarData(Yall[s - p:], Xall[s - p:], data[rows - d, j], rows)


def regimes_for(z: np.ndarray, threshold: float) -> np.ndarray:
    """1 where z <= threshold, 2 elsewhere."""
    return np.where(z <= threshold, 1, 2).astype(np.int8)


@dataclass(frozen=True)
class TvarDraws:
    spec: VarSpec
    tspec: TvarSpec
    coefs: np.ndarray       # (D, 2, k, n)
    sigma: np.ndarray       # (D, 2, n, n)
    threshold: np.ndarray   # (D,)
    regimes: np.ndarray     # (D, T) int8
    z: np.ndarray
    rows: np.ndarray
    step: float             # frozen random-walk scale after burn-in
    acceptance: float       # after burn-in
    tuning_trace: np.ndarray  # (blocks, 3): iteration, acceptance in block, step
    prior_mean: float
    prior_var: float
    seed: int

    @property
    def n_draws(self) -> int:
        return self.coefs.shape[0]

    def regime_draws(self, regime: int) -> "RegimeDraws":
        return RegimeDraws(self.spec, self.coefs[:, regime - 1], self.sigma[:, regime - 1])

    def interval(self, level: float = 0.68) -> tuple[float, float]:
        q = 50.0 * (1 - level)
        lo, hi = np.percentile(self.threshold, [q, 100.0 - q])
        return float(lo), float(hi)

    def timeline(self, months=None) -> pd.DataFrame:
        """``month, threshold_var_lagged, threshold_median, regime`` for every observation."""
        med = float(np.median(self.threshold))
        labels = [str(months[r]) for r in self.rows] if months is not None else [str(int(r)) for r in self.rows]
        return pd.DataFrame({"month": labels, "threshold_var_lagged": self.z, "threshold_median": med,
                             "regime": regimes_for(self.z, med).astype(int)})

    def write_timeline(self, path, months=None) -> None:
        write_frame(self.timeline(months), path)


@dataclass(frozen=True)
class RegimeDraws:
    """The minimal draw-set surface the structural routines need."""

    spec: VarSpec
    coefs: np.ndarray
    sigma: np.ndarray

    @property
    def n_draws(self) -> int:
        return self.coefs.shape[0]


def _regime_loglik(Y, X, B, Sigma) -> np.ndarray:
    """Per-observation (T/2) log|Sigma^{-1}| - e' Sigma^{-1} e / 2 terms."""
    L = chol(Sigma, context="regime covariance")
    E = Y - X @ B
    W = solve_triangular(L, E.T, lower=True)
    return -np.sum(np.log(np.diag(L))) - 0.5 * np.sum(W * W, axis=0)


def threshold_logpost(y_star, z_sorted, cum1, cum2_rev, min_obs, prior_mean, prior_var) -> float:
    """Two-regime log-likelihood plus normal prior, from prefix sums over sorted z."""
    m = int(np.searchsorted(z_sorted, y_star, side="right"))   # count with z <= Y*
    T = z_sorted.size
    if m < min_obs or T - m < min_obs:
        return -np.inf
    return cum1[m] + cum2_rev[m] - 0.5 * (y_star - prior_mean) ** 2 / prior_var


def threshold_mh_step(y_star: float, step: float, logpost, g: np.random.Generator) -> tuple[float, bool]:
    """One random-walk Metropolis update of Y*; ``logpost`` may return -inf to reject."""
    cur = logpost(y_star)
    prop = y_star + step * g.standard_normal()
    accept = bool(np.log(g.random()) < logpost(prop) - cur)
    return (prop if accept else y_star), accept


def tvar_gibbs(spec: VarSpec, tspec: TvarSpec, data: np.ndarray, rng: RngStream, iters: int = 100_000,
               burn_in: int = 60_000, thin: int = 10) -> TvarDraws:
    """Gibbs over regime parameters on dummy-augmented subsamples, then random-walk MH on Y*.

    The random-walk step adapts during burn-in by a Robbins-Monro update of
    its log toward the target acceptance and is frozen afterwards.
    """
    data = np.asarray(data, dtype=float)
    if not (iters > burn_in >= 0 and thin >= 1):
        raise ConfigError("need iters > burn_in >= 0 and thin >= 1")
    n, k = spec.n, spec.k
    td = tvar_data(spec, tspec, data)
    Y, X, z = td.Y, td.X, td.z
    T = Y.shape[0]
    min_obs = n * spec.lags + 1 + tspec.min_extra
    train = data if tspec.training_periods is None else data[: tspec.training_periods]
    dummy = DummyObsPriorSpec(tightness=tspec.tightness,
                              own_lag_mean=dict(zip(spec.variables, ar1_coefficients(train))),
                              training_periods=tspec.training_periods)
    Yd, Xd = dummy.dummies(spec, data)
    series = data[:, spec.index(tspec.threshold_variable)]
    prior_mean, prior_var = float(series.mean()), float(series.var(ddof=1))
    order = np.argsort(z, kind="stable")
    z_sorted = z[order]

    y_star = prior_mean
    reg = regimes_for(z, y_star)
    if min((reg == 1).sum(), (reg == 2).sum()) < min_obs:
        raise InsufficientDataError(f"a regime has fewer than {min_obs} observations at the prior-mean threshold")
    g = rng.generator
    Sig = [ols_xy(Y, X).sigma.copy() for _ in range(2)]
    Bs = [None, None]
    log_step = np.log(tspec.init_step if tspec.init_step else 0.5 * np.sqrt(prior_var))
    nkeep = (iters - burn_in) // thin
    out_B = np.empty((nkeep, 2, k, n))
    out_S = np.empty((nkeep, 2, n, n))
    out_t = np.empty(nkeep)
    out_r = np.empty((nkeep, T), dtype=np.int8)
    trace, blk_acc, blk_n = [], 0, 0
    acc_post = n_post = 0
    keep = 0
    for it in range(iters):
        reg = regimes_for(z, y_star)
        ll = []
        for i in (0, 1):
            m = reg == i + 1
            Ys = np.vstack([Yd, Y[m]])
            Xs = np.vstack([Xd, X[m]])
            Lx = chol(Xs.T @ Xs, context=f"regime {i + 1} X*'X*")
            Bstar = cho_solve((Lx, True), Xs.T @ Ys)
            Lv = solve_triangular(Lx, np.eye(k), lower=True).T
            Ls = chol(Sig[i], context=f"regime {i + 1} Sigma")
            Bs[i] = Bstar + Lv @ g.standard_normal((k, n)) @ Ls.T
            E = Ys - Xs @ Bs[i]
            Sig[i] = draw_inverse_wishart(E.T @ E, Ys.shape[0], g)
            ll.append(_regime_loglik(Y, X, Bs[i], Sig[i]))
        l1 = np.concatenate([[0.0], np.cumsum(ll[0][order])])
        l2 = np.concatenate([np.cumsum(ll[1][order][::-1])[::-1], [0.0]])
        y_star, accept = threshold_mh_step(
            y_star, np.exp(log_step),
            lambda y: threshold_logpost(y, z_sorted, l1, l2, min_obs, prior_mean, prior_var), g)
        if it < burn_in:
            log_step += (it + 1) ** -0.6 * (float(accept) - tspec.target_acceptance)
            blk_acc += accept
            blk_n += 1
            if blk_n == 500 or it == burn_in - 1:
                trace.append((it + 1, blk_acc / blk_n, np.exp(log_step)))
                blk_acc = blk_n = 0
        else:
            acc_post += accept
            n_post += 1
            if (it - burn_in + 1) % thin == 0 and keep < nkeep:
                out_B[keep] = Bs
                out_S[keep] = Sig
                out_t[keep] = y_star
                out_r[keep] = regimes_for(z, y_star)
                keep += 1
    return TvarDraws(spec, tspec, out_B, out_S, out_t, out_r, z, td.rows, float(np.exp(log_step)),
                     acc_post / max(n_post, 1), np.array(trace).reshape(-1, 3), prior_mean, prior_var,
                     int(rng.seed))


def tvar_regime_irf(draws: TvarDraws, scheme: IdentificationScheme, H: int = 30, months=None
                    ) -> tuple[ImpulseResponseSet, ImpulseResponseSet, pd.DataFrame]:
    """Regime-specific Cholesky IRFs plus the regime timeline."""
    if scheme.kind != "cholesky":
        raise ConfigError("regime IRFs use recursive identification")
    r1 = irf(draws.regime_draws(1), scheme, H)
    r2 = irf(draws.regime_draws(2), scheme, H)
    r1 = ImpulseResponseSet(r1.responses, r1.variables, r1.shock + "|regime1", r1.shock_size, r1.draw_index,
                            {**r1.metadata, "regime": 1})
    r2 = ImpulseResponseSet(r2.responses, r2.variables, r2.shock + "|regime2", r2.shock_size, r2.draw_index,
                            {**r2.metadata, "regime": 2})
    return r1, r2, draws.timeline(months)
