"""Random-walk state-space models: Kalman filter, smoother and Carter-Kohn sampling.

State equation   b_t = b_{t-1} + eta_t,          eta_t ~ N(0, Q)
Observation      y_t = Z_t b_t + e_t,            e_t   ~ N(0, R_t)
Initial state    b_0 ~ N(init_mean, init_cov)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, NumericalError
from . import _kernels
from .rng import as_generator


@dataclass(frozen=True)
class StateSpaceModel:
    loadings: np.ndarray   # (T, m, k)
    obs_cov: np.ndarray    # (T, m, m)
    state_cov: np.ndarray  # (k, k)
    init_mean: np.ndarray  # (k,)
    init_cov: np.ndarray   # (k, k)

    def __post_init__(self):
        Z = np.ascontiguousarray(self.loadings, dtype=float)
        R = np.ascontiguousarray(self.obs_cov, dtype=float)
        if Z.ndim != 3 or R.ndim != 3:
            raise ConfigError("loadings must be (T, m, k) and obs_cov (T, m, m)")
        T, m, k = Z.shape
        if R.shape != (T, m, m):
            raise ConfigError(f"obs_cov shape {R.shape} does not match loadings {Z.shape}")
        Q = np.ascontiguousarray(np.atleast_2d(self.state_cov), dtype=float)
        b0 = np.ascontiguousarray(np.atleast_1d(self.init_mean), dtype=float)
        P0 = np.ascontiguousarray(np.atleast_2d(self.init_cov), dtype=float)
        if Q.shape != (k, k) or b0.shape != (k,) or P0.shape != (k, k):
            raise ConfigError("state_cov, init_mean and init_cov must match state dimension "
                              f"{k}: got {Q.shape}, {b0.shape}, {P0.shape}")
        for name, val in (("loadings", Z), ("obs_cov", R), ("state_cov", Q), ("init_mean", b0), ("init_cov", P0)):
            object.__setattr__(self, name, val)

    @property
    def n_periods(self) -> int:
        return self.loadings.shape[0]

    @property
    def state_dim(self) -> int:
        return self.loadings.shape[2]

    @classmethod
    def time_invariant(cls, T, loading, obs_cov, state_cov, init_mean, init_cov) -> "StateSpaceModel":
        loading = np.atleast_2d(np.asarray(loading, dtype=float))
        obs_cov = np.atleast_2d(np.asarray(obs_cov, dtype=float))
        return cls(np.broadcast_to(loading, (T,) + loading.shape).copy(),
                   np.broadcast_to(obs_cov, (T,) + obs_cov.shape).copy(),
                   state_cov, init_mean, init_cov)


@dataclass(frozen=True)
class FilterResult:
    means: np.ndarray       # filtered b_{t|t}, (T, k)
    covs: np.ndarray        # P_{t|t}, (T, k, k)
    pred_covs: np.ndarray   # P_{t|t-1}, (T, k, k)
    loglik: float


def _obs(model: StateSpaceModel, observations) -> np.ndarray:
    y = np.asarray(observations, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    if y.shape != model.loadings.shape[:2]:
        raise ConfigError(f"observations shape {y.shape} does not match model {model.loadings.shape[:2]}")
    return np.ascontiguousarray(y)


def kalman_filter(model: StateSpaceModel, observations) -> FilterResult:
    y = _obs(model, observations)
    bf, Pf, Pp, ll, status, t = _kernels.rw_filter(
        y, model.loadings, model.obs_cov, model.state_cov, model.init_mean, model.init_cov)
    if status:
        raise NumericalError(f"Kalman filter: innovation covariance not positive definite at period {t}")
    return FilterResult(bf, Pf, Pp, float(ll))


def kalman_smoother(model: StateSpaceModel, observations) -> tuple[np.ndarray, np.ndarray]:
    """Smoothed means (T, k) and covariances (T, k, k) for periods 1..T."""
    f = kalman_filter(model, observations)
    bs, Ps = _kernels.rw_smoother(f.means, f.covs, f.pred_covs, model.init_mean, model.init_cov,
                                  not np.any(model.state_cov))
    return bs[1:], Ps[1:]


def carter_kohn(model: StateSpaceModel, observations, rng, *, return_initial: bool = False) -> np.ndarray:
    """One draw of the state path from its joint smoothing distribution.

    Forward Kalman filter, then backward sampling with
    b_{t|t+1} = b_{t|t} + P_{t|t} P_{t+1|t}^{-1} (b_{t+1} - b_{t|t}) and
    P_{t|t+1} = P_{t|t} - P_{t|t} P_{t+1|t}^{-1} P_{t|t}.
    Returns (T, k), or (T + 1, k) with the initial state first when ``return_initial``.
    """
    f = kalman_filter(model, observations)
    eps = as_generator(rng).standard_normal((model.n_periods + 1, model.state_dim))
    out, status, t = _kernels.rw_backward_sample(
        f.means, f.covs, f.pred_covs, model.init_mean, model.init_cov, eps, not np.any(model.state_cov))
    if status:
        raise NumericalError(f"Carter-Kohn: smoothing covariance lost positive semi-definiteness at period {t}")
    return out if return_initial else out[1:]


def sample_states(obs, loadings, obs_cov, state_cov, init_mean, init_cov, rng, *, context: str = "") -> np.ndarray:
    """Carter-Kohn draw (T + 1, k), initial state first, on pre-validated contiguous arrays.

    The inner-loop entry point for samplers that call the smoother thousands
    of times; :func:`carter_kohn` is the checked public wrapper.
    """
    bf, Pf, Pp, ll, status, t = _kernels.rw_filter(obs, loadings, obs_cov, state_cov, init_mean, init_cov)
    if status:
        raise NumericalError(f"Kalman filter{' (' + context + ')' if context else ''}: innovation covariance "
                             f"not positive definite at period {t}")
    eps = as_generator(rng).standard_normal((obs.shape[0] + 1, init_mean.shape[0]))
    out, status, t = _kernels.rw_backward_sample(bf, Pf, Pp, init_mean, init_cov, eps, not np.any(state_cov))
    if status:
        raise NumericalError(f"Carter-Kohn{' (' + context + ')' if context else ''}: smoothing covariance lost "
                             f"positive semi-definiteness at period {t}")
    return out
