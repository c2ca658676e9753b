"""Counterfactual specifications and hard-conditioned scenario forecasts."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..errors import ConfigError, NumericalError
from ..probkernel import chol, lag_blocks, ma_coefficients
from .results import ScenarioForecast

LUCAS_NOTE = ("Scenario paths assume the estimated reduced-form dynamics stay unchanged under the "
              "conditioned policy path (Lucas critique); read them as model-consistent projections, "
              "not as structural policy evaluations.")


@dataclass(frozen=True)
class Condition:
    """Target path for one variable over horizons 1..H.

    With ``values`` the target is ``values + offset`` (NaN entries leave that
    horizon free). Without ``values`` the target is each draw's unconditional
    forecast plus ``offset``.
    """

    variable: str
    values: tuple[float, ...] | None = None
    offset: float | tuple[float, ...] = 0.0

    def __post_init__(self):
        if self.values is not None:
            object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not np.isscalar(self.offset):
            object.__setattr__(self, "offset", tuple(float(v) for v in self.offset))

    def target(self, H: int, unconditional: np.ndarray) -> np.ndarray:
        base = unconditional if self.values is None else np.asarray(self.values, dtype=float)
        if base.shape[0] < H:
            raise ConfigError(f"conditioning path for {self.variable!r} covers {base.shape[0]} of {H} horizons")
        off = np.broadcast_to(np.asarray(self.offset, dtype=float), (H,))
        return base[:H] + off


@dataclass(frozen=True)
class CounterfactualSpec:
    """``channel_shutdown`` (with channel variables) or ``conditional_path`` (with conditions)."""

    mode: str
    horizon: int = 30
    channel_variables: tuple[str, ...] = ()
    conditions: tuple[Condition, ...] = ()
    name: str = "scenario"
    metadata: Mapping = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "channel_variables", tuple(self.channel_variables))
        object.__setattr__(self, "conditions", tuple(self.conditions))
        if self.mode not in ("channel_shutdown", "conditional_path"):
            raise ConfigError(f"counterfactual mode must be channel_shutdown or conditional_path, got {self.mode!r}")
        if self.horizon < 1:
            raise ConfigError("counterfactual horizon must be >= 1")
        if self.mode == "channel_shutdown" and not self.channel_variables:
            raise ConfigError("channel_shutdown needs channel variables")
        if self.mode == "conditional_path" and not self.conditions:
            raise ConfigError("conditional_path needs at least one condition")

    def validate(self, variables: Sequence[str]) -> None:
        names = list(self.channel_variables) + [c.variable for c in self.conditions]
        bad = [v for v in names if v not in variables]
        if bad:
            raise ConfigError(f"counterfactual refers to unknown variables {bad}")


def unconditional_forecast(coefs: np.ndarray, history: np.ndarray, p: int, H: int, has_constant: bool = True) -> np.ndarray:
    """Mean forecast (H, n) for horizons 1..H from the last p rows of ``history``."""
    A = lag_blocks(coefs, p, has_constant)
    c = coefs[0] if has_constant else np.zeros(coefs.shape[1])
    buf = [row for row in np.asarray(history, dtype=float)[-p:]]
    out = np.empty((H, coefs.shape[1]))
    for h in range(H):
        y = c.copy()
        for l in range(p):
            y = y + A[l] @ buf[-1 - l]
        out[h] = y
        buf.append(y)
    return out


def _stacked_loadings(theta: np.ndarray, H: int) -> np.ndarray:
    """M with vec(paths - forecast) = M vec(eps), both stacked by horizon 1..H."""
    n = theta.shape[1]
    M = np.zeros((H * n, H * n))
    for h in range(H):
        for s in range(h + 1):
            M[h * n:(h + 1) * n, s * n:(s + 1) * n] = theta[h - s]
    return M


def minimum_norm_shocks(R: np.ndarray, r: np.ndarray) -> np.ndarray:
    """eps = R'(R R')^{-1} r, the smallest shock vector with R eps = r."""
    G = R @ R.T
    try:
        L = chol(G, context="conditioning system")
    except NumericalError:
        raise ConfigError("conditions are linearly dependent or infeasible") from None
    if np.linalg.cond(G) > 1e14:
        raise ConfigError("conditions are numerically infeasible (singular conditioning system)")
    z = np.linalg.solve(L, r)
    return R.T @ np.linalg.solve(L.T, z)


def conditional_forecast(draws, cf: CounterfactualSpec, history: np.ndarray | None = None) -> ScenarioForecast:
    """Per-draw forecast paths that hit every condition exactly.

    Future structural shocks (Cholesky of each draw's Sigma) are the
    minimum-norm sequence reproducing the conditioned paths; the norm of
    reduced-form shocks in the Sigma^{-1} metric is the same for every
    factor of Sigma, so the choice of factor does not matter.
    """
    spec = draws.spec
    if cf.mode != "conditional_path":
        raise ConfigError("conditional_forecast needs a conditional_path specification")
    cf.validate(spec.variables)
    history = draws.data if history is None else np.asarray(history, dtype=float)
    if history.ndim != 2 or history.shape[1] != spec.n or history.shape[0] < spec.lags:
        raise ConfigError(f"history must be (>= {spec.lags}, {spec.n}), got {history.shape}")
    H, n = cf.horizon, spec.n
    rows_idx = [spec.index(c.variable) for c in cf.conditions]
    if len(set(rows_idx)) != len(rows_idx):
        raise ConfigError("each variable may be conditioned only once")
    if len(rows_idx) > n:
        raise ConfigError(f"{len(rows_idx)} conditioned variables exceed {n} shocks per period")
    D = draws.n_draws
    paths = np.empty((D, H, n))
    uncond = np.empty((D, H, n))
    shocks = np.empty((D, H, n))
    for d in range(D):
        f = unconditional_forecast(draws.coefs[d], history, spec.lags, H, spec.include_constant)
        A0 = chol(draws.sigma[d], context=f"Sigma of draw {d}")
        theta = ma_coefficients(draws.coefs[d], spec.lags, H - 1, spec.include_constant) @ A0
        M = _stacked_loadings(theta, H)
        sel, target = [], []
        for c, i in zip(cf.conditions, rows_idx):
            t = c.target(H, f[:, i])
            for h in range(H):
                if np.isfinite(t[h]):
                    sel.append(h * n + i)
                    target.append(t[h] - f[h, i])
        R = M[sel]
        eps = minimum_norm_shocks(R, np.asarray(target)) if sel else np.zeros(H * n)
        paths[d] = f + (M @ eps).reshape(H, n)
        uncond[d] = f
        shocks[d] = eps.reshape(H, n)
    meta = {"note": LUCAS_NOTE, "conditions": [c.variable for c in cf.conditions], **dict(cf.metadata)}
    return ScenarioForecast(paths, shocks, uncond, spec.variables, cf.name, meta)
