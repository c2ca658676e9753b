"""Impulse responses, variance decompositions and channel-shutdown counterfactuals."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import ConfigError, NumericalError
from ..probkernel import RngStream, ma_coefficients
from .identification import Identification, IdentificationScheme, identify
from .results import FevdSet, ImpulseResponseSet


def _identified(draws, scheme, rng, identification) -> Identification:
    if identification is not None:
        return identification
    return identify(draws, scheme, rng)


def structural_ma(coefs: np.ndarray, impact: np.ndarray, p: int, horizon: int, has_constant: bool = True) -> np.ndarray:
    """Theta_h = Psi_h A0 for h = 0..H, shape (H + 1, n, n)."""
    return ma_coefficients(coefs, p, horizon, has_constant) @ impact


def shock_scale(column: np.ndarray, index: int, shock_size: float | None) -> float:
    if shock_size is None:
        return 1.0
    x = column[index]
    if abs(x) < 1e-14 * max(np.max(np.abs(column)), 1e-300):
        raise ConfigError("the normalising variable does not move on impact; choose another normalize_on")
    return shock_size / x


def irf(draws, scheme: IdentificationScheme, H: int = 30, shock_size: float | None = ...,
        rng: RngStream | None = None, identification: Identification | None = None) -> ImpulseResponseSet:
    """Responses over horizons 0..H to the scheme's shock.

    The structural impact column is scaled so the normalising variable moves
    by ``shock_size`` on impact (the scheme's value unless given here).
    """
    if H < 0:
        raise ConfigError(f"horizon must be non-negative, got {H}")
    ident = _identified(draws, scheme, rng, identification)
    size = scheme.shock_size if shock_size is ... else shock_size
    spec = draws.spec
    col = ident.column()
    v = spec.index(scheme.normalizing_variable())
    out = np.empty((len(ident.draw_index), H + 1, spec.n))
    for i, d in enumerate(ident.draw_index):
        a = ident.impact[i][:, col]
        psi = ma_coefficients(draws.coefs[d], spec.lags, H, spec.include_constant)
        out[i] = psi @ (a * shock_scale(a, v, size))
    meta = {"identification": scheme.to_dict(), "normalize_on": scheme.normalizing_variable(),
            "skipped_draws": ident.n_skipped, "transforms": dict(spec.transforms)}
    return ImpulseResponseSet(out, spec.variables, ident.shocks[col], size, ident.draw_index.copy(), meta)


def level_readout(responses: ImpulseResponseSet, variable: str, level: float) -> np.ndarray:
    """Responses of a 100 x log variable converted to original units at ``level``.

    A response of x on the 100 x log scale is a change of x percent, i.e.
    about ``level * x / 100`` in original units.
    """
    if responses.metadata.get("transforms", {}).get(variable) != "log100":
        return responses.of(variable).copy()
    return responses.of(variable) * level / 100.0


def fevd(draws, scheme: IdentificationScheme, H: int = 30, rng: RngStream | None = None,
         identification: Identification | None = None) -> FevdSet:
    """Shares of the h-step forecast-error variance due to each orthogonal shock."""
    ident = _identified(draws, scheme, rng, identification)
    spec = draws.spec
    out = np.empty((len(ident.draw_index), H + 1, spec.n, spec.n))
    for i, d in enumerate(ident.draw_index):
        theta = structural_ma(draws.coefs[d], ident.impact[i], spec.lags, H, spec.include_constant)
        contrib = np.cumsum(theta ** 2, axis=0)
        out[i] = contrib / contrib.sum(axis=2, keepdims=True)
    return FevdSet(out, spec.variables, ident.shocks, ident.draw_index.copy())


@dataclass(frozen=True)
class ChannelCounterfactual:
    unrestricted: ImpulseResponseSet
    counterfactual: ImpulseResponseSet
    offsets: np.ndarray           # (draws, H + 1, channels) offsetting structural shocks
    channels: tuple[str, ...]


def offset_shocks(theta: np.ndarray, policy_col: int, channel_rows: Sequence[int], channel_cols: Sequence[int],
                  delta: float) -> np.ndarray:
    """Channel shocks e_h that hold the channel variables at zero for h = 0..H.

    Solves Theta_0[C, C] e_h = -(Theta_h[C, p] delta + sum_{s<h} Theta_{h-s}[C, C] e_s).
    """
    H = theta.shape[0] - 1
    rows, cols = list(channel_rows), list(channel_cols)
    M = theta[0][np.ix_(rows, cols)]
    cond = np.linalg.cond(M)
    e = np.zeros((H + 1, len(cols)))
    for h in range(H + 1):
        if not np.isfinite(cond) or cond > 1e12:
            raise NumericalError(f"offset-shock system is singular at horizon {h} (condition {cond:.3g})")
        rhs = theta[h][rows, policy_col] * delta
        for s in range(h):
            rhs = rhs + theta[h - s][np.ix_(rows, cols)] @ e[s]
        e[h] = np.linalg.solve(M, -rhs)
    return e


def apply_offsets(theta: np.ndarray, policy_col: int, channel_cols: Sequence[int], delta: float,
                  e: np.ndarray) -> np.ndarray:
    """Responses (H + 1, n) to the policy shock plus the offset sequence."""
    H = theta.shape[0] - 1
    cols = list(channel_cols)
    out = theta[:, :, policy_col] * delta
    for h in range(H + 1):
        for s in range(h + 1):
            out[h] = out[h] + theta[h - s][:, cols] @ e[s]
    return out


def channel_counterfactual(draws, scheme: IdentificationScheme, channel_variables: Sequence[str], H: int = 30,
                           rng: RngStream | None = None, identification: Identification | None = None
                           ) -> ChannelCounterfactual:
    """Policy-shock responses with the channel variables' own shocks offsetting them each period.

    Each channel variable's offset is its own structural shock, so the scheme
    must label a shock after every channel variable (always true for
    Cholesky).
    """
    spec = draws.spec
    channels = tuple(channel_variables)
    if not channels:
        raise ConfigError("at least one channel variable is required")
    for c in channels:
        spec.index(c)
    ident = _identified(draws, scheme, rng, identification)
    missing = [c for c in channels if c not in ident.shocks]
    if missing:
        raise ConfigError(f"no structural shock is labelled after channel variables {missing}; "
                          f"shocks are {ident.shocks}")
    pcol = ident.column()
    if ident.shocks[pcol] in channels:
        raise ConfigError("the policy shock cannot also be a channel shock")
    rows = [spec.index(c) for c in channels]
    cols = [ident.shocks.index(c) for c in channels]
    v = spec.index(scheme.normalizing_variable())
    D = len(ident.draw_index)
    base = np.empty((D, H + 1, spec.n))
    cf = np.empty_like(base)
    offs = np.empty((D, H + 1, len(channels)))
    for i, d in enumerate(ident.draw_index):
        theta = structural_ma(draws.coefs[d], ident.impact[i], spec.lags, H, spec.include_constant)
        delta = shock_scale(theta[0][:, pcol], v, scheme.shock_size)
        try:
            e = offset_shocks(theta, pcol, rows, cols, delta)
        except NumericalError as err:
            raise NumericalError(f"posterior draw {d}: {err}") from None
        base[i] = theta[:, :, pcol] * delta
        cf[i] = apply_offsets(theta, pcol, cols, delta, e)
        offs[i] = e
    meta = {"identification": scheme.to_dict(), "channels": list(channels)}
    shock = ident.shocks[pcol]
    idx = ident.draw_index.copy()
    return ChannelCounterfactual(
        ImpulseResponseSet(base, spec.variables, shock, scheme.shock_size, idx, meta),
        ImpulseResponseSet(cf, spec.variables, f"{shock}|no_{'_'.join(channels)}", scheme.shock_size, idx, meta),
        offs, channels)
