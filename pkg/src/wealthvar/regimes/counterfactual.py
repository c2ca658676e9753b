"""Structural spread counterfactual on a drifting-coefficient VAR."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from ..errors import ConfigError, IdentificationError
from ..probkernel import RngStream
from ..structural.identification import IdentificationScheme, Restriction, SignRestrictionSpec, _sign_candidates
from ..structural.results import BAND, write_frame
from .tvp import TvpDraws

log = logging.getLogger(__name__)


def spread_scheme(variables, spread="spread", policy="shadow_rate", inflation="cpi", output="ip",
                  max_tries: int = 10_000) -> IdentificationScheme:
    """Spread shock (spread up, policy rate unchanged, prices and output down) and,
    when there is room, a conventional policy shock (rate up, spread, prices and output down).

    Restrictions on variables absent from the model are dropped.
    """
    def keep(rs):
        return tuple(r for r in rs if r.variable in variables)

    if spread not in variables:
        raise ConfigError(f"spread variable {spread!r} is not in the model")
    shocks = {"spread_shock": SignRestrictionSpec(keep((
        Restriction(spread, "+"), Restriction(policy, "0"), Restriction(inflation, "-"), Restriction(output, "-"))))}
    mp = keep((Restriction(policy, "+"), Restriction(spread, "-"), Restriction(inflation, "-"), Restriction(output, "-")))
    if policy in variables and len(mp) >= 2:
        shocks["policy_shock"] = SignRestrictionSpec(mp)
    return IdentificationScheme("sign", "spread_shock", sign_restrictions=shocks, normalize_on=spread,
                                shock_size=None, max_tries=max_tries)


@dataclass(frozen=True)
class TvpCounterfactual:
    """Actual vs counterfactual paths over the window for every variable."""

    actual: np.ndarray          # (W, n)
    paths: np.ndarray           # (D', W, n)
    scale: np.ndarray           # (D', W) structural shock sizes
    periods: np.ndarray         # estimation-period indices of the window
    variables: tuple[str, ...]
    delta: float
    draw_index: np.ndarray
    skipped_draws: int
    flagged_periods: dict = field(default_factory=dict)
    months: tuple | None = None

    def to_frame(self) -> pd.DataFrame:
        lo, med, hi = np.percentile(self.paths, [BAND[0], 50.0, BAND[1]], axis=0)
        W, n = self.actual.shape
        labels = self.months if self.months is not None else tuple(int(p) for p in self.periods)
        return pd.DataFrame({
            "month": np.repeat([str(m) for m in labels], n),
            "variable": np.tile(list(self.variables), W),
            "actual": self.actual.ravel(),
            "cf_median": med.ravel(),
            "cf_lo": lo.ravel(),
            "cf_hi": hi.ravel(),
        })

    def write_csv(self, path) -> None:
        write_frame(self.to_frame(), path)


def tvp_spread_counterfactual(draws: TvpDraws, scheme: IdentificationScheme, window: tuple[int, int],
                              delta: float = 1.0, rng: RngStream | None = None, months=None) -> TvpCounterfactual:
    """Raise the spread by ``delta`` above its actual value in every window period.

    Per draw and period t the spread shock is identified on Omega_t, then
    scaled so that, given the counterfactual history already built, the
    counterfactual spread equals actual + delta:
        y_cf_t = y_t + B_t'(x_cf_t - x_t) + a_t s_t,
        s_t = (delta - [B_t'(x_cf_t - x_t)]_spread) / a_t[spread].
    ``window`` holds inclusive estimation-period indices. ``months`` (one
    label per estimation period) only labels the output.
    """
    spec = draws.spec
    if rng is None:
        raise ConfigError("the TVP counterfactual needs a random stream for sign identification")
    scheme.validate(spec.variables)
    start, end = window
    if not 0 <= start <= end < draws.n_periods:
        raise ConfigError(f"window {window} outside estimation periods 0..{draws.n_periods - 1}")
    sp = spec.index(scheme.normalizing_variable())
    col = list(scheme.sign_restrictions).index(scheme.shock)
    p, const = spec.lags, spec.include_constant
    data = draws.data
    r0 = draws.first_period
    periods = np.arange(start, end + 1)
    actual = data[r0 + periods]
    paths, scales, kept = [], [], []
    flagged: dict[int, int] = {}
    for d in range(draws.n_draws):
        Bt = draws.coef_matrices(d)
        Om = draws.omega(d)
        ycf = data.copy()
        path = np.empty((len(periods), spec.n))
        s_row = np.empty(len(periods))
        ok = True
        child = rng.child(d)
        for w, t in enumerate(periods):
            found, _ = _sign_candidates(scheme, spec.variables, Bt[t], Om[t], p, const, child.child(int(t)), 1)
            if not found:
                flagged[int(t)] = flagged.get(int(t), 0) + 1
                ok = False
                break
            a = found[0][:, col]
            r = r0 + t
            x_act = np.concatenate([[1.0] if const else [], data[r - p:r][::-1].ravel()])
            x_cf = np.concatenate([[1.0] if const else [], ycf[r - p:r][::-1].ravel()])
            dmean = (x_cf - x_act) @ Bt[t]
            s = (delta - dmean[sp]) / a[sp]
            ycf[r] = data[r] + dmean + a * s
            path[w] = ycf[r]
            s_row[w] = s
        if ok:
            paths.append(path)
            scales.append(s_row)
            kept.append(d)
    skipped = draws.n_draws - len(kept)
    if not kept:
        raise IdentificationError("no posterior draw had an accepted spread-shock rotation in every window period",
                                  tries=scheme.max_tries)
    if skipped:
        log.warning("TVP counterfactual: %d of %d draws skipped; periods without an accepted rotation: %s",
                    skipped, draws.n_draws, flagged)
    labels = tuple(months[t] for t in periods) if months is not None else None
    return TvpCounterfactual(actual, np.stack(paths), np.stack(scales), periods, spec.variables, float(delta),
                             np.array(kept), skipped, flagged, labels)
