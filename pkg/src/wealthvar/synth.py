"""Synthetic household balance sheets and a simulated macro panel with known truth.

Households: net total wealth follows a three-part mixture (an indebted
component, a lognormal bulk and a lognormal top tail whose population share
drifts linearly over the window). Top-tail households are oversampled and
carry proportionally smaller weights, as in wealth surveys. Items are split
so that every raw amount is non-negative and the net_total concept
reproduces the drawn net wealth.

Macro panel: a stable VAR with user-supplied or default coefficients.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from scipy import integrate
from scipy.special import ndtr

from .errors import ConfigError
from .microdata import ASSET_CATEGORIES, LIABILITY_CATEGORIES, Month, month_range
from .probkernel import RngStream, companion, spectral_radius

MACRO_VARIABLES = ("ip", "cpi", "gini", "shadow_rate", "spread", "neer")


@dataclass(frozen=True)
class HouseholdGenerator:
    """Parameters of the household wealth mixture (currency units)."""

    start: str = "2006-07"
    months: int = 120
    per_month: int = 850
    negative_share: float = 0.08
    negative_median: float = 8_000.0
    negative_sigma: float = 1.0
    bulk_median: float = 120_000.0
    bulk_sigma: float = 1.0
    top_median: float = 1_500_000.0
    top_sigma: float = 0.6
    top_share_start: float = 0.04
    top_share_end: float = 0.07
    top_oversample: float = 3.0
    base_weight: float = 1_000.0

    def __post_init__(self):
        if self.months < 1 or self.per_month < 2:
            raise ConfigError("need at least one month and two households per month")
        for name in ("negative_sigma", "bulk_sigma", "top_sigma", "negative_median", "bulk_median",
                     "top_median", "top_oversample", "base_weight"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("negative_share", "top_share_start", "top_share_end"):
            v = getattr(self, name)
            if not 0 <= v < 1:
                raise ConfigError(f"{name} must lie in [0, 1), got {v}")
        if max(self.top_share_start, self.top_share_end) + self.negative_share >= 1:
            raise ConfigError("negative and top shares leave no room for the bulk component")
        Month.parse(self.start)

    @property
    def month_list(self) -> list[Month]:
        s = Month.parse(self.start)
        return month_range(s, s + (self.months - 1))

    def top_share(self) -> np.ndarray:
        return np.linspace(self.top_share_start, self.top_share_end, self.months)

    def shares(self, t: int) -> np.ndarray:
        """Population shares of (negative, bulk, top) in month ``t``."""
        top = self.top_share()[t]
        return np.array([self.negative_share, 1 - self.negative_share - top, top])

    def _components(self):
        return ((np.log(self.negative_median), self.negative_sigma, -1.0),
                (np.log(self.bulk_median), self.bulk_sigma, 1.0),
                (np.log(self.top_median), self.top_sigma, 1.0))

    def cdf(self, x: float, t: int) -> float:
        pi = self.shares(t)
        (mn, sn, _), (mb, sb, _), (mt, st, _) = self._components()
        if x < 0:
            return pi[0] * ndtr(-(np.log(-x) - mn) / sn)
        if x == 0:
            return pi[0]
        lx = np.log(x)
        return pi[0] + pi[1] * ndtr((lx - mb) / sb) + pi[2] * ndtr((lx - mt) / st)

    def mean(self, t: int) -> float:
        pi = self.shares(t)
        return float(sum(p * s * np.exp(m + 0.5 * v * v) for p, (m, v, s) in zip(pi, self._components())))

    def analytic_gini(self, t: int) -> float:
        """Population Gini of the month-``t`` mixture: int F(1 - F) dx / mean.

        Both half-lines are integrated in log|x| so the heavy tail is covered.
        """
        comps = self._components()
        lo = min(m - 12 * s for m, s, _ in comps)
        hi = max(m + 12 * s for m, s, _ in comps)

        def g(u, sign):
            x = sign * np.exp(u)
            F = self.cdf(x, t)
            return F * (1 - F) * np.exp(u)

        pts = [m for m, _, _ in comps]
        neg, _ = integrate.quad(g, lo, hi, args=(-1.0,), points=pts, limit=400, epsabs=0, epsrel=1e-11)
        pos, _ = integrate.quad(g, lo, hi, args=(1.0,), points=pts, limit=400, epsabs=0, epsrel=1e-11)
        return (neg + pos) / self.mean(t)

    def draw_net(self, t: int, size: int, g: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Net wealth, weight and component label for ``size`` sampled households."""
        pi = self.shares(t)
        over = np.array([1.0, 1.0, self.top_oversample])
        probs = pi * over / np.dot(pi, over)
        comp = g.choice(3, size=size, p=probs)
        x = np.empty(size)
        for c, (m, s, sign) in enumerate(self._components()):
            idx = comp == c
            x[idx] = sign * np.exp(m + s * g.standard_normal(idx.sum()))
        w = self.base_weight / over[comp]
        return x, w, comp


def itemize(net: np.ndarray, g: np.random.Generator) -> tuple[dict, dict]:
    """Non-negative asset and liability items whose net_total equals ``net``."""
    N = net.size
    pos = net >= 0
    has_house = pos & (g.random(N) < 0.65)
    u = np.where(has_house, g.beta(2.0, 2.0, N), 0.0)
    net_house = u * np.where(pos, net, 0.0)
    mort = net_house * g.uniform(0.0, 1.5, N)
    house_gross = net_house + mort
    unsecured = np.where(pos, g.exponential(2_000.0, N) * (g.random(N) < 0.5), -net + g.exponential(1_500.0, N))
    fin_assets = np.where(pos, (1 - u) * net + unsecured, unsecured + net)

    assets = {c: np.zeros(N) for c in ASSET_CATEGORIES}
    debts = {c: np.zeros(N) for c in LIABILITY_CATEGORIES}
    split = g.dirichlet(np.ones(4), N)
    for j, c in enumerate(("deposits", "savings_accounts", "isas", "shares")):
        assets[c] = fin_assets * split[:, j]
    split = g.dirichlet(np.ones(3), N)
    for j, c in enumerate(("credit_cards", "arrears", "loans")):
        debts[c] = unsecured * split[:, j]
    assets["housing"] = 0.85 * house_gross
    assets["other_property"] = 0.15 * house_gross
    debts["mortgage"] = 0.9 * mort
    debts["property_loans"] = 0.1 * mort
    for c, med in (("informal_assets", 500.0), ("durables", 15_000.0), ("valuables", 3_000.0), ("pension", 60_000.0)):
        assets[c] = med * np.exp(g.standard_normal(N))
    debts["informal_debt"] = 200.0 * np.exp(g.standard_normal(N)) * (g.random(N) < 0.2)
    return assets, debts


def generate_households(gen: HouseholdGenerator, rng: RngStream) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Household rows in the default CSV schema, and the per-month truth table."""
    frames, truth = [], []
    for t, m in enumerate(gen.month_list):
        g = rng.child(t).generator
        x, w, comp = gen.draw_net(t, gen.per_month, g)
        assets, debts = itemize(x, g)
        df = pd.DataFrame({
            "household_id": [f"{m.year:04d}{m.month:02d}-{i:05d}" for i in range(gen.per_month)],
            "interview_year": m.year,
            "interview_month": m.month,
            "weight": w,
            **assets,
            **debts,
        })
        frames.append(df)
        pi = gen.shares(t)
        truth.append((str(m), gen.analytic_gini(t), gen.mean(t), pi[2]))
    truth_df = pd.DataFrame(truth, columns=["month", "gini_analytic", "mean_net_total", "top_share"])
    return pd.concat(frames, ignore_index=True), truth_df


# --------------------------------------------------------------------------- macro panel

def default_macro_truth(lags: int = 2) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients (1 + n*lags, n) and innovation covariance of the reference VAR.

    neer is decoupled: it depends only on its own lags and its innovation is
    uncorrelated with the others.
    """
    n = len(MACRO_VARIABLES)
    ip, cpi, gi, r, sp, ne = range(n)
    A1 = np.diag([0.85, 0.95, 0.80, 0.95, 0.75, 0.90])
    A1[ip, r], A1[ip, sp] = -0.08, -0.10
    A1[cpi, ip], A1[cpi, r] = 0.03, -0.02
    A1[gi, r], A1[gi, ip] = -0.06, -0.02
    A1[r, ip], A1[r, cpi] = 0.04, 0.06
    A1[sp, r] = 0.10
    A2 = np.zeros((n, n))
    A2[ip, ip], A2[r, r], A2[gi, gi] = 0.05, -0.05, 0.05
    blocks = [A1, A2] + [np.zeros((n, n))] * max(lags - 2, 0)
    c = np.array([0.2, 0.05, 0.1, 0.0, 0.1, 0.0])
    coefs = np.vstack([c] + [b.T for b in blocks[:lags]])
    sd = np.array([0.8, 0.2, 0.3, 0.15, 0.10, 1.5])
    corr = np.eye(n)
    for (i, j), v in {(ip, cpi): 0.2, (ip, r): 0.3, (cpi, r): 0.2, (r, sp): -0.3, (gi, r): -0.2}.items():
        corr[i, j] = corr[j, i] = v
    return coefs, corr * np.outer(sd, sd)


@dataclass(frozen=True)
class MacroGenerator:
    start: str = "2000-01"
    periods: int = 240
    lags: int = 2
    burn: int = 200
    variables: tuple[str, ...] = MACRO_VARIABLES
    coefs: np.ndarray | None = field(default=None, compare=False)
    sigma: np.ndarray | None = field(default=None, compare=False)

    def truth(self) -> tuple[np.ndarray, np.ndarray]:
        if self.coefs is None and self.sigma is None:
            if tuple(self.variables) != MACRO_VARIABLES:
                raise ConfigError("custom variable names need explicit coefs and sigma")
            return default_macro_truth(self.lags)
        if self.coefs is None or self.sigma is None:
            raise ConfigError("give both coefs and sigma for the true VAR, or neither")
        n = len(self.variables)
        B = np.asarray(self.coefs, dtype=float)
        S = np.asarray(self.sigma, dtype=float)
        if B.shape != (1 + n * self.lags, n) or S.shape != (n, n):
            raise ConfigError(f"true VAR needs coefs ({1 + n * self.lags}, {n}) and sigma ({n}, {n}), "
                              f"got {B.shape} and {S.shape}")
        if not np.allclose(S, S.T) or np.linalg.eigvalsh(S).min() <= 0:
            raise ConfigError("true sigma must be symmetric positive definite")
        return B, S


def simulate_var(coefs: np.ndarray, sigma: np.ndarray, lags: int, periods: int, burn: int,
                 g: np.random.Generator) -> np.ndarray:
    n = sigma.shape[0]
    if spectral_radius(companion(coefs, lags)) >= 1:
        raise ConfigError("the true VAR is not stable")
    L = np.linalg.cholesky(sigma)
    y = np.zeros((periods + burn + lags, n))
    A = [coefs[1 + l * n:1 + (l + 1) * n].T for l in range(lags)]
    for t in range(lags, y.shape[0]):
        y[t] = coefs[0] + sum(A[l] @ y[t - 1 - l] for l in range(lags)) + L @ g.standard_normal(n)
    return y[-periods:]


def generate_macro(gen: MacroGenerator, rng: RngStream) -> tuple[pd.DataFrame, dict]:
    B, S = gen.truth()
    y = simulate_var(B, S, gen.lags, gen.periods, gen.burn, rng.generator)
    s = Month.parse(gen.start)
    months = month_range(s, s + (gen.periods - 1))
    df = pd.DataFrame(y, columns=list(gen.variables))
    df.insert(0, "month", [str(m) for m in months])
    truth = {"variables": list(gen.variables), "lags": gen.lags, "include_constant": True,
             "coefs": B.tolist(), "sigma": S.tolist(), "start": gen.start, "periods": gen.periods}
    return df, truth


def write_synthetic(out: str | Path, households: HouseholdGenerator, macro: MacroGenerator, seed: int) -> dict:
    """Write households.csv, macro.csv and their truth sidecars; returns the paths."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    rng = RngStream(seed)
    hh, hh_truth = generate_households(households, rng.child(0))
    panel, macro_truth = generate_macro(macro, rng.child(1))
    paths = {
        "households": out / "households.csv",
        "households_truth": out / "households_truth.csv",
        "households_params": out / "households_params.json",
        "macro": out / "macro.csv",
        "macro_truth": out / "macro_truth.json",
    }
    hh.to_csv(paths["households"], index=False, float_format="%.2f", lineterminator="\n")
    hh_truth.to_csv(paths["households_truth"], index=False, float_format="%.12g", lineterminator="\n")
    panel.to_csv(paths["macro"], index=False, float_format="%.10g", lineterminator="\n")
    with open(paths["households_params"], "w", encoding="utf-8") as fh:
        json.dump({**asdict(households), "seed": seed}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(paths["macro_truth"], "w", encoding="utf-8") as fh:
        json.dump({**macro_truth, "seed": seed}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return paths


def read_truth_gini(path: str | Path) -> pd.DataFrame:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return pd.DataFrame({"month": [r["month"] for r in rows],
                         "gini_analytic": [float(r["gini_analytic"]) for r in rows]})
