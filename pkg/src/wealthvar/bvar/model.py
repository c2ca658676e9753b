"""VAR specification, data preparation and OLS."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import pandas as pd

from ..errors import ConfigError, DataError, InsufficientDataError, NumericalError
from ..microdata import Month

TRANSFORMS = ("level", "log100")


@dataclass(frozen=True)
class VarSpec:
    """Variables (in model order), lag order and deterministic terms.

    ``transforms`` maps a variable to ``"log100"`` (100 x natural log, so
    responses read in percent) or ``"level"`` (rates in percentage points).
    Unlisted variables are used as they are.
    """

    variables: tuple[str, ...]
    lags: int = 4
    include_constant: bool = True
    window: tuple[Month, Month] | None = None
    transforms: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "transforms", dict(self.transforms))
        if self.lags < 1:
            raise ConfigError(f"lag order must be >= 1, got {self.lags}")
        if len(set(self.variables)) != len(self.variables) or not self.variables:
            raise ConfigError(f"variables must be a non-empty list of distinct names: {self.variables}")
        for v, tr in self.transforms.items():
            if v not in self.variables:
                raise ConfigError(f"transform given for unknown variable {v!r}")
            if tr not in TRANSFORMS:
                raise ConfigError(f"transform for {v!r} must be one of {TRANSFORMS}, got {tr!r}")

    @property
    def n(self) -> int:
        return len(self.variables)

    @property
    def k(self) -> int:
        """Regressors per equation."""
        return int(self.include_constant) + self.n * self.lags

    def index(self, name: str) -> int:
        try:
            return self.variables.index(name)
        except ValueError:
            raise ConfigError(f"variable {name!r} is not in the VAR {self.variables}") from None

    def regressor_names(self) -> list[str]:
        names = ["const"] if self.include_constant else []
        for l in range(1, self.lags + 1):
            names += [f"{v}.l{l}" for v in self.variables]
        return names

    def to_dict(self) -> dict:
        return {
            "variables": list(self.variables),
            "lags": self.lags,
            "include_constant": self.include_constant,
            "window": [str(self.window[0]), str(self.window[1])] if self.window else None,
            "transforms": dict(self.transforms),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "VarSpec":
        w = d.get("window")
        return cls(tuple(d["variables"]), int(d.get("lags", 4)), bool(d.get("include_constant", True)),
                   (Month.parse(w[0]), Month.parse(w[1])) if w else None, dict(d.get("transforms", {})))

    def with_variables(self, variables) -> "VarSpec":
        tr = {v: t for v, t in self.transforms.items() if v in variables}
        return VarSpec(tuple(variables), self.lags, self.include_constant, self.window, tr)


def prepare_data(spec: VarSpec, panel: pd.DataFrame) -> np.ndarray:
    """Select, window and transform the spec's variables from a month-indexed panel."""
    missing = [v for v in spec.variables if v not in panel.columns]
    if missing:
        raise DataError(f"panel lacks VAR variables {missing}; has {list(panel.columns)}")
    df = panel[list(spec.variables)]
    if spec.window is not None:
        idx = [Month.parse(m) if not isinstance(m, Month) else m for m in df.index]
        keep = [spec.window[0] <= m <= spec.window[1] for m in idx]
        df = df.loc[keep]
    data = df.to_numpy(dtype=float).copy()
    for j, v in enumerate(spec.variables):
        if spec.transforms.get(v) == "log100":
            if np.any(data[:, j] <= 0):
                raise DataError(f"log transform of non-positive values in {v!r}")
            data[:, j] = 100.0 * np.log(data[:, j])
    if not np.all(np.isfinite(data)):
        bad = [spec.variables[j] for j in range(spec.n) if not np.all(np.isfinite(data[:, j]))]
        raise DataError(f"missing or non-finite values inside the sample window for {bad}")
    return data


def lag_matrix(data: np.ndarray, p: int, include_constant: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """(Y, X) with X rows ``[1, y_{t-1}', ..., y_{t-p}']`` for t = p..T-1."""
    data = np.asarray(data, dtype=float)
    T = data.shape[0]
    Y = data[p:]
    cols = [np.ones((T - p, 1))] if include_constant else []
    cols += [data[p - l: T - l] for l in range(1, p + 1)]
    return Y, np.hstack(cols)


def check_sample(spec: VarSpec, data: np.ndarray) -> None:
    T = np.asarray(data).shape[0]
    if T - spec.lags < spec.k:
        raise InsufficientDataError(
            f"{T} observations leave {T - spec.lags} usable rows for {spec.k} regressors per equation; "
            "shorten the lag order or lengthen the sample")


@dataclass(frozen=True)
class OlsResult:
    coefs: np.ndarray     # (k, n)
    sigma: np.ndarray     # residual covariance, divisor T - k
    resid: np.ndarray
    X: np.ndarray
    Y: np.ndarray

    @property
    def nobs(self) -> int:
        return self.Y.shape[0]

    def coef_cov(self) -> np.ndarray:
        """Covariance of vec(B): Sigma kron (X'X)^{-1}."""
        return np.kron(self.sigma, np.linalg.inv(self.X.T @ self.X))

    def loglik(self) -> float:
        """Gaussian log-likelihood at the OLS coefficients and ML covariance."""
        T, n = self.Y.shape
        S = self.resid.T @ self.resid / T
        _, logdet = np.linalg.slogdet(S)
        return float(-0.5 * T * (n * np.log(2 * np.pi) + logdet + n))


def ols_xy(Y: np.ndarray, X: np.ndarray) -> OlsResult:
    T, k = X.shape
    if T <= k:
        raise InsufficientDataError(f"{T} rows for {k} regressors")
    if np.linalg.matrix_rank(X) < k:
        raise NumericalError("X'X is singular (collinear regressors); change the lag order or sample")
    B, *_ = np.linalg.lstsq(X, Y, rcond=None)
    E = Y - X @ B
    return OlsResult(B, E.T @ E / (T - k), E, X, Y)


def ols(spec: VarSpec, data) -> OlsResult:
    """Equation-by-equation least squares, b_hat = vec((X'X)^{-1} X'Y)."""
    if isinstance(data, pd.DataFrame):
        data = prepare_data(spec, data)
    check_sample(spec, data)
    Y, X = lag_matrix(data, spec.lags, spec.include_constant)
    return ols_xy(Y, X)


def ar_residual_variances(data: np.ndarray, p: int) -> np.ndarray:
    """Residual variance of a univariate AR(p) with constant, per column."""
    data = np.asarray(data, dtype=float)
    out = np.empty(data.shape[1])
    for j in range(data.shape[1]):
        Y, X = lag_matrix(data[:, [j]], p, True)
        r = ols_xy(Y, X)
        out[j] = r.sigma[0, 0]
    return out


def information_criteria(spec: VarSpec, data: np.ndarray, max_lags: int = 8) -> pd.DataFrame:
    """AIC, BIC and HQ by lag order on a common estimation sample."""
    data = np.asarray(data, dtype=float)
    rows = []
    n = data.shape[1]
    for p in range(1, max_lags + 1):
        Y, X = lag_matrix(data[max_lags - p:], p, spec.include_constant)
        r = ols_xy(Y, X)
        T = Y.shape[0]
        _, logdet = np.linalg.slogdet(r.resid.T @ r.resid / T)
        npar = n * X.shape[1]
        rows.append({"lags": p, "aic": logdet + 2 * npar / T, "bic": logdet + np.log(T) * npar / T,
                     "hq": logdet + 2 * np.log(np.log(T)) * npar / T})
    return pd.DataFrame(rows)
