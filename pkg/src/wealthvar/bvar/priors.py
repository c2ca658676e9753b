"""Minnesota-style priors: natural conjugate and dummy observations."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from ..errors import ConfigError, InsufficientDataError
from .model import VarSpec, ar_residual_variances, lag_matrix


def _per_variable(value, spec: VarSpec, name: str) -> np.ndarray:
    if isinstance(value, Mapping):
        unknown = set(value) - set(spec.variables) - {"default"}
        if unknown:
            raise ConfigError(f"{name} given for unknown variables {sorted(unknown)}")
        default = float(value.get("default", 1.0))
        return np.array([float(value.get(v, default)) for v in spec.variables])
    return np.full(spec.n, float(value))


@dataclass(frozen=True)
class ConjugatePriorSpec:
    """Normal-inverse-Wishart prior with Minnesota-style moments.

    ``own_lag_mean`` is the prior mean of each variable's own first lag (a
    scalar or a per-variable mapping); every other coefficient is centred on
    zero. ``lambda2`` switches on a cross-variable tightness that the
    conjugate structure cannot express, so it moves estimation to the
    independent normal-Wishart sampler.
    """

    own_lag_mean: float | Mapping[str, float] = 1.0
    lambda1: float = 0.1
    lambda3: float = 1.0
    lambda4: float = 1e3
    lambda2: float | None = None
    alpha: float | None = None          # Wishart dof, default n + 2
    ar_variances: Mapping[str, float] | None = None

    kind = "conjugate"

    def __post_init__(self):
        if not (self.lambda1 > 0 and self.lambda4 > 0):
            raise ConfigError(f"lambda1 and lambda4 must be positive, got {self.lambda1}, {self.lambda4}")
        if self.lambda3 < 0:
            raise ConfigError(f"lambda3 must be non-negative, got {self.lambda3}")
        if self.lambda2 is not None and not self.lambda2 > 0:
            raise ConfigError(f"lambda2 must be positive when given, got {self.lambda2}")

    def to_dict(self) -> dict:
        own = dict(self.own_lag_mean) if isinstance(self.own_lag_mean, Mapping) else self.own_lag_mean
        return {"kind": self.kind, "own_lag_mean": own, "lambda1": self.lambda1, "lambda2": self.lambda2,
                "lambda3": self.lambda3, "lambda4": self.lambda4, "alpha": self.alpha,
                "ar_variances": dict(self.ar_variances) if self.ar_variances else None}

    def build(self, spec: VarSpec, data: np.ndarray) -> "NormalWishartPrior":
        n, p, k = spec.n, spec.lags, spec.k
        if self.ar_variances is not None:
            sig2 = _per_variable(self.ar_variances, spec, "ar_variances")
        else:
            sig2 = ar_residual_variances(data, p)
        if not np.all(sig2 > 0):
            raise ConfigError(f"AR residual variances must be positive, got {sig2}")
        alpha = float(n + 2 if self.alpha is None else self.alpha)
        if alpha <= n + 1:
            raise ConfigError(f"Wishart dof alpha must exceed n + 1 = {n + 1}, got {alpha}")
        off = int(spec.include_constant)
        B0 = np.zeros((k, n))
        B0[off:off + n, :] = np.diag(_per_variable(self.own_lag_mean, spec, "own_lag_mean"))
        xi = np.empty(k)
        if spec.include_constant:
            xi[0] = (self.lambda1 * self.lambda4) ** 2
        for l in range(1, p + 1):
            xi[off + (l - 1) * n: off + l * n] = (self.lambda1 / l ** self.lambda3) ** 2 / sig2
        S = (alpha - n - 1) * np.diag(sig2)
        H = None
        if self.lambda2 is not None:
            # var of coefficient on variable i's lag l in equation j
            H = np.empty((k, n))
            if spec.include_constant:
                H[0, :] = (self.lambda1 * self.lambda4) ** 2 * sig2
            for l in range(1, p + 1):
                for i in range(n):
                    for j in range(n):
                        tight = 1.0 if i == j else self.lambda2
                        H[off + (l - 1) * n + i, j] = (self.lambda1 * tight / l ** self.lambda3) ** 2 * sig2[j] / sig2[i]
        return NormalWishartPrior(B0, xi, S, alpha, sig2, H)


@dataclass(frozen=True)
class NormalWishartPrior:
    """Built prior moments in the ``Y = X B`` layout.

    b | Sigma ~ N(vec B0, Sigma kron diag(xi)) and Sigma ~ IW(S, alpha). When
    ``indep_var`` is set it holds prior variances (k, n) of an independent
    normal prior on B instead.
    """

    B0: np.ndarray
    xi: np.ndarray
    S: np.ndarray
    alpha: float
    ar_variances: np.ndarray
    indep_var: np.ndarray | None = None


@dataclass(frozen=True)
class DummyObsPriorSpec:
    """Minnesota shrinkage through artificial observations.

    ``tightness`` defaults to 0.1 * 6 / n so larger systems are shrunk harder.
    Scales and means come from AR(1) regressions on the first
    ``training_periods`` observations (all observations if None).
    """

    tightness: float | None = None
    own_lag_mean: float | Mapping[str, float] = 1.0
    training_periods: int | None = None
    sum_of_coefficients: bool = False
    soc_tightness: float | None = None   # default 10 x tightness
    constant_scale: float = 1e-4         # small = diffuse prior on the constant

    kind = "dummy"

    def __post_init__(self):
        if self.tightness is not None and not self.tightness > 0:
            raise ConfigError(f"dummy-observation tightness must be positive, got {self.tightness}")
        if not self.constant_scale > 0:
            raise ConfigError("constant_scale must be positive")

    def resolved_tightness(self, n: int) -> float:
        return 0.1 * 6.0 / n if self.tightness is None else float(self.tightness)

    def to_dict(self) -> dict:
        own = dict(self.own_lag_mean) if isinstance(self.own_lag_mean, Mapping) else self.own_lag_mean
        return {"kind": self.kind, "tightness": self.tightness, "own_lag_mean": own,
                "training_periods": self.training_periods, "sum_of_coefficients": self.sum_of_coefficients,
                "soc_tightness": self.soc_tightness, "constant_scale": self.constant_scale}

    def dummies(self, spec: VarSpec, data: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Artificial (Y_d, X_d) rows to stack on top of the sample."""
        n, p, k = spec.n, spec.lags, spec.k
        train = data if self.training_periods is None else data[: self.training_periods]
        if train.shape[0] < 4:
            raise InsufficientDataError("dummy-observation prior needs at least 4 training observations")
        sig = np.sqrt(ar_residual_variances(train, 1))
        delta = _per_variable(self.own_lag_mean, spec, "own_lag_mean")
        lam = self.resolved_tightness(n)
        off = int(spec.include_constant)
        blocks_y, blocks_x = [], []
        # coefficient shrinkage, lag l scaled by l
        for l in range(1, p + 1):
            yd = np.diag(delta * sig) / lam if l == 1 else np.zeros((n, n))
            xd = np.zeros((n, k))
            xd[:, off + (l - 1) * n: off + l * n] = np.diag(sig) * l / lam
            blocks_y.append(yd)
            blocks_x.append(xd)
        # innovation covariance
        blocks_y.append(np.diag(sig))
        blocks_x.append(np.zeros((n, k)))
        if spec.include_constant:
            xd = np.zeros((1, k))
            xd[0, 0] = self.constant_scale
            blocks_y.append(np.zeros((1, n)))
            blocks_x.append(xd)
        if self.sum_of_coefficients:
            tau = 10.0 * lam if self.soc_tightness is None else float(self.soc_tightness)
            mu = train.mean(axis=0)
            yd = np.diag(delta * mu) / tau
            xd = np.zeros((n, k))
            xd[:, off:] = np.tile(np.diag(mu), (1, p)) / tau
            blocks_y.append(yd)
            blocks_x.append(xd)
        return np.vstack(blocks_y), np.vstack(blocks_x)

    def augmented(self, spec: VarSpec, data: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        Yd, Xd = self.dummies(spec, data)
        Y, X = lag_matrix(data, spec.lags, spec.include_constant)
        return np.vstack([Yd, Y]), np.vstack([Xd, X])


def prior_from_dict(d: Mapping | None):
    """Prior spec from a config table; ``kind`` selects conjugate (default) or dummy."""
    d = dict(d or {})
    kind = d.pop("kind", "conjugate")
    try:
        if kind == "conjugate":
            return ConjugatePriorSpec(**d)
        if kind == "dummy":
            return DummyObsPriorSpec(**d)
    except TypeError as e:
        raise ConfigError(f"bad prior options: {e}") from None
    raise ConfigError(f"prior kind must be 'conjugate' or 'dummy', got {kind!r}")
