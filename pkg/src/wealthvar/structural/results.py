"""Result containers shared by IRF, FEVD and scenario products."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

BAND = (16.0, 84.0)
CSV_COLUMNS = ["horizon", "variable", "shock", "median", "lo16", "hi84"]


def bands(x: np.ndarray, q=BAND) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pointwise median and percentile band over the leading (draw) axis."""
    lo, med, hi = np.percentile(x, [q[0], 50.0, q[1]], axis=0)
    return med, lo, hi


def _long(horizons, variables, shock, med, lo, hi) -> pd.DataFrame:
    H, n = med.shape
    return pd.DataFrame({
        "horizon": np.repeat(horizons, n),
        "variable": np.tile(list(variables), H),
        "shock": shock,
        "median": med.ravel(),
        "lo16": lo.ravel(),
        "hi84": hi.ravel(),
    })


def write_frame(df: pd.DataFrame, path) -> None:
    df.to_csv(path, index=False, float_format="%.10g", lineterminator="\n")


@dataclass(frozen=True)
class ImpulseResponseSet:
    """Per-draw responses (draws, H + 1, n) to one scaled structural shock."""

    responses: np.ndarray
    variables: tuple[str, ...]
    shock: str
    shock_size: float | None
    draw_index: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        return self.responses.shape[1] - 1

    @property
    def n_draws(self) -> int:
        return self.responses.shape[0]

    def summary(self, q=BAND):
        return bands(self.responses, q)

    @property
    def median(self) -> np.ndarray:
        return self.summary()[0]

    def of(self, variable: str) -> np.ndarray:
        return self.responses[:, :, self.variables.index(variable)]

    def to_frame(self) -> pd.DataFrame:
        med, lo, hi = self.summary()
        return _long(np.arange(self.horizon + 1), self.variables, self.shock, med, lo, hi)

    def write_csv(self, path) -> None:
        write_frame(self.to_frame(), path)


@dataclass(frozen=True)
class FevdSet:
    """Per-draw variance shares (draws, H + 1, n variables, n shocks)."""

    shares: np.ndarray
    variables: tuple[str, ...]
    shocks: tuple[str, ...]
    draw_index: np.ndarray

    @property
    def horizon(self) -> int:
        return self.shares.shape[1] - 1

    def share(self, variable: str, shock: str) -> np.ndarray:
        return self.shares[:, :, self.variables.index(variable), self.shocks.index(shock)]

    def to_frame(self) -> pd.DataFrame:
        parts = []
        for j, s in enumerate(self.shocks):
            med, lo, hi = bands(self.shares[..., j])
            parts.append(_long(np.arange(self.horizon + 1), self.variables, s, med, lo, hi))
        df = pd.concat(parts, ignore_index=True)
        return df.sort_values(["horizon", "variable", "shock"], kind="stable").reset_index(drop=True)

    def write_csv(self, path) -> None:
        write_frame(self.to_frame(), path)


@dataclass(frozen=True)
class ScenarioForecast:
    """Per-draw forecast paths (draws, H, n) for horizons 1..H."""

    paths: np.ndarray
    shocks: np.ndarray          # implied structural shocks (draws, H, n)
    unconditional: np.ndarray   # (draws, H, n)
    variables: tuple[str, ...]
    name: str
    metadata: dict = field(default_factory=dict)

    @property
    def horizon(self) -> int:
        return self.paths.shape[1]

    def to_frame(self) -> pd.DataFrame:
        med, lo, hi = bands(self.paths)
        return _long(np.arange(1, self.horizon + 1), self.variables, self.name, med, lo, hi)

    def write_csv(self, path) -> None:
        write_frame(self.to_frame(), path)
