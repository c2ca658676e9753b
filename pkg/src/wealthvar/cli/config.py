"""Pipeline configuration: TOML file merged over built-in defaults."""

from __future__ import annotations

import copy
import hashlib
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..errors import ConfigError
from ..synth import MACRO_VARIABLES

DEFAULTS: dict[str, Any] = {
    "seed": None,
    "out": "run",
    "synth": {
        "dir": "synthetic",
        "households": {},
        "macro": {},
    },
    "data": {
        "households": "",
        "macro": "",
    },
    "inequality": {
        "window": [],
        "min_cohort_size": 800,
        "concepts": ["net_total", "net_financial", "net_housing", "augmented"],
        "measures": ["gini", "quantile_share", "ratio_20_20", "coeff_variation"],
        "quantile_band": [0.75, 1.0],
        "cv_topcode": [0.01, 0.01],
        "smoothing": 0,
    },
    "var": {
        "variables": list(MACRO_VARIABLES),
        "lags": 4,
        "include_constant": True,
        "window": [],
        "transforms": {},
        "inequality_series": "",
        "inequality_variable": "gini",
    },
    "prior": {"kind": "conjugate"},
    "gibbs": {
        "iters": 100_000,
        "burn_in": 60_000,
        "thin": 10,
        "chains": 1,
        "export_csv": True,
    },
    "identification": {
        "kind": "cholesky",
        "shock": "shadow_rate",
        "shock_size": -0.20,
    },
    "irf": {"horizon": 30},
    "fevd": {"horizon": 30},
    "counterfactual": {
        "horizon": 30,
        "channels": [["spread"], ["neer"], ["ip"]],
    },
    "scenario": {
        "horizon": 30,
        "name": "spread_plus_100bp",
        "conditions": [{"variable": "spread", "offset": 1.0}],
    },
    "tvp": {
        "variables": ["ip", "cpi", "gini", "shadow_rate", "spread"],
        "lags": 2,
        "iters": 100_000,
        "burn_in": 60_000,
        "thin": 10,
        "prior": {},
        "window": [],
        "window_periods": 24,
        "delta": 1.0,
        "spread": "spread",
        "policy": "shadow_rate",
        "inflation": "cpi",
        "output": "ip",
        "max_tries": 10_000,
    },
    "tvar": {
        "variables": ["ip", "cpi", "gini", "shadow_rate", "spread", "neer"],
        "lags": 1,
        "threshold_variable": "shadow_rate",
        "delay": 2,
        "tightness": 0.1,
        "iters": 100_000,
        "burn_in": 60_000,
        "thin": 10,
        "horizon": 30,
        "shock": "shadow_rate",
        "shock_size": -0.20,
    },
}

# Tables whose keys are free-form (passed through to a constructor that validates them).
_OPEN = {("synth", "households"), ("synth", "macro"), ("var", "transforms"), ("prior",), ("identification",),
         ("tvp", "prior")}


def _merge(base: dict, over: Mapping, path: tuple[str, ...] = ()) -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        here = path + (key,)
        if path in _OPEN or (here in _OPEN and isinstance(val, Mapping)):
            out[key] = _merge(out.get(key, {}), val, here) if isinstance(val, Mapping) and here in _OPEN else val
            continue
        if key not in base:
            raise ConfigError(f"unknown config field {'.'.join(here)}")
        if isinstance(base[key], dict):
            if not isinstance(val, Mapping):
                raise ConfigError(f"config field {'.'.join(here)} must be a table")
            out[key] = _merge(base[key], val, here)
        else:
            out[key] = val
    return out


@dataclass(frozen=True)
class PipelineConfig:
    data: dict
    source: Path | None = None

    def __getitem__(self, key):
        return self.data[key]

    @property
    def seed(self) -> int:
        return int(self.data["seed"])

    @property
    def out(self) -> Path:
        return Path(self.data["out"])

    def canonical(self) -> str:
        return json.dumps(self.data, sort_keys=True, separators=(",", ":"), default=str)

    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def households_path(self) -> Path:
        p = self.data["data"]["households"]
        return Path(p) if p else self.out / self.data["synth"]["dir"] / "households.csv"

    def macro_path(self) -> Path:
        p = self.data["data"]["macro"]
        return Path(p) if p else self.out / self.data["synth"]["dir"] / "macro.csv"


def load_config(path: str | Path | None = None, *, seed: int | None = None, out: str | Path | None = None
                ) -> PipelineConfig:
    """Defaults, overlaid by the TOML file, overlaid by command-line values."""
    user: dict = {}
    src = None
    if path is not None:
        src = Path(path)
        try:
            with open(src, "rb") as fh:
                user = tomllib.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {src}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"config {src} is not valid TOML: {exc}") from exc
    data = _merge(DEFAULTS, user)
    if seed is not None:
        data["seed"] = seed
    if out is not None:
        data["out"] = str(out)
    if data["seed"] is None:
        raise ConfigError("a seed is required: set `seed` in the config or pass --seed")
    if isinstance(data["seed"], bool) or not isinstance(data["seed"], int) or data["seed"] < 0:
        raise ConfigError(f"seed must be a non-negative integer, got {data['seed']!r}")
    return PipelineConfig(data, src)
