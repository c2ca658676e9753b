"""Run manifest: what went in, what came out, and how it was produced."""

from __future__ import annotations

import hashlib
import json
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
import scipy

from .. import __version__

MANIFEST = "manifest.json"


def file_hash(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def versions() -> dict:
    return {"wealthvar": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "pandas": pd.__version__, "python": platform.python_version()}


@dataclass
class RunManifest:
    """One stage's entry; :meth:`write` merges it into ``<out>/manifest.json``."""

    stage: str
    out: Path
    config_hash: str
    seed: int
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)
    started: float = field(default_factory=time.perf_counter)

    def add_input(self, path) -> None:
        p = Path(path)
        self.inputs[self._rel(p)] = file_hash(p)

    def add_output(self, path) -> Path:
        p = Path(path)
        self.outputs[self._rel(p)] = file_hash(p)
        return p

    def _rel(self, p: Path) -> str:
        try:
            return p.resolve().relative_to(self.out.resolve()).as_posix()
        except ValueError:
            return str(p)

    def entry(self) -> dict:
        return {"config_hash": self.config_hash, "seed": self.seed, "versions": versions(),
                "wall_clock_seconds": round(time.perf_counter() - self.started, 3),
                "inputs": dict(sorted(self.inputs.items())), "outputs": dict(sorted(self.outputs.items())),
                "stats": self.stats}

    def write(self) -> Path:
        path = self.out / MANIFEST
        doc = read_manifest(self.out)
        doc.setdefault("stages", {})[self.stage] = self.entry()
        outputs = {}
        for st in doc["stages"].values():
            outputs.update(st["outputs"])
        doc["outputs"] = dict(sorted(outputs.items()))
        path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_jsonable) + "\n", encoding="utf-8")
        return path


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    return str(x)


def read_manifest(out: str | Path) -> dict:
    path = Path(out) / MANIFEST
    if not path.exists():
        return {}
    return json.loads(path.read_text(encoding="utf-8"))
