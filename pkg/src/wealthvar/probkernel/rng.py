"""Seeded random streams and the three distributions the samplers need."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from ..errors import ConfigError
from .linalg import chol, sample_factor


@dataclass
class RngStream:
    """A PCG64 generator keyed by ``(seed, stream_id)``.

    Two streams with the same key produce identical draws. Streams are
    single-owner; use :meth:`split` to hand independent children to parallel
    chains.
    """

    seed: int
    stream_id: int | tuple[int, ...] = 0
    _gen: np.random.Generator | None = field(default=None, init=False, repr=False, compare=False)

    @property
    def key(self) -> tuple[int, ...]:
        sid = self.stream_id
        return tuple(sid) if isinstance(sid, tuple) else (int(sid),)

    @property
    def generator(self) -> np.random.Generator:
        if self._gen is None:
            ss = np.random.SeedSequence(int(self.seed) & (2**64 - 1), spawn_key=self.key)
            self._gen = np.random.Generator(np.random.PCG64(ss))
        return self._gen

    def child(self, i: int) -> "RngStream":
        return RngStream(self.seed, self.key + (int(i),))

    def split(self, n: int) -> list["RngStream"]:
        return [self.child(i) for i in range(n)]


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")


def draw_mvn(mean, covariance, rng, size: int | None = None) -> np.ndarray:
    """Multivariate normal draw(s); a positive semi-definite covariance is allowed."""
    g = as_generator(rng)
    mean = np.asarray(mean, dtype=float)
    cov = np.atleast_2d(np.asarray(covariance, dtype=float))
    if cov.shape != (mean.size, mean.size):
        raise ConfigError(f"covariance shape {cov.shape} does not match mean length {mean.size}")
    L = sample_factor(cov)
    if size is None:
        return mean + L @ g.standard_normal(mean.size)
    return mean + g.standard_normal((size, mean.size)) @ L.T


def draw_inverse_wishart(scale, dof: float, rng) -> np.ndarray:
    """Inverse-Wishart draw with mean ``scale / (dof - p - 1)``.

    Bartlett construction: with scale = C C' and A the Bartlett factor of a
    standard Wishart(I, dof), the draw is (C A^{-T})(C A^{-T})'.
    """
    g = as_generator(rng)
    S = np.atleast_2d(np.asarray(scale, dtype=float))
    p = S.shape[0]
    if S.shape != (p, p):
        raise ConfigError(f"inverse-Wishart scale must be square, got {S.shape}")
    if not dof > p - 1:
        raise ConfigError(f"inverse-Wishart needs dof > p - 1 = {p - 1}, got {dof}")
    C = chol(S)
    A = np.zeros((p, p))
    A[np.diag_indices(p)] = np.sqrt(g.chisquare(dof - np.arange(p)))
    il = np.tril_indices(p, -1)
    A[il] = g.standard_normal(len(il[0]))
    M = solve_triangular(A, C.T, lower=True).T  # C A^{-T}
    out = M @ M.T
    return 0.5 * (out + out.T)


def draw_inverse_gamma(shape: float, scale: float, rng, size: int | None = None):
    """Inverse-gamma draw with density proportional to x^{-shape-1} exp(-scale / x)."""
    shape_a, scale_a = np.asarray(shape, dtype=float), np.asarray(scale, dtype=float)
    if not (np.all(shape_a > 0) and np.all(scale_a > 0)):
        raise ConfigError(f"inverse-gamma needs positive shape and scale, got {shape}, {scale}")
    g = as_generator(rng)
    out = scale_a / g.gamma(shape_a, 1.0, size=size)
    return float(out) if np.ndim(out) == 0 else out
