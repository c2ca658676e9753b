"""Gibbs sampling of the fixed-coefficient BVAR posterior."""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.linalg import cho_solve, solve_triangular

from ..errors import ConfigError, NumericalError
from ..probkernel import RngStream, chol, companion, draw_inverse_wishart, spectral_radius
from .model import VarSpec, check_sample, lag_matrix, ols_xy, prepare_data
from .priors import ConjugatePriorSpec, DummyObsPriorSpec

log = logging.getLogger(__name__)

DRAWS_FILE = "draws.npz"
MANIFEST_FILE = "draws_manifest.json"


@dataclass(frozen=True)
class PosteriorDrawSet:
    """Retained posterior draws of B (k, n) and Sigma (n, n).

    ``cond_means`` holds E[B | Sigma, data] at each retained Sigma, a
    Rao-Blackwellised companion to the raw coefficient draws. ``chain`` is the
    chain index of every draw; draws are ordered by chain then iteration.
    """

    spec: VarSpec
    prior: dict
    coefs: np.ndarray
    sigma: np.ndarray
    cond_means: np.ndarray
    chain: np.ndarray
    iters: int
    burn_in: int
    thin: int
    seed: int
    data: np.ndarray
    ols_coefs: np.ndarray
    explosive: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.explosive is None:
            p, c = self.spec.lags, self.spec.include_constant
            flags = np.array([spectral_radius(companion(B, p, c)) >= 1.0 for B in self.coefs], dtype=bool)
            object.__setattr__(self, "explosive", flags)
        for name in ("coefs", "sigma", "cond_means", "chain", "data", "ols_coefs", "explosive"):
            getattr(self, name).setflags(write=False)

    @property
    def n_draws(self) -> int:
        return self.coefs.shape[0]

    @property
    def n_chains(self) -> int:
        return int(np.unique(self.chain).size)

    @property
    def explosive_share(self) -> float:
        return float(self.explosive.mean()) if self.n_draws else 0.0

    def posterior_mean(self) -> np.ndarray:
        return self.coefs.mean(axis=0)

    def param_names(self) -> list[str]:
        regs = self.spec.regressor_names()
        names = [f"B[{eq},{r}]" for eq in self.spec.variables for r in regs]
        v = self.spec.variables
        names += [f"Sigma[{v[i]},{v[j]}]" for j in range(self.spec.n) for i in range(j, self.spec.n)]
        return names

    def flat(self) -> np.ndarray:
        """(draws, params) in the order of :meth:`param_names`."""
        n = self.spec.n
        b = self.coefs.transpose(0, 2, 1).reshape(self.n_draws, -1)
        il = [(i, j) for j in range(n) for i in range(j, n)]
        s = np.stack([self.sigma[:, i, j] for i, j in il], axis=1)
        return np.hstack([b, s])

    def to_frame(self) -> pd.DataFrame:
        """Long table ``draw_index, param_name, value``."""
        names = self.param_names()
        flat = self.flat()
        return pd.DataFrame({
            "draw_index": np.repeat(np.arange(self.n_draws), len(names)),
            "param_name": np.tile(names, self.n_draws),
            "value": flat.ravel(),
        })

    def write_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.12g")

    def content_hash(self) -> str:
        """Git blob-style SHA-1 over the raw draw arrays."""
        payload = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes()
                           for a in (self.coefs, self.sigma, self.cond_means))
        return hashlib.sha1(b"blob %d\0" % len(payload) + payload).hexdigest()

    def manifest(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "prior": self.prior,
            "seed": self.seed,
            "iters": self.iters,
            "burn_in": self.burn_in,
            "thin": self.thin,
            "n_chains": self.n_chains,
            "n_draws": self.n_draws,
            "explosive_share": round(self.explosive_share, 6),
            "content_hash": self.content_hash(),
        }

    def save(self, directory) -> Path:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        np.savez_compressed(d / DRAWS_FILE, coefs=self.coefs, sigma=self.sigma, cond_means=self.cond_means,
                            chain=self.chain, data=self.data, ols_coefs=self.ols_coefs, explosive=self.explosive)
        (d / MANIFEST_FILE).write_text(json.dumps(self.manifest(), indent=2, sort_keys=True) + "\n")
        return d

    @classmethod
    def load(cls, directory) -> "PosteriorDrawSet":
        d = Path(directory)
        man = json.loads((d / MANIFEST_FILE).read_text())
        with np.load(d / DRAWS_FILE) as z:
            arrs = {k: z[k] for k in z.files}
        out = cls(VarSpec.from_dict(man["spec"]), man["prior"], arrs["coefs"], arrs["sigma"], arrs["cond_means"],
                  arrs["chain"], man["iters"], man["burn_in"], man["thin"], man["seed"], arrs["data"],
                  arrs["ols_coefs"], arrs["explosive"])
        if out.content_hash() != man["content_hash"]:
            raise ConfigError(f"draw store in {d} does not match its manifest hash")
        return out


def _draw_matrix_normal(mean, row_factor, col_factor, g) -> np.ndarray:
    """B = mean + L_row Z L_col', so Cov(vec B) = (L_col L_col') kron (L_row L_row')."""
    Z = g.standard_normal(mean.shape)
    return mean + row_factor @ Z @ col_factor.T


def _retained(iters: int, burn_in: int, thin: int) -> int:
    return (iters - burn_in) // thin


def _run_chain(spec: VarSpec, prior, data: np.ndarray, rng: RngStream, iters: int, burn_in: int, thin: int):
    g = rng.generator
    n, k = spec.n, spec.k
    nkeep = _retained(iters, burn_in, thin)
    coefs = np.empty((nkeep, k, n))
    sigmas = np.empty((nkeep, n, n))
    cmeans = np.empty((nkeep, k, n))

    if isinstance(prior, DummyObsPriorSpec):
        Y, X = prior.augmented(spec, data)
        mode = "dummy"
    else:
        Y, X = lag_matrix(data, spec.lags, spec.include_constant)
        built = prior.build(spec, data)
        mode = "indep" if built.indep_var is not None else "conjugate"
    T = Y.shape[0]
    XtX, XtY = X.T @ X, X.T @ Y
    Sigma = ols_xy(Y, X).sigma if T > k else np.cov(Y.T).reshape(n, n)

    if mode == "dummy":
        Lx = chol(XtX, context="augmented X'X")
        Bbar = cho_solve((Lx, True), XtY)
        # row factor of (X*'X*)^{-1}
        Lv = solve_triangular(Lx, np.eye(k), lower=True).T
        dof = T
    elif mode == "conjugate":
        xi_inv = 1.0 / built.xi
        Vinv = XtX + np.diag(xi_inv)
        Lp = chol(Vinv, context="posterior precision")
        Bbar = cho_solve((Lp, True), xi_inv[:, None] * built.B0 + XtY)
        Lv = solve_triangular(Lp, np.eye(k), lower=True).T
        dof = T + built.alpha + k
    else:
        b0 = built.B0.T.ravel()                    # vec, equation by equation
        h_inv = 1.0 / built.indep_var.T.ravel()
        bhat = np.linalg.lstsq(X, Y, rcond=None)[0].T.ravel()
        dof = T + built.alpha

    keep = 0
    for it in range(iters):
        if mode == "indep":
            Si = np.linalg.inv(Sigma)
            prec = np.kron(Si, XtX)
            post_prec = prec + np.diag(h_inv)
            try:
                Lp = chol(post_prec, context=f"iteration {it}")
            except NumericalError as e:
                raise NumericalError(f"posterior coefficient covariance not PD at iteration {it}: {e}") from None
            mu = cho_solve((Lp, True), h_inv * b0 + prec @ bhat)
            b = mu + solve_triangular(Lp.T, g.standard_normal(mu.size), lower=False)
            B = b.reshape(n, k).T
            cond = mu.reshape(n, k).T
            E = Y - X @ B
            scale = built.S + E.T @ E
        else:
            Ls = chol(Sigma, context=f"Sigma at iteration {it}")
            B = _draw_matrix_normal(Bbar, Lv, Ls, g)
            cond = Bbar
            E = Y - X @ B
            scale = E.T @ E
            if mode == "conjugate":
                D = B - built.B0
                scale = scale + built.S + (D * xi_inv[:, None]).T @ D
        try:
            Sigma = draw_inverse_wishart(0.5 * (scale + scale.T), dof, g)
        except NumericalError as e:
            raise NumericalError(f"Sigma draw failed at iteration {it}: {e}") from None
        if it >= burn_in and (it - burn_in + 1) % thin == 0 and keep < nkeep:
            coefs[keep], sigmas[keep], cmeans[keep] = B, Sigma, cond
            keep += 1
    return coefs, sigmas, cmeans


def gibbs_sample(spec: VarSpec, prior: ConjugatePriorSpec | DummyObsPriorSpec, data, rng: RngStream,
                 iters: int = 100_000, burn_in: int = 60_000, thin: int = 10, *, chains: int = 1,
                 threads: int = 1) -> PosteriorDrawSet:
    """Alternate b | Sigma (normal) and Sigma | b (inverse Wishart).

    Keeps iterations ``burn_in + thin - 1, burn_in + 2 thin - 1, ...`` so the
    draw count per chain is ``(iters - burn_in) // thin``. Chain ``c`` uses
    the child stream ``rng.child(c)`` whatever the thread count, so results do
    not depend on parallelism.
    """
    if isinstance(data, pd.DataFrame):
        data = prepare_data(spec, data)
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[1] != spec.n:
        raise ConfigError(f"data must be (T, {spec.n}), got {data.shape}")
    if not isinstance(prior, (ConjugatePriorSpec, DummyObsPriorSpec)):
        raise ConfigError(f"unsupported prior {type(prior).__name__}")
    if not (iters > burn_in >= 0 and thin >= 1 and chains >= 1):
        raise ConfigError(f"need iters > burn_in >= 0, thin >= 1, chains >= 1; got {iters}, {burn_in}, {thin}, {chains}")
    if _retained(iters, burn_in, thin) < 1:
        raise ConfigError("no draws would be retained; lower burn_in or thin")
    if not isinstance(prior, DummyObsPriorSpec):
        check_sample(spec, data)

    streams = rng.split(chains)
    args = [(spec, prior, data, s, iters, burn_in, thin) for s in streams]
    if threads > 1 and chains > 1:
        with ProcessPoolExecutor(max_workers=min(threads, chains)) as ex:
            results = list(ex.map(_run_chain, *zip(*args)))
    else:
        results = [_run_chain(*a) for a in args]
    coefs = np.concatenate([r[0] for r in results])
    sigma = np.concatenate([r[1] for r in results])
    cmeans = np.concatenate([r[2] for r in results])
    chain = np.repeat(np.arange(chains), results[0][0].shape[0])
    Y, X = lag_matrix(data, spec.lags, spec.include_constant)
    bols = np.linalg.lstsq(X, Y, rcond=None)[0]
    out = PosteriorDrawSet(spec, prior.to_dict(), coefs, sigma, cmeans, chain, iters, burn_in, thin,
                           int(rng.seed), data, bols)
    if out.explosive.any():
        log.info("%.1f%% of retained draws are explosive (kept and flagged)", 100 * out.explosive_share)
    return out
