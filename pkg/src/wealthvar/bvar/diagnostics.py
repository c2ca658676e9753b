"""Split-chain R-hat and effective sample size."""

from __future__ import annotations

import numpy as np
import pandas as pd

from ..errors import InsufficientDataError

RHAT_FLAG = 1.1


def _autocov(x: np.ndarray) -> np.ndarray:
    """Autocovariance by lag along the last axis (biased, FFT)."""
    n = x.shape[-1]
    xc = x - x.mean(axis=-1, keepdims=True)
    m = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, m, axis=-1)
    return np.fft.irfft(f * np.conj(f), m, axis=-1)[..., :n] / n


def split_chains(draws: np.ndarray) -> np.ndarray:
    """(chains, n, params) -> (2 chains, n // 2, params)."""
    c, n = draws.shape[:2]
    half = n // 2
    return np.concatenate([draws[:, :half], draws[:, n - half:]], axis=0)


def rhat_ess(draws: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split R-hat and ESS per parameter for draws shaped (chains, n, params)."""
    x = split_chains(np.asarray(draws, dtype=float))
    m, n, _ = x.shape
    means = x.mean(axis=1)
    W = x.var(axis=1, ddof=1).mean(axis=0)
    B = n * means.var(axis=0, ddof=1)
    var_plus = (n - 1) / n * W + B / n
    with np.errstate(divide="ignore", invalid="ignore"):
        rhat = np.sqrt(var_plus / W)
    rhat = np.where(W > 0, rhat, 1.0)

    acov = _autocov(np.moveaxis(x, 2, 1))           # (m, params, n)
    mean_acov = acov.mean(axis=0)                  # (params, n)
    ess = np.empty(x.shape[2])
    for j in range(x.shape[2]):
        if var_plus[j] <= 0:
            ess[j] = m * n
            continue
        rho = 1.0 - (W[j] - mean_acov[j]) / var_plus[j]
        rho[0] = 1.0
        # Geyer initial positive sequence on paired sums
        total = 0.0
        t = 0
        while t + 1 < n:
            pair = rho[t] + rho[t + 1]
            if pair < 0:
                break
            total += pair
            t += 2
        tau = -1.0 + 2.0 * total
        ess[j] = m * n / max(tau, 1.0 / np.log10(m * n + 10))
    return rhat, ess


def convergence_report(draws, names=None) -> pd.DataFrame:
    """Per-parameter mean, sd, split R-hat, ESS and an R-hat > 1.1 flag.

    ``draws`` is a :class:`PosteriorDrawSet` or an array shaped
    (chains, n, params). Requires two chains or at least 1000 draws.
    """
    if hasattr(draws, "param_names"):
        flat = draws.flat()
        names = draws.param_names()
        chains = [flat[draws.chain == c] for c in np.unique(draws.chain)]
        size = min(len(c) for c in chains)
        arr = np.stack([c[:size] for c in chains])
    else:
        arr = np.asarray(draws, dtype=float)
        if arr.ndim == 2:
            arr = arr[None]
        names = names or [f"param{j}" for j in range(arr.shape[2])]
    if arr.shape[0] < 2 and arr.shape[1] < 1000:
        raise InsufficientDataError(f"convergence report needs >= 2 chains or >= 1000 draws, got "
                                    f"{arr.shape[0]} chain(s) of {arr.shape[1]}")
    rhat, ess = rhat_ess(arr)
    pooled = arr.reshape(-1, arr.shape[2])
    return pd.DataFrame({"param": names, "mean": pooled.mean(axis=0), "sd": pooled.std(axis=0, ddof=1),
                         "rhat": rhat, "ess": ess, "flag": rhat > RHAT_FLAG})
