import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def simulate_var(coefs, sigma, T, seed, p=1, burn=200):
    """Simulate y_t = c + sum_l A_l y_{t-l} + e_t from (k, n) coefficients in the Y = X B layout."""
    rng = np.random.default_rng(seed)
    coefs = np.asarray(coefs, dtype=float)
    n = coefs.shape[1]
    L = np.linalg.cholesky(sigma)
    A = [coefs[1 + l * n:1 + (l + 1) * n].T for l in range(p)]
    y = np.zeros((T + burn + p, n))
    for t in range(p, y.shape[0]):
        y[t] = coefs[0] + sum(A[l] @ y[t - 1 - l] for l in range(p)) + L @ rng.standard_normal(n)
    return y[-T:]


@pytest.fixture(scope="session")
def var3_data():
    """T = 400 draws from a stable three-variable VAR(1)."""
    c = np.array([0.2, -0.1, 0.05])
    A = np.array([[0.5, 0.1, 0.0], [0.0, 0.4, 0.2], [0.1, 0.0, 0.3]])
    sigma = np.array([[1.0, 0.3, 0.1], [0.3, 0.8, 0.2], [0.1, 0.2, 0.5]])
    coefs = np.vstack([c, A.T])
    return simulate_var(coefs, sigma, 400, seed=11), coefs, sigma


def make_draws(coefs, sigma, variables, p=1, const=True, data=None):
    """A PosteriorDrawSet holding the given (draws, k, n) coefficients and (draws, n, n) covariances."""
    from wealthvar.bvar import PosteriorDrawSet, VarSpec

    coefs = np.asarray(coefs, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if coefs.ndim == 2:
        coefs, sigma = coefs[None], sigma[None]
    D, k, n = coefs.shape
    spec = VarSpec(tuple(variables), lags=p, include_constant=const)
    if data is None:
        data = np.zeros((p + 1, n))
    return PosteriorDrawSet(spec, {"kind": "fixed"}, coefs.copy(), sigma.copy(), coefs.copy(),
                            np.zeros(D, dtype=int), D, 0, 1, 0, np.asarray(data, dtype=float), coefs[0].copy())


def random_stable_var(n, p, seed, radius=0.8):
    """Coefficients (k, n) with constant and a random covariance, rescaled to a given spectral radius."""
    from wealthvar.probkernel import companion, spectral_radius

    g = np.random.default_rng(seed)
    B = g.normal(scale=0.3, size=(1 + n * p, n))
    F = companion(B, p)
    rho = spectral_radius(F)
    if rho > radius:
        # scaling lag l by s**l scales companion eigenvalues by s
        s = radius / rho
        for l in range(p):
            B[1 + l * n:1 + (l + 1) * n] *= s ** (l + 1)
    M = g.normal(size=(n, n))
    return B, M @ M.T + 0.2 * np.eye(n)
