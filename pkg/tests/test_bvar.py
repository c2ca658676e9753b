import numpy as np
import pandas as pd
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import simulate_var
from wealthvar.bvar import (ConjugatePriorSpec, DummyObsPriorSpec, PosteriorDrawSet, VarSpec, convergence_report,
                            gibbs_sample, information_criteria, lag_matrix, ols, prior_from_dict)
from wealthvar.errors import ConfigError, InsufficientDataError, NumericalError
from wealthvar.probkernel import RngStream


def conjugate_oracle(spec, prior, data):
    """Closed-form normal-inverse-Wishart posterior: mean of B and marginal covariance of vec B."""
    built = prior.build(spec, data)
    Y, X = lag_matrix(data, spec.lags, spec.include_constant)
    xi_inv = np.diag(1.0 / built.xi)
    Vbar = np.linalg.inv(X.T @ X + xi_inv)
    Bbar = Vbar @ (xi_inv @ built.B0 + X.T @ Y)
    Sbar = built.S + Y.T @ Y + built.B0.T @ xi_inv @ built.B0 - Bbar.T @ np.linalg.inv(Vbar) @ Bbar
    nu = Y.shape[0] + built.alpha
    n = spec.n
    return Bbar, np.kron(Sbar / (nu - n - 1), Vbar)


# ------------------------------------------------------------------ OLS

def test_ols_exact_fit():
    y = 3.0 * 0.5 ** np.arange(40)
    res = ols(VarSpec(("y",), lags=1, include_constant=False), y[:, None])
    assert abs(res.coefs[0, 0] - 0.5) < 1e-10


def test_ols_recovers_truth_large_sample():
    c = np.array([0.1, -0.2])
    A = np.array([[0.5, 0.2], [-0.1, 0.3]])
    coefs = np.vstack([c, A.T])
    sigma = np.array([[1.0, 0.3], [0.3, 0.5]])
    data = simulate_var(coefs, sigma, 5000, seed=3)
    res = ols(VarSpec(("a", "b"), lags=1), data)
    se = np.sqrt(np.diag(res.coef_cov())).reshape(2, 3).T
    assert np.all(np.abs(res.coefs - coefs) <= 3 * se)


def test_ols_rank_condition():
    with pytest.raises(InsufficientDataError):
        ols(VarSpec(("a", "b"), lags=2), np.random.default_rng(0).normal(size=(6, 2)))
    with pytest.raises(NumericalError):
        data = np.random.default_rng(0).normal(size=(50, 1))
        ols(VarSpec(("a", "b"), lags=1), np.hstack([data, 2 * data]))


def test_ordering_leaves_likelihood_unchanged(var3_data):
    data, _, _ = var3_data
    ll = ols(VarSpec(("a", "b", "c"), lags=2), data).loglik()
    for perm in [(2, 0, 1), (1, 2, 0), (2, 1, 0)]:
        assert abs(ols(VarSpec(("a", "b", "c"), lags=2), data[:, perm]).loglik() - ll) < 1e-8


def test_information_criteria_table(var3_data):
    data, _, _ = var3_data
    ic = information_criteria(VarSpec(("a", "b", "c"), lags=1), data, max_lags=4)
    assert list(ic["lags"]) == [1, 2, 3, 4]
    assert int(ic.loc[ic["bic"].idxmin(), "lags"]) == 1


def test_spec_validation():
    with pytest.raises(ConfigError):
        VarSpec(("a",), lags=0)
    with pytest.raises(ConfigError):
        VarSpec(("a", "a"))
    with pytest.raises(ConfigError):
        VarSpec(("a",), transforms={"a": "sqrt"})


# ------------------------------------------------------------------ priors

def test_prior_moments_follow_definition(var3_data):
    data, _, _ = var3_data
    spec = VarSpec(("a", "b", "c"), lags=2)
    prior = ConjugatePriorSpec(ar_variances={"a": 1.0, "b": 4.0, "c": 0.25})
    built = prior.build(spec, data)
    sig2 = np.array([1.0, 4.0, 0.25])
    assert built.xi[0] == pytest.approx((0.1 * 1e3) ** 2)
    np.testing.assert_allclose(built.xi[1:4], 0.01 / sig2)
    np.testing.assert_allclose(built.xi[4:7], (0.1 / 2) ** 2 / sig2)
    assert built.alpha == 5
    np.testing.assert_allclose(built.S, (5 - 3 - 1) * np.diag(sig2))
    np.testing.assert_array_equal(built.B0[1:4], np.eye(3))
    assert not built.B0[0].any() and not built.B0[4:].any()


def test_prior_from_dict():
    assert isinstance(prior_from_dict({"kind": "dummy"}), DummyObsPriorSpec)
    assert prior_from_dict(None).lambda1 == 0.1
    with pytest.raises(ConfigError):
        prior_from_dict({"kind": "flat"})
    with pytest.raises(ConfigError):
        prior_from_dict({"lambda9": 1.0})
    with pytest.raises(ConfigError):
        ConjugatePriorSpec(lambda1=0.0)


def test_dummy_tightness_schedule():
    assert DummyObsPriorSpec().resolved_tightness(6) == pytest.approx(0.1)
    assert DummyObsPriorSpec().resolved_tightness(12) == pytest.approx(0.05)


# ------------------------------------------------------------------ Gibbs

def test_draw_count_and_sigma_pd(var3_data):
    data, _, _ = var3_data
    spec = VarSpec(("a", "b", "c"), lags=1)
    d = gibbs_sample(spec, ConjugatePriorSpec(), data, RngStream(1), iters=700, burn_in=200, thin=10)
    assert d.n_draws == 50
    assert all(np.all(np.linalg.eigvalsh(s) > 0) for s in d.sigma)
    np.testing.assert_array_equal(d.sigma, d.sigma.transpose(0, 2, 1))


def test_gibbs_is_reproducible_and_chain_split_is_thread_independent(var3_data):
    data, _, _ = var3_data
    spec = VarSpec(("a", "b", "c"), lags=1)
    a = gibbs_sample(spec, ConjugatePriorSpec(), data, RngStream(5), 300, 100, 2, chains=2)
    b = gibbs_sample(spec, ConjugatePriorSpec(), data, RngStream(5), 300, 100, 2, chains=2, threads=2)
    np.testing.assert_array_equal(a.coefs, b.coefs)
    assert a.content_hash() == b.content_hash()


def test_conjugate_posterior_matches_closed_form():
    g = np.random.default_rng(21)
    y = np.zeros(200)
    for t in range(1, 200):
        y[t] = 0.2 + 0.6 * y[t - 1] + g.normal()
    spec = VarSpec(("y",), lags=1)
    prior = ConjugatePriorSpec()
    mean, cov = conjugate_oracle(spec, prior, y[:, None])
    d = gibbs_sample(spec, prior, y[:, None], RngStream(2), iters=11_000, burn_in=1000, thin=1)
    b = d.coefs[:, :, 0]
    se_mean = np.sqrt(np.diag(cov) / d.n_draws)
    assert np.all(np.abs(b.mean(axis=0) - mean[:, 0]) <= 3 * se_mean)
    # variance standard error for near-normal draws: var * sqrt(2 / N)
    se_var = np.diag(cov) * np.sqrt(2.0 / d.n_draws)
    assert np.all(np.abs(b.var(axis=0, ddof=1) - np.diag(cov)) <= 3 * se_var)


def test_conditional_mean_at_posterior_sigma(var3_data):
    data, _, _ = var3_data
    spec = VarSpec(("a", "b", "c"), lags=1)
    prior = ConjugatePriorSpec()
    d = gibbs_sample(spec, prior, data, RngStream(3), iters=4000, burn_in=1000, thin=1)
    mean, cov = conjugate_oracle(spec, prior, data)
    # in the conjugate structure E[B | Sigma] does not depend on Sigma
    np.testing.assert_allclose(d.cond_means[0], mean, rtol=1e-10, atol=1e-12)
    se = np.sqrt(np.diag(cov)).reshape(spec.n, spec.k).T / np.sqrt(d.n_draws)
    assert np.mean(np.abs(d.posterior_mean() - mean) <= 3 * se) >= 0.9


def test_flat_and_dogmatic_limits(var3_data):
    data, _, _ = var3_data
    spec = VarSpec(("a", "b", "c"), lags=1)
    bols = ols(spec, data).coefs
    flat = gibbs_sample(spec, ConjugatePriorSpec(lambda1=1e6), data, RngStream(4), 600, 100, 1)
    assert np.max(np.abs(flat.cond_means.mean(axis=0) - bols)) < 1e-3
    tight = gibbs_sample(spec, ConjugatePriorSpec(lambda1=1e-6), data, RngStream(4), 600, 100, 1)
    B0 = ConjugatePriorSpec().build(spec, data).B0
    # the constant keeps lambda1 * lambda4 = 1e-3 of prior sd, so only lag rows are pinned
    assert np.max(np.abs(tight.cond_means.mean(axis=0)[1:] - B0[1:])) < 1e-6


def test_posterior_contracts_with_sample_size():
    c = np.array([0.1, 0.0, -0.1])
    A = np.array([[0.5, 0.1, 0.0], [0.0, 0.4, 0.1], [0.1, 0.0, 0.3]])
    sigma = np.diag([1.0, 0.7, 0.5])
    data = simulate_var(np.vstack([c, A.T]), sigma, 800, seed=17)
    spec = VarSpec(("a", "b", "c"), lags=2)
    sds = []
    for T in (200, 800):
        d = gibbs_sample(spec, ConjugatePriorSpec(), data[:T], RngStream(6), 3000, 1000, 1)
        sds.append(d.coefs.std(axis=0))
    assert np.mean(sds[1] <= sds[0]) >= 0.95


def test_dummy_prior_runs_and_shrinks(var3_data):
    data, _, _ = var3_data
    spec = VarSpec(("a", "b", "c"), lags=2)
    loose = gibbs_sample(spec, DummyObsPriorSpec(tightness=1e3), data, RngStream(7), 400, 100, 1)
    tight = gibbs_sample(spec, DummyObsPriorSpec(tightness=1e-4), data, RngStream(7), 400, 100, 1)
    bols = ols(spec, data).coefs
    assert np.max(np.abs(loose.cond_means[0][1:] - bols[1:])) < 1e-3
    target = np.zeros((6, 3))
    target[:3] = np.eye(3)
    assert np.max(np.abs(tight.cond_means[0][1:] - target)) < 1e-3


def test_lambda2_extension_uses_independent_prior(var3_data):
    data, _, _ = var3_data
    spec = VarSpec(("a", "b", "c"), lags=1)
    d = gibbs_sample(spec, ConjugatePriorSpec(lambda2=0.5), data, RngStream(8), 300, 100, 1)
    assert d.n_draws == 200 and np.all(np.isfinite(d.coefs))


def test_explosive_draws_flagged_not_dropped():
    g = np.random.default_rng(0)
    y = np.cumsum(g.normal(size=60))[:, None]
    spec = VarSpec(("y",), lags=1)
    d = gibbs_sample(spec, ConjugatePriorSpec(lambda1=10.0), y, RngStream(9), 600, 100, 1)
    assert d.n_draws == 500
    assert 0.0 < d.explosive_share < 1.0


def test_iteration_arguments_validated(var3_data):
    data, _, _ = var3_data
    spec = VarSpec(("a", "b", "c"), lags=1)
    with pytest.raises(ConfigError):
        gibbs_sample(spec, ConjugatePriorSpec(), data, RngStream(0), 100, 100, 1)
    with pytest.raises(ConfigError):
        gibbs_sample(spec, ConjugatePriorSpec(), data[:, :2], RngStream(0), 100, 10, 1)


# ------------------------------------------------------------------ draw store and diagnostics

def test_save_load_roundtrip(tmp_path, var3_data):
    data, _, _ = var3_data
    spec = VarSpec(("a", "b", "c"), lags=1)
    d = gibbs_sample(spec, ConjugatePriorSpec(), data, RngStream(10), 150, 100, 5)
    d.save(tmp_path)
    e = PosteriorDrawSet.load(tmp_path)
    np.testing.assert_array_equal(d.coefs, e.coefs)
    assert e.manifest() == d.manifest()
    d.write_csv(tmp_path / "draws.csv")
    df = pd.read_csv(tmp_path / "draws.csv")
    assert list(df.columns) == ["draw_index", "param_name", "value"]
    assert len(df) == d.n_draws * (spec.k * spec.n + spec.n * (spec.n + 1) // 2)


def test_tampered_store_rejected(tmp_path, var3_data):
    data, _, _ = var3_data
    d = gibbs_sample(VarSpec(("a", "b", "c"), lags=1), ConjugatePriorSpec(), data, RngStream(10), 150, 100, 5)
    d.save(tmp_path)
    z = dict(np.load(tmp_path / "draws.npz"))
    z["coefs"] = z["coefs"] + 1.0
    np.savez_compressed(tmp_path / "draws.npz", **z)
    with pytest.raises(ConfigError):
        PosteriorDrawSet.load(tmp_path)


def test_rhat_iid_draws():
    x = np.random.default_rng(1).normal(size=(4, 2000, 3))
    rep = convergence_report(x)
    assert np.all(rep["rhat"] < 1.01)
    assert not rep["flag"].any()
    assert np.all(rep["ess"] > 4000)


def test_rhat_flags_disjoint_chains():
    g = np.random.default_rng(2)
    x = np.stack([g.normal(0, 1, (500, 2)), g.normal(5, 1, (500, 2))])
    rep = convergence_report(x)
    assert np.all(rep["rhat"] > 1.1) and rep["flag"].all()


def test_report_needs_enough_draws():
    with pytest.raises(InsufficientDataError):
        convergence_report(np.zeros((1, 50, 2)))


def test_report_lists_every_parameter(var3_data):
    data, _, _ = var3_data
    d = gibbs_sample(VarSpec(("a", "b", "c"), lags=1), ConjugatePriorSpec(), data, RngStream(11), 1100, 100, 1)
    rep = convergence_report(d)
    assert list(rep["param"]) == d.param_names()
    assert len(rep) == 3 * 4 + 6


@given(st.integers(1, 4), st.integers(1, 3), st.booleans())
def test_lag_matrix_shapes(p, n, const):
    data = np.arange(40.0 * n).reshape(40, n)
    Y, X = lag_matrix(data, p, const)
    assert Y.shape == (40 - p, n)
    assert X.shape == (40 - p, int(const) + n * p)
    np.testing.assert_array_equal(X[:, int(const):int(const) + n], data[p - 1:-1])
