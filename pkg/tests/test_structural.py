import numpy as np
import pandas as pd
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_draws, random_stable_var
from wealthvar.errors import ConfigError, IdentificationError
from wealthvar.probkernel import RngStream, lag_blocks
from wealthvar.structural import (Condition, CounterfactualSpec, IdentificationScheme, Restriction,
                                  SignRestrictionSpec, audit_restrictions, balance_sheet_scheme,
                                  channel_counterfactual, conditional_forecast, fevd, identify, irf,
                                  level_readout, ump_scheme, unconditional_forecast)
from wealthvar.structural.identification import _sign_candidates


def simulate_paths(B, p, A0, eps, history):
    """Deterministic recursion y_t = c + sum_l A_l y_{t-l} + A0 eps_t from a given history."""
    A = lag_blocks(B, p)
    buf = [np.asarray(r, dtype=float) for r in history]
    out = []
    for e in eps:
        y = B[0] + sum(A[l] @ buf[-1 - l] for l in range(p)) + A0 @ e
        buf.append(y)
        out.append(y)
    return np.array(out)


def shock_response(B, p, A0, col, size, H, seed=0):
    """Shocked-minus-baseline simulation with zero future shocks."""
    n = B.shape[1]
    hist = np.random.default_rng(seed).normal(size=(p, n))
    eps = np.zeros((H + 1, n))
    base = simulate_paths(B, p, A0, eps, hist)
    eps[0, col] = size
    return simulate_paths(B, p, A0, eps, hist) - base


def chol_scheme(shock, size=1.0, **kw):
    return IdentificationScheme("cholesky", shock, shock_size=size, **kw)


# ------------------------------------------------------------------ identification

def test_cholesky_identity():
    d = make_draws(np.zeros((3, 2)), np.eye(2), ("a", "b"))
    ident = identify(d, chol_scheme("a"))
    np.testing.assert_array_equal(ident.impact[0], np.eye(2))


def test_cholesky_respects_ordering():
    S = np.array([[1.0, 0.5, 0.2], [0.5, 2.0, 0.3], [0.2, 0.3, 1.5]])
    d = make_draws(np.zeros((4, 3)), S, ("a", "b", "c"))
    ident = identify(d, chol_scheme("b", ordering=("c", "a", "b")))
    A0 = ident.impact[0]
    np.testing.assert_allclose(A0 @ A0.T, S, rtol=1e-12)
    # c is first: only its own shock moves it
    assert A0[2, 0] != 0 and A0[2, 1] == 0 and A0[2, 2] == 0
    assert ident.shocks == ("c", "a", "b")


def test_scheme_validation():
    d = make_draws(np.zeros((3, 2)), np.eye(2), ("a", "b"))
    with pytest.raises(ConfigError):
        identify(d, chol_scheme("z"))
    with pytest.raises(ConfigError):
        identify(d, chol_scheme("a", ordering=("a",)))
    with pytest.raises(ConfigError):
        Restriction("a", "0", (0, 1))
    with pytest.raises(ConfigError):
        SignRestrictionSpec(())
    with pytest.raises(ConfigError):
        IdentificationScheme("narrative", "a")


def two_var_sign_setup(seed=0, ndraws=40):
    g = np.random.default_rng(seed)
    sig = []
    for _ in range(ndraws):
        M = g.normal(size=(2, 2))
        sig.append(M @ M.T + 0.1 * np.eye(2))
    coefs = np.zeros((ndraws, 3, 2))
    coefs[:, 1:] = 0.3 * np.eye(2)
    d = make_draws(coefs, np.array(sig), ("a", "b"))
    spec = SignRestrictionSpec((Restriction("a", "+"), Restriction("b", "-")))
    scheme = IdentificationScheme("sign", "s", sign_restrictions={"s": spec}, shock_size=None, max_tries=2000)
    return d, scheme


def test_sign_restrictions_audit_all_retained():
    d, scheme = two_var_sign_setup()
    ident = identify(d, scheme, RngStream(1))
    assert audit_restrictions(ident, d).all()
    assert ident.n_skipped == 0
    for i, k in enumerate(ident.draw_index):
        np.testing.assert_allclose(ident.impact[i] @ ident.impact[i].T, d.sigma[k], rtol=1e-10, atol=1e-12)


def test_two_variable_rotation_angle_oracle():
    d, scheme = two_var_sign_setup(seed=3)
    ident = identify(d, scheme, RngStream(2))
    grid = np.linspace(0, 2 * np.pi, 20_000, endpoint=False)
    for i, k in enumerate(ident.draw_index):
        S = d.sigma[k]
        w, P = np.linalg.eigh(S)
        base = P * np.sqrt(w)
        cols = base @ np.vstack([np.cos(grid), np.sin(grid)])
        ok = (cols[0] > 0) & (cols[1] < 0)
        assert ok.any()
        a = ident.impact[i][:, 0]
        q = np.linalg.solve(base, a)
        theta = np.arctan2(q[1], q[0]) % (2 * np.pi)
        # nearest admissible grid angle lies within one grid step
        dist = np.abs((grid[ok] - theta + np.pi) % (2 * np.pi) - np.pi)
        assert dist.min() <= 2 * np.pi / len(grid)
        assert np.sign(a[0]) == 1 and np.sign(a[1]) == -1


def test_median_target_returns_accepted_rotation():
    d, scheme = two_var_sign_setup(seed=5, ndraws=8)
    mt = IdentificationScheme("sign", "s", sign_restrictions=scheme.sign_restrictions, shock_size=None,
                              max_tries=2000, median_target=True, candidates_per_draw=6)
    rs = RngStream(4)
    ident = identify(d, mt, rs)
    for i, k in enumerate(ident.draw_index):
        cands, _ = _sign_candidates(mt, d.spec.variables, d.coefs[k], d.sigma[k], 1, True, rs.child(int(k)), 6)
        assert any(np.array_equal(c, ident.impact[i]) for c in cands)


def test_impossible_restrictions_fail_with_tries():
    # zero coefficients make every response after impact exactly zero, so strict signs at h >= 1 never hold
    S = np.array([[1.0, 0.999], [0.999, 1.0]])
    d = make_draws(np.zeros((3, 2)), S, ("a", "b"))
    spec = SignRestrictionSpec((Restriction("a", "+", (0, 1, 2)), Restriction("b", "-", (0, 1, 2))))
    scheme = IdentificationScheme("sign", "s", sign_restrictions={"s": spec}, shock_size=None, max_tries=5)
    with pytest.raises(IdentificationError) as e:
        identify(d, scheme, RngStream(0))
    assert "5 tries" in str(e.value)


def test_balance_sheet_zero_restriction_holds():
    B, S = random_stable_var(5, 1, seed=2)
    v = ("ip", "cpi", "shadow_rate", "spread", "neer")
    d = make_draws(np.repeat(B[None], 5, 0), np.repeat(S[None], 5, 0), v)
    ident = identify(d, balance_sheet_scheme(max_tries=50_000), RngStream(3))
    assert audit_restrictions(ident, d).all()
    col = ident.impact[:, :, ident.column()]
    assert np.max(np.abs(col[:, 2])) < 1e-9 * np.sqrt(S.diagonal().max())


def test_ump_scheme_shape():
    s = ump_scheme()
    assert s.normalizing_variable() == "shadow_rate"
    assert {r.variable for r in s.sign_restrictions["ump"].restrictions} == {"shadow_rate", "spread", "cpi", "ip", "neer"}


# ------------------------------------------------------------------ impulse responses

def test_irf_ar1_geometric():
    d = make_draws(np.array([[0.0], [0.5]]), np.array([[1.0]]), ("y",))
    r = irf(d, chol_scheme("y", 1.0), H=30)
    np.testing.assert_allclose(r.responses[0, :, 0], 0.5 ** np.arange(31), rtol=0, atol=1e-12)


def test_irf_zero_coefficients():
    S = np.array([[1.0, 0.4], [0.4, 2.0]])
    d = make_draws(np.zeros((3, 2)), S, ("a", "b"))
    r = irf(d, chol_scheme("a", None), H=5)
    np.testing.assert_allclose(r.responses[0, 0], np.linalg.cholesky(S)[:, 0])
    assert not r.responses[0, 1:].any()


@pytest.mark.parametrize("p", [1, 2])
def test_irf_matches_simulation(p):
    B, S = random_stable_var(2, p, seed=10 + p)
    d = make_draws(B, S, ("a", "b"), p=p)
    r = irf(d, chol_scheme("b", -0.2), H=30)
    A0 = np.linalg.cholesky(S)
    sim = shock_response(B, p, A0, 1, -0.2 / A0[1, 1], 30)
    np.testing.assert_allclose(r.responses[0], sim, rtol=0, atol=1e-10)


@given(st.integers(0, 500), st.floats(-5, 5).filter(lambda k: abs(k) > 1e-3))
def test_shock_size_scales_linearly(seed, k):
    B, S = random_stable_var(3, 2, seed)
    d = make_draws(B, S, ("a", "b", "c"), p=2)
    r1 = irf(d, chol_scheme("b", -0.2), H=12).responses
    rk = irf(d, chol_scheme("b", -0.2 * k), H=12).responses
    np.testing.assert_allclose(rk, k * r1, rtol=1e-12, atol=1e-14 * np.abs(r1).max())


@given(st.integers(0, 500), st.integers(0, 3))
def test_cholesky_impact_lower_triangular(seed, j):
    B, S = random_stable_var(4, 1, seed)
    names = ("a", "b", "c", "d")
    r = irf(make_draws(B, S, names), chol_scheme(names[j], None), H=0)
    assert np.all(r.responses[0, 0, :j] == 0.0)
    assert r.responses[0, 0, j] > 0


def test_bands_ordered_and_csv(tmp_path):
    rng = np.random.default_rng(0)
    coefs, sig = [], []
    for _ in range(50):
        B, S = random_stable_var(2, 1, int(rng.integers(1e6)))
        coefs.append(B)
        sig.append(S)
    r = irf(make_draws(np.array(coefs), np.array(sig), ("a", "b")), chol_scheme("a", 1.0), H=6)
    med, lo, hi = r.summary()
    assert np.all(lo <= med) and np.all(med <= hi)
    r.write_csv(tmp_path / "irf.csv")
    df = pd.read_csv(tmp_path / "irf.csv")
    assert list(df.columns) == ["horizon", "variable", "shock", "median", "lo16", "hi84"]
    assert len(df) == 7 * 2


def test_level_readout():
    d = make_draws(np.array([[0.0], [0.5]]), np.array([[1.0]]), ("g",))
    r = irf(d, chol_scheme("g", 1.0), H=2)
    np.testing.assert_array_equal(level_readout(r, "g", 50.0), r.of("g"))
    r.metadata["transforms"] = {"g": "log100"}
    np.testing.assert_allclose(level_readout(r, "g", 50.0), r.of("g") * 0.5)


# ------------------------------------------------------------------ FEVD

def test_fevd_univariate():
    d = make_draws(np.array([[0.1], [0.7]]), np.array([[2.0]]), ("y",))
    f = fevd(d, chol_scheme("y"), H=10)
    np.testing.assert_array_equal(f.shares[0, :, 0, 0], 1.0)


def test_fevd_decoupled_system():
    B = np.zeros((4, 3))
    B[1:] = np.diag([0.5, -0.3, 0.9])
    d = make_draws(B, np.diag([1.0, 2.0, 0.5]), ("a", "b", "c"))
    f = fevd(d, chol_scheme("a"), H=10)
    for i in range(3):
        np.testing.assert_array_equal(f.shares[0, :, i, i], 1.0)


def test_fevd_matches_direct_summation():
    B, S = random_stable_var(2, 2, seed=4)
    d = make_draws(B, S, ("a", "b"), p=2)
    H = 15
    f = fevd(d, chol_scheme("a"), H=H)
    A0 = np.linalg.cholesky(S)
    theta = np.stack([shock_response(B, 2, A0, j, 1.0, H) for j in range(2)], axis=2)  # (H+1, var, shock)
    acc = np.cumsum(theta ** 2, axis=0)
    expect = acc / acc.sum(axis=2, keepdims=True)
    np.testing.assert_allclose(f.shares[0], expect, rtol=0, atol=1e-10)


@given(st.integers(0, 1000))
def test_fevd_rows_sum_to_one(seed):
    B, S = random_stable_var(4, 2, seed, radius=0.99)
    f = fevd(make_draws(B, S, ("a", "b", "c", "d"), p=2), chol_scheme("a"), H=20)
    np.testing.assert_allclose(f.shares.sum(axis=3), 1.0, rtol=0, atol=1e-10)
    assert np.all((f.shares >= 0) & (f.shares <= 1))


# ------------------------------------------------------------------ channel counterfactual

def test_channel_already_silent_changes_nothing():
    B = np.zeros((4, 3))
    B[1:] = np.array([[0.5, 0.0, 0.1], [0.2, 0.4, 0.0], [0.0, 0.0, 0.6]])  # B[1+i, j]: lag of i in eq j
    S = np.array([[1.0, 0.0, 0.3], [0.0, 1.0, 0.0], [0.3, 0.0, 1.0]])
    # b neither responds to a or c nor feeds them
    B[1:, 1] = [0.0, 0.4, 0.0]
    B[2, [0, 2]] = 0.0
    d = make_draws(B, S, ("a", "b", "c"))
    cc = channel_counterfactual(d, chol_scheme("a", -0.2), ["b"], H=12)
    np.testing.assert_allclose(cc.counterfactual.responses, cc.unrestricted.responses, rtol=0, atol=1e-15)
    assert not cc.offsets.any()


@pytest.mark.parametrize("channels", [("b",), ("b", "c")])
def test_channel_zero_and_simulation_oracle(channels):
    names = ("a", "b", "c", "d")
    B, S = random_stable_var(4, 2, seed=8)
    d = make_draws(B, S, names, p=2)
    H = 20
    cc = channel_counterfactual(d, chol_scheme("a", -0.2), channels, H=H)
    rows = [names.index(c) for c in channels]
    scale = np.abs(cc.unrestricted.responses).max()
    assert np.max(np.abs(cc.counterfactual.responses[0][:, rows])) <= 1e-13 * scale
    A0 = np.linalg.cholesky(S)
    eps = np.zeros((H + 1, 4))
    eps[0, 0] = -0.2 / A0[0, 0]
    eps[:, rows] += cc.offsets[0]
    hist = np.zeros((2, 4))
    sim = simulate_paths(B, 2, A0, eps, hist) - simulate_paths(B, 2, A0, np.zeros_like(eps), hist)
    np.testing.assert_allclose(cc.counterfactual.responses[0], sim, rtol=0, atol=1e-10)


def test_channel_errors():
    B, S = random_stable_var(3, 1, seed=1)
    d = make_draws(B, S, ("a", "b", "c"))
    with pytest.raises(ConfigError):
        channel_counterfactual(d, chol_scheme("a"), ["a"])
    with pytest.raises(ConfigError):
        channel_counterfactual(d, chol_scheme("a"), ["zz"])
    with pytest.raises(ConfigError):
        channel_counterfactual(d, chol_scheme("a"), [])


# ------------------------------------------------------------------ conditional forecasts

def scenario(*conds, H=12, name="s"):
    return CounterfactualSpec("conditional_path", horizon=H, conditions=tuple(conds), name=name)


def test_condition_on_unconditional_path_is_unconditional():
    B, S = random_stable_var(3, 2, seed=6)
    hist = np.random.default_rng(0).normal(size=(5, 3))
    d = make_draws(B, S, ("a", "b", "c"), p=2, data=hist)
    sf = conditional_forecast(d, scenario(Condition("b")))
    np.testing.assert_allclose(sf.paths, sf.unconditional, rtol=0, atol=1e-12)
    np.testing.assert_allclose(sf.unconditional[0], unconditional_forecast(B, hist, 2, 12))


def test_conditioned_path_is_exact_and_offset_shifts():
    B, S = random_stable_var(3, 1, seed=7)
    hist = np.random.default_rng(1).normal(size=(3, 3))
    d = make_draws(B, S, ("a", "b", "c"), data=hist)
    target = np.linspace(0.0, 1.0, 12)
    sf = conditional_forecast(d, scenario(Condition("c", values=tuple(target))))
    np.testing.assert_allclose(sf.paths[0, :, 2], target, rtol=0, atol=1e-12)
    base = conditional_forecast(d, scenario(Condition("c")))
    up = conditional_forecast(d, scenario(Condition("c", offset=1.0)))
    np.testing.assert_allclose(up.paths[0, :, 2] - base.paths[0, :, 2], 1.0, rtol=0, atol=1e-12)


def test_ar1_implied_shocks_follow_recursion():
    c, phi, s = 0.3, 0.6, 0.5
    y_last = 2.0
    d = make_draws(np.array([[c], [phi]]), np.array([[s ** 2]]), ("y",), data=np.array([[1.0], [y_last]]))
    k, H = 1.25, 8
    sf = conditional_forecast(d, scenario(Condition("y", values=(k,) * H), H=H))
    prev = np.r_[y_last, np.full(H - 1, k)]
    expect = (k - c - phi * prev) / s
    np.testing.assert_allclose(sf.shocks[0, :, 0], expect, rtol=1e-12, atol=1e-12)


def test_partial_path_leaves_nan_horizons_free():
    B, S = random_stable_var(2, 1, seed=9)
    d = make_draws(B, S, ("a", "b"))
    vals = (0.5, np.nan, 0.7, np.nan)
    sf = conditional_forecast(d, scenario(Condition("a", values=vals), H=4))
    np.testing.assert_allclose(sf.paths[0, [0, 2], 0], [0.5, 0.7], atol=1e-12)


def test_infeasible_conditioning_is_argument_error():
    B, S = random_stable_var(2, 1, seed=2)
    d = make_draws(B, S, ("a", "b"))
    with pytest.raises(ConfigError):
        conditional_forecast(d, scenario(Condition("a"), Condition("a", offset=1.0)))
    with pytest.raises(ConfigError):
        conditional_forecast(d, scenario(Condition("q")))
    with pytest.raises(ConfigError):
        conditional_forecast(d, scenario(Condition("a", values=(1.0, 2.0)), H=5))
    with pytest.raises(ConfigError):
        CounterfactualSpec("conditional_path", conditions=())


def test_scenario_metadata_carries_caveat(tmp_path):
    B, S = random_stable_var(2, 1, seed=2)
    sf = conditional_forecast(make_draws(B, S, ("a", "b")), scenario(Condition("a")))
    assert "Lucas" in sf.metadata["note"]
    sf.write_csv(tmp_path / "s.csv")
    assert pd.read_csv(tmp_path / "s.csv")["horizon"].min() == 1
