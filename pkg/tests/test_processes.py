import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from siglasso.processes import (
    CorrelationSpec,
    ProcessSpec,
    SeededStream,
    gbm_pair,
    gbm_pair_paths,
    path_to_csv,
    psd_cholesky,
    simulate,
    simulate_paths,
)
from siglasso.moments import ou_variance


def bm(d=2, rho=0.0, n=50, T=1.0):
    return ProcessSpec("brownian", CorrelationSpec.equicorrelated(d, rho), T, n)


def test_seeded_streams_are_reproducible_and_distinct():
    a = simulate_paths(bm(), SeededStream(7, 1), 3)
    b = simulate_paths(bm(), SeededStream(7, 1), 3)
    c = simulate_paths(bm(), SeededStream(7, 2), 3)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)


def test_child_streams_nest():
    s = SeededStream(3)
    assert s.child(1, 2) == SeededStream(3, (1, 2))
    assert s.child(1).child(2) == s.child(1, 2)


def test_negative_seed_rejected():
    with pytest.raises(ValueError):
        SeededStream(-1)


def test_paths_start_at_zero_and_have_right_shape():
    X = simulate_paths(bm(d=3, n=20), SeededStream(0), 4)
    assert X.shape == (4, 21, 3)
    assert np.all(X[:, 0] == 0.0)


def test_ou_with_zero_kappa_is_brownian():
    spec_ou = ProcessSpec("ou", CorrelationSpec.equicorrelated(2, 0.3), 1.0, 30, {"kappa": 0.0})
    np.testing.assert_array_equal(
        simulate_paths(bm(rho=0.3, n=30), SeededStream(5), 10), simulate_paths(spec_ou, SeededStream(5), 10)
    )


def test_brownian_increment_covariance():
    X = simulate_paths(bm(d=2, rho=0.6, n=1), SeededStream(11), 200_000)
    cov = np.cov(X[:, -1].T)
    np.testing.assert_allclose(cov, [[1.0, 0.6], [0.6, 1.0]], atol=0.01)


@pytest.mark.parametrize("kappa", [0.5, 1.0, 4.0])
def test_ou_terminal_variance(kappa):
    spec = ProcessSpec("ou", CorrelationSpec.equicorrelated(1), 1.0, 200, {"kappa": kappa})
    Y = simulate_paths(spec, SeededStream(2), 40_000)[:, -1, 0]
    assert Y.var() == pytest.approx(ou_variance(kappa, 1.0), rel=0.03)


def test_random_walk_steps_are_unit():
    spec = ProcessSpec("random_walk", CorrelationSpec.equicorrelated(1), 1.0, 25)
    X = simulate_paths(spec, SeededStream(0), 5)
    assert set(np.unique(np.abs(np.diff(X, axis=1)))) == {1.0}


def test_ar1_recursion():
    spec = ProcessSpec("ar1", CorrelationSpec.equicorrelated(1), 1.0, 10, {"phi": 0.5})
    X = simulate_paths(spec, SeededStream(4), 1)[0, :, 0]
    eps = SeededStream(4).generator().standard_normal((1, 10, 1))[0, :, 0]
    y = [0.0]
    for e in eps:
        y.append(0.5 * y[-1] + e)
    np.testing.assert_allclose(X, y)


def test_arima_integrated_random_walk():
    spec = ProcessSpec("arima", CorrelationSpec.equicorrelated(1), 1.0, 10, {"integrate": 1})
    X = simulate_paths(spec, SeededStream(4), 1)[0, :, 0]
    eps = SeededStream(4).generator().standard_normal(10)
    np.testing.assert_allclose(np.diff(np.diff(X)), np.diff(eps), atol=1e-12)


def test_gbm_is_positive_and_starts_at_x0():
    spec = ProcessSpec("gbm", CorrelationSpec.equicorrelated(1), 1.0, 50, {"drift": 0.02, "vol": 0.2, "x0": 100.0})
    X = simulate_paths(spec, SeededStream(0), 100)
    assert np.all(X > 0)
    assert np.all(X[:, 0] == 100.0)


def test_gbm_martingale_under_zero_drift():
    spec = ProcessSpec("gbm", CorrelationSpec.equicorrelated(1), 1.0, 4, {"drift": 0.0, "vol": 0.3, "x0": 1.0})
    X = simulate_paths(spec, SeededStream(1), 200_000)
    assert X[:, -1, 0].mean() == pytest.approx(1.0, abs=0.005)


def test_vasicek_mean_reverts_to_long_run_level():
    spec = ProcessSpec("vasicek", CorrelationSpec.equicorrelated(1), 5.0, 500, {"gamma": 1.0, "rbar": 0.05, "sigma": 0.01, "r0": 0.0})
    r = simulate_paths(spec, SeededStream(0), 5000)[:, -1, 0]
    assert r.mean() == pytest.approx(0.05 * (1 - np.exp(-5.0)), abs=1e-3)


def test_gbm_pair_log_steps():
    X = gbm_pair_paths(0.6, 0.01, 1000, SeededStream(0), 50)
    steps = np.diff(np.log(X), axis=1).reshape(-1, 2)
    assert steps.std(axis=0) == pytest.approx([0.01, 0.01], rel=0.02)
    assert np.corrcoef(steps.T)[0, 1] == pytest.approx(0.6, abs=0.02)
    p = gbm_pair(0.6, 0.01, 10, SeededStream(0))
    assert p.values.shape == (11, 2) and p.times[-1] == 1.0


def test_single_path_and_csv():
    p = simulate(bm(d=2, n=3), SeededStream(0))
    text = path_to_csv(p)
    lines = text.strip().splitlines()
    assert lines[0] == "t,x1,x2"
    assert len(lines) == 5


@pytest.mark.parametrize(
    "kind, params, match",
    [
        ("ou", {"kappa": -1.0}, "kappa"),
        ("ar1", {}, "phi"),
        ("vasicek", {"sigma": 0.0}, "sigma"),
        ("lévy", {}, "unknown process"),
    ],
)
def test_invalid_specs(kind, params, match):
    with pytest.raises(ValueError, match=match):
        ProcessSpec(kind, CorrelationSpec.equicorrelated(1), 1.0, 10, params)


def test_psd_cholesky_handles_singular_and_rejects_indefinite():
    L = psd_cholesky(np.ones((2, 2)))
    np.testing.assert_allclose(L @ L.T, np.ones((2, 2)), atol=1e-12)
    with pytest.raises(ValueError):
        psd_cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))


@given(st.floats(-0.99, 0.99), st.floats(0.1, 3.0))
def test_correlation_spec_roundtrip(rho, sigma):
    c = CorrelationSpec.equicorrelated(2, rho, sigma)
    np.testing.assert_allclose(c.correlation, [[1, rho], [rho, 1]], atol=1e-10)
    np.testing.assert_allclose(c.sigma, [sigma, sigma], rtol=1e-10)
    U = c.unit_mixing()
    np.testing.assert_allclose(U @ U.T, c.correlation, atol=1e-10)
