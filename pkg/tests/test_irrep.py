import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from siglasso.irrep import (
    derive_general_params,
    equicorrelation_threshold,
    finite_sample_general_bounds,
    finite_sample_ito_bounds,
    g_sigma,
    g_sigma_inverse,
    irrepresentable,
    sufficient_bound,
    uniqueness_bound,
)
from siglasso.moments import ito_bm_moments
from siglasso.processes import CorrelationSpec


def equicorrelation(p, rho):
    return (1 - rho) * np.eye(p) + rho * np.ones((p, p))


@pytest.mark.parametrize("q, expected", [(1, 1.0), (2, 1 / 3), (3, 0.2), (5, 1 / 9)])
def test_sufficient_bound(q, expected):
    assert sufficient_bound(q) == pytest.approx(expected)


@pytest.mark.parametrize("a", [1, 2, 3, 5])
def test_equicorrelation_threshold_is_sharp(a):
    thr = equicorrelation_threshold(a)
    signs = np.ones(a)
    above = irrepresentable(equicorrelation(a + 2, thr + 1e-6), range(a), signs)
    below = irrepresentable(equicorrelation(a + 2, thr - 1e-6), range(a), signs) if a > 1 else None
    assert above.verdict == "PASS"
    if below is not None:
        assert below.verdict == "FAIL"


@given(st.integers(1, 5), st.floats(0.0, 0.95))
def test_equicorrelation_closed_form(a, rho):
    rep = irrepresentable(equicorrelation(a + 3, rho), range(a), np.ones(a))
    expect = a * rho / (1 + (a - 1) * rho)
    np.testing.assert_allclose(rep.vector, expect, atol=1e-9)
    assert rep.norm_ii == pytest.approx(expect, abs=1e-9)


@given(st.integers(1, 4), st.floats(0.0, 0.999))
def test_below_sufficient_bound_both_hold(q, frac):
    rho = frac * sufficient_bound(q)
    p = q + 4
    rng = np.random.default_rng(q)
    # any correlation with off-diagonals bounded by rho
    M = np.eye(p) + rho * rng.uniform(-1, 1, (p, p))
    M = np.triu(M, 1) + np.triu(M, 1).T + np.eye(p)
    signs = rng.choice([-1, 1], q)
    if np.linalg.eigvalsh(M)[0] > 0:
        rep = irrepresentable(M, range(q), signs)
        assert rep.holds_i and rep.holds_ii


def test_identity_margins():
    rep = irrepresentable(np.eye(4), [0, 1], [1, -1])
    assert rep.gamma_i == 1.0 and rep.gamma_ii == 1.0


def test_singular_active_block():
    M = np.ones((3, 3))
    assert irrepresentable(M, [0, 1], [1, 1]).verdict == "SINGULAR"


def test_input_errors():
    with pytest.raises(ValueError):
        irrepresentable(np.eye(3), [0, 1], [1])
    with pytest.raises(ValueError):
        irrepresentable(np.eye(3), [0, 0], [1, 1])
    with pytest.raises(ValueError):
        irrepresentable(np.ones((2, 3)), [0], [1])


def test_words_accepted_for_moment_matrix():
    M = ito_bm_moments(CorrelationSpec.equicorrelated(2, 0.3), 2)
    rep = irrepresentable(M, [(1,), (1, 2)], [1, 1])
    # inactive (), (2), (1,1), (2,1), (2,2): 0, rho, rho, rho^2, rho
    np.testing.assert_allclose(rep.vector, [0, 0.3, 0.3, 0.09, 0.3], atol=1e-15)


class TestFiniteSample:
    base = dict(rho=0.05, sigma=0.1, q_max=2, p=10, N=10**10, lam=0.2, sigma_min=1.0, sigma_max=1.0)

    def test_g_inverse_roundtrip(self):
        for y in (1e-3, 0.1, 1.0, 10.0):
            x = g_sigma_inverse(y, 10, 0.1, 1.0)
            assert g_sigma(x, 10, 0.1, 1.0) == pytest.approx(y, rel=1e-8)

    def test_values_finite(self):
        out = finite_sample_ito_bounds(**self.base)
        assert set(out) == {"P_min", "h", "lambda_threshold", "xi"}
        assert 0 < out["P_min"] <= 1 and out["h"] > 0

    @pytest.mark.parametrize("key, values, direction", [
        ("rho", [0.0, 0.05, 0.1, 0.15], -1),
        ("N", [10**9, 10**10, 10**11], 1),
        ("p", [5, 10, 20], -1),
    ])
    def test_monotone(self, key, values, direction):
        P = [finite_sample_ito_bounds(**{**self.base, key: v})["P_min"] for v in values]
        assert np.all(direction * np.diff(P) >= 0)

    def test_preconditions(self):
        with pytest.raises(ValueError, match="rho"):
            finite_sample_ito_bounds(**{**self.base, "rho": 0.4})
        with pytest.raises(ValueError, match="lambda"):
            finite_sample_ito_bounds(**{**self.base, "lam": 1e-7})

    def test_general(self):
        kw = dict(alpha=0.2, zeta=1.2, C_min=0.8, gamma=0.5, sigma=0.1, p=10, N=10**10, lam=0.2, sigma_min=1.0, sigma_max=1.0)
        out = finite_sample_general_bounds(**kw)
        more = finite_sample_general_bounds(**{**kw, "N": 10**11})
        assert more["P_min"] >= out["P_min"]
        with pytest.raises(ValueError):
            finite_sample_general_bounds(**{**kw, "gamma": 0.0})

    def test_derived_params_identity(self):
        out = derive_general_params(np.eye(4), [0, 1])
        assert out == {"alpha": 0.0, "zeta": 1.0, "C_min": 1.0, "gamma": 1.0, "rho": 0.0}


class TestUniqueness:
    def test_probability_in_unit_interval(self):
        rng = np.random.default_rng(0)
        S = rng.standard_normal((5000, 4))
        out = uniqueness_bound(S, [1, 0, 0, 0], [0, 1, 0, 0], theta=2.0, eta=1e-3)
        assert 0 < out.P_star < 1
        assert out.accepted <= 5000

    def test_errors(self):
        S = np.random.default_rng(0).standard_normal((100, 3))
        with pytest.raises(ValueError):
            uniqueness_bound(S, [1, 0, 0], [1, 0, 0], 2.0, 0.1)
        with pytest.raises(ValueError):
            uniqueness_bound(S, [1, 0, 0], [0, 0, 0], 1.0, 0.1)
        with pytest.raises(ValueError, match="eta"):
            uniqueness_bound(S, [1, 0, 0], [0, 0, 0], 2.0, 100.0)
