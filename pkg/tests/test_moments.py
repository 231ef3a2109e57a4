import math
from fractions import Fraction

import numpy as np
import pytest

from siglasso.moments import (
    MomentMatrix,
    StratonovichBMRecursion,
    ito_bm_moments,
    kronecker_correlation,
    mc_signature_moments,
    ou_1d_ito_mean_order2,
    ou_1d_order0_order2_corr,
    ou_1d_order0_order2_corr_expanded,
    ou_variance,
    strat_bm_mean,
    strat_bm_moment_functions,
    strat_bm_moments,
)
from siglasso.processes import CorrelationSpec, ProcessSpec, SeededStream
from siglasso.signature import signature_batch
from siglasso.words import enumerate_words


def double_factorial(n):
    return math.prod(range(n, 0, -2)) if n > 0 else 1


class TestItoBrownian:
    @pytest.mark.parametrize("rho", [0.0, 0.3, 0.6, -0.5])
    def test_kronecker_blocks(self, rho):
        C = CorrelationSpec.equicorrelated(2, rho)
        R = ito_bm_moments(C, 4).correlation().values
        omega = np.array([[1, rho], [rho, 1]])
        np.testing.assert_allclose(R, kronecker_correlation(omega, 4), atol=1e-15)

    def test_independent_coordinates_give_identity(self):
        R = ito_bm_moments(CorrelationSpec.equicorrelated(2, 0.0), 4).correlation().values
        np.testing.assert_array_equal(R, np.eye(31))

    def test_second_moment_scales_with_time(self):
        C = CorrelationSpec.equicorrelated(1)
        M = ito_bm_moments(C, 3, T=2.0)
        np.testing.assert_allclose(np.diag(M.values), [1, 2, 2, 8 / 6])

    def test_kronecker_order_matches_word_order(self):
        omega = np.array([[1.0, 0.2], [0.2, 1.0]])
        R = kronecker_correlation(omega, 2)
        idx = enumerate_words(2, 2)
        for u in idx.words[3:]:
            for v in idx.words[3:]:
                expect = omega[u[0] - 1, v[0] - 1] * omega[u[1] - 1, v[1] - 1]
                assert R[idx.index(u), idx.index(v)] == pytest.approx(expect)

    def test_mc_agrees(self):
        C = CorrelationSpec.equicorrelated(2, 0.6)
        spec = ProcessSpec("brownian", C, 1.0, 100)
        mc = mc_signature_moments(spec, 3, "ito", 20_000, SeededStream(1)).correlation().values
        exact = ito_bm_moments(C, 3).correlation().values
        assert np.max(np.abs(mc - exact)) < 0.08


class TestStratonovichRecursion:
    @pytest.mark.parametrize("a, b", [(a, b) for a in range(7) for b in range(7) if (a + b) % 2 == 0])
    def test_one_dimensional_gaussian_moments(self, a, b):
        # S_{1^a} = W^a / a! exactly, so E = (a+b-1)!! t^{(a+b)/2} / (a! b!)
        t = Fraction(3, 2)
        f = StratonovichBMRecursion(np.eye(1)).F((1,) * a, (1,) * b)
        expect = Fraction(double_factorial(a + b - 1), math.factorial(a) * math.factorial(b)) * t ** ((a + b) // 2)
        assert f(t, t) == expect
        assert f.diagonal_agrees()

    def test_first_order_is_min(self):
        f = StratonovichBMRecursion(np.eye(1)).F((1,), (1,))
        assert f(Fraction(1, 3), Fraction(1, 2)) == Fraction(1, 3)
        assert f(Fraction(2), Fraction(1, 2)) == Fraction(1, 2)

    def test_correlated_first_order(self):
        rec = StratonovichBMRecursion(np.array([[1.0, 0.6], [0.6, 1.0]]))
        assert rec.F((1,), (2,))(Fraction(1), Fraction(2)) == Fraction(3, 5)

    def test_independent_levy_area_moments(self):
        rec = StratonovichBMRecursion(np.eye(2))
        T = Fraction(1)
        assert rec.F((1, 2), (1, 2))(T, T) == Fraction(1, 2)
        assert rec.F((1, 2), (2, 1))(T, T) == 0

    def test_odd_initial_condition_integrates_the_mean(self):
        # E[S_(i)(l) * Ito part of S_(j1 j2 j3)(t)] = C int_0^{l^t} E[S_(j1 j2)(s)] ds
        #                                          = (l^t)^2 / (2 * 2!) for unit covariance.
        # The printed closed form (l^t)^{m-1} / (2^{m-1} (m-1)!) omits this integration.
        rec = StratonovichBMRecursion(np.eye(1))
        l, t = Fraction(1, 2), Fraction(1)
        g = rec.G((1,), (1, 1, 1))(l, t)
        assert g == Fraction(1, 16)
        printed = l / 2
        assert g != printed

    def test_mixed_parity_rejected(self):
        with pytest.raises(ValueError, match="parity"):
            strat_bm_moment_functions(CorrelationSpec.equicorrelated(2), ((1,), (1, 2)))

    def test_letters_checked(self):
        with pytest.raises(ValueError, match="letters"):
            strat_bm_moment_functions(CorrelationSpec.equicorrelated(2), ((3,), (1,)))

    def test_mean_and_anchor_correlation(self):
        C = CorrelationSpec.equicorrelated(1)
        M, second, first = strat_bm_moments(C, 2, exact=True)
        assert first[2] == Fraction(1, 2)
        assert strat_bm_mean((1, 1), C, 1.0) == 0.5
        assert M.correlation().values[0, 2] == pytest.approx(math.sqrt(3) / 3, abs=1e-15)

    @pytest.mark.parametrize("rho", [0.0, 0.6])
    def test_means_match_closed_form(self, rho):
        C = CorrelationSpec.equicorrelated(2, rho)
        M = strat_bm_moments(C, 4, T=2.0)
        for w in M.indexing.words:
            assert M.first_moments[M.indexing.index(w)] == pytest.approx(strat_bm_mean(w, C, 2.0), abs=1e-14)

    def test_odd_even_blocks_vanish(self):
        M = strat_bm_moments(CorrelationSpec.equicorrelated(2, 0.6), 4)
        o = M.orders
        mixed = (o[:, None] + o[None, :]) % 2 == 1
        assert np.all(M.values[mixed] == 0.0)

    def test_example_condition_vector(self):
        # active {(1),(2),(1,1),(1,2),(2,1),(2,2)} with signs (+,+,+,+,+,-), two decimals
        from siglasso.irrep import irrepresentable

        M = strat_bm_moments(CorrelationSpec.equicorrelated(2, 0.0), 4)
        active = [(1,), (2,), (1, 1), (1, 2), (2, 1), (2, 2)]
        rep = irrepresentable(M, active, [1, 1, 1, 1, 1, -1])
        expected = [0, 0.77, 0.5, 0, 0.5, 0.5, 0, 0.5, 0.77, 1.01, 0.73, 0.47, 0, 0.47, 0, 0.58, 0.73, 0.73, -0.58, 0, 0.47, 0, 0.47, 0.73, -1.01]
        np.testing.assert_allclose(np.round(rep.vector, 2), expected, atol=1e-12)

    def test_mc_agrees(self):
        C = CorrelationSpec.equicorrelated(2, 0.6)
        spec = ProcessSpec("brownian", C, 1.0, 200)
        mc = mc_signature_moments(spec, 2, "stratonovich", 20_000, SeededStream(2)).correlation().values
        exact = strat_bm_moments(C, 2).correlation().values
        assert np.max(np.abs(mc - exact)) < 0.08


class TestOrnsteinUhlenbeck:
    @pytest.mark.parametrize("kappa, T", [(0.5, 1.0), (1.0, 1.0), (4.0, 0.5), (2.0, 3.0)])
    def test_stable_form_matches_expanded(self, kappa, T):
        assert ou_1d_order0_order2_corr(kappa, T) == pytest.approx(ou_1d_order0_order2_corr_expanded(kappa, T), rel=1e-12)

    def test_small_kappa_limit_is_zero(self):
        assert abs(ou_1d_order0_order2_corr(1e-6)) < 1e-5
        # the expanded form loses every digit there
        assert ou_1d_order0_order2_corr(1e-3) == pytest.approx(-1e-3 / math.sqrt(2) * (1 - 1e-3 / 3), rel=1e-2)

    def test_large_kappa_limit(self):
        assert ou_1d_order0_order2_corr(1e4) == pytest.approx(-1.0, abs=1e-3)

    def test_stratonovich_constant(self):
        for k in (0.5, 1.0, 4.0):
            assert ou_1d_order0_order2_corr(k, convention="stratonovich") == pytest.approx(math.sqrt(3) / 3, abs=1e-15)

    def test_ito_mean(self):
        assert ou_1d_ito_mean_order2(1.0) == pytest.approx(-0.5 + (1 - math.exp(-2)) / 4)

    def test_variance(self):
        assert ou_variance(1.0, 1.0) == pytest.approx((1 - math.exp(-2)) / 2)
        assert ou_variance(0.0, 2.0) == 2.0

    def test_invalid(self):
        with pytest.raises(ValueError):
            ou_1d_order0_order2_corr(0.0)
        with pytest.raises(ValueError):
            ou_1d_order0_order2_corr(1.0, convention="linear")


class TestMomentMatrix:
    def test_csv_and_long(self):
        M = ito_bm_moments(CorrelationSpec.equicorrelated(2), 1)
        lines = M.to_csv().strip().splitlines()
        assert lines[0] == "word,(),(1),(2)"
        assert len(M.to_long().strip().splitlines()) == 1 + 9

    def test_parity_permutation(self):
        M = ito_bm_moments(CorrelationSpec.equicorrelated(2), 2)
        perm = M.parity_permutation()
        assert list(M.orders[perm]) == [1, 1, 0, 2, 2, 2, 2]

    def test_shape_checked(self):
        with pytest.raises(ValueError):
            MomentMatrix(enumerate_words(1, 1), np.eye(3), "covariance", np.zeros(2))

    def test_mc_thread_invariance(self):
        spec = ProcessSpec("ou", CorrelationSpec.equicorrelated(2, 0.3), 1.0, 20, {"kappa": 1.0})
        a = mc_signature_moments(spec, 2, "ito", 5000, SeededStream(9), threads=1)
        b = mc_signature_moments(spec, 2, "ito", 5000, SeededStream(9), threads=3)
        np.testing.assert_array_equal(a.values, b.values)
