import math

import numpy as np
import pytest
import scipy.special
from numpy.testing import assert_allclose

import polyspec
from abstract import DomainError, ParameterError


class TestGaussJacobiRule:

    def test_one_point_legendre(self):
        rule = polyspec.gauss_jacobi_rule(1, 2)
        assert_allclose(rule.nodes, [0.0], atol=1e-15)
        assert_allclose(rule.weights, [2.0], rtol=1e-14)

    def test_two_point_legendre(self):
        rule = polyspec.gauss_jacobi_rule(2, 2)
        assert_allclose(rule.nodes, [-1 / math.sqrt(3), 1 / math.sqrt(3)], rtol=1e-14)
        assert_allclose(rule.weights, [1.0, 1.0], rtol=1e-14)

    def test_total_weight_n4(self):
        rule = polyspec.gauss_jacobi_rule(1, 4)
        assert rule.weights.sum() == pytest.approx(4 / 3, rel=1e-14)

    @pytest.mark.parametrize('n', [2, 3, 4, 6])
    @pytest.mark.parametrize('m', [1, 3, 8, 15])
    def test_exact_on_even_monomials(self, m, n):
        rule = polyspec.gauss_jacobi_rule(m, n)
        a = (n - 2) / 2
        for j in range(m):
            exact = scipy.special.beta(j + 0.5, a + 1)
            assert rule.integrate(rule.nodes ** (2 * j)) == pytest.approx(exact, rel=1e-13)
        assert abs(rule.integrate(rule.nodes ** (2 * m - 1))) < 1e-13

    def test_nodes_increasing_interior_weights_positive(self):
        rule = polyspec.gauss_jacobi_rule(20, 3)
        assert np.all(np.diff(rule.nodes) > 0)
        assert np.all(np.abs(rule.nodes) < 1)
        assert np.all(rule.weights > 0)

    def test_rejects_bad_arguments(self):
        with pytest.raises(ParameterError):
            polyspec.gauss_jacobi_rule(0, 2)
        with pytest.raises(ParameterError):
            polyspec.gauss_jacobi_rule(3, 1)


class TestGegenbauer:

    def test_examples(self):
        assert polyspec.gegenbauer_eval(1, 5, 0.3) == pytest.approx(0.3, abs=1e-15)
        assert polyspec.gegenbauer_eval(2, 2, 0.0) == pytest.approx(-0.5, abs=1e-15)
        assert polyspec.gegenbauer_eval(7, 3, 1.0) == pytest.approx(1.0, abs=1e-14)
        assert polyspec.gegenbauer_eval(3, 4, -1.0) == pytest.approx(-1.0, abs=1e-14)

    @pytest.mark.parametrize('n', [2, 3, 5])
    def test_second_mode_formula(self, n):
        t = np.linspace(-1, 1, 41)
        assert_allclose(polyspec.gegenbauer_eval(2, n, t), ((n + 1) * t ** 2 - 1) / n, atol=1e-14)

    def test_outside_interval(self):
        with pytest.raises(DomainError):
            polyspec.gegenbauer_eval(2, 2, 1.5)
        with pytest.raises(DomainError):
            polyspec.gegenbauer_deriv(2, 2, np.array([0.0, -1.01]))

    @pytest.mark.parametrize('n', [2, 3, 4, 7])
    def test_parity(self, n):
        t = np.linspace(-1, 1, 101)
        for k in range(12):
            assert_allclose(polyspec.gegenbauer_eval(k, n, -t), (-1) ** k * polyspec.gegenbauer_eval(k, n, t),
                            atol=1e-13)

    def test_derivative_examples(self):
        assert polyspec.gegenbauer_deriv(1, 4, 0.7) == pytest.approx(1.0)
        assert polyspec.gegenbauer_deriv(2, 3, 0.0) == pytest.approx(0.0, abs=1e-15)
        assert polyspec.gegenbauer_deriv(2, 2, -1.0) == pytest.approx(-3.0)

    @pytest.mark.parametrize('k,n', [(2, 2), (3, 3), (5, 4), (6, 2)])
    def test_endpoint_ratio(self, k, n):
        ratio = polyspec.gegenbauer_deriv(k, n, -1.0) / polyspec.gegenbauer_eval(k, n, -1.0)
        assert ratio == pytest.approx(-k * (k + n - 1) / n, rel=1e-12)

    def test_derivative_against_differences(self):
        t = np.linspace(-0.9, 0.9, 19)
        h = 1e-6
        numeric = (polyspec.gegenbauer_eval(6, 3, t + h) - polyspec.gegenbauer_eval(6, 3, t - h)) / (2 * h)
        assert_allclose(polyspec.gegenbauer_deriv(6, 3, t), numeric, atol=1e-7)

    @pytest.mark.parametrize('n', [2, 4, 6])
    @pytest.mark.parametrize('k', [1, 2, 3, 4])
    def test_rodrigues_differs_by_a_constant(self, k, n):
        t = np.linspace(-0.95, 0.95, 39)
        recurrence = polyspec.gegenbauer_eval(k, n, t)
        keep = np.abs(recurrence) > 0.05
        ratio = polyspec.rodrigues_eval(k, n, t[keep]) / recurrence[keep]
        assert_allclose(ratio, ratio[0], rtol=1e-12)

    def test_rodrigues_first_mode(self):
        assert polyspec.rodrigues_eval(1, 4, 0.5) == pytest.approx(4 / 2 * 0.5)


class TestZeros:

    def test_examples(self):
        assert_allclose(polyspec.gegenbauer_zeros(1, 5), [0.0], atol=1e-15)
        assert_allclose(polyspec.gegenbauer_zeros(2, 3), [-0.5, 0.5], atol=1e-14)

    def test_interlacing(self):
        five = polyspec.gegenbauer_zeros(5, 2)
        six = polyspec.gegenbauer_zeros(6, 2)
        assert len(six) == 6
        assert np.all(six[:-1] < five) and np.all(five < six[1:])

    @pytest.mark.parametrize('n', [2, 3, 4, 6])
    def test_simple_zeros_up_to_20(self, n):
        previous = None
        for k in range(1, 21):
            zeros = polyspec.gegenbauer_zeros(k, n)
            assert len(zeros) == k
            assert np.all(np.abs(zeros) < 1)
            assert_allclose(zeros, -zeros[::-1], atol=1e-14)
            gaps = np.diff(np.concatenate(([-1.0], zeros, [1.0])))
            eps = 1e-3 * gaps.min()
            left = polyspec.gegenbauer_eval(k, n, zeros - eps)
            right = polyspec.gegenbauer_eval(k, n, zeros + eps)
            assert np.all(np.sign(left) != np.sign(right))
            if previous is not None:
                assert np.all(zeros[:-1] < previous) and np.all(previous < zeros[1:])
            previous = zeros

    def test_rejects_mode_zero(self):
        with pytest.raises(ParameterError):
            polyspec.gegenbauer_zeros(0, 2)


class TestIntegrals:

    def test_weighted_inner_examples(self):
        p1 = lambda t: polyspec.gegenbauer_eval(1, 2, t)
        p2 = lambda t: polyspec.gegenbauer_eval(2, 2, t)
        one = lambda t: np.ones_like(t)
        assert abs(polyspec.weighted_inner(p1, p2, 2, 3)) < 1e-15
        assert polyspec.weighted_inner(p1, p1, 2, 2) == pytest.approx(2 / 3, rel=1e-14)
        assert polyspec.weighted_inner(one, one, 4, 1) == pytest.approx(4 / 3, rel=1e-14)

    @pytest.mark.parametrize('n', [2, 3, 5])
    def test_orthogonality(self, n):
        for j in range(16):
            for k in range(j + 1, 16):
                value = polyspec.weighted_inner(lambda t: polyspec.gegenbauer_eval(j, n, t),
                                                lambda t: polyspec.gegenbauer_eval(k, n, t), n, j + k + 2)
                assert abs(value) < 1e-12

    def test_cube_integral_examples(self):
        assert abs(polyspec.cube_integral(3, 5)) < 1e-12
        assert polyspec.cube_integral(2, 2) == pytest.approx(4 / 35, rel=1e-13)
        assert polyspec.cube_integral(2, 4) == pytest.approx(2 / 63, rel=1e-13)

    def test_cube_integral_sign_law(self):
        for n in range(2, 9):
            for k in range(1, 13):
                value = polyspec.cube_integral(k, n)
                if k % 2:
                    assert abs(value) < 1e-12
                else:
                    assert value > 0

    def test_norm_sq(self):
        assert polyspec.norm_sq(2, 2) == pytest.approx(2 / 5, rel=1e-14)
        assert polyspec.norm_sq(1, 2) == pytest.approx(2 / 3, rel=1e-14)


class TestLinearization:

    def test_first_mode(self):
        expansion = polyspec.linearization_coeffs(1, 2)
        assert_allclose(expansion.coeffs, [1 / 3, 0.0, 2 / 3], atol=1e-14)

    @pytest.mark.parametrize('k,n', [(1, 2), (2, 3), (4, 2), (5, 6)])
    def test_sum_and_reconstruction(self, k, n):
        expansion = polyspec.linearization_coeffs(k, n)
        assert expansion.coeffs.sum() == pytest.approx(1.0, abs=1e-12)
        assert expansion.coeffs[0] > 0
        assert_allclose(expansion.coeffs[1::2], 0.0, atol=1e-13)
        assert expansion.reconstruction_error() < 1e-10

    def test_zero_coefficient_positive(self):
        assert polyspec.linearization_coeffs(2, 3).coeffs[0] > 0


class TestRecurrenceReport:

    def test_projection_side_for_2_2(self):
        report = polyspec.gasper_recurrence_report(2, 2)
        assert report.projection_even_positive
        assert len(report.d) == 5
        assert report.d[0] == pytest.approx(report.projection[0])
        assert len(report.d_signs) == 5
        # odd coefficients of a square vanish, starting with d_1
        assert report.d_signs[:2] == '+0'
        assert not report.all_d_positive

    def test_q_single_sign_change(self):
        report = polyspec.gasper_recurrence_report(3, 3)
        assert report.q_positive_sign_changes == 1

    def test_consistency_flag_is_reported(self):
        report = polyspec.gasper_recurrence_report(1, 2)
        assert isinstance(report.consistent, bool)
        assert_allclose(report.projection, polyspec.linearization_coeffs(1, 2).coeffs)
