import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from symrd import errors
from symrd.rdsolve import (
    blahut_arimoto,
    blahut_arimoto_pair,
    cumulant,
    curvature_certificate,
    rate_distortion,
    solve_lambda_star,
    supporting_line_gap,
)

LN2 = math.log(2.0)


def h_nats(p):
    return -(p * math.log(p) + (1 - p) * math.log(1 - p))


def binary_rate(d):
    return LN2 - h_nats(d)


def ternary_rate(d):
    return math.log(3) - h_nats(d) - d * LN2


class TestLambdaStar:
    def test_binary_quarter(self, binary):
        assert abs(solve_lambda_star(binary, 0.25) - math.log(3)) < 1e-10

    def test_ternary_third(self, ternary):
        assert abs(solve_lambda_star(ternary, 1 / 3) - math.log(4)) < 1e-10

    def test_near_cutoff(self, binary):
        lam = solve_lambda_star(binary, 0.5 - 1e-9)
        assert abs(lam - 4e-9) < 2e-10  # mean slope at zero tilt is -1/4

    def test_out_of_range(self, binary):
        for d in (0.0, 0.5, 0.7, -0.1):
            with pytest.raises(errors.OutOfRange):
                solve_lambda_star(binary, d)

    @given(st.floats(0.01, 0.99))
    @settings(max_examples=40, deadline=None)
    def test_solution_matches_closed_form(self, frac):
        from symrd.model import binary_hamming, tilted_mean

        pair = binary_hamming()
        d = 0.5 * frac
        lam = solve_lambda_star(pair, d)
        assert abs(tilted_mean(pair, lam) - d) <= 1e-12 * d


class TestRateDistortion:
    def test_binary_closed_form_grid(self, binary):
        for i in range(1, 21):
            d = 0.5 * i / 21
            assert abs(rate_distortion(binary, d).rate - binary_rate(d)) < 1e-12

    def test_ternary_closed_form_grid(self, ternary):
        for i in range(1, 21):
            d = (2 / 3) * i / 21
            assert abs(rate_distortion(ternary, d).rate - ternary_rate(d)) < 1e-12

    def test_slope_is_minus_lambda(self, binary):
        pt = rate_distortion(binary, 0.25)
        assert pt.slope == -pt.lambda_star
        assert abs(pt.slope + math.log(3)) < 1e-10

    def test_rate_vanishes_at_cutoff(self, binary):
        assert rate_distortion(binary, 0.5 - 1e-9).rate < 1e-8

    def test_memoized(self, binary):
        a = rate_distortion(binary, 0.3)
        b = rate_distortion(binary, 0.3)
        assert a is b

    def test_slope_matches_finite_difference(self, binary, ternary):
        for pair in (binary, ternary):
            d_star = float(pair.d_star)
            h = 1e-6 * d_star
            for i in (2, 5, 8):
                d = d_star * i / 11
                pt = rate_distortion(pair, d)
                fd = (
                    rate_distortion(pair, d + h).rate
                    - rate_distortion(pair, d - h).rate
                ) / (2 * h)
                assert abs(fd - pt.slope) < 1e-5

    def test_convexity_midpoints(self, binary, ternary):
        for pair in (binary, ternary):
            d_star = float(pair.d_star)
            grid = [d_star * i / 13 for i in range(1, 13)]
            for a, b in zip(grid, grid[2:]):
                mid = rate_distortion(pair, (a + b) / 2).rate
                chord = 0.5 * (
                    rate_distortion(pair, a).rate + rate_distortion(pair, b).rate
                )
                assert mid <= chord + 1e-10


class TestCumulant:
    def test_values(self, binary, ternary):
        assert cumulant(binary, 0.0) == 0.0
        assert abs(cumulant(binary, math.log(3)) - math.log(2 / 3)) < 1e-14
        assert abs(cumulant(ternary, math.log(4)) - math.log(0.5)) < 1e-14

    def test_convex_on_grid(self, ternary):
        grid = [0.1 * i for i in range(40)]
        vals = [cumulant(ternary, lam) for lam in grid]
        for a, b, c in zip(vals, vals[1:], vals[2:]):
            assert b <= (a + c) / 2 + 1e-12


class TestBlahutArimoto:
    def test_matches_closed_form(self):
        ba = blahut_arimoto([0.5, 0.5], [[0, 1], [1, 0]], -math.log(3))
        assert abs(ba.distortion - 0.25) < 1e-8
        assert abs(ba.rate - binary_rate(0.25)) < 1e-8

    def test_near_cutoff_rate_small(self):
        ba = blahut_arimoto([0.5, 0.5], [[0, 1], [1, 0]], -1e-6)
        assert ba.rate <= 1e-6

    def test_pair_grid_agreement(self, binary, ternary):
        for pair in (binary, ternary):
            d_star = float(pair.d_star)
            for i in range(1, 21):
                d = d_star * i / 21
                pt = rate_distortion(pair, d)
                ba = blahut_arimoto_pair(pair, pt.slope)
                assert abs(ba.rate - pt.rate) < 1e-7
                assert abs(ba.distortion - d) < 1e-7

    def test_general_asymmetric_source(self):
        # skewed source on a Hamming matrix: still a valid parametric point
        ba = blahut_arimoto([0.8, 0.2], [[0, 1], [1, 0]], -1.0, tol=1e-12)
        assert 0 < ba.distortion < 0.2
        assert ba.rate > 0
        assert ba.gap <= 1e-12

    def test_nonconvergence_raises(self):
        with pytest.raises(errors.NonConvergence):
            blahut_arimoto(
                [0.5, 0.5],
                [[0, 1, 0.4], [1, 0, 0.4]],
                -0.8217,  # essentially the critical slope of this instance
                iters=50,
                tol=1e-13,
            )

    def test_positive_slope_rejected(self):
        with pytest.raises(errors.OutOfRange):
            blahut_arimoto([0.5, 0.5], [[0, 1], [1, 0]], 0.5)

    def test_distortion_targeting(self):
        from symrd.rdsolve import blahut_arimoto_at_distortion

        pt = blahut_arimoto_at_distortion([0.5, 0.5], [[0, 1], [1, 0]], 0.25)
        assert abs(pt.distortion - 0.25) < 1e-9
        assert abs(pt.rate - binary_rate(0.25)) < 1e-7


class TestCurvature:
    def test_defaults_positive(self, binary, ternary):
        for pair in (binary, ternary):
            d_star = float(pair.d_star)
            for i in (2, 5, 8):
                cert = curvature_certificate(pair, d_star * i / 11)
                assert cert.gap > 0

    def test_known_value(self, binary):
        cert = curvature_certificate(binary, 0.25, 0.125, 0.375)
        gap1 = binary_rate(0.125) - binary_rate(0.25) - (-math.log(3)) * (-0.125)
        gap2 = binary_rate(0.375) - binary_rate(0.25) - (-math.log(3)) * (0.125)
        assert abs(cert.gap - min(gap1, gap2)) < 1e-12

    def test_flanks_must_straddle(self, binary):
        with pytest.raises(errors.OutOfRange):
            curvature_certificate(binary, 0.25, 0.25, 0.375)

    def test_supporting_line_gap_dominates(self, binary):
        cert = curvature_certificate(binary, 0.25)
        for d_hat in (0.05, 0.1, cert.d1, 0.45, 0.5):
            gap = supporting_line_gap(binary, 0.25, d_hat, cert)
            assert gap >= cert.gap - 1e-9

    def test_supporting_line_gap_at_cutoff(self, binary):
        cert = curvature_certificate(binary, 0.25)
        pt = rate_distortion(binary, 0.25)
        gap = supporting_line_gap(binary, 0.25, 0.5, cert)
        assert abs(gap - (-pt.rate - pt.slope * 0.25)) < 1e-10

    def test_inside_window_rejected(self, binary):
        cert = curvature_certificate(binary, 0.25)
        with pytest.raises(errors.OutOfRange):
            supporting_line_gap(binary, 0.25, 0.3, cert)

    @given(st.floats(0.05, 0.45))
    @settings(max_examples=30, deadline=None)
    def test_rate_function_dominance(self, d):
        # Legendre value equals the curve for symmetric pairs
        from symrd.ldbounds import rate_function
        from symrd.model import binary_hamming

        pair = binary_hamming()
        ev = rate_function(pair, d)
        assert abs(ev.rate - rate_distortion(pair, d).rate) <= 1e-10
