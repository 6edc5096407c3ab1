import math
from fractions import Fraction

import pytest

from symrd import codec, errors
from symrd.converse import (
    converse_config,
    finite_n_lower_bound,
    replacement_radius,
)
from symrd.exactdist import conditional_tail_mean
from symrd.ldbounds import sandwich_constants
from symrd.rdsolve import rate_distortion

F = Fraction


@pytest.fixture(scope="module")
def cfg(binary):
    return converse_config(binary, 0.25)


class TestConfig:
    def test_epsilon_inside_window(self, binary, cfg):
        c = cfg.constants
        slope = rate_distortion(binary, 0.25).slope
        window = min(c.d1, float(binary.d_star) - c.d2, c.curvature_gap / (1 + abs(slope)))
        assert 0 < c.eps < window

    def test_residual_numerator_n_free(self, cfg):
        assert cfg.residual_numerator > 0
        # decomposition identity whenever the bound is nontrivial
        n = 10**30  # preconditions hold at absurdly large n
        bound = finite_n_lower_bound(cfg.pair, cfg.d, n, cfg)
        assert not bound.trivial
        assert abs(-bound.residual * n - cfg.residual_numerator) < 1e-6 * cfg.residual_numerator

    def test_eps_rejected_outside_window(self, binary):
        with pytest.raises(errors.EpsilonTooLarge):
            converse_config(binary, 0.25, eps=0.5)


class TestReplacementRadius:
    def test_arithmetic(self):
        r = replacement_radius(0.25, 1.0, 100)
        assert abs(r.imath - 0.26) < 1e-15
        assert abs(r.inflation - 0.01) < 1e-15

    def test_limit(self):
        assert replacement_radius(0.3, 5.0, 10**9).imath == pytest.approx(0.3, abs=1e-8)

    def test_negative_radius_rejected(self):
        with pytest.raises(errors.OutOfRange):
            replacement_radius(-0.1, 1.0, 10)

    def test_ball_mean_dominates_radius(self, binary):
        # the inflated ball's conditional mean distortion stays above the
        # nominal radius: E[d | ball(imath)] >= s, checked on the exact DP
        c = sandwich_constants(binary, 0.25)
        s = F(1, 4)
        for n in (c.n0, c.n0 + 37, 512):
            imath = s + Fraction(c.c_star).limit_denominator(10**9) / n
            imath = min(imath, F(1, 1))
            mean = -conditional_tail_mean(binary, n, -imath)
            assert mean >= s


class TestLowerBound:
    def test_trivial_at_desk_scale(self, binary, cfg):
        bound = finite_n_lower_bound(binary, 0.25, 4096, cfg)
        assert bound.trivial
        assert bound.binding
        assert bound.lower_rate_nats == rate_distortion(binary, 0.25).rate

    def test_bound_below_achievable(self, binary, cfg, binary_sweep):
        for n in (512, 1024, 2048, 4096):
            ach = binary_sweep.e_golomb_nats[n] / n
            bound = finite_n_lower_bound(binary, 0.25, n, cfg)
            assert bound.lower_rate_nats <= ach

    def test_decomposition_when_active(self, binary, cfg):
        n = 10**29
        bound = finite_n_lower_bound(binary, 0.25, n, cfg)
        assert not bound.trivial
        assert bound.lower_rate_nats == pytest.approx(
            bound.base + bound.half_log + bound.residual, abs=1e-18
        )
        assert bound.half_log == pytest.approx(math.log(n) / (2 * n), abs=1e-18)

    def test_gap_sequences_bounded(self, binary, cfg, binary_sweep):
        # both n * (gap to R + log n / 2n) sequences stay below n-free constants
        rate = rate_distortion(binary, 0.25).rate
        c = sandwich_constants(binary, 0.25)
        c0 = 2.0 + math.log(2.0) - math.log(c.m_lower)
        c_conv = cfg.residual_numerator
        for n in range(c.n0, 4097):
            ach = binary_sweep.e_golomb_nats[n]
            assert ach - n * rate - 0.5 * math.log(n) <= c0
            bound = finite_n_lower_bound(binary, 0.25, n, cfg)
            conv_gap = n * (rate + math.log(n) / (2 * n) - bound.lower_rate_nats)
            assert conv_gap <= c_conv
