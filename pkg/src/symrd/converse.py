"""Finite-blocklength lower bound on the rate of average-distortion schemes.

The computable bound assembled here is

    R >= R(D) + log(n)/(2n) - log(m_upper_eps)/n - |R'(D)| c_star_eps / n,

valid once (i) epsilon sits inside its admissibility window, (ii)
log(n)/(2n) < epsilon, and (iii) the replacement radius
``epsilon + c_star_eps/n`` stays below the left flank D1.  Two further
terms in the full chain are provably nonnegative under (i)-(iii) and are
dropped, so the bound is always valid, sometimes loose.  When a
precondition fails the trivial bound R >= R(D) is returned with the bound
flagged and the binding preconditions listed; no exception is raised, so
sweeps can gate on the flag.

The residual numerator ``log(m_upper_eps) + |R'(D)| c_star_eps`` is
blocklength-free and is reported so that sweeps can verify that
``n * (R(D) + log(n)/(2n) - bound)`` never exceeds it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .errors import OutOfRange
from .ldbounds import EpsilonConstants, epsilon_constants
from .model import SymmetricPair
from .rdsolve import rate_distortion


@dataclass(frozen=True)
class ConverseConfig:
    pair: SymmetricPair
    d: float
    constants: EpsilonConstants

    @property
    def residual_numerator(self) -> float:
        """n-free numerator of the O(1/n) residual."""
        slope = rate_distortion(self.pair, self.d).slope
        return math.log(self.constants.m_upper_eps) + abs(slope) * self.constants.c_star_eps


@dataclass(frozen=True)
class ConverseBound:
    n: int
    lower_rate_nats: float
    base: float  # R(D)
    half_log: float  # log(n) / (2n), zero on the trivial branch
    residual: float  # -(residual numerator)/n, zero on the trivial branch
    trivial: bool
    binding: tuple[str, ...]  # preconditions that failed, if any


@dataclass(frozen=True)
class ReplacementRadius:
    s: float
    imath: float

    @property
    def inflation(self) -> float:
        return self.imath - self.s


def converse_config(
    pair: SymmetricPair,
    d,
    eps: Optional[float] = None,
    d1: Optional[float] = None,
    d2: Optional[float] = None,
    *,
    grid_points: int = 1024,
) -> ConverseConfig:
    """Assemble the epsilon window, curvature gap and suprema constants.

    Default epsilon is 0.9 of the admissible upper end, which maximizes the
    range of n where the nontrivial bound applies.
    """
    consts = epsilon_constants(pair, d, eps, d1, d2, grid_points=grid_points)
    return ConverseConfig(pair=pair, d=float(d), constants=consts)


def replacement_radius(s: float, c_star_eps: float, n: int) -> ReplacementRadius:
    """Radius inflation s -> s + c_star_eps / n used in the ball replacement."""
    if s < 0:
        raise OutOfRange(f"radius must be nonnegative, got {s}")
    return ReplacementRadius(s=float(s), imath=float(s) + c_star_eps / n)


def finite_n_lower_bound(
    pair: SymmetricPair,
    d,
    n: int,
    config: Optional[ConverseConfig] = None,
) -> ConverseBound:
    """Lower bound on the operational rate at blocklength ``n``."""
    if n < 1:
        raise OutOfRange(f"blocklength must be >= 1, got {n}")
    config = config or converse_config(pair, d)
    point = rate_distortion(pair, d)
    consts = config.constants

    binding = []
    half_log = math.log(n) / (2.0 * n)
    if not half_log < consts.eps:
        binding.append("log(n)/(2n) < eps")
    radius = replacement_radius(consts.eps, consts.c_star_eps, n)
    if not radius.imath < consts.d1:
        binding.append("imath(eps) < D1")

    if binding:
        return ConverseBound(
            n=n,
            lower_rate_nats=point.rate,
            base=point.rate,
            half_log=0.0,
            residual=0.0,
            trivial=True,
            binding=tuple(binding),
        )

    residual = -config.residual_numerator / n
    return ConverseBound(
        n=n,
        lower_rate_nats=point.rate + half_log + residual,
        base=point.rate,
        half_log=half_log,
        residual=residual,
        trivial=False,
        binding=(),
    )
