import math
from dataclasses import dataclass, field
from fractions import Fraction

import pytest

from symrd import codec
from symrd.exactdist import SpectrumAccumulator
from symrd.model import binary_hamming, ternary_hamming

LN2 = math.log(2.0)

D_MAIN = Fraction(1, 4)
D_LOW = Fraction(1, 10)
D_HIGH = Fraction(2, 5)
N_MAX = 4096
N_SANDWICH = 2048
N_GIBBS = 512
DOUBLING_GRID = (64, 128, 256, 512, 1024, 2048, 4096)


@pytest.fixture(scope="session")
def binary():
    return binary_hamming()


@pytest.fixture(scope="session")
def ternary():
    return ternary_hamming()


@pytest.fixture(scope="session")
def straightline_scheme():
    from symrd.experiments import build_straightline_scheme

    return build_straightline_scheme()


@dataclass
class BinarySweep:
    """Per-blocklength exact quantities for the binary Hamming pair.

    One incremental spectrum pass to N_MAX feeds every acceptance
    criterion that sweeps n; probabilities are stored as exact log values
    (counts are exact integers, so the logs are correct to float
    precision).
    """

    log_p_main: dict = field(default_factory=dict)  # D=1/4, n in [64, N_MAX]
    log_p_low: dict = field(default_factory=dict)  # D=1/10, n in [64, N_SANDWICH]
    log_p_high: dict = field(default_factory=dict)  # D=2/5, n in [64, N_SANDWICH]
    e_golomb_nats: dict = field(default_factory=dict)  # D=1/4, n in [418, N_MAX] + grid
    e_elias_nats: dict = field(default_factory=dict)  # D=1/4, doubling grid
    cond_mean_main: dict = field(default_factory=dict)  # D=1/4, n in [418, N_GIBBS]


def _ball_stats(row, m):
    count = 0
    weighted = 0
    for t, c in enumerate(row[: m + 1]):
        count += c
        weighted += t * c
    return count, weighted


@pytest.fixture(scope="session")
def binary_sweep(binary):
    sweep = BinarySweep()
    acc = SpectrumAccumulator(binary)
    ln2 = math.log(2.0)
    for n in range(1, N_MAX + 1):
        acc.step()
        row = acc.counts
        if n < 64:
            continue
        m_main = n // 4
        count, weighted = _ball_stats(row, m_main)
        log_p = math.log(count) - n * ln2
        sweep.log_p_main[n] = log_p
        if n <= N_SANDWICH:
            c_low, _ = _ball_stats(row, n // 10)
            c_high, _ = _ball_stats(row, (2 * n) // 5)
            sweep.log_p_low[n] = math.log(c_low) - n * ln2
            sweep.log_p_high[n] = math.log(c_high) - n * ln2
        need_golomb = n >= 418 or n in DOUBLING_GRID
        if need_golomb:
            p = Fraction(count, 1 << n)
            m = codec.golomb_parameter(p)
            sweep.e_golomb_nats[n] = codec.golomb_expected_bits(p, m) * LN2
            if n in DOUBLING_GRID:
                sweep.e_elias_nats[n] = codec.elias_delta_expected_bits(p) * LN2
        if 418 <= n <= N_GIBBS:
            sweep.cond_mean_main[n] = -Fraction(weighted, n * count)
    return sweep
