"""Exact finite-blocklength redundancy experiments for symmetric rate-distortion."""

from .codec import (
    decode,
    elias_delta_decode,
    elias_delta_encode,
    encode,
    expected_length_exact,
    golomb_decode,
    golomb_encode,
    golomb_parameter,
    index_distribution,
)
from .converse import converse_config, finite_n_lower_bound, replacement_radius
from .exactdist import (
    ball_probability,
    ball_smallest_oracle,
    conditional_tail_mean,
    spectrum,
)
from .ldbounds import (
    epsilon_constants,
    gibbs_constant,
    rate_function,
    sandwich,
    tilting_thresholds,
)
from .model import (
    SymmetricPair,
    binary_hamming,
    block_distortion,
    hamming,
    load_pair,
    ternary_hamming,
    tilted_channel,
    tilted_mean,
    validate_pair,
)
from .rdsolve import (
    blahut_arimoto,
    curvature_certificate,
    rate_distortion,
    solve_lambda_star,
    supporting_line_gap,
)

__version__ = "0.1.0"

__all__ = [
    "SymmetricPair",
    "ball_probability",
    "ball_smallest_oracle",
    "binary_hamming",
    "blahut_arimoto",
    "block_distortion",
    "conditional_tail_mean",
    "converse_config",
    "curvature_certificate",
    "decode",
    "elias_delta_decode",
    "elias_delta_encode",
    "encode",
    "epsilon_constants",
    "expected_length_exact",
    "finite_n_lower_bound",
    "gibbs_constant",
    "golomb_decode",
    "golomb_encode",
    "golomb_parameter",
    "hamming",
    "index_distribution",
    "load_pair",
    "rate_distortion",
    "rate_function",
    "replacement_radius",
    "sandwich",
    "solve_lambda_star",
    "spectrum",
    "supporting_line_gap",
    "ternary_hamming",
    "tilted_channel",
    "tilted_mean",
    "tilting_thresholds",
    "validate_pair",
    "__version__",
]
