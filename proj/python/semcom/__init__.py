"""Collaborative semantic communication simulator (C++ core)."""

from ._core import (
    DivergenceError,
    FormatError,
    ShapeError,
    ValidationError,
    coordinate_bits,
    default_config,
    generate_dataset,
    mac_equal_rate_capacity,
    selfcheck,
    snr_to_sigma2,
    sweep,
    top1_accuracy,
    transmit_noma,
    validate_config,
)

__all__ = [
    "DivergenceError",
    "FormatError",
    "ShapeError",
    "ValidationError",
    "coordinate_bits",
    "default_config",
    "generate_dataset",
    "mac_equal_rate_capacity",
    "selfcheck",
    "snr_to_sigma2",
    "sweep",
    "top1_accuracy",
    "transmit_noma",
    "validate_config",
]
