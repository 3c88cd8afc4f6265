"""Photon-pair generation and entanglement in pumped waveguide arrays."""

from ._wgarray import (
    ConfigError,
    InvalidParameter,
    InvariantViolation,
    MomentSystem,
    NumericalFailure,
    SimParams,
    __version__,
    bessel_j,
    classify_growth,
    entanglement_map,
    list_experiments,
    log_negativity,
    memory_identity_residual,
    pair_log_negativity,
    photon_profile,
    run_experiment,
    stationary_logneg,
    survival_distance,
)

__all__ = [
    "ConfigError",
    "InvalidParameter",
    "InvariantViolation",
    "MomentSystem",
    "NumericalFailure",
    "SimParams",
    "__version__",
    "bessel_j",
    "classify_growth",
    "entanglement_map",
    "list_experiments",
    "log_negativity",
    "memory_identity_residual",
    "pair_log_negativity",
    "photon_profile",
    "run_experiment",
    "stationary_logneg",
    "survival_distance",
]
