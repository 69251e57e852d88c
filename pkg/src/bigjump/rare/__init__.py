"""Conditioned rare events: importance sampling, limit checks and the trajectory decomposition."""

from .decomposition import (
    ConditionedSample,
    DecompositionReport,
    MuTheta,
    Probe,
    collect,
    decomposition_test,
    default_probes,
    jump_size_test,
    mu_theta,
    pi_distribution,
    pi_theoretical,
    single_jump_diagnostics,
)
from .importance import (
    EventSpec,
    ISConfig,
    WeightedSample,
    default_config,
    is_event_prob,
    is_expectation,
    naive_event_prob,
    weighted_samples,
)
from .ks import normal_ks, weighted_ks
from .theorem import RatioRecord, local_limit_check, theorem1_check, theorem1_rhs
