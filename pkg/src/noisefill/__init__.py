"""Masking-noise budget allocation for parallel leaky channels.

Models side-channel observations as parallel Gaussian subchannels
``Y_i = X_i + Z_i + N_i`` (signal power ``P_i``, device noise variance
``Z_i``, added masking noise variance ``N_i``) and allocates a masking
budget ``sum(N) = N0`` to minimize what an attacker can learn.

Conventions: all mutual information values are in nats with the
one-half prefactor, ``0.5 * log(1 + snr)``; Fano bounds convert to bits
internally.  All randomness flows through named substreams of a single
master seed (see :mod:`noisefill.seeds`).
"""

from .allocators import (
    NonConvexInstanceError,
    NonConvexityWarning,
    SolveOptions,
    SolverError,
    allocate_arbitrary_total,
    allocate_gaussian_total,
    allocate_minimax,
    allocate_sibson_total,
    allocate_uniform,
    make_solver,
    oracle_solve,
    write_allocation_csv,
)
from .channels import (
    LeakageReport,
    NoiseAllocation,
    SubchannelSet,
    fano_pe_lower,
    gaussian_mi,
    read_channels_csv,
    sibson_mi,
    snr,
    write_channels_csv,
)
from .convexity import (
    UnsupportedModelError,
    check_c1,
    check_c3,
    convexity_boundary,
    fisher_information,
    second_derivative_mi,
)
from .evaluation import (
    UnreachableTargetError,
    budget_for_reduction,
    evaluate,
    noise_savings,
    objective_value,
    run_sweep,
    sample_instance,
    write_sweep_csv,
)
from .inputs import (
    BinaryInput,
    ExponentialInput,
    ExtrapolationWarning,
    GaussianInput,
    InputModel,
    QuadratureError,
    TabulatedInput,
    immse_integral,
    low_snr_mmse,
    make_model,
    mmse,
    mutual_info,
)
from .sca import (
    AES_SBOX,
    AttackConfig,
    AttackResult,
    TraceFormatError,
    TraceSet,
    aes_sbox,
    attack_channels,
    generate_traces,
    inject_noise,
    leakage_bit,
    mia_attack,
    read_traces,
    success_rate,
    write_traces,
)
from .seeds import stream_keys, substream

__version__ = "0.1.0"

__all__ = [
    "AES_SBOX",
    "AttackConfig",
    "AttackResult",
    "BinaryInput",
    "ExponentialInput",
    "ExtrapolationWarning",
    "GaussianInput",
    "InputModel",
    "LeakageReport",
    "NoiseAllocation",
    "NonConvexInstanceError",
    "NonConvexityWarning",
    "QuadratureError",
    "SolveOptions",
    "SolverError",
    "SubchannelSet",
    "TabulatedInput",
    "TraceFormatError",
    "TraceSet",
    "UnreachableTargetError",
    "UnsupportedModelError",
    "aes_sbox",
    "allocate_arbitrary_total",
    "allocate_gaussian_total",
    "allocate_minimax",
    "allocate_sibson_total",
    "allocate_uniform",
    "attack_channels",
    "budget_for_reduction",
    "check_c1",
    "check_c3",
    "convexity_boundary",
    "evaluate",
    "fano_pe_lower",
    "fisher_information",
    "gaussian_mi",
    "generate_traces",
    "immse_integral",
    "inject_noise",
    "leakage_bit",
    "low_snr_mmse",
    "make_model",
    "make_solver",
    "mia_attack",
    "mmse",
    "mutual_info",
    "noise_savings",
    "objective_value",
    "oracle_solve",
    "read_channels_csv",
    "read_traces",
    "run_sweep",
    "sample_instance",
    "second_derivative_mi",
    "sibson_mi",
    "snr",
    "stream_keys",
    "substream",
    "success_rate",
    "write_allocation_csv",
    "write_channels_csv",
    "write_sweep_csv",
    "write_traces",
]
