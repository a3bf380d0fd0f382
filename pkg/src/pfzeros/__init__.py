"""pfzeros: complex partition-function zeroes of Ising models through
simulated quantum measurement protocols."""

from .circuits import (
    Circuit,
    Gate,
    GadgetParams,
    QubitRole,
    ResourceCounts,
    compile_general,
    compile_kicked,
    gadget_params_coupling,
    gadget_params_field,
    kick_field_for_ky,
    kicked_log_factor,
    ky_for_kick_field,
    ky_to_kick_field,
    resource_counts,
)
from .correlations import (
    CorrelationEstimate,
    KickedSetup,
    ProbeSpec,
    corr_cross_row,
    corr_norm_ratio,
    corr_same_row,
    probe_sign_table,
)
from .errors import CapExceededError, ConvergenceError, IllConditionedError, PfzError
from .evaluators import (
    DosFisherEvaluator,
    DosLeeYangEvaluator,
    KickedCalibration,
    KickedProbabilityEvaluator,
    ScaledZEvaluator,
    TransferFisherEvaluator,
    calibrate_kicked_relation,
)
from .model import (
    Bond,
    FieldTerm,
    IsingModel,
    build_chain,
    build_cylinder,
    from_edge_list,
    model_from_json,
    with_bond_delta,
    with_field_delta,
)
from .noise import (
    DetectabilityReport,
    NoisyGrid,
    detectability,
    error_stats,
    noisy_scan,
)
from .oracle import (
    DensityOfStates,
    LogComplex,
    brute_force_Z,
    brute_force_Z_with_scale,
    cached_density_of_states,
    correlation,
    density_of_states,
    transfer_matrix_Z,
)
from .statevector import (
    OverlapResult,
    StateVector,
    apply_gate,
    dump_state,
    load_state,
    measurement_basis,
    run_effective,
    run_full,
    run_streamed,
    sample_shots,
)
from .zeros import (
    GridSpec,
    MinimumCandidate,
    ScanGrid,
    ZeroEstimate,
    find_minima,
    map_roots,
    polynomial_roots,
    refine_newton,
    rescale_from_x,
    roots_of_polynomial,
    scan,
    unit_circle_distance,
)

__version__ = "0.1.0"
