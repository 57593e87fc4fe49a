"""Low-rank completion of two-particle reduced density matrices."""

from .bundle import Bundle, bundle_hash, load_bundle, save_bundle
from .coherence import (
    RotationBasis,
    coherence,
    haar_orthogonal,
    minimize_coherence,
    mu_after,
    rotate_integrals,
    rotate_sector,
    rotate_set,
    sector_modes,
)
from .completion import (
    CompletionConfig,
    CompletionResult,
    FsampleSearch,
    SampleSet,
    complete,
    default_grid,
    find_fsample,
    full_sample,
    info_bound,
    sample_uniform,
    trial_seed,
)
from .errors import (
    BudgetCap,
    BundleFormatError,
    DimensionMismatch,
    ModeMismatch,
    NoFeasiblePoint,
    NonFiniteObjective,
    OptimizationFailure,
    RdmError,
    SampleSetMismatch,
    SymmetryViolation,
    TooLarge,
    UnphysicalExpectation,
    ZeroReference,
    ZeroTrace,
)
from .measurement import (
    CalibrationResult,
    FermiPauliMap,
    MeasurementRecord,
    PlanResult,
    Quartet,
    ShotBudget,
    all_quartets,
    build_map,
    calibrate_standard,
    exact_pauli_expectations,
    measure_rdm,
    plan_noisy,
    quartet_of_element,
    sample_quartets,
    shot_ratio,
    simulate_shots,
)
from .pipeline import PipelineConfig, RunReport, gen_toy, run_noiseless, run_noisy
from .rdm_core import (
    IntegralSet,
    OneRDM,
    PackedRDM,
    SpinRDMSet,
    SpinSector,
    SystemMeta,
    contract_to_1rdm,
    energy,
    hf_2rdm,
    pack_sector,
    pair_index,
    rank_truncation_error,
    rel_error,
    select_rank,
    set_rel_error,
    spectrum,
    trace_targets,
    unpack_sector,
)
from .toy_oracle import (
    ToyHamiltonian,
    exact_rdms,
    ground_state,
    hubbard_chain,
    pauli_expectation,
    random_two_body,
)

__version__ = "0.1.0"
