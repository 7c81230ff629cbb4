"""Random-matrix SDE toolkit.

Simulation, symbolic moment expansion, and paired-ensemble experiments for
linear-drift diffusions whose interaction matrix is drawn from a scaled
random ensemble.
"""

from .algebra import (
    AlgebraError,
    Monomial,
    MomentOracle,
    MultiplicityProfile,
    Polynomial,
    canonical_pair,
    difference_vanishes,
    expected_value,
    multiplicity_profile,
)
from .dynamics import (
    IntegratorConfig,
    ParameterError,
    PathBatch,
    SimulationBlowupError,
    SystemParams,
    Trajectory,
    diffusion_row,
    drift,
    exact_mean_linear,
    langevin_params,
    simulate,
    simulate_paths,
)
from .ensembles import (
    CouplingMatrix,
    EnsembleError,
    EntryDistribution,
    InitialLaw,
    PowerIterationError,
    VarianceProfile,
    entry_moment,
    moment_growth_constant,
    operator_norm,
    sample_entries,
    sample_initial,
    sample_matrix,
)
from .experiments import (
    AgingReport,
    AgingRow,
    ConcentrationRow,
    ExperimentConfig,
    ExperimentError,
    RayleighReport,
    RayleighRow,
    SuiteItem,
    SystemTemplate,
    TaylorRow,
    TaylorVsMcReport,
    UniversalityReport,
    UniversalityRow,
    autocorr_item,
    default_suite,
    gradsq_item,
    hamiltonian_item,
    hopfield_suite,
    overlap_item,
    rayleigh_quotient_curve,
    run_aging,
    run_concentration,
    run_hopfield,
    run_rayleigh,
    run_taylor_vs_mc,
    run_universality,
)
from .generator import (
    Letter,
    TaylorResult,
    TruncationError,
    apply_generator,
    apply_letter,
    count_bound_check,
    taylor_mean,
    taylor_mean_multitime,
    taylor_mean_numericJ,
    taylor_terms,
)
from .observables import (
    BuildingBlock,
    LocalizationReport,
    ObservableError,
    QuadraticObservable,
    TensorObservable,
    autocorrelation,
    eval_quadratic,
    eval_tensor,
    grad_sq_density,
    gronwall_bound,
    hamiltonian_density,
    localization_report,
)
from .rng import (
    PURPOSE_COUPLING,
    PURPOSE_INITIAL,
    PURPOSE_NOISE,
    RngStream,
)

__version__ = "0.1.0"

__all__ = [
    "AgingReport",
    "AgingRow",
    "AlgebraError",
    "BuildingBlock",
    "ConcentrationRow",
    "CouplingMatrix",
    "EnsembleError",
    "EntryDistribution",
    "ExperimentConfig",
    "ExperimentError",
    "InitialLaw",
    "IntegratorConfig",
    "Letter",
    "LocalizationReport",
    "MomentOracle",
    "Monomial",
    "MultiplicityProfile",
    "ObservableError",
    "ParameterError",
    "PathBatch",
    "Polynomial",
    "PowerIterationError",
    "PURPOSE_COUPLING",
    "PURPOSE_INITIAL",
    "PURPOSE_NOISE",
    "QuadraticObservable",
    "RayleighReport",
    "RayleighRow",
    "RngStream",
    "SimulationBlowupError",
    "SuiteItem",
    "SystemParams",
    "SystemTemplate",
    "TaylorResult",
    "TaylorRow",
    "TaylorVsMcReport",
    "TensorObservable",
    "Trajectory",
    "TruncationError",
    "UniversalityReport",
    "UniversalityRow",
    "VarianceProfile",
    "apply_generator",
    "apply_letter",
    "autocorr_item",
    "autocorrelation",
    "canonical_pair",
    "count_bound_check",
    "default_suite",
    "difference_vanishes",
    "diffusion_row",
    "drift",
    "entry_moment",
    "eval_quadratic",
    "eval_tensor",
    "exact_mean_linear",
    "expected_value",
    "grad_sq_density",
    "gradsq_item",
    "gronwall_bound",
    "hamiltonian_density",
    "hamiltonian_item",
    "hopfield_suite",
    "langevin_params",
    "localization_report",
    "moment_growth_constant",
    "multiplicity_profile",
    "operator_norm",
    "overlap_item",
    "rayleigh_quotient_curve",
    "run_aging",
    "run_concentration",
    "run_hopfield",
    "run_rayleigh",
    "run_taylor_vs_mc",
    "run_universality",
    "sample_entries",
    "sample_initial",
    "sample_matrix",
    "simulate",
    "simulate_paths",
    "taylor_mean",
    "taylor_mean_multitime",
    "taylor_mean_numericJ",
    "taylor_terms",
]
