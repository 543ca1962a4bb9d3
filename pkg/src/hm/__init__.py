"""Harmonic measure, hitting times and spectral checks on finite reversible chains."""

from .chain import (
    Chain,
    ChainError,
    ConstructionError,
    MeasureOnSet,
    NumericalError,
    ValidationError,
    VertexSet,
    WalkPath,
    build_from_weights,
    lazify,
    sample_walk,
)
from .families import (
    FamilySpec,
    GenerationError,
    bfs_distances,
    complete,
    cycle,
    generate,
    lamplighter,
    leaves_and_root_set,
    path,
    random_regular,
    torus,
    torus_net_set,
    tree_expander,
)
from .spectral import (
    CheegerResult,
    SpectralSummary,
    check_cheeger_gap_relation,
    check_mix_sandwich,
    cheeger,
    inner_boundary,
    mixing_time,
    spectral_gap,
    spectrum,
)
from .hitting import (
    CommuteCheck,
    EscapeTable,
    HittingStats,
    check_commute_identity,
    escape_prob,
    expander_mixing_bound,
    expected_hitting,
    return_tail,
    return_tail_curve,
    uniform_transience,
)
from .harmonic import (
    BetaResult,
    HarmonicMeasure,
    SupportProfile,
    beta,
    bound_har,
    bound_main,
    bound_no_makarov,
    check_expander_characterization,
    check_reverse_path,
    check_sum_path_reversal,
    harmonic_from,
    harmonic_matrix,
    harmonic_stationary,
    support_profile,
)
from .dla import (
    DlaTrace,
    GrowthFit,
    StepCapError,
    bernstein_mc_check,
    bernstein_tail,
    diameter_pair,
    dla_run,
    dla_step_exact,
    dla_step_walk,
    growth_fit,
    outer_boundary,
)

__version__ = "0.1.0"
