"""Photon-loss mitigation by recycling lossy samples in linear-optical circuits."""

from .core import (
    CollisionPolicy,
    InputConfig,
    Interferometer,
    ProbabilityTable,
    haar_unitary,
    ideal_distribution,
    uniform_probability,
)
from .errors import (
    CannotNormalizeError,
    CapacityError,
    ConfigError,
    EstimateUndefinedError,
    FallbackRequiredError,
    FitDegenerateError,
    PhotonRecyclingError,
    RegimeError,
    SingularSystemError,
    UndefinedDependencyError,
)
from .loss import LossModel, SampleLedger, draw_samples, estimate_probability, lossy_conditional_distribution, sector_weights
from .masks import OccupationMask, fill_ancestors, loss_descendants
from .mitigation import (
    MitigationReport,
    extrapolate_exponential,
    extrapolate_linear,
    fit_global_gradient,
    linear_solve,
    linear_solve_dependency,
    normalize_report,
)
from .permanent import permanent
from .recycling import (
    RecycledTable,
    abs_avg_deviation,
    dependency_factor,
    interference_term_exact,
    recycled_estimate,
    recycled_table,
    recycled_table_exact,
)

__version__ = "0.1.0"
