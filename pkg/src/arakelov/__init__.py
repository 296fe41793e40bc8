"""Heights, normed section lattices and equidistribution on the projective line over Q."""

from .asympt import (
    AsymptoticReport,
    MinimaFiltration,
    asymptotic_measure,
    count_effective_sections,
    filtration_measure,
    inequality_chain_check,
    sectional_capacity_estimate,
    successive_minima,
)
from .equidist import (
    PhiEstimator,
    Verdict,
    additivity_verdict,
    default_dictionary,
    directional_derivative,
    limit_measure,
    phi,
)
from .errors import (
    ArakelovError,
    CapExceeded,
    CertificationError,
    HypothesisFailure,
    MeasureError,
    RootFindingError,
)
from .heights import AdelicMetric, AlgebraicPoint, MetricTwist, height, height_additivity_check, orbit_measure
from .lattices import (
    AdelicLattice,
    LinearMapWithHeight,
    chi,
    degree,
    evaluation_bound_check,
    hom_height,
    mu_max,
    slope,
    slope_inequality_check,
)
from .measures import (
    EmpiricalMeasure,
    StepMeasure,
    integrate,
    moments_to_circle_density,
    step_moment,
    wasserstein_circle,
    wasserstein_line,
)
from .polyalg import IntegerPolynomial, cyclotomic, find_roots, mahler_measure, sequence_generator
from .sections import NormBound, SectionSpace
from .semigroup import HomogeneousFunctionOnSemigroup, sandwich_differential

__version__ = "0.1.0"
