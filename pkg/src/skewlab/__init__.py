"""Circle extensions of hyperbolic torus and circle endomorphisms.

Tools for building rotation extensions F(x, theta) = (f(x), theta + phi(x))
over an expanding or hyperbolic base f, sampling their preimage trees,
estimating invariant bundles and Lyapunov exponents, walking stable and
unstable leaves, and running the statistical diagnostics (Birkhoff
dispersion, box transitivity, leafwise densities) behind the `skewlab`
command line runner.
"""

__version__ = "0.1.0"

from .errors import (
    SkewlabError,
    NotHyperbolic,
    PolicyInfeasible,
    ShadowBreakdown,
    DegenerateSeed,
    LegTooLong,
    NotAccessibleNumerically,
    ParseError,
    ValidationError,
)
from .base_dynamics import (
    wrap,
    wrapped_delta,
    torus_dist,
    circle_dist,
    EigenData,
    LinearToralEndomorphism,
    ExpandingCircleMap,
    BumpFunction,
)
from .skew_product import (
    FiberedPoint,
    fibered_dist,
    RotationExtension,
    iterate_base,
    vertical_rotate,
    jacobian_sum_check,
)
from .orbit_space import (
    Preorbit,
    UniformRandom,
    FixedItinerary,
    StayOutside,
    sample_preorbit,
    shadow_preorbit,
    shadow_displacements,
    OrbitSegment,
    shift,
    unshift,
    inverse_limit_distance,
    distance_tail_bound,
)
from .bundles import (
    estimate_stable_direction,
    estimate_unstable_direction,
    estimate_center_direction,
    SplittingEstimate,
    estimate_splitting,
    unstable_direction_spread,
    LyapunovTriple,
    lyapunov_exponents,
    mean_center_exponent,
    pesin_entropy_estimate,
    RateEstimates,
    estimate_rates,
)
from .foliations import (
    StableLeafChart,
    UnstableLeafChart,
    stable_fiber_offset,
    unstable_fiber_offset,
    default_policy,
    QuadrilateralSpec,
    quadrilateral_holonomy,
    bisection_additivity_defect,
    u_loop_holonomy,
    integrability_defect,
    Leg,
    SuPath,
    build_su_path,
    leaf_samples,
    leaf_density_radius,
)
from .ergodic import (
    Observable,
    OBSERVABLES,
    get_observable,
    birkhoff_average,
    BirkhoffReport,
    birkhoff_dispersion,
    TransitivityReport,
    box_transitivity,
    slab_box_bound,
    srb_delta_u,
    SrbLeafDensity,
    srb_density,
    VolumeCertificate,
    volume_preservation_certificate,
)
from .config import ExperimentConfig, parse_config, load_config
