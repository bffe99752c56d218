"""Dense sampling, bottlenecks, reach bounds and homology of real algebraic varieties."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    CertificationError,
    DegenerateNormalLocus,
    EmptyVarietyError,
    InfiniteBottlenecks,
    NotHomogeneousError,
    NumericalFailure,
    ParseError,
    PathBudgetExceeded,
    UnsupportedInput,
    VarietySampleError,
)
from .geom import (  # noqa: E402
    BottleneckReport,
    BoundingBox,
    NormalLocus,
    bottlenecks,
    bounding_box,
    normal_locus,
    slice,
    slice_family,
)
from .poly import Polynomial, PolySystem, parse_system, weil_norm  # noqa: E402
from .reach import ReachEstimate, eta, mu_norm, reach_lower_bound  # noqa: E402
from .sample import GridSpec, Sample, basic_sample, choose_delta, extra_sample, total_sample  # noqa: E402
from .simplicial import (  # noqa: E402
    BettiReport,
    SimplicialComplex,
    betti,
    build_cech,
    build_modified_vr,
    certify,
)
from .solve import SolutionSet, TrackSettings, parameter_track, solve_square  # noqa: E402
