"""foslab: fractional Orlicz-Sobolev seminorms, Whitney extension, and
inequality verification on desk-scale planar and 1-D domains."""

__version__ = "0.1.0"

from .geometry import (
    AhlforsReport,
    Domain,
    Grid,
    GridResolutionError,
    ahlfors_theta,
    ball_measure,
    ball_region,
    halving_radii,
    make_domain,
    region_measure,
)
from .norms import (
    ModularCurve,
    PairCache,
    SampledFunction,
    average,
    inf_centered_norm,
    luxemburg_seminorm,
    median,
    modular_curve,
    orlicz_norm,
    seminorm_modular,
    truncate,
)
from .whitney import (
    ExtensionOperator,
    PartitionOfUnity,
    ReflectionTable,
    WhitneyCube,
    WhitneyDecomposition,
    WhitneyError,
    build_extension,
    make_box_grid,
    partition_of_unity,
    reflect,
    whitney_decompose,
)
from .young import (
    QuadratureError,
    ScanSpec,
    YoungAnalysis,
    YoungFunction,
    analyze_young,
    estimate_C_beta,
    estimate_doubling,
    inverse,
    make_young,
    power_compose,
)
