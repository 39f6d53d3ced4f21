"""Scale-dependent intrinsic dimension of point clouds from neighbor angle statistics."""

__version__ = "0.1.0"

from .dimtest import DimensionProfile, ScaleVerdict, sequential_test, test_profile
from .errors import ScaleDimError
from .geometry import (
    DistanceIndex,
    NeighborSelection,
    PointCloud,
    angle,
    batch_angles,
    build_distance_index,
    sphere_neighbors,
)
from .nulls import NullKey, NullProvider, NullTable, generate_null, load_null, store_null
from .scales import (
    AngleField,
    NormalizerTable,
    ScaleGrid,
    TProfile,
    build_scale_grid,
    compute_angle_field,
    compute_normalizer,
    compute_T,
    t_profile,
)
from .synthetic import GeneratorSpec, gen_circle, gen_gaussian, gen_henon, gen_line_toy, gen_swiss_roll

__all__ = [
    "AngleField", "DimensionProfile", "DistanceIndex", "NeighborSelection", "NormalizerTable",
    "NullKey", "NullProvider", "NullTable", "PointCloud", "ScaleDimError", "ScaleGrid", "ScaleVerdict",
    "TProfile", "angle", "build_distance_index", "build_scale_grid", "compute_T", "compute_angle_field",
    "compute_normalizer", "generate_null", "load_null", "sequential_test", "sphere_neighbors", "store_null",
    "test_profile", "batch_angles", "t_profile", "GeneratorSpec", "gen_circle", "gen_gaussian", "gen_henon",
    "gen_line_toy", "gen_swiss_roll",
]
