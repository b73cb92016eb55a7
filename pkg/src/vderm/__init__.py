"""Volumetric density-equalizing reference maps on structured 3D grids."""

from ._backend import COMPILED
from .errors import (
    AlreadyEqualized,
    CflViolation,
    ConfigError,
    DegenerateCell,
    FieldFileError,
    GridError,
    NonConvergence,
    NonPositiveDensity,
    OutOfDomain,
    OutOfHull,
    SingularJacobian,
    VdermError,
)
from .forward_map import (
    ForwardMap,
    MismatchReport,
    build_forward_map,
    jacobian_field,
    mismatch_error,
    query,
    region_volumes,
)
from .grid import GridSpec, as_density, identity_reference_map, new_field, reduce, trilinear
from .mesh import (
    FrameSequence,
    MeshPlacement,
    SurfaceMesh,
    deform_mesh,
    map_points_to_reference,
    morph_frames,
    read_mesh,
    write_mesh,
)
from .presets import eight_region, peaks, uniform
from .regions import Ball, Box, EmptyRegion, MeshInterior, Region, RegionDensitySpec, rasterize_density
from .solver import BoundarySpec, Embedding, SolveResult, SolverConfig, solve

__version__ = "0.1.0"
