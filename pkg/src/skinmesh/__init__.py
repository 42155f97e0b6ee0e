"""Adaptive triangle meshes riding a growing skin surface.

The surface is the envelope of spheres interpolating a weighted input
set; as a global growth parameter increases, every point moves along the
surface normal at a speed set by the local length scale.  This package
builds the underlying sphere diagram, moves sample points in closed form,
schedules lazy per-element quality checks, and maintains a restricted
Delaunay mesh through a topology-stable growth window.
"""

from .driver import GrowthDriver
from .errors import (
    ConvergenceError,
    DegeneracyError,
    DomainError,
    InputError,
    NumericError,
    SafetyViolationError,
    SingularityError,
    SkinMeshError,
)
from .feasibility import (
    check_conditions,
    check_restructuring_sizes,
    epsilon_max,
    feasible_on_range,
    rasterize_region,
    shrinkage_margin,
)
from .kinetics import (
    SurfacePoint,
    Trajectory,
    advance,
    length_scale_bounds,
    project_to_surface,
    reflect_segment,
    sample_surface,
    skin_value,
    surface_point_from_world,
    velocity,
)
from .meshing import (
    SurfaceMesh,
    build_surface_mesh,
    contract_edge,
    insert_vertex,
    read_off,
    restricted_delaunay,
    write_off,
)
from .mixed_complex import MixedComplex, build_mixed_complex
from .params import ParameterSet
from .scheduling import (
    Classification,
    EventQueue,
    MeshElement,
    classify,
    edge_theta,
    interval_table,
    run_until,
    safe_interval,
    schedule,
    triangle_theta,
)
from .spheres import WeightedSphere, load_spheres, parse_spheres
from .triangulation import RegularTriangulation, build_regular_triangulation
from .verification import (
    height_report,
    length_report,
    reflection_report,
    scheduler_safety_report,
    speed_report,
)

__version__ = "0.1.0"

__all__ = [
    "Classification",
    "ConvergenceError",
    "DegeneracyError",
    "DomainError",
    "EventQueue",
    "GrowthDriver",
    "InputError",
    "MeshElement",
    "MixedComplex",
    "NumericError",
    "ParameterSet",
    "RegularTriangulation",
    "SafetyViolationError",
    "SingularityError",
    "SkinMeshError",
    "SurfaceMesh",
    "SurfacePoint",
    "Trajectory",
    "WeightedSphere",
    "advance",
    "build_mixed_complex",
    "build_regular_triangulation",
    "build_surface_mesh",
    "check_conditions",
    "check_restructuring_sizes",
    "classify",
    "contract_edge",
    "edge_theta",
    "epsilon_max",
    "feasible_on_range",
    "height_report",
    "insert_vertex",
    "interval_table",
    "length_report",
    "length_scale_bounds",
    "load_spheres",
    "parse_spheres",
    "project_to_surface",
    "rasterize_region",
    "read_off",
    "reflect_segment",
    "reflection_report",
    "restricted_delaunay",
    "run_until",
    "safe_interval",
    "sample_surface",
    "schedule",
    "scheduler_safety_report",
    "shrinkage_margin",
    "skin_value",
    "speed_report",
    "surface_point_from_world",
    "triangle_theta",
    "velocity",
    "write_off",
]
