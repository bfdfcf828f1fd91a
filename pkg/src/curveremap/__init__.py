"""Conservative remapping of cell averages between curvilinear quad meshes.

The pipeline clips every overlapping pair of curved cells exactly
(Weiler-Atherton traversal with Newton curve-curve intersections),
reconstructs per-cell polynomials with multi-resolution WENO, optionally
applies a positivity-preserving limiter, and integrates the polynomials
exactly over the clipped pieces, so total mass is conserved to round-off.
"""

from .geometry import (Aabb, CurvedPolygon, CurveSpan, GeometryError,
                       ParamCurve, Point2, curve_bbox, curve_deriv,
                       curve_eval, point_in_polygon, polygon_from_points,
                       straight_span, validate_curve)
from .clipping import (ClipResult, ClipTopologyError, CurveIntersection,
                       classify, handle_degeneracies, intersect_curves,
                       wa_clip)
from .integrate import (CurvedTriangle, GaussRule1D, IntegrationError, Poly2,
                        TriangulationError, TriRule, green_area,
                        green_integral, make_tri_rule, poly_integral_cell,
                        tri_integral, triangulate)
from .limiter import LimiterError, LimiterParams, QuadPointGroup, positivity_limit
from .mesh import (Adjacency, CurvilinearMesh, Field, MeshError,
                   MeshParseError, boundary_loop, build_adjacency,
                   cell_polygon, exact_cell_averages,
                   gen_deformed_square_mesh, gen_disk_mesh, read_field,
                   read_mesh, rotate_mesh, validate_mesh, write_field,
                   write_mesh)
from .reconstruct import (ReconField, Stencil, WenoConfig, beta0,
                          build_stencil, constrained_lsq_fit, smoothness,
                          weno_reconstruct)
from .remap import (PairIndex, RemapPlan, RemapReport, RemapRequest,
                    apply_plan, build_plan, candidate_pairs, remap)

__version__ = "0.1.0"
