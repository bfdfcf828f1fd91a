"""Curvilinear quad meshes: data model, generators, file IO, cell averages.

Edges are stored once and referenced (with a direction sign) by the cells
on either side, which makes the no-gaps/no-overlaps requirement structural.
Analytic deformation generators replace the external Lagrangian meshes used
in the original experiments; the curved disk mesh replaces a Gmsh import.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (Aabb, CurvedPolygon, CurveSpan, GeometryError,
                       ParamCurve, gauss_rule_01)


class MeshError(ValueError):
    """Mesh fails a structural or geometric validity requirement."""


class MeshParseError(ValueError):
    """Malformed mesh or field file."""

    def __init__(self, path, line: int, msg: str):
        self.line = line
        super().__init__(f"{path}:{line}: {msg}")


class CurvilinearMesh:
    """Mesh of curvilinear quads with shared degree-d Lagrange edges.

    points  -- (P, 2) vertex and edge-control coordinates
    edges   -- (E, d+1) point indices defining each edge curve
    cell_edges, cell_dirs -- (C, 4) edge indices and +1/-1 traversal signs,
                             in counterclockwise order per cell
    """

    def __init__(self, points, edges, cell_edges, cell_dirs, validate: bool = True):
        self.points = np.ascontiguousarray(points, float)
        self.edges = np.ascontiguousarray(edges, int)
        self.cell_edges = np.ascontiguousarray(cell_edges, int)
        self.cell_dirs = np.ascontiguousarray(cell_dirs, int)
        if self.points.ndim != 2 or self.points.shape[1] != 2:
            raise MeshError("points must be (P, 2)")
        if self.edges.ndim != 2 or self.edges.shape[1] < 2:
            raise MeshError("edges must be (E, d+1) with d >= 1")
        if self.cell_edges.shape != self.cell_dirs.shape or \
                self.cell_edges.ndim != 2 or self.cell_edges.shape[1] != 4:
            raise MeshError("cells must be (C, 4) edge refs with matching dirs")
        if not np.all(np.isfinite(self.points)):
            raise MeshError("mesh points must be finite")
        self.edge_degree = self.edges.shape[1] - 1
        self._curves: list[ParamCurve | None] = [None] * len(self.edges)
        self._polys: list[CurvedPolygon | None] = [None] * len(self.cell_edges)
        self._areas: np.ndarray | None = None
        self._adjacency = None
        if validate:
            validate_mesh(self)

    @property
    def n_cells(self) -> int:
        return len(self.cell_edges)

    @property
    def n_points(self) -> int:
        return len(self.points)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def edge_curve(self, e: int) -> ParamCurve:
        c = self._curves[e]
        if c is None:
            c = ParamCurve(self.points[self.edges[e]])
            self._curves[e] = c
        return c

    def cell_polygon(self, i: int) -> CurvedPolygon:
        poly = self._polys[i]
        if poly is None:
            spans = []
            for e, d in zip(self.cell_edges[i], self.cell_dirs[i]):
                curve = self.edge_curve(int(e))
                spans.append(CurveSpan(curve, 0.0, 1.0) if d > 0
                             else CurveSpan(curve, 1.0, 0.0))
            poly = CurvedPolygon(spans)
            self._polys[i] = poly
        return poly

    def cell_areas(self) -> np.ndarray:
        if self._areas is None:
            self._areas = np.array(
                [self.cell_polygon(i).signed_area() for i in range(self.n_cells)])
        return self._areas

    def cell_corners(self, i: int) -> list[int]:
        """Point indices of the 4 corner vertices, in CCW order."""
        out = []
        for e, d in zip(self.cell_edges[i], self.cell_dirs[i]):
            row = self.edges[int(e)]
            out.append(int(row[0] if d > 0 else row[-1]))
        return out

    @property
    def adjacency(self):
        if self._adjacency is None:
            self._adjacency = build_adjacency(self)
        return self._adjacency

    def domain_bbox(self) -> Aabb:
        return Aabb(float(self.points[:, 0].min()), float(self.points[:, 1].min()),
                    float(self.points[:, 0].max()), float(self.points[:, 1].max()))

    def __repr__(self):
        return (f"CurvilinearMesh({self.n_cells} cells, {self.n_edges} edges, "
                f"degree {self.edge_degree})")


@dataclass
class Field:
    """Cell-average values attached to a mesh."""

    averages: np.ndarray
    mesh: CurvilinearMesh | None = None

    def __post_init__(self):
        self.averages = np.asarray(self.averages, float)
        if self.averages.ndim != 1:
            raise MeshError("field averages must be a 1-D array")
        if not np.all(np.isfinite(self.averages)):
            raise MeshError("field averages must be finite")
        if self.mesh is not None and len(self.averages) != self.mesh.n_cells:
            raise MeshError(
                f"field length {len(self.averages)} != cell count "
                f"{self.mesh.n_cells}")


@dataclass
class Adjacency:
    edge_neighbors: list[list[int]]
    vertex_neighbors: list[list[int]]


def cell_polygon(mesh: CurvilinearMesh, i: int) -> CurvedPolygon:
    """The 4-span counterclockwise loop of cell i."""
    return mesh.cell_polygon(i)


def build_adjacency(mesh: CurvilinearMesh) -> Adjacency:
    """Edge-sharing and vertex-sharing neighbor lists per cell.

    Reports non-manifold edges (referenced by more than two cells).
    """
    edge_cells: dict[int, list[int]] = {}
    for i in range(mesh.n_cells):
        for e in mesh.cell_edges[i]:
            edge_cells.setdefault(int(e), []).append(i)
    bad = {e: cs for e, cs in edge_cells.items() if len(cs) > 2}
    if bad:
        raise MeshError(f"non-manifold edges (used by >2 cells): {sorted(bad)}")
    edge_nb: list[set[int]] = [set() for _ in range(mesh.n_cells)]
    for cs in edge_cells.values():
        if len(cs) == 2:
            a, b = cs
            edge_nb[a].add(b)
            edge_nb[b].add(a)
    vertex_cells: dict[int, set[int]] = {}
    corners = [mesh.cell_corners(i) for i in range(mesh.n_cells)]
    for i, cs in enumerate(corners):
        for v in cs:
            vertex_cells.setdefault(v, set()).add(i)
    vert_nb: list[set[int]] = [set() for _ in range(mesh.n_cells)]
    for i, cs in enumerate(corners):
        for v in cs:
            vert_nb[i] |= vertex_cells[v]
    out_e, out_v = [], []
    for i in range(mesh.n_cells):
        out_e.append(sorted(edge_nb[i]))
        out_v.append(sorted(vert_nb[i] - edge_nb[i] - {i}))
    return Adjacency(out_e, out_v)


def boundary_loop(mesh: CurvilinearMesh) -> CurvedPolygon:
    """The domain boundary as a single CCW loop of edge spans."""
    edge_count: dict[int, int] = {}
    edge_dir: dict[int, int] = {}
    for i in range(mesh.n_cells):
        for e, d in zip(mesh.cell_edges[i], mesh.cell_dirs[i]):
            edge_count[int(e)] = edge_count.get(int(e), 0) + 1
            edge_dir[int(e)] = int(d)
    spans = {}
    for e, cnt in edge_count.items():
        if cnt != 1:
            continue
        row = mesh.edges[e]
        d = edge_dir[e]
        start = int(row[0] if d > 0 else row[-1])
        end = int(row[-1] if d > 0 else row[0])
        curve = mesh.edge_curve(e)
        spans[start] = (end, CurveSpan(curve, 0.0, 1.0) if d > 0
                        else CurveSpan(curve, 1.0, 0.0))
    if not spans:
        raise MeshError("mesh has no boundary edges")
    ordered = []
    start = min(spans)
    cur = start
    for _ in range(len(spans) + 1):
        nxt, span = spans[cur]
        ordered.append(span)
        cur = nxt
        if cur == start:
            break
    else:
        raise MeshError("boundary edges do not chain into a single loop")
    if len(ordered) != len(spans):
        raise MeshError("boundary has more than one loop")
    return CurvedPolygon(ordered)


def validate_mesh(mesh: CurvilinearMesh, check_cells: bool = True) -> None:
    """Structural and geometric mesh validation.

    Checks index ranges, manifoldness, per-cell loop validity (closure, CCW
    orientation, sampled non-self-intersection) and the partition property:
    cell areas must sum to the area enclosed by the boundary loop.
    """
    if mesh.edges.min() < 0 or mesh.edges.max() >= mesh.n_points:
        raise MeshError("edge point index out of range")
    if mesh.n_cells == 0:
        raise MeshError("mesh has no cells")
    if mesh.cell_edges.min() < 0 or mesh.cell_edges.max() >= mesh.n_edges:
        raise MeshError("cell edge index out of range")
    if not np.all(np.abs(mesh.cell_dirs) == 1):
        raise MeshError("cell edge directions must be +1 or -1")
    mesh.adjacency  # builds and checks manifoldness
    if check_cells:
        bad = []
        for i in range(mesh.n_cells):
            try:
                mesh.cell_polygon(i).validate()
            except GeometryError as exc:
                bad.append((i, str(exc)))
        if bad:
            raise MeshError(f"invalid cells: {bad[:8]}"
                            + (" ..." if len(bad) > 8 else ""))
    total = float(mesh.cell_areas().sum())
    domain = boundary_loop(mesh).signed_area()
    if abs(total - domain) > 1e-10 * abs(domain):
        raise MeshError(
            f"cell areas ({total!r}) do not partition the domain "
            f"({domain!r}); relative gap {abs(total - domain) / abs(domain):.3e}")


# --------------------------------------------------------------------------
# generators

def _index_noise(i: np.ndarray, j: np.ndarray, salt: int) -> np.ndarray:
    """Deterministic per-vertex pseudo-random values in [0, 1).

    A fixed integer hash of the grid indices, so vertex (i, j) always gets
    the same displacement regardless of the mesh size: refined meshes carry
    statistically identical grid-scale irregularity.
    """
    h = (i * np.uint64(2654435761) + j * np.uint64(40503)
         + np.uint64(salt) * np.uint64(2246822519)) & np.uint64(0xFFFFFFFF)
    h ^= h >> np.uint64(16)
    h = (h * np.uint64(2246822519)) & np.uint64(0xFFFFFFFF)
    h ^= h >> np.uint64(13)
    h = (h * np.uint64(3266489917)) & np.uint64(0xFFFFFFFF)
    h ^= h >> np.uint64(16)
    return h.astype(float) / 2.0 ** 32


def _structured_mesh(n: int, degree: int, phi, lo: float, hi: float,
                     roughen: float = 0.0, salt: int = 0) -> CurvilinearMesh:
    """n x n grid of quads on [lo, hi]^2, edges sampled through the map phi.

    roughen displaces interior reference vertices by that fraction of a
    cell through a fixed quasi-periodic index pattern, giving the grid a
    self-similar cell-to-cell irregularity at every resolution (the texture
    of a rezoned Lagrangian mesh, which smooth analytic maps lack).
    """
    if n < 2:
        raise MeshError("need n >= 2")
    if degree < 1:
        raise MeshError("edge degree must be >= 1")
    d = degree
    nv = n + 1
    xs = np.linspace(lo, hi, nv)
    gx, gy = np.meshgrid(xs, xs, indexing="ij")
    verts_ref = np.column_stack([gx.T.ravel(), gy.T.ravel()])  # row-major by j
    if roughen:
        if not 0.0 <= roughen < 0.3:
            raise MeshError("roughen must lie in [0, 0.3)")
        ii, jj = np.meshgrid(np.arange(nv), np.arange(nv), indexing="ij")
        ii = ii.T.ravel().astype(np.uint64)
        jj = jj.T.ravel().astype(np.uint64)
        interior = ((ii > 0) & (ii < n) & (jj > 0) & (jj < n)).astype(float)
        amp = roughen * (hi - lo) / n * interior
        verts_ref[:, 0] += amp * (2.0 * _index_noise(ii, jj, 17 + 1000 * salt) - 1.0)
        verts_ref[:, 1] += amp * (2.0 * _index_noise(ii, jj, 89 + 1000 * salt) - 1.0)

    def vid(i, j):
        return j * nv + i

    edges = []
    edge_pts_ref = []
    # horizontal edges he(i, j): v(i, j) -> v(i+1, j)
    for j in range(nv):
        for i in range(n):
            a, b = verts_ref[vid(i, j)], verts_ref[vid(i + 1, j)]
            edges.append((vid(i, j), vid(i + 1, j)))
            edge_pts_ref.append((a, b))
    # vertical edges ve(i, j): v(i, j) -> v(i, j+1)
    for j in range(n):
        for i in range(nv):
            a, b = verts_ref[vid(i, j)], verts_ref[vid(i, j + 1)]
            edges.append((vid(i, j), vid(i, j + 1)))
            edge_pts_ref.append((a, b))

    def he(i, j):
        return j * n + i

    def ve(i, j):
        return n * nv + j * nv + i

    n_vert_pts = len(verts_ref)
    edge_rows = []
    interior_ref = []
    next_pt = n_vert_pts
    for (va, vb), (a, b) in zip(edges, edge_pts_ref):
        row = [va]
        for k in range(1, d):
            interior_ref.append(a + (b - a) * (k / d))
            row.append(next_pt)
            next_pt += 1
        row.append(vb)
        edge_rows.append(row)

    ref_points = np.vstack([verts_ref] + ([np.array(interior_ref)]
                                          if interior_ref else []))
    points = phi(ref_points)

    cell_edges = np.empty((n * n, 4), int)
    cell_dirs = np.empty((n * n, 4), int)
    for j in range(n):
        for i in range(n):
            c = j * n + i
            cell_edges[c] = (he(i, j), ve(i + 1, j), he(i, j + 1), ve(i, j))
            cell_dirs[c] = (1, 1, -1, -1)
    return CurvilinearMesh(points, np.array(edge_rows), cell_edges, cell_dirs)


def _phi_identity(p: np.ndarray) -> np.ndarray:
    return p.copy()


def _phi_taylor_green(amplitude: float):
    def phi(p):
        x, y = p[:, 0], p[:, 1]
        return np.column_stack([
            x + amplitude * np.sin(np.pi * x) * np.sin(2 * np.pi * y),
            y - amplitude * np.sin(2 * np.pi * x) * np.sin(np.pi * y)])
    return phi


def _phi_gresho(amplitude: float):
    # area-preserving swirl about the domain center, compactly supported
    # inside r < 1/2 with a C^3 angular profile
    def phi(p):
        dx = p[:, 0] - 0.5
        dy = p[:, 1] - 0.5
        r = np.hypot(dx, dy)
        ang = np.where(r < 0.5, amplitude * np.cos(np.pi * r) ** 4, 0.0)
        ca, sa = np.cos(ang), np.sin(ang)
        return np.column_stack([0.5 + ca * dx - sa * dy,
                                0.5 + sa * dx + ca * dy])
    return phi


_SQUARE_KINDS = ("identity", "taylor_green_like", "gresho_like")


def gen_deformed_square_mesh(n: int, kind: str, amplitude: float = 0.0,
                             degree: int = 2,
                             roughen: float = 0.0) -> CurvilinearMesh:
    """Deformed n x n mesh of [0, 1]^2 with degree-d Lagrange edges.

    A smooth deformation map is applied to the uniform grid; every edge is
    the degree-d interpolant of the mapped straight reference edge. All
    deformations fix the domain boundary pointwise. An optional grid-scale
    roughening (fraction of a cell) recreates the cell-to-cell irregularity
    of rezoned Lagrangian meshes. Amplitudes that tangle cells are rejected
    by mesh validation.
    """
    if kind not in _SQUARE_KINDS:
        raise MeshError(f"unknown mesh kind {kind!r} (choose from {_SQUARE_KINDS})")
    if amplitude < 0.0:
        raise MeshError("amplitude must be non-negative")
    if kind == "identity" or amplitude == 0.0:
        phi = _phi_identity
    elif kind == "taylor_green_like":
        phi = _phi_taylor_green(amplitude)
    else:
        phi = _phi_gresho(amplitude)
    salt = _SQUARE_KINDS.index(kind)
    try:
        return _structured_mesh(n, degree, phi, 0.0, 1.0, roughen=roughen,
                                salt=salt)
    except MeshError as exc:
        raise MeshError(
            f"{kind} mesh with n={n}, amplitude={amplitude} is invalid: {exc}"
        ) from exc


def gen_disk_mesh(n: int, degree: int = 2) -> CurvilinearMesh:
    """Curved mesh of the unit disk from an analytic square-to-disk map.

    The map (x, y) -> (x sqrt(1 - y^2/2), y sqrt(1 - x^2/2)) sends the
    boundary of [-1, 1]^2 exactly onto the unit circle; boundary nodes are
    then redistributed to uniform angles. Uniform angular spacing makes the
    boundary node set invariant under rotations by multiples of pi/4 (for
    even n*degree), so a rotated copy of the mesh bounds the exact same
    region and rigid-rotation remaps have no boundary coverage mismatch.
    """
    def phi(p):
        x, y = p[:, 0], p[:, 1]
        return np.column_stack([x * np.sqrt(1.0 - 0.5 * y * y),
                                y * np.sqrt(1.0 - 0.5 * x * x)])
    mesh = _structured_mesh(n, degree, phi, -1.0, 1.0)
    _uniformize_disk_boundary(mesh)
    return CurvilinearMesh(mesh.points, mesh.edges, mesh.cell_edges,
                           mesh.cell_dirs)


def _uniformize_disk_boundary(mesh: CurvilinearMesh) -> None:
    """Move boundary nodes to uniform circle angles (in boundary order)."""
    d = mesh.edge_degree
    loop = []
    edge_count: dict[int, int] = {}
    edge_dir: dict[int, int] = {}
    for i in range(mesh.n_cells):
        for e, dr in zip(mesh.cell_edges[i], mesh.cell_dirs[i]):
            edge_count[int(e)] = edge_count.get(int(e), 0) + 1
            edge_dir[int(e)] = int(dr)
    nxt = {}
    for e, cnt in edge_count.items():
        if cnt != 1:
            continue
        row = mesh.edges[e] if edge_dir[e] > 0 else mesh.edges[e][::-1]
        nxt[int(row[0])] = (e, [int(v) for v in row])
    start = min(nxt)
    cur = start
    node_ids: list[int] = []
    for _ in range(len(nxt)):
        _e, row = nxt[cur]
        node_ids.extend(row[:-1])
        cur = row[-1]
        if cur == start:
            break
    total = len(node_ids)
    p0 = mesh.points[node_ids[0]]
    theta0 = math.atan2(p0[1], p0[0])
    # the loop from boundary_loop construction runs counterclockwise
    ang = theta0 + 2.0 * np.pi * np.arange(total) / total
    mesh.points[node_ids, 0] = np.cos(ang)
    mesh.points[node_ids, 1] = np.sin(ang)
    # re-sample interior nodes of edges that end on a moved boundary vertex
    boundary_verts = {node_ids[k] for k in range(0, total, d)}
    for e in range(mesh.n_edges):
        if edge_count.get(e, 0) == 1:
            continue  # boundary edges already handled
        row = mesh.edges[e]
        if int(row[0]) in boundary_verts or int(row[-1]) in boundary_verts:
            a, b = mesh.points[row[0]], mesh.points[row[-1]]
            for k in range(1, d):
                mesh.points[row[k]] = a + (b - a) * (k / d)


def rotate_mesh(mesh: CurvilinearMesh, angle: float,
                center=(0.0, 0.0)) -> CurvilinearMesh:
    """Rigid rotation of every mesh point about a center."""
    c, s = math.cos(angle), math.sin(angle)
    cx, cy = float(center[0]), float(center[1])
    dx = mesh.points[:, 0] - cx
    dy = mesh.points[:, 1] - cy
    pts = np.column_stack([cx + c * dx - s * dy, cy + s * dx + c * dy])
    return CurvilinearMesh(pts, mesh.edges, mesh.cell_edges, mesh.cell_dirs,
                           validate=False)


# --------------------------------------------------------------------------
# file IO

def write_mesh(mesh: CurvilinearMesh, path) -> None:
    """Line-oriented text format; 17 significant digits round-trip floats."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"curvemesh 1 {mesh.edge_degree}\n")
        fh.write(f"points {mesh.n_points}\n")
        for x, y in mesh.points:
            fh.write(f"{x:.17g} {y:.17g}\n")
        fh.write(f"edges {mesh.n_edges}\n")
        for row in mesh.edges:
            fh.write(" ".join(str(int(v)) for v in row) + "\n")
        fh.write(f"cells {mesh.n_cells}\n")
        for erow, drow in zip(mesh.cell_edges, mesh.cell_dirs):
            fh.write(" ".join(("+" if d > 0 else "-") + str(int(e))
                              for e, d in zip(erow, drow)) + "\n")


class _LineReader:
    def __init__(self, path):
        self.path = path
        with open(path, "r", encoding="utf-8") as fh:
            self.raw = fh.readlines()
        self.pos = 0

    def next(self) -> tuple[int, str]:
        while self.pos < len(self.raw):
            self.pos += 1
            line = self.raw[self.pos - 1].split("#", 1)[0].strip()
            if line:
                return self.pos, line
        raise MeshParseError(self.path, len(self.raw) + 1,
                             "unexpected end of file")


def read_mesh(path) -> CurvilinearMesh:
    """Read and validate a mesh file; malformed input raises MeshParseError."""
    rd = _LineReader(path)
    ln, header = rd.next()
    parts = header.split()
    if len(parts) != 3 or parts[0] != "curvemesh" or parts[1] != "1":
        raise MeshParseError(path, ln, f"bad header {header!r}")
    try:
        degree = int(parts[2])
    except ValueError:
        raise MeshParseError(path, ln, f"bad edge degree {parts[2]!r}") from None

    def section(name):
        ln, line = rd.next()
        parts = line.split()
        if len(parts) != 2 or parts[0] != name:
            raise MeshParseError(path, ln, f"expected '{name} <count>', got {line!r}")
        try:
            return int(parts[1])
        except ValueError:
            raise MeshParseError(path, ln, f"bad count {parts[1]!r}") from None

    npts = section("points")
    pts = np.empty((npts, 2))
    for k in range(npts):
        ln, line = rd.next()
        parts = line.split()
        if len(parts) != 2:
            raise MeshParseError(path, ln, f"expected 'x y', got {line!r}")
        try:
            pts[k] = (float(parts[0]), float(parts[1]))
        except ValueError:
            raise MeshParseError(path, ln, f"bad coordinate in {line!r}") from None

    nedges = section("edges")
    edges = np.empty((nedges, degree + 1), int)
    for k in range(nedges):
        ln, line = rd.next()
        parts = line.split()
        if len(parts) != degree + 1:
            raise MeshParseError(
                path, ln, f"expected {degree + 1} point indices, got {line!r}")
        try:
            edges[k] = [int(p) for p in parts]
        except ValueError:
            raise MeshParseError(path, ln, f"bad index in {line!r}") from None

    ncells = section("cells")
    cell_edges = np.empty((ncells, 4), int)
    cell_dirs = np.empty((ncells, 4), int)
    for k in range(ncells):
        ln, line = rd.next()
        parts = line.split()
        if len(parts) != 4:
            raise MeshParseError(path, ln, f"expected 4 signed edge refs, got {line!r}")
        for c, tok in enumerate(parts):
            if not tok or tok[0] not in "+-" or not tok[1:].isdigit():
                raise MeshParseError(
                    path, ln, f"edge ref {tok!r} must look like +3 or -3")
            cell_edges[k, c] = int(tok[1:])
            cell_dirs[k, c] = 1 if tok[0] == "+" else -1
    try:
        return CurvilinearMesh(pts, edges, cell_edges, cell_dirs)
    except MeshError as exc:
        raise MeshError(f"{path}: mesh failed validation: {exc}") from exc


def write_field(fld: Field, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"field 1 {len(fld.averages)}\n")
        for v in fld.averages:
            fh.write(f"{v:.17g}\n")


def read_field(path, mesh: CurvilinearMesh | None = None) -> Field:
    rd = _LineReader(path)
    ln, header = rd.next()
    parts = header.split()
    if len(parts) != 3 or parts[0] != "field" or parts[1] != "1":
        raise MeshParseError(path, ln, f"bad field header {header!r}")
    try:
        count = int(parts[2])
    except ValueError:
        raise MeshParseError(path, ln, f"bad count {parts[2]!r}") from None
    vals = np.empty(count)
    for k in range(count):
        ln, line = rd.next()
        try:
            vals[k] = float(line)
        except ValueError:
            raise MeshParseError(path, ln, f"bad value {line!r}") from None
    return Field(vals, mesh)


# --------------------------------------------------------------------------
# exact cell averages via the transfinite (Coons) cell map

class _CoonsCell:
    """Transfinite interpolation of a 4-span cell; exact boundary match."""

    def __init__(self, poly: CurvedPolygon):
        if len(poly.spans) != 4:
            raise MeshError("Coons map needs a 4-span cell")
        self.s = poly.spans
        self.p00 = self.s[0].start
        self.p10 = self.s[0].end
        self.p11 = self.s[1].end
        self.p01 = self.s[2].end

    def eval_jac(self, xi, eta):
        """Mapped points (n, 2) and Jacobian determinant (n,)."""
        s0, s1, s2, s3 = self.s
        cb, ct = s0.point_at(xi), s2.point_at(1.0 - xi)
        cl, cr = s3.point_at(1.0 - eta), s1.point_at(eta)
        dcb, dct = s0.tangent_at(xi), -s2.tangent_at(1.0 - xi)
        dcl, dcr = -s3.tangent_at(1.0 - eta), s1.tangent_at(eta)
        xi_ = xi[:, None]
        eta_ = eta[:, None]
        blend = ((1 - xi_) * (1 - eta_) * self.p00 + xi_ * (1 - eta_) * self.p10
                 + (1 - xi_) * eta_ * self.p01 + xi_ * eta_ * self.p11)
        F = (1 - eta_) * cb + eta_ * ct + (1 - xi_) * cl + xi_ * cr - blend
        dF_dxi = ((1 - eta_) * dcb + eta_ * dct + (cr - cl)
                  - (-(1 - eta_) * self.p00 + (1 - eta_) * self.p10
                     - eta_ * self.p01 + eta_ * self.p11))
        dF_deta = ((ct - cb) + (1 - xi_) * dcl + xi_ * dcr
                   - (-(1 - xi_) * self.p00 - xi_ * self.p10
                      + (1 - xi_) * self.p01 + xi_ * self.p11))
        jac = dF_dxi[:, 0] * dF_deta[:, 1] - dF_dxi[:, 1] * dF_deta[:, 0]
        return F, jac

    def integrate(self, func, panels: int, order: int = 8) -> float:
        xi1, w1 = gauss_rule_01(order)
        offs = np.arange(panels) / panels
        x = (offs[:, None] + xi1[None, :] / panels).ravel()
        w = np.tile(w1 / panels, panels)
        X, Y = np.meshgrid(x, x, indexing="ij")
        WX, WY = np.meshgrid(w, w, indexing="ij")
        pts, jac = self.eval_jac(X.ravel(), Y.ravel())
        if jac.min() <= 0.0:
            raise MeshError("cell map is not orientation-preserving")
        vals = np.asarray(func(pts[:, 0], pts[:, 1]), float)
        return float(np.sum(vals * jac * (WX * WY).ravel()))


def exact_cell_averages(mesh: CurvilinearMesh, func, rel_tol: float = 1e-13,
                        max_levels: int = 10, strict: bool = True) -> Field:
    """Cell averages of an analytic field by adaptive cell-map quadrature.

    func must accept numpy arrays (x, y) and evaluate elementwise. Panels
    are doubled per level until two successive levels agree to rel_tol
    relative; running out of levels is an error in strict mode and a
    best-effort result (the field is then typically discontinuous) otherwise.
    """
    areas = mesh.cell_areas()
    out = np.empty(mesh.n_cells)
    warned = False
    for i in range(mesh.n_cells):
        cell = _CoonsCell(mesh.cell_polygon(i))
        prev = cell.integrate(func, 1)
        converged = False
        for level in range(1, max_levels + 1):
            panels = 2 ** level
            if panels * 8 > 1200:
                break
            cur = cell.integrate(func, panels)
            if abs(cur - prev) <= rel_tol * max(abs(cur), 1e-3 * areas[i]):
                prev = cur
                converged = True
                break
            prev = cur
        if not converged:
            if strict:
                raise MeshError(
                    f"cell {i}: average quadrature did not converge after "
                    f"{max_levels} levels (last value {prev!r})")
            warned = True
        out[i] = prev / areas[i]
    fld = Field(out, mesh)
    if warned:
        fld.nonconverged = True  # best-effort averages (discontinuous field)
    return fld
