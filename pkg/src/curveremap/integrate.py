"""Exact integration of polynomials over curved cells and intersections.

Two independent routes are provided: Green's-theorem contour integration
(Approach A) and ear-clipping triangulation with positive-weight quadrature
on isoparametrically mapped curved triangles (Approach B). Both are exact
for polynomial integrands, which is what makes the remap conservative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import polynomial as npoly

from .clipping import intersect_curves
from .geometry import (SNAP_TOL, CurvedPolygon, CurveSpan,
                       gauss_rule_01, straight_span)


class IntegrationError(RuntimeError):
    """Quadrature construction or mapping failure."""


class TriangulationError(IntegrationError):
    """Ear clipping exhausted its refinement rounds."""


@dataclass(frozen=True)
class GaussRule1D:
    """Gauss-Legendre points and weights on [0, 1].

    Exact for polynomials up to degree 2*npoints - 1; all weights positive.
    """

    points: np.ndarray
    weights: np.ndarray

    @classmethod
    def of(cls, npoints: int) -> "GaussRule1D":
        x, w = gauss_rule_01(npoints)
        return cls(x, w)


class Poly2:
    """Bivariate polynomial in locally centered and scaled coordinates.

    Represents sum c[a, b] * X^a * Y^b with X = (x - cx)/h, Y = (y - cy)/h.
    The centered/scaled basis keeps the reconstruction least-squares systems
    well conditioned at small cell sizes.
    """

    __slots__ = ("cx", "cy", "h", "coeffs")

    def __init__(self, coeffs, cx: float = 0.0, cy: float = 0.0, h: float = 1.0):
        c = np.atleast_2d(np.asarray(coeffs, float))
        if not np.all(np.isfinite(c)):
            raise ValueError("non-finite polynomial coefficients")
        if h <= 0.0:
            raise ValueError("scale must be positive")
        self.coeffs = c
        self.cx = float(cx)
        self.cy = float(cy)
        self.h = float(h)

    @classmethod
    def constant(cls, value: float, cx: float = 0.0, cy: float = 0.0,
                 h: float = 1.0) -> "Poly2":
        return cls(np.array([[float(value)]]), cx, cy, h)

    @classmethod
    def monomial(cls, a: int, b: int, cx: float = 0.0, cy: float = 0.0,
                 h: float = 1.0) -> "Poly2":
        c = np.zeros((a + 1, b + 1))
        c[a, b] = 1.0
        return cls(c, cx, cy, h)

    @property
    def degree(self) -> int:
        nz = np.argwhere(np.abs(self.coeffs) > 0.0)
        if len(nz) == 0:
            return 0
        return int(max(a + b for a, b in nz))

    def same_frame(self, other: "Poly2") -> bool:
        return (self.cx == other.cx and self.cy == other.cy
                and self.h == other.h)

    def eval(self, x, y):
        X = (np.asarray(x, float) - self.cx) / self.h
        Y = (np.asarray(y, float) - self.cy) / self.h
        return npoly.polyval2d(X, Y, self.coeffs)

    def antideriv_x(self) -> "Poly2":
        """World-coordinate antiderivative in x (integration from x = cx)."""
        na, nb = self.coeffs.shape
        c = np.zeros((na + 1, nb))
        for a in range(na):
            c[a + 1] = self.h * self.coeffs[a] / (a + 1)
        return Poly2(c, self.cx, self.cy, self.h)

    def deriv(self, ax: int, ay: int) -> "Poly2":
        """World-coordinate partial derivative d^(ax+ay) / dx^ax dy^ay."""
        c = self.coeffs
        for _ in range(ax):
            na = c.shape[0]
            c = c[1:] * np.arange(1, na)[:, None] if na > 1 else np.zeros((1, c.shape[1]))
        for _ in range(ay):
            nb = c.shape[1]
            c = c[:, 1:] * np.arange(1, nb)[None, :] if nb > 1 else np.zeros((c.shape[0], 1))
        return Poly2(c / self.h ** (ax + ay), self.cx, self.cy, self.h)

    def __mul__(self, other):
        if isinstance(other, Poly2):
            if not self.same_frame(other):
                raise ValueError("polynomial product requires a common frame")
            na, nb = self.coeffs.shape
            ma, mb = other.coeffs.shape
            out = np.zeros((na + ma - 1, nb + mb - 1))
            for a in range(na):
                for b in range(nb):
                    if self.coeffs[a, b] != 0.0:
                        out[a:a + ma, b:b + mb] += self.coeffs[a, b] * other.coeffs
            return Poly2(out, self.cx, self.cy, self.h)
        return Poly2(self.coeffs * float(other), self.cx, self.cy, self.h)

    __rmul__ = __mul__

    def __add__(self, other: "Poly2") -> "Poly2":
        if not self.same_frame(other):
            raise ValueError("polynomial sum requires a common frame")
        na = max(self.coeffs.shape[0], other.coeffs.shape[0])
        nb = max(self.coeffs.shape[1], other.coeffs.shape[1])
        out = np.zeros((na, nb))
        out[:self.coeffs.shape[0], :self.coeffs.shape[1]] += self.coeffs
        out[:other.coeffs.shape[0], :other.coeffs.shape[1]] += other.coeffs
        return Poly2(out, self.cx, self.cy, self.h)

    def shift_constant(self, delta: float) -> "Poly2":
        c = self.coeffs.copy()
        c[0, 0] += delta
        return Poly2(c, self.cx, self.cy, self.h)

    def scaled(self, factor: float) -> "Poly2":
        return Poly2(self.coeffs * factor, self.cx, self.cy, self.h)

    def __repr__(self):
        return (f"Poly2(degree={self.degree}, center=({self.cx:.3g}, "
                f"{self.cy:.3g}), h={self.h:.3g})")


def _span_gauss(span: CurveSpan, n: int):
    """Gauss samples along a span: points, dx/dt*w, dy/dt*w (dt included)."""
    xi, w = gauss_rule_01(n)
    t = span.t0 + xi * (span.t1 - span.t0)
    p = span.curve.eval(t)
    d = span.curve.deriv(t)
    scale = span.t1 - span.t0
    return p, d[:, 0] * w * scale, d[:, 1] * w * scale


def green_integral(f: Poly2, boundary: CurvedPolygon) -> float:
    """Integral of f over the region bounded by a CCW boundary loop.

    Uses the antiderivative pair f1 = 0, f2 = int f dx, so the area integral
    becomes a contour integral of f2 dy; each span is integrated with a
    Gauss rule exact for the 1D polynomial integrand, whose degree is
    (k+1)*d + d - 1 for integrand degree k and span degree d.
    """
    f2 = f.antideriv_x()
    k = f.degree
    total = 0.0
    for span in boundary.spans:
        d = span.degree
        n = max(1, math.ceil(((k + 2) * d) / 2))
        p, _wdx, wdy = _span_gauss(span, n)
        total += float(np.dot(f2.eval(p[:, 0], p[:, 1]), wdy))
    return total


def green_area(boundary: CurvedPolygon) -> float:
    """Signed area from the symmetric contour form; positive for CCW."""
    return boundary.signed_area()


def poly_integral_cell(f: Poly2, cell: CurvedPolygon) -> float:
    """Whole-cell specialization of green_integral (4-span loops)."""
    return green_integral(f, cell)


@dataclass(frozen=True)
class TriRule:
    """Positive-weight quadrature on the reference triangle T0."""

    degree: int
    points: np.ndarray   # (M, 2)
    weights: np.ndarray  # (M,), all > 0, sum = 1/2

    def __post_init__(self):
        if np.any(self.weights <= 0.0):
            raise IntegrationError("triangle rule has non-positive weights")


_TRI_TABLE_DEGREES = (1, 2, 4, 6, 8, 10, 12)


@lru_cache(maxsize=None)
def make_tri_rule(exact_degree: int) -> TriRule:
    """Positive-weight rule on T0 of at least the requested exactness.

    Degrees 1 and 2 are the classical symmetric rules; higher table entries
    are conical-product rules (Gauss-Legendre crossed with a (1-x)-weighted
    Gauss factor), which keeps every weight structurally positive and the
    moments exact to machine precision.
    """
    if exact_degree < 1 or exact_degree > _TRI_TABLE_DEGREES[-1]:
        raise IntegrationError(
            f"no tabulated triangle rule of degree {exact_degree} "
            f"(supported: 1..{_TRI_TABLE_DEGREES[-1]})")
    degree = next(d for d in _TRI_TABLE_DEGREES if d >= exact_degree)
    if degree == 1:
        return TriRule(1, np.array([[1.0 / 3.0, 1.0 / 3.0]]), np.array([0.5]))
    if degree == 2:
        pts = np.array([[1 / 6, 1 / 6], [2 / 3, 1 / 6], [1 / 6, 2 / 3]])
        return TriRule(2, pts, np.full(3, 1 / 6))
    # conical product: x-factor carries the (1 - xi) Jacobian of the
    # substitution eta = (1 - xi) * u
    m = (degree + 3) // 2
    xi, wx = gauss_rule_01(m)
    u, wu = gauss_rule_01(m)
    P, U = np.meshgrid(xi, u, indexing="ij")
    pts = np.column_stack([P.ravel(), ((1.0 - P) * U).ravel()])
    wts = ((wx * (1.0 - xi))[:, None] * wu[None, :]).ravel()
    return TriRule(degree, pts, wts)


def rule_degree_for(f_degree: int, map_degree: int) -> int:
    """Rule exactness needed to integrate degree-k polynomials exactly over
    a degree-d isoparametric triangle: k*d + 2*(d - 1) (= 2k + 2 at d=2)."""
    return max(1, f_degree * map_degree + 2 * (map_degree - 1))


@lru_cache(maxsize=None)
def _tri_lattice(degree: int):
    """Reference lattice (i/d, j/d), i + j <= d, and its nodal inverse."""
    pts = []
    for j in range(degree + 1):
        for i in range(degree + 1 - j):
            pts.append((i / degree, j / degree))
    pts = np.array(pts)
    mono = _tri_monomials(degree, pts[:, 0], pts[:, 1])
    return pts, np.linalg.inv(mono)


def _tri_monomials(degree: int, xi, eta) -> np.ndarray:
    xi = np.asarray(xi, float)
    cols = []
    for j in range(degree + 1):
        for i in range(degree + 1 - j):
            cols.append(xi ** i * np.asarray(eta, float) ** j)
    return np.column_stack(cols)


def _tri_monomials_grad(degree: int, xi, eta):
    xi = np.asarray(xi, float)
    eta = np.asarray(eta, float)
    dxi, deta = [], []
    for j in range(degree + 1):
        for i in range(degree + 1 - j):
            dxi.append(i * xi ** max(i - 1, 0) * eta ** j if i else np.zeros_like(xi))
            deta.append(j * xi ** i * eta ** max(j - 1, 0) if j else np.zeros_like(xi))
    return np.column_stack(dxi), np.column_stack(deta)


class CurvedTriangle:
    """Curved triangle with an isoparametric polynomial map from T0.

    Boundary spans are attached exactly; the map's edge nodes sample each
    span at uniform local parameters, so the mapped edge coincides with the
    span (polynomial interpolation uniqueness). Map degree follows the
    highest span degree, with a floor of 2 (the 6-node quadratic triangle).
    """

    __slots__ = ("spans", "degree", "nodes", "_coeff")

    def __init__(self, spans):
        spans = tuple(spans)
        if len(spans) != 3:
            raise IntegrationError("curved triangle needs exactly 3 spans")
        d = max(2, max(s.degree for s in spans))
        if d > 3:
            raise IntegrationError(
                "isoparametric triangle maps implemented for degree <= 3")
        self.spans = spans
        self.degree = d
        self.nodes = self._control_net(spans, d)
        _, inv = _tri_lattice(d)
        self._coeff = inv @ self.nodes

    @staticmethod
    def _control_net(spans, d: int) -> np.ndarray:
        lattice, _ = _tri_lattice(d)
        nodes = np.zeros((len(lattice), 2))
        seen = np.zeros(len(lattice), dtype=bool)

        def set_node(i, j, p):
            idx = 0
            for jj in range(d + 1):
                for ii in range(d + 1 - jj):
                    if ii == i and jj == j:
                        nodes[idx] = p
                        seen[idx] = True
                        return
                    idx += 1

        for k in range(d + 1):
            u = k / d
            set_node(k, 0, spans[0].point_at(u))          # edge v0 -> v1
            set_node(d - k, k, spans[1].point_at(u))      # edge v1 -> v2
            set_node(0, d - k, spans[2].point_at(u))      # edge v2 -> v0
        if d == 3:
            # bubble-free interior node: affine barycenter lifted by edges
            edge_sum = np.zeros(2)
            vert_sum = np.zeros(2)
            for k in range(1, d):
                u = k / d
                edge_sum += spans[0].point_at(u) + spans[1].point_at(u) \
                    + spans[2].point_at(u)
            for s in spans:
                vert_sum += s.start
            set_node(1, 1, edge_sum / 4.0 - vert_sum / 6.0)
        if not seen.all():
            raise IntegrationError("incomplete triangle control net")
        return nodes

    def map_eval(self, xi, eta) -> np.ndarray:
        return _tri_monomials(self.degree, xi, eta) @ self._coeff

    def jacobian(self, xi, eta) -> np.ndarray:
        gx, ge = _tri_monomials_grad(self.degree, xi, eta)
        dxy_dxi = gx @ self._coeff
        dxy_deta = ge @ self._coeff
        return (dxy_dxi[:, 0] * dxy_deta[:, 1]
                - dxy_dxi[:, 1] * dxy_deta[:, 0])

    def quad_samples(self, rule: TriRule):
        """Physical quadrature points and J-scaled weights for a rule."""
        pts = self.map_eval(rule.points[:, 0], rule.points[:, 1])
        jac = self.jacobian(rule.points[:, 0], rule.points[:, 1])
        if np.any(jac <= 0.0):
            raise IntegrationError(
                f"inverted triangle map (min J = {jac.min():.3e})")
        return pts, jac * rule.weights

    def min_jacobian_probe(self, n: int = 5) -> float:
        pts = []
        for j in range(n + 1):
            for i in range(n + 1 - j):
                pts.append((i / n, j / n))
        pts = np.array(pts)
        return float(self.jacobian(pts[:, 0], pts[:, 1]).min())


def tri_integral(f: Poly2, tri: CurvedTriangle, rule: TriRule) -> float:
    """Quadrature sum over a curved triangle: sum w_m f(F(p_m)) J(p_m)."""
    need = rule_degree_for(f.degree, tri.degree)
    if rule.degree < need:
        raise IntegrationError(
            f"rule degree {rule.degree} insufficient for integrand degree "
            f"{f.degree} on a degree-{tri.degree} map (need {need})")
    pts, jw = tri.quad_samples(rule)
    return float(np.dot(f.eval(pts[:, 0], pts[:, 1]), jw))


def triangulated_integral(f: Poly2, tris: list[CurvedTriangle]) -> float:
    """Approach B integral of f over a set of curved triangles."""
    total = 0.0
    for t in tris:
        rule = make_tri_rule(rule_degree_for(f.degree, t.degree))
        total += tri_integral(f, t, rule)
    return total


# --------------------------------------------------------------------------
# ear-clipping triangulation of curved polygons

def _winding_inside(polyline: np.ndarray, pts: np.ndarray,
                    margin: float) -> np.ndarray:
    """Strictly-inside test of points vs a closed sampled polyline.

    A point closer than margin to the polyline counts as inside, which is
    the conservative direction for ear rejection.
    """
    a = polyline
    b = np.roll(polyline, -1, axis=0)
    px = pts[:, 0][:, None]
    py = pts[:, 1][:, None]
    ax, ay = a[:, 0][None, :], a[:, 1][None, :]
    bx, by = b[:, 0][None, :], b[:, 1][None, :]
    # crossing-number parity with a +x ray
    cond = (ay > py) != (by > py)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = ax + (py - ay) * (bx - ax) / np.where(by == ay, 1.0, by - ay)
    crossing = cond & (xint > px)
    inside = (crossing.sum(axis=1) % 2) == 1
    # distance to segments
    dx, dy = bx - ax, by - ay
    L2 = dx * dx + dy * dy
    tpar = ((px - ax) * dx + (py - ay) * dy) / np.where(L2 == 0.0, 1.0, L2)
    tpar = np.clip(tpar, 0.0, 1.0)
    d2 = (ax + tpar * dx - px) ** 2 + (ay + tpar * dy - py) ** 2
    near = d2.min(axis=1) <= margin * margin
    return inside | near


def _chord_blocked(chord: CurveSpan, pieces, skip_touch_at) -> bool:
    """Does the chord touch any piece away from its own endpoints?"""
    p_from, p_to = chord.start, chord.end
    for piece in pieces:
        for inter in intersect_curves(chord, piece):
            px, py = inter.point
            da = math.hypot(px - p_from[0], py - p_from[1])
            db = math.hypot(px - p_to[0], py - p_to[1])
            if min(da, db) > skip_touch_at:
                return True
    return False


def _subdivided_loop(poly: CurvedPolygon, level: int):
    """Nodes and pieces for an ear-clipping pass.

    Curved spans contribute 2^(level+1) pieces (one midpoint at level 0),
    straight spans stay whole until the first refinement round.
    """
    pieces: list[CurveSpan] = []
    for span in poly.spans:
        if span.degree == 1 and level == 0:
            parts = 1
        elif span.degree == 1:
            parts = 2 ** level
        else:
            parts = 2 ** (level + 1)
        cuts = np.linspace(0.0, 1.0, parts + 1)
        for a, b in zip(cuts[:-1], cuts[1:]):
            pieces.append(span.sub(float(a), float(b)))
    nodes = [p.start.copy() for p in pieces]
    return nodes, pieces


def _single_triangle(poly: CurvedPolygon) -> CurvedTriangle | None:
    if len(poly.spans) != 3:
        return None
    try:
        tri = CurvedTriangle(poly.spans)
    except IntegrationError:
        return None
    if tri.min_jacobian_probe() <= 0.0:
        return None
    return tri


def _ear_pass(nodes, pieces, scale: float):
    """One full ear-clipping pass; returns triangles or None on failure."""
    nodes = list(nodes)
    pieces = list(pieces)
    tris: list[CurvedTriangle] = []
    touch_tol = 1e-7 * scale
    guard = 4 * len(nodes) + 16
    while len(nodes) > 3 and guard > 0:
        guard -= 1
        n = len(nodes)
        cut = None
        for i in range(n):
            ia, ib, ic = (i - 1) % n, i, (i + 1) % n
            A, B, C = nodes[ia], nodes[ib], nodes[ic]
            area2 = (B[0] - A[0]) * (C[1] - A[1]) - (B[1] - A[1]) * (C[0] - A[0])
            if area2 <= 1e-14 * scale * scale:
                continue
            chord = straight_span(C, A)
            others = [pieces[j] for j in range(n) if j not in (ia, ib)]
            if _chord_blocked(chord, others + [pieces[ia], pieces[ib]], touch_tol):
                continue
            cand = CurvedPolygon([pieces[ia], pieces[ib], chord])
            if cand.signed_area() <= 0.0:
                continue
            # containment: other nodes and sampled boundary points
            probes = [nodes[j] for j in range(n) if j not in (ia, ib, ic)]
            uu = np.array([0.25, 0.5, 0.75])
            for j in range(n):
                if j in (ia, ib):
                    continue
                probes.extend(pieces[j].point_at(uu))
            if probes:
                boundary = cand.boundary_points(per_span=12)
                hit = _winding_inside(boundary, np.asarray(probes),
                                      margin=10.0 * SNAP_TOL)
                if hit.any():
                    continue
            tri = _single_triangle(cand)
            if tri is None:
                continue
            cut = (ia, ib, ic, tri, chord)
            break
        if cut is None:
            return None
        ia, ib, ic, tri, chord = cut
        tris.append(tri)
        pieces[ia] = chord.flipped()
        del pieces[ib]
        del nodes[ib]
    if guard <= 0:
        return None
    final = _single_triangle(CurvedPolygon(pieces))
    if final is None:
        return None
    tris.append(final)
    return tris


def _tiles_exactly(tris, area: float) -> bool:
    total = sum(CurvedPolygon(t.spans).signed_area() for t in tris)
    return abs(total - area) <= 1e-10 * max(abs(area), 1e-300)


def _split_quad(poly: CurvedPolygon) -> list[CurvedTriangle] | None:
    """Diagonal split of a 4-span loop into two curved triangles.

    Safe without containment probes: a diagonal that leaves the region
    either crosses the boundary (rejected by the exact chord test) or
    produces triangles whose areas cannot sum to the loop area.
    """
    s = poly.spans
    area = poly.signed_area()
    touch = 1e-7 * max(poly.bbox().diag, 1e-30)
    for k in (0, 1):
        a, b = s[k], s[k + 1]
        c, d = s[(k + 2) % 4], s[(k + 3) % 4]
        chord = straight_span(b.end, a.start)
        if _chord_blocked(chord, s, touch):
            continue
        t1 = _single_triangle(CurvedPolygon([a, b, chord]))
        t2 = _single_triangle(CurvedPolygon([c, d, chord.flipped()]))
        if t1 is None or t2 is None:
            continue
        if _tiles_exactly([t1, t2], area):
            return [t1, t2]
    return None


def triangulate(poly: CurvedPolygon) -> list[CurvedTriangle]:
    """Tile a curved polygon with curved triangles by ear clipping.

    Interior edges are straight chords; boundary edges carry the original
    spans (split as needed). Loops that are already triangles (or quads
    splittable along a diagonal) take a fast path; otherwise nodes are
    seeded at span endpoints plus one midpoint per curved span, and when no
    valid ear exists every span is bisected and the pass restarts, up to 8
    refinement rounds.
    """
    single = _single_triangle(poly)
    if single is not None:
        return [single]
    if len(poly.spans) == 4:
        quick = _split_quad(poly)
        if quick is not None:
            return quick
    scale = max(poly.bbox().diag, 1e-30)
    area = poly.signed_area()
    for level in range(9):
        nodes, pieces = _subdivided_loop(poly, level)
        tris = _ear_pass(nodes, pieces, scale)
        if tris is not None and _tiles_exactly(tris, area):
            return tris
    raise TriangulationError(
        f"ear clipping failed after 8 refinement rounds on {poly!r}; "
        f"bbox={poly.bbox()}, area={poly.signed_area():.6e}")
