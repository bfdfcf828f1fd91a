"""Points, parametric Lagrange curves, curve spans, and curved polygons.

Everything downstream (meshes, clipping, quadrature) is built on three
primitives: ParamCurve (a degree-d Lagrange curve), CurveSpan (an oriented
sub-interval of a curve) and CurvedPolygon (a closed counterclockwise loop
of spans).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import polynomial as npoly

SNAP_TOL = 1e-10  # world-space coincidence tolerance
PARAM_TOL = 1e-9  # slack when accepting parameters on [0, 1]

# Deterministic ray directions for point-in-polygon retries (radians).
_RAY_ANGLES = (0.0, 0.7391, 1.8473, 2.9517, 3.8621, 4.7137, 5.5309,
               0.3313, 1.2179, 2.5081, 4.1001, 5.9003)


class GeometryError(ValueError):
    """Invalid geometric object or operation."""


@dataclass(frozen=True, slots=True)
class Point2:
    """A point in the plane. Coordinates must be finite."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise GeometryError(f"non-finite point ({self.x}, {self.y})")

    def dist(self, other: "Point2") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True, slots=True)
class Aabb:
    """Axis-aligned bounding box."""

    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        if self.xmin > self.xmax or self.ymin > self.ymax:
            raise GeometryError("inverted bounding box")

    def overlaps(self, other: "Aabb") -> bool:
        return (self.xmin <= other.xmax and other.xmin <= self.xmax
                and self.ymin <= other.ymax and other.ymin <= self.ymax)

    def contains(self, x: float, y: float) -> bool:
        return self.xmin <= x <= self.xmax and self.ymin <= y <= self.ymax

    def inflate(self, pad: float) -> "Aabb":
        return Aabb(self.xmin - pad, self.ymin - pad,
                    self.xmax + pad, self.ymax + pad)

    def union(self, other: "Aabb") -> "Aabb":
        return Aabb(min(self.xmin, other.xmin), min(self.ymin, other.ymin),
                    max(self.xmax, other.xmax), max(self.ymax, other.ymax))

    @property
    def diag(self) -> float:
        return math.hypot(self.xmax - self.xmin, self.ymax - self.ymin)

    @staticmethod
    def of_points(pts: np.ndarray) -> "Aabb":
        return Aabb(float(pts[:, 0].min()), float(pts[:, 1].min()),
                    float(pts[:, 0].max()), float(pts[:, 1].max()))


@lru_cache(maxsize=None)
def _uniform_params(degree: int) -> np.ndarray:
    return np.arange(degree + 1) / degree


@lru_cache(maxsize=None)
def _lagrange_denoms(degree: int) -> np.ndarray:
    u = _uniform_params(degree)
    den = np.ones(degree + 1)
    for j in range(degree + 1):
        for m in range(degree + 1):
            if m != j:
                den[j] *= u[j] - u[m]
    return den


def _lagrange_basis(degree: int, t: np.ndarray) -> np.ndarray:
    """Values of the d+1 Lagrange basis polynomials at t, shape (..., d+1).

    Degrees 1-3 use factored closed forms (each factor vanishes exactly at
    its node, so interpolation is bit-exact there); higher degrees use the
    generic product form.
    """
    t = np.asarray(t, float)
    out = np.empty(t.shape + (degree + 1,))
    if degree == 1:
        out[..., 0] = 1.0 - t
        out[..., 1] = t
        return out
    if degree == 2:
        omt = 1.0 - t
        out[..., 0] = (1.0 - 2.0 * t) * omt
        out[..., 1] = 4.0 * t * omt
        out[..., 2] = (2.0 * t - 1.0) * t
        return out
    if degree == 3:
        a = t - 1.0 / 3.0
        b = t - 2.0 / 3.0
        c = t - 1.0
        out[..., 0] = -4.5 * a * b * c
        out[..., 1] = 13.5 * t * b * c
        out[..., 2] = -13.5 * t * a * c
        out[..., 3] = 4.5 * t * a * b
        return out
    u = _uniform_params(degree)
    den = _lagrange_denoms(degree)
    diffs = t[..., None] - u  # (..., d+1)
    for j in range(degree + 1):
        prod = np.ones_like(t)
        for m in range(degree + 1):
            if m != j:
                prod = prod * diffs[..., m]
        out[..., j] = prod / den[j]
    return out


def _lagrange_dbasis(degree: int, t: np.ndarray) -> np.ndarray:
    """Derivatives of the Lagrange basis at t, shape (..., d+1)."""
    t = np.asarray(t, float)
    out = np.empty(t.shape + (degree + 1,))
    if degree == 1:
        out[..., 0] = -1.0
        out[..., 1] = 1.0
        return out
    if degree == 2:
        out[..., 0] = 4.0 * t - 3.0
        out[..., 1] = 4.0 - 8.0 * t
        out[..., 2] = 4.0 * t - 1.0
        return out
    if degree == 3:
        t2 = t * t
        out[..., 0] = -13.5 * t2 + 18.0 * t - 5.5
        out[..., 1] = 40.5 * t2 - 45.0 * t + 9.0
        out[..., 2] = -40.5 * t2 + 36.0 * t - 4.5
        out[..., 3] = 13.5 * t2 - 9.0 * t + 1.0
        return out
    u = _uniform_params(degree)
    den = _lagrange_denoms(degree)
    diffs = t[..., None] - u
    out.fill(0.0)
    for j in range(degree + 1):
        acc = np.zeros_like(t)
        for m in range(degree + 1):
            if m == j:
                continue
            prod = np.ones_like(t)
            for k in range(degree + 1):
                if k != j and k != m:
                    prod = prod * diffs[..., k]
            acc = acc + prod
        out[..., j] = acc / den[j]
    return out


@lru_cache(maxsize=None)
def _bezier_conversion(degree: int) -> np.ndarray:
    """Matrix mapping uniform Lagrange nodes to Bezier control points."""
    u = _uniform_params(degree)
    bern = np.empty((degree + 1, degree + 1))
    for j in range(degree + 1):
        bern[:, j] = (math.comb(degree, j) * u ** j * (1.0 - u) ** (degree - j))
    return np.linalg.inv(bern)


def _decasteljau_split(ctrl: np.ndarray, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Split a Bezier control polygon at parameter t; returns (left, right)."""
    n = len(ctrl)
    work = ctrl.copy()
    left = np.empty_like(ctrl)
    right = np.empty_like(ctrl)
    left[0] = work[0]
    right[-1] = work[-1]
    for level in range(1, n):
        work = (1.0 - t) * work[:-1] + t * work[1:]
        left[level] = work[0]
        right[-1 - level] = work[-1]
    return left, right


def _bezier_segment(ctrl: np.ndarray, a: float, b: float) -> np.ndarray:
    """Control points of the Bezier restricted to [a, b] (a < b assumed)."""
    if a > b:
        a, b = b, a
    if a > 0.0:
        ctrl = _decasteljau_split(ctrl, a)[1]
        b = (b - a) / (1.0 - a)
    if b < 1.0:
        ctrl = _decasteljau_split(ctrl, b)[0]
    return ctrl


class ParamCurve:
    """Degree-d Lagrange parametric curve through d+1 nodes at t = j/d.

    Evaluation outside [0, 1] is permitted (Newton iterates need it);
    clamping is the caller's responsibility.
    """

    __slots__ = ("degree", "nodes", "_power", "_bezier", "_bbox")

    def __init__(self, nodes):
        nodes = np.ascontiguousarray(nodes, dtype=float)
        if nodes.ndim != 2 or nodes.shape[1] != 2 or nodes.shape[0] < 2:
            raise GeometryError("curve nodes must be an (d+1, 2) array with d >= 1")
        if not np.all(np.isfinite(nodes)):
            raise GeometryError("curve nodes must be finite")
        self.nodes = nodes
        self.degree = nodes.shape[0] - 1
        self._power = None
        self._bezier = None
        self._bbox = None

    def eval(self, t) -> np.ndarray:
        """Point(s) on the curve; shape (..., 2)."""
        basis = _lagrange_basis(self.degree, t)
        return basis @ self.nodes

    def deriv(self, t) -> np.ndarray:
        """Exact derivative of the Lagrange interpolant; shape (..., 2)."""
        dbasis = _lagrange_dbasis(self.degree, t)
        return dbasis @ self.nodes

    @property
    def power_coeffs(self) -> np.ndarray:
        """Power-basis coefficients, shape (d+1, 2), low order first."""
        if self._power is None:
            u = _uniform_params(self.degree)
            vand = np.vander(u, self.degree + 1, increasing=True)
            self._power = np.linalg.solve(vand, self.nodes)
        return self._power

    @property
    def bezier_points(self) -> np.ndarray:
        if self._bezier is None:
            self._bezier = _bezier_conversion(self.degree) @ self.nodes
        return self._bezier

    def bbox(self) -> Aabb:
        """A box guaranteed to contain the curve over [0, 1] (Bezier hull)."""
        if self._bbox is None:
            self._bbox = Aabb.of_points(self.bezier_points)
        return self._bbox

    def reversed_nodes(self) -> np.ndarray:
        return self.nodes[::-1]

    def __repr__(self):
        return f"ParamCurve(degree={self.degree})"


def curve_eval(c: ParamCurve, t: float) -> Point2:
    """Evaluate the Lagrange interpolant at parameter t."""
    p = c.eval(float(t))
    return Point2(float(p[0]), float(p[1]))

def curve_deriv(c: ParamCurve, t: float) -> tuple[float, float]:
    """Exact derivative (x'(t), y'(t)) of the interpolant."""
    d = c.deriv(float(t))
    return float(d[0]), float(d[1])


def curve_bbox(c: ParamCurve) -> Aabb:
    """Bounding box from the Bezier control hull (a true bound)."""
    return c.bbox()


def validate_curve(c: ParamCurve, samples: int = 257) -> None:
    """Sampling-based check that the curve does not self-intersect on [0, 1]."""
    ts = np.linspace(0.0, 1.0, samples)
    pts = c.eval(ts)
    if _polyline_self_intersects(pts, closed=False):
        raise GeometryError("curve self-intersects")


def _polyline_self_intersects(pts: np.ndarray, closed: bool) -> bool:
    """All-pairs proper-crossing test on a sampled polyline (vectorized)."""
    a = pts[:-1]
    b = pts[1:]
    n = len(a)
    if n < 3:
        return False
    d = b - a
    # Segment pair (i, j) crosses if endpoints of each straddle the other.
    ax, ay = a[:, 0], a[:, 1]
    dx, dy = d[:, 0], d[:, 1]
    # cross_i(p) = dx_i*(py-ay_i) - dy_i*(px-ax_i), sign straddle both ways
    ca = dx[:, None] * (ay[None, :] - ay[:, None]) - dy[:, None] * (ax[None, :] - ax[:, None])
    cb = dx[:, None] * (ay[None, :] + dy[None, :] - ay[:, None]) - \
        dy[:, None] * (ax[None, :] + dx[None, :] - ax[:, None])
    cc = ca.T
    cd = cb.T
    proper = (ca * cb < 0) & (cc * cd < 0)
    # ignore adjacent segments (and the wrap pair when closed)
    idx = np.arange(n)
    adj = np.abs(idx[:, None] - idx[None, :]) <= 1
    if closed:
        adj |= (np.abs(idx[:, None] - idx[None, :]) == n - 1)
    proper &= ~adj
    return bool(proper.any())


def real_roots_in(coeffs: np.ndarray, lo: float, hi: float,
                  tol: float = PARAM_TOL) -> list[float]:
    """Real roots of a power-basis polynomial (low order first) in [lo, hi].

    Degrees 1 and 2 use closed forms; higher degrees go through the
    companion matrix. Nearly-zero leading coefficients are trimmed so that
    degenerate (e.g. straight stored-as-quadratic) curves are handled.
    """
    c = np.asarray(coeffs, float)
    scale = np.max(np.abs(c)) if c.size else 0.0
    if scale == 0.0:
        return []
    k = len(c) - 1
    while k > 0 and abs(c[k]) <= 1e-14 * scale:
        k -= 1
    c = c[:k + 1]
    roots: list[float] = []
    if k == 0:
        return []
    if k == 1:
        roots = [-c[0] / c[1]]
    elif k == 2:
        a2, a1, a0 = c[2], c[1], c[0]
        disc = a1 * a1 - 4.0 * a2 * a0
        if disc < 0.0:
            return []
        sq = math.sqrt(disc)
        # Citardauq form for the small root avoids cancellation.
        q = -0.5 * (a1 + math.copysign(sq, a1))
        roots = [q / a2] if q == 0.0 else [q / a2, a0 / q]
    else:
        rr = npoly.polyroots(c)
        roots = [float(r.real) for r in rr
                 if abs(r.imag) <= 1e-9 * (1.0 + abs(r.real))]
    lo2, hi2 = min(lo, hi) - tol, max(lo, hi) + tol
    found = sorted(r for r in roots if lo2 <= r <= hi2)
    out: list[float] = []
    for r in found:
        r = min(max(r, min(lo, hi)), max(lo, hi))
        if not out or abs(r - out[-1]) > 1e-12:
            out.append(r)
    return out


@dataclass(frozen=True)
class CurveSpan:
    """Oriented sub-interval [t0, t1] of a ParamCurve.

    The span is traversed from t0 to t1; a reversed traversal of the
    underlying curve simply has t1 < t0. A local parameter u in [0, 1]
    always runs in traversal order.
    """

    curve: ParamCurve
    t0: float = 0.0
    t1: float = 1.0

    def __post_init__(self):
        if self.t0 == self.t1:
            raise GeometryError("degenerate span: t0 == t1")

    @property
    def reversed(self) -> bool:
        return self.t1 < self.t0

    @property
    def degree(self) -> int:
        return self.curve.degree

    def t_of(self, u):
        return self.t0 + np.asarray(u, float) * (self.t1 - self.t0)

    def point_at(self, u) -> np.ndarray:
        return self.curve.eval(self.t_of(u))

    def tangent_at(self, u) -> np.ndarray:
        """Derivative with respect to the local parameter u."""
        return self.curve.deriv(self.t_of(u)) * (self.t1 - self.t0)

    @property
    def start(self) -> np.ndarray:
        return self.curve.eval(self.t0)

    @property
    def end(self) -> np.ndarray:
        return self.curve.eval(self.t1)

    def sub(self, ua: float, ub: float) -> "CurveSpan":
        """Sub-span between local parameters ua < ub (traversal order kept)."""
        return CurveSpan(self.curve, float(self.t_of(ua)), float(self.t_of(ub)))

    def bezier_points(self) -> np.ndarray:
        return _bezier_segment(self.curve.bezier_points,
                               min(self.t0, self.t1), max(self.t0, self.t1))

    def bbox(self) -> Aabb:
        if self.t0 == 0.0 and self.t1 == 1.0:
            return self.curve.bbox()
        return Aabb.of_points(self.bezier_points())

    def flipped(self) -> "CurveSpan":
        return CurveSpan(self.curve, self.t1, self.t0)


def straight_span(a, b) -> CurveSpan:
    """A degree-1 span from point a to point b."""
    return CurveSpan(ParamCurve(np.array([a, b], float)))


def _span_closest(span: CurveSpan, x: float, y: float) -> tuple[float, float]:
    """(distance, local parameter) of the closest point of a span to (x, y)."""
    cx, cy = span.curve.power_coeffs[:, 0].copy(), span.curve.power_coeffs[:, 1].copy()
    cx[0] -= x
    cy[0] -= y
    # d/dt |c(t) - p|^2 = 2 (cx*cx' + cy*cy')
    g = npoly.polyadd(npoly.polymul(cx, npoly.polyder(cx)),
                      npoly.polymul(cy, npoly.polyder(cy)))
    lo, hi = min(span.t0, span.t1), max(span.t0, span.t1)
    cand = real_roots_in(g, lo, hi) + [lo, hi]
    best = (math.inf, 0.0)
    for t in cand:
        p = span.curve.eval(t)
        d = math.hypot(p[0] - x, p[1] - y)
        if d < best[0]:
            best = (d, t)
    u = (best[1] - span.t0) / (span.t1 - span.t0)
    return best[0], min(max(u, 0.0), 1.0)


_GAUSS_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def gauss_rule_01(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre points and weights on [0, 1]."""
    if n not in _GAUSS_CACHE:
        x, w = np.polynomial.legendre.leggauss(n)
        _GAUSS_CACHE[n] = (0.5 * (x + 1.0), 0.5 * w)
    return _GAUSS_CACHE[n]


class CurvedPolygon:
    """Closed counterclockwise loop of curve spans.

    Invariants (enforced by validate): consecutive span endpoints coincide
    within SNAP_TOL, signed area is positive, and the boundary does not
    self-intersect (sampling check).
    """

    __slots__ = ("spans", "_bbox", "_area", "_interior")

    def __init__(self, spans):
        self.spans = tuple(spans)
        if len(self.spans) < 2:
            raise GeometryError("polygon needs at least 2 spans")
        self._bbox = None
        self._area = None
        self._interior = None

    def bbox(self) -> Aabb:
        if self._bbox is None:
            box = self.spans[0].bbox()
            for s in self.spans[1:]:
                box = box.union(s.bbox())
            self._bbox = box
        return self._bbox

    def signed_area(self) -> float:
        """Area via the symmetric contour form 1/2 * integral(x y' - y x')."""
        if self._area is None:
            total = 0.0
            for s in self.spans:
                n = s.degree + 1
                xi, w = gauss_rule_01(n)
                t = s.t0 + xi * (s.t1 - s.t0)
                p = s.curve.eval(t)
                d = s.curve.deriv(t)
                total += (s.t1 - s.t0) * float(
                    np.dot(w, p[:, 0] * d[:, 1] - p[:, 1] * d[:, 0]))
            self._area = 0.5 * total
        return self._area

    def boundary_points(self, per_span: int = 16, include_ends: bool = True) -> np.ndarray:
        pts = []
        for s in self.spans:
            if include_ends:
                u = np.linspace(0.0, 1.0, per_span, endpoint=False)
            else:
                u = (np.arange(per_span) + 0.5) / per_span
            pts.append(s.point_at(u))
        return np.vstack(pts)

    def closure_gap(self) -> float:
        gap = 0.0
        for a, b in zip(self.spans, self.spans[1:] + (self.spans[0],)):
            e, s = a.end, b.start
            gap = max(gap, math.hypot(e[0] - s[0], e[1] - s[1]))
        return gap

    def validate(self, check_self_intersection: bool = True) -> None:
        scale = max(self.bbox().diag, 1.0)
        if self.closure_gap() > 10.0 * SNAP_TOL * scale:
            raise GeometryError(
                f"polygon not closed: max endpoint gap {self.closure_gap():.3e}")
        if self.signed_area() <= 0.0:
            raise GeometryError(
                f"polygon not counterclockwise: signed area {self.signed_area():.3e}")
        if check_self_intersection:
            pts = self.boundary_points(per_span=16)
            if _polyline_self_intersects(pts, closed=True):
                raise GeometryError("polygon boundary self-intersects (sampled)")

    def locate(self, x: float, y: float) -> str:
        """Classify a point: 'inside', 'outside' or 'boundary'.

        Crossing-number test with a horizontal ray; the ray direction is
        re-randomized (deterministic angle sequence) whenever a crossing is
        tangential or too close to a span endpoint.
        """
        box = self.bbox().inflate(SNAP_TOL)
        if not box.contains(x, y):
            return "outside"
        for s in self.spans:
            if s.bbox().inflate(SNAP_TOL).contains(x, y):
                d, _ = _span_closest(s, x, y)
                if d <= SNAP_TOL:
                    return "boundary"
        for ang in _RAY_ANGLES:
            parity = self._ray_parity(x, y, math.cos(ang), math.sin(ang))
            if parity is not None:
                return "inside" if parity % 2 else "outside"
        raise GeometryError(f"point location failed at ({x}, {y})")

    def _ray_parity(self, x: float, y: float, ex: float, ey: float) -> int | None:
        count = 0
        for s in self.spans:
            pc = s.curve.power_coeffs
            wc = (pc[:, 0].copy(), pc[:, 1].copy())
            wc[0][0] -= x
            wc[1][0] -= y
            # perpendicular component along the ray direction
            w = wc[0] * ey - wc[1] * ex
            wscale = float(np.max(np.abs(w)))
            if wscale == 0.0:
                return None  # span lies on the ray line: retry
            lo, hi = min(s.t0, s.t1), max(s.t0, s.t1)
            for r in real_roots_in(w, lo, hi):
                span_len = hi - lo
                if r - lo < 1e-9 * span_len or hi - r < 1e-9 * span_len:
                    return None  # crossing at a span endpoint: retry
                dw = float(npoly.polyval(r, npoly.polyder(w)))
                if abs(dw) <= 1e-8 * wscale:
                    return None  # tangential crossing: retry
                p = s.curve.eval(r)
                fwd = (p[0] - x) * ex + (p[1] - y) * ey
                if abs(fwd) <= SNAP_TOL:
                    return None
                if fwd > 0.0:
                    count += 1
        return count

    def interior_point(self) -> tuple[float, float]:
        """A deterministic point strictly inside the polygon."""
        if self._interior is not None:
            return self._interior
        mids = np.array([s.point_at(0.5) for s in self.spans])
        cands = [tuple(mids.mean(axis=0))]
        # walk inward from span midpoints (interior is left of a CCW boundary)
        scale = math.sqrt(max(self.signed_area(), 1e-30))
        for s in self.spans:
            p = s.point_at(0.5)
            tg = s.tangent_at(0.5)
            norm = math.hypot(tg[0], tg[1])
            if norm == 0.0:
                continue
            nx, ny = -tg[1] / norm, tg[0] / norm
            for frac in (0.25, 0.1, 0.02, 0.004):
                cands.append((p[0] + nx * frac * scale, p[1] + ny * frac * scale))
        for cx, cy in cands:
            try:
                if self.locate(cx, cy) == "inside":
                    self._interior = (float(cx), float(cy))
                    return self._interior
            except GeometryError:
                continue
        # last resort: scan a grid over the bounding box
        box = self.bbox()
        for k in (5, 11, 23):
            xs = np.linspace(box.xmin, box.xmax, k + 2)[1:-1]
            ys = np.linspace(box.ymin, box.ymax, k + 2)[1:-1]
            for cx in xs:
                for cy in ys:
                    try:
                        if self.locate(float(cx), float(cy)) == "inside":
                            self._interior = (float(cx), float(cy))
                            return self._interior
                    except GeometryError:
                        continue
        raise GeometryError("could not find an interior point")

    def __repr__(self):
        return f"CurvedPolygon({len(self.spans)} spans)"


def point_in_polygon(poly: CurvedPolygon, p) -> str:
    """Classify p against poly: 'inside', 'outside' or 'boundary'."""
    if isinstance(p, Point2):
        return poly.locate(p.x, p.y)
    return poly.locate(float(p[0]), float(p[1]))


def polygon_from_points(points) -> CurvedPolygon:
    """Straight-edge polygon (degree-1 spans) through the given points."""
    pts = np.asarray(points, float)
    spans = [straight_span(pts[i], pts[(i + 1) % len(pts)])
             for i in range(len(pts))]
    return CurvedPolygon(spans)
