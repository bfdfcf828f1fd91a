"""Multi-resolution WENO reconstruction of per-cell polynomials.

From cell averages, each cell gets a polynomial that conserves its own
average exactly (a hard constraint in the least-squares fit) and blends a
hierarchy of fits through smoothness-driven nonlinear weights: order 1 is
the cell average itself, order 3 adds a quadratic fit on the one-ring,
order 5 adds a quartic fit on the two-ring.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .integrate import Poly2, green_integral
from .mesh import CurvilinearMesh
from .geometry import gauss_rule_01


class ReconstructionError(RuntimeError):
    pass


@dataclass(frozen=True)
class WenoConfig:
    """Order and linear weights of the reconstruction.

    gammas defaults to (1, 100)/101 for order 3 and (1, 10, 100)/111 for
    order 5; they must be positive and sum to one.
    """

    order: int = 3
    gammas: tuple[float, ...] | None = None
    epsilon: float = 1e-4

    def __post_init__(self):
        if self.order not in (1, 3, 5):
            raise ValueError("order must be 1, 3 or 5")
        g = self.gammas
        if g is None:
            g = {1: (1.0,), 3: (1 / 101, 100 / 101),
                 5: (1 / 111, 10 / 111, 100 / 111)}[self.order]
            object.__setattr__(self, "gammas", g)
        if len(g) != (self.order + 1) // 2:
            raise ValueError("gamma count does not match the order")
        if any(x <= 0 for x in g) or abs(sum(g) - 1.0) > 1e-12:
            raise ValueError("linear weights must be positive and sum to 1")


@dataclass
class Stencil:
    """Nested stencils S0 (the cell) within S1 (within S2 for order 5)."""

    levels: list[list[int]]


@dataclass
class ReconField:
    polys: list[Poly2]
    config: WenoConfig
    warnings: list[str] = field(default_factory=list)


def _one_ring(adj, cells: set[int]) -> set[int]:
    out = set(cells)
    for j in cells:
        out |= set(adj.edge_neighbors[j]) | set(adj.vertex_neighbors[j])
    return out


def build_stencil(mesh: CurvilinearMesh, i: int, order: int) -> Stencil:
    """S0 = {i}; S1 = one-ring (edge + vertex neighbors); S2 = two-ring.

    Boundary cells keep whatever neighbors exist; the fitting layer grows a
    stencil by extra rings when its normal matrix is rank-deficient, so
    degree reduction is the last resort, not the first.
    """
    adj = mesh.adjacency
    s1 = _one_ring(adj, {i})
    levels = [[i], sorted(s1)]
    if order >= 5:
        levels.append(sorted(_one_ring(adj, s1)))
    return Stencil(levels)


def _monomials(k: int) -> list[tuple[int, int]]:
    """Non-constant scaled monomial exponents up to total degree k."""
    return [(a, s - a) for s in range(1, k + 1) for a in range(s, -1, -1)]


class _GeometryCache:
    """Per-mesh boundary samples, frames, and monomial moments."""

    def __init__(self, mesh: CurvilinearMesh, qmax: int):
        self.mesh = mesh
        self.qmax = qmax
        d = mesh.edge_degree
        ng = max(2, math.ceil((qmax + 2) * d / 2))
        xi, w = gauss_rule_01(ng)
        # sample every edge once; cells reuse with orientation sign
        E = mesh.n_edges
        ex = np.empty((E, ng))
        ey = np.empty((E, ng))
        ewdx = np.empty((E, ng))
        ewdy = np.empty((E, ng))
        for e in range(E):
            c = mesh.edge_curve(e)
            p = c.eval(xi)
            dv = c.deriv(xi)
            ex[e], ey[e] = p[:, 0], p[:, 1]
            ewdx[e] = dv[:, 0] * w
            ewdy[e] = dv[:, 1] * w
        C = mesh.n_cells
        self.x = np.empty((C, 4 * ng))
        self.y = np.empty((C, 4 * ng))
        self.wdx = np.empty((C, 4 * ng))
        self.wdy = np.empty((C, 4 * ng))
        for i in range(C):
            for k, (e, dr) in enumerate(zip(mesh.cell_edges[i], mesh.cell_dirs[i])):
                sl = slice(k * ng, (k + 1) * ng)
                if dr > 0:
                    self.x[i, sl] = ex[e]
                    self.y[i, sl] = ey[e]
                    self.wdx[i, sl] = ewdx[e]
                    self.wdy[i, sl] = ewdy[e]
                else:
                    self.x[i, sl] = ex[e, ::-1]
                    self.y[i, sl] = ey[e, ::-1]
                    self.wdx[i, sl] = -ewdx[e, ::-1]
                    self.wdy[i, sl] = -ewdy[e, ::-1]
        self.area = mesh.cell_areas().copy()
        # centroids from contour moments of x and y
        self.cx = 0.5 * np.einsum("cs,cs->c", self.x ** 2, self.wdy) / self.area
        self.cy = np.einsum("cs,cs,cs->c", self.x, self.y, self.wdy) / self.area
        self.h = np.sqrt(self.area)
        self._moments: dict[tuple[int, int], np.ndarray] = {}

    def moments(self, j: int, i: int) -> np.ndarray:
        """M[a, b] = integral over cell j of X_i^a Y_i^b (frame of cell i)."""
        key = (j, i)
        M = self._moments.get(key)
        if M is None:
            q = self.qmax
            X = (self.x[j] - self.cx[i]) / self.h[i]
            Y = (self.y[j] - self.cy[i]) / self.h[i]
            XP = np.vander(X, q + 2, increasing=True)
            YP = np.vander(Y, q + 1, increasing=True)
            raw = np.einsum("sm,sn,s->mn", XP[:, 1:], YP, self.wdy[j])
            M = self.h[i] * raw / np.arange(1, q + 2)[:, None]
            self._moments[key] = M
        return M


def _cache_for(mesh: CurvilinearMesh, qmax: int) -> _GeometryCache:
    cache = getattr(mesh, "_recon_cache", None)
    if cache is None or cache.qmax < qmax:
        cache = _GeometryCache(mesh, qmax)
        mesh._recon_cache = cache
    return cache


def constrained_lsq_fit(mesh: CurvilinearMesh, averages: np.ndarray, i: int,
                        cells: list[int], degree: int,
                        _cache: _GeometryCache | None = None
                        ) -> tuple[Poly2, int]:
    """Least-squares polynomial fit of stencil averages, conserving cell i.

    Minimizes the average mismatch over the stencil subject to exact
    reproduction of the average on cell i; the constraint is eliminated by
    substituting the constant coefficient. Rank-deficient systems fall back
    to lower degree; returns (polynomial, fitted degree).
    """
    cache = _cache or _cache_for(mesh, max(2 * degree - 2, degree))
    avg = np.asarray(averages, float)
    rows = [j for j in cells if j != i]
    mi = cache.moments(i, i)
    area_i = cache.area[i]
    for k in range(degree, 0, -1):
        mons = _monomials(k)
        if len(rows) < len(mons):
            continue
        A = np.empty((len(rows), len(mons)))
        b = np.empty(len(rows))
        for r, j in enumerate(rows):
            mj = cache.moments(j, i)
            aj = cache.area[j]
            for c, (p, q) in enumerate(mons):
                A[r, c] = mj[p, q] - aj * mi[p, q] / area_i
            b[r] = (avg[j] - avg[i]) * aj
        col = np.linalg.norm(A, axis=0)
        if np.any(col == 0.0):
            continue
        As = A / col
        try:
            # aggressive truncation: a nearly-dependent column set (too few
            # distinct grid lines in a truncated stencil) must be treated as
            # rank-deficient so the caller grows the stencil
            sol, _res, rank, _sv = np.linalg.lstsq(As, b, rcond=1e-4)
        except np.linalg.LinAlgError:
            continue
        if rank < len(mons) or not np.all(np.isfinite(sol)):
            continue
        sol = sol / col
        coeffs = np.zeros((k + 1, k + 1))
        c0 = avg[i]
        for c, (p, q) in enumerate(mons):
            coeffs[p, q] = sol[c]
            c0 -= sol[c] * mi[p, q] / area_i
        coeffs[0, 0] = c0
        return (Poly2(coeffs, cache.cx[i], cache.cy[i], cache.h[i]), k)
    return (Poly2.constant(avg[i], cache.cx[i], cache.cy[i], cache.h[i]), 0)


def _fit_with_growth(mesh, avg, i: int, cells: list[int], degree: int,
                     cache) -> tuple[Poly2, int]:
    """Fit at the requested degree, growing the stencil before giving up.

    Truncated boundary stencils can be exactly rank-deficient (too few
    distinct grid lines for the requested degree); adding a ring restores
    the rank, which preserves the full order near boundaries. Degree
    reduction remains the last resort.
    """
    poly, got = constrained_lsq_fit(mesh, avg, i, cells, degree, cache)
    grown = set(cells)
    adj = mesh.adjacency
    for _ in range(2):
        if got >= degree:
            break
        bigger = _one_ring(adj, grown)
        if bigger == grown:
            break
        grown = bigger
        poly, got = constrained_lsq_fit(mesh, avg, i, sorted(grown), degree,
                                        cache)
    return poly, got


def _conv2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros((a.shape[0] + b.shape[0] - 1, a.shape[1] + b.shape[1] - 1))
    for p in range(a.shape[0]):
        for q in range(a.shape[1]):
            if a[p, q] != 0.0:
                out[p:p + b.shape[0], q:q + b.shape[1]] += a[p, q] * b
    return out


def _coeff_deriv(c: np.ndarray, l1: int, l2: int) -> np.ndarray:
    for _ in range(l1):
        n = c.shape[0]
        c = c[1:] * np.arange(1, n)[:, None] if n > 1 else np.zeros((1, c.shape[1]))
    for _ in range(l2):
        n = c.shape[1]
        c = c[:, 1:] * np.arange(1, n)[None, :] if n > 1 else np.zeros((c.shape[0], 1))
    return _trim(c)


def _trim(c: np.ndarray) -> np.ndarray:
    """Crop trailing all-zero rows and columns of a coefficient array."""
    nz = np.argwhere(c != 0.0)
    if len(nz) == 0:
        return np.zeros((1, 1))
    return c[:nz[:, 0].max() + 1, :nz[:, 1].max() + 1]


def _beta_from_moments(coeffs: np.ndarray, h: float, area: float,
                       mom: np.ndarray) -> float:
    """Smoothness indicator from precomputed self-moments.

    beta = sum over derivative orders s >= 1 of
    area^(s-1) * integral (d^s p / dx^l1 dy^l2)^2 over the cell.
    """
    kdeg = coeffs.shape[0] - 1
    beta = 0.0
    for s in range(1, kdeg + 1):
        for l1 in range(s + 1):
            l2 = s - l1
            dc = _coeff_deriv(coeffs, l1, l2)
            if not np.any(dc):
                continue
            sq = _conv2(dc, dc)
            na, nb = sq.shape
            integral = float(np.sum(sq * mom[:na, :nb]))
            beta += area ** (s - 1) * integral / h ** (2 * s)
    return beta


def smoothness(p: Poly2, cell) -> float:
    """Scaled squared-derivative integrals of p over a cell (public form).

    cell is a CurvedPolygon; the integral is evaluated exactly through the
    Green contour route on the squared-derivative polynomials.
    """
    area = cell.signed_area()
    kdeg = p.coeffs.shape[0] - 1
    beta = 0.0
    for s in range(1, kdeg + 1):
        for l1 in range(s + 1):
            l2 = s - l1
            dp = p.deriv(l1, l2)
            if not np.any(dp.coeffs):
                continue
            beta += area ** (s - 1) * green_integral(dp * dp, cell)
    return beta


def beta0(mesh: CurvilinearMesh, averages, i: int,
          stencil: Stencil | None = None) -> float:
    """Minimum squared average difference over the big stencil minus i."""
    st = stencil or build_stencil(mesh, i, 3)
    avg = np.asarray(averages, float)
    others = [j for j in st.levels[1] if j != i]
    if not others:
        raise ReconstructionError(f"cell {i} has no stencil neighbors")
    return float(min((avg[i] - avg[j]) ** 2 for j in others))


def _nonlinear_weights(gammas, betas, tau, eps):
    wbar = [g * (1.0 + tau / (b + eps)) for g, b in zip(gammas, betas)]
    tot = sum(wbar)
    return [w / tot for w in wbar]


def weno_reconstruct(mesh: CurvilinearMesh, averages,
                     config: WenoConfig | None = None) -> ReconField:
    """Per-cell WENO polynomials from cell averages.

    Order 1 returns the averages; order 3 blends the cell average with a
    conservative quadratic fit; order 5 adds a quartic fit on the two-ring.
    Every returned polynomial integrates to the cell average exactly.
    """
    config = config or WenoConfig()
    avg = np.asarray(averages, float)
    if len(avg) != mesh.n_cells:
        raise ReconstructionError("field length does not match the mesh")
    kdeg = {1: 0, 3: 2, 5: 4}[config.order]
    cache = _cache_for(mesh, max(2 * kdeg - 2, kdeg, 2))
    polys: list[Poly2] = []
    warnings: list[str] = []
    for i in range(mesh.n_cells):
        poly, _w, _b, warns = _cell_recon(mesh, avg, i, config, cache)
        polys.append(poly)
        warnings.extend(warns)
    return ReconField(polys, config, warnings)


def weno_weights(mesh: CurvilinearMesh, averages, i: int,
                 config: WenoConfig | None = None):
    """Nonlinear weights and smoothness indicators of one cell's blend."""
    config = config or WenoConfig()
    avg = np.asarray(averages, float)
    kdeg = {1: 0, 3: 2, 5: 4}[config.order]
    cache = _cache_for(mesh, max(2 * kdeg - 2, kdeg, 2))
    _poly, weights, betas, _warns = _cell_recon(mesh, avg, i, config, cache)
    return weights, betas


def _cell_recon(mesh, avg, i: int, config: WenoConfig, cache):
    eps = config.epsilon
    warns: list[str] = []
    p0 = Poly2.constant(avg[i], cache.cx[i], cache.cy[i], cache.h[i])
    if config.order == 1:
        return p0, (1.0,), (), warns
    st = build_stencil(mesh, i, config.order)
    b0 = beta0(mesh, avg, i, st)
    q1, got1 = _fit_with_growth(mesh, avg, i, st.levels[1], 2, cache)
    if got1 < 2:
        warns.append(f"cell {i}: quadratic fit reduced to degree {got1}")
    mom_i = cache.moments(i, i)
    if config.order == 3:
        g0, g1 = config.gammas
        p1 = q1 * (1.0 / g1) + p0 * (-g0 / g1)
        b1 = _beta_from_moments(p1.coeffs, cache.h[i], cache.area[i], mom_i)
        tau = (b0 - b1) ** 2 / 4.0
        w = _nonlinear_weights(config.gammas, (b0, b1), tau, eps)
        return p0 * w[0] + p1 * w[1], tuple(w), (b0, b1), warns
    # order 5; cells whose two-ring is truncated by the boundary get a
    # cubic top level: the one-sided quartic is too ill-conditioned on
    # irregular meshes, and an O(h^4) band of width h keeps L1 at h^5
    g0, g1, g2 = config.gammas
    top_degree = 4 if len(st.levels[2]) >= 25 else 3
    q2, got2 = _fit_with_growth(mesh, avg, i, st.levels[2], top_degree, cache)
    if got2 < top_degree:
        warns.append(f"cell {i}: top-level fit reduced to degree {got2}")
    g01 = g0 / (g0 + g1)
    g11 = g1 / (g0 + g1)
    p1 = q1 * (1.0 / g11) + p0 * (-g01 / g11)
    p2 = q2 * (1.0 / g2) + p0 * (-g0 / g2) + p1 * (-g1 / g2)
    b1 = _beta_from_moments(p1.coeffs, cache.h[i], cache.area[i], mom_i)
    b2 = _beta_from_moments(p2.coeffs, cache.h[i], cache.area[i], mom_i)
    # tau from the derivative-based indicators only: beta0 (an average
    # difference) deviates from beta1/beta2 at leading order on smooth
    # data, and folding it into tau costs the scheme half an order in
    # the measured 8..64 window
    tau = (b2 - b1) ** 2 / 4.0
    w = _nonlinear_weights(config.gammas, (b0, b1, b2), tau, eps)
    return (p0 * w[0] + p1 * w[1] + p2 * w[2], tuple(w), (b0, b1, b2), warns)
