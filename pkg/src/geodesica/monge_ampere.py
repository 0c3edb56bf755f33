"""Curvature Monge-Ampere solve for the height function on a Cartesian grid.

The discrete equation at every Inside node is the cleared-denominator form

    R(h) = (h_xx h_yy - h_xy^2) - K (1 + h_x^2 + h_y^2)^2 = 0

with central differences along the two axes and the two diagonals (the
diagonal second differences give h_xy). Where an arm of the stencil leaves
the domain it is shortened to the crossing with the boundary polygon and
the contour height there is used, as in Shortley-Weller.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
import triangle as _triangle

from ._geometry import closest_on_polygon, first_crossing, points_in_polygon, segment_box_hits, signed_area
from .laplace_beltrami import PatchMesh

log = logging.getLogger(__name__)

INSIDE, BOUNDARY, OUTSIDE = 0, 1, 2

# (di, dj) offsets of the eight arms, paired as +/- along x, y, diag (1,1), diag (1,-1)
_DIRS = np.array([(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1), (1, -1), (-1, 1)])


class NonConvergence(RuntimeError):
    def __init__(self, msg, grid=None, report=None):
        super().__init__(msg)
        self.grid = grid
        self.report = report


@dataclass(frozen=True, eq=False)
class HeightGrid:
    """Square-cell grid over the bounding box of a planar domain.

    Arrays are indexed [j, i] with x = origin[0] + i*spacing and
    y = origin[1] + j*spacing.
    """

    origin: np.ndarray
    spacing: float
    mask: np.ndarray
    h: np.ndarray
    K: np.ndarray
    boundary: np.ndarray
    boundary_h: np.ndarray
    dist: np.ndarray = field(repr=False)

    @property
    def shape(self):
        return self.mask.shape

    def coords(self) -> tuple:
        ny, nx = self.shape
        x = self.origin[0] + self.spacing * np.arange(nx)
        y = self.origin[1] + self.spacing * np.arange(ny)
        return np.meshgrid(x, y)

    def inside_nodes(self) -> np.ndarray:
        """(j, i) of every Inside node in row-major order."""
        return np.argwhere(self.mask == INSIDE)

    def with_curvature(self, K) -> "HeightGrid":
        """Copy with K sampled from a callable K(x, y) or taken from an array."""
        if callable(K):
            X, Y = self.coords()
            vals = np.asarray(K(X, Y), dtype=float) * np.ones(self.shape)
        else:
            vals = np.asarray(K, dtype=float) * np.ones(self.shape)
        vals = np.where(self.mask == INSIDE, vals, np.nan)
        return replace(self, K=vals)


def boundary_height_at(boundary: np.ndarray, heights: np.ndarray, edge: int, s: float) -> float:
    return float((1.0 - s) * heights[edge] + s * heights[(edge + 1) % len(heights)])


def make_grid(boundary2d, heights, grid_n: int, curvature=None) -> HeightGrid:
    """Grid with ``grid_n`` nodes along the longer side of the domain's bounding box.

    The grid is centred on the box, so rotating the domain by 90 degrees about
    the box centre maps grid nodes onto grid nodes.
    """
    poly = np.asarray(boundary2d, dtype=float)
    z = np.asarray(heights, dtype=float)
    if grid_n < 3:
        raise ValueError("grid_n must be at least 3")
    lo, hi = poly.min(axis=0), poly.max(axis=0)
    extent = hi - lo
    spacing = float(extent.max()) / (grid_n - 1)
    if spacing <= 0:
        raise ValueError("degenerate domain")
    counts = np.ceil(extent / spacing - 1e-9).astype(int) + 1
    centre = 0.5 * (lo + hi)
    origin = centre - 0.5 * (counts - 1) * spacing
    nx, ny = int(counts[0]), int(counts[1])
    X, Y = np.meshgrid(origin[0] + spacing * np.arange(nx), origin[1] + spacing * np.arange(ny))
    pts = np.column_stack([X.ravel(), Y.ravel()])
    dist, edge, s = closest_on_polygon(pts, poly)
    inside = points_in_polygon(pts, poly)
    on = dist <= 1e-8 * spacing
    mask = np.full(len(pts), OUTSIDE, dtype=np.int8)
    mask[inside & ~on] = INSIDE
    mask[on] = BOUNDARY
    h = np.full(len(pts), np.nan)
    for k in np.flatnonzero(on):
        h[k] = boundary_height_at(poly, z, edge[k], s[k])
    grid = HeightGrid(origin, spacing, mask.reshape(ny, nx), h.reshape(ny, nx),
                      np.full((ny, nx), np.nan), poly, z, dist.reshape(ny, nx))
    if curvature is not None:
        grid = grid.with_curvature(curvature)
    return grid


class _Arm(NamedTuple):
    length: float
    node: tuple | None  # Inside neighbour (j, i), or None for a known boundary value
    value: float


def _arms(grid: HeightGrid, j: int, i: int) -> list:
    """The eight stencil arms of Inside node (j, i)."""
    ny, nx = grid.shape
    hgt = grid.spacing
    p = grid.origin + hgt * np.array([i, j], dtype=float)
    near = grid.dist[j, i] < 1.5 * hgt
    arms = []
    for di, dj in _DIRS:
        step = hgt * np.array([di, dj], dtype=float)
        full = float(np.hypot(*step))
        if near:
            hit = first_crossing(p, step, grid.boundary)
            if hit is not None:
                s, e, u = hit
                arms.append(_Arm(s * full, None, boundary_height_at(grid.boundary, grid.boundary_h, e, u)))
                continue
        jj, ii = j + dj, i + di
        if not (0 <= jj < ny and 0 <= ii < nx) or grid.mask[jj, ii] == OUTSIDE:
            raise RuntimeError(f"stencil of node ({j}, {i}) leaves the domain without crossing the boundary")
        if grid.mask[jj, ii] == BOUNDARY:
            arms.append(_Arm(full, None, float(grid.h[jj, ii])))
        else:
            arms.append(_Arm(full, (jj, ii), 0.0))
    return arms


def _pair_weights(a: float, b: float):
    """Weights (plus, centre, minus) of first and second derivatives for arms a (forward) and b (backward)."""
    den = a * b * (a + b)
    d1 = (b * b / den, -(b * b - a * a) / den, -a * a / den)
    d2 = (2 * b / den, -2 * (a + b) / den, 2 * a / den)
    return d1, d2


class _Operators(NamedTuple):
    Dx: sp.csr_matrix
    Dy: sp.csr_matrix
    Dxx: sp.csr_matrix
    Dyy: sp.csr_matrix
    Dxy: sp.csr_matrix
    bx: np.ndarray
    by: np.ndarray
    bxx: np.ndarray
    byy: np.ndarray
    bxy: np.ndarray


def _build_operators(grid: HeightGrid, nodes: np.ndarray, index: np.ndarray) -> _Operators:
    n = len(nodes)
    acc = {name: ([], [], [], np.zeros(n)) for name in ("x", "y", "xx", "yy", "d1", "d2")}

    def put(name, row, arm, w):
        r, c, v, b = acc[name]
        if arm is None:
            r.append(row); c.append(row); v.append(w)
        elif arm.node is not None:
            r.append(row); c.append(index[arm.node]); v.append(w)
        else:
            b[row] += w * arm.value

    for row, (j, i) in enumerate(nodes):
        arms = _arms(grid, int(j), int(i))
        for k, (first, second) in enumerate((("x", "xx"), ("y", "yy"), (None, "d1"), (None, "d2"))):
            fwd, bwd = arms[2 * k], arms[2 * k + 1]
            d1, d2 = _pair_weights(fwd.length, bwd.length)
            for name, w in ((first, d1), (second, d2)):
                if name is None:
                    continue
                put(name, row, fwd, w[0])
                put(name, row, None, w[1])
                put(name, row, bwd, w[2])

    def mat(name):
        r, c, v, b = acc[name]
        return sp.csr_matrix((v, (r, c)), shape=(n, n)), b

    Dx, bx = mat("x")
    Dy, by = mat("y")
    Dxx, bxx = mat("xx")
    Dyy, byy = mat("yy")
    D1, b1 = mat("d1")
    D2, b2 = mat("d2")
    return _Operators(Dx, Dy, Dxx, Dyy, ((D1 - D2) * 0.5).tocsr(), bx, by, bxx, byy, 0.5 * (b1 - b2))


def _derivatives(ops: _Operators, u: np.ndarray):
    return (ops.Dx @ u + ops.bx, ops.Dy @ u + ops.by, ops.Dxx @ u + ops.bxx,
            ops.Dyy @ u + ops.byy, ops.Dxy @ u + ops.bxy)


def _residual(ops: _Operators, u: np.ndarray, K: np.ndarray) -> np.ndarray:
    hx, hy, hxx, hyy, hxy = _derivatives(ops, u)
    return hxx * hyy - hxy**2 - K * (1.0 + hx**2 + hy**2) ** 2


@dataclass(frozen=True)
class MASolveReport:
    iterations: int
    final_residual: float
    converged: bool
    history: tuple = ()
    method: str = "newton"


def discrete_residual(grid: HeightGrid) -> np.ndarray:
    """Cleared-denominator residual at every Inside node, evaluated node by node.

    Independent of the sparse operators used by the solver; returns an array
    over the grid with NaN off the Inside set.
    """
    out = np.full(grid.shape, np.nan)
    for j, i in grid.inside_nodes():
        arms = _arms(grid, int(j), int(i))
        f0 = grid.h[j, i]
        vals = [arm.value if arm.node is None else grid.h[arm.node] for arm in arms]
        der = []
        for k in range(4):
            a, b = arms[2 * k].length, arms[2 * k + 1].length
            fp, fm = vals[2 * k], vals[2 * k + 1]
            den = a * b * (a + b)
            der.append(((b * b * fp - a * a * fm - (b * b - a * a) * f0) / den,
                        2.0 * (b * fp - (a + b) * f0 + a * fm) / den))
        hx, hxx = der[0]
        hy, hyy = der[1]
        hxy = 0.5 * (der[2][1] - der[3][1])
        out[j, i] = hxx * hyy - hxy**2 - grid.K[j, i] * (1.0 + hx**2 + hy**2) ** 2
    return out


def _jacobian(ops: _Operators, u: np.ndarray, K: np.ndarray) -> sp.csr_matrix:
    hx, hy, hxx, hyy, hxy = _derivatives(ops, u)
    W = 1.0 + hx**2 + hy**2
    return (sp.diags(hyy) @ ops.Dxx + sp.diags(hxx) @ ops.Dyy - sp.diags(2.0 * hxy) @ ops.Dxy
            - sp.diags(4.0 * K * W * hx) @ ops.Dx - sp.diags(4.0 * K * W * hy) @ ops.Dy).tocsr()


def _newton(ops, u, K, scale, tol, max_iter, history):
    R = _residual(ops, u, K)
    it = 0
    while history[-1] > tol and it < max_iter:
        it += 1
        with np.errstate(all="ignore"):
            try:
                du = spla.spsolve(_jacobian(ops, u, K).tocsc(), -R)
            except RuntimeError:
                du = np.full(len(u), np.nan)
        if not np.all(np.isfinite(du)):
            log.info("singular Newton system at iteration %d", it)
            break
        norm0 = np.linalg.norm(R)
        t = 1.0
        for _ in range(21):
            Rt = _residual(ops, u + t * du, K)
            if np.linalg.norm(Rt) < norm0:
                break
            t *= 0.5
        else:
            log.info("line search stalled at iteration %d", it)
            break
        u, R = u + t * du, Rt
        history.append(scale * float(np.abs(R).max()))
    return u, it


def _levenberg_marquardt(ops, u, K, scale, tol, max_iter, history):
    R = _residual(ops, u, K)
    n = len(u)
    mu = 1e-3
    it = 0
    while history[-1] > tol and it < max_iter:
        it += 1
        J = _jacobian(ops, u, K)
        A = (J.T @ J).tocsc()
        grad = J.T @ R
        d = float(A.diagonal().mean()) or 1.0
        norm0 = np.linalg.norm(R)
        while mu <= 1e8:
            du = spla.spsolve((A + mu * d * sp.identity(n, format="csc")).tocsc(), -grad)
            Rt = _residual(ops, u + du, K) if np.all(np.isfinite(du)) else R
            if np.linalg.norm(Rt) < norm0:
                u, R = u + du, Rt
                mu = max(mu / 3.0, 1e-12)
                break
            mu *= 4.0
        else:
            log.info("Levenberg-Marquardt stalled at iteration %d", it)
            break
        history.append(scale * float(np.abs(R).max()))
    return u, it


def solve_curvature_ma(grid: HeightGrid, tol_ma: float = 1e-8, max_iter: int = 50,
                       branch: str = "up", raise_on_failure: bool = False, regularize: bool = True):
    """Damped Newton solve of the curvature equation on the Inside nodes.

    Starts from the discrete harmonic extension of the boundary data. When
    the mean prescribed curvature is positive the start is pushed off the
    saddle-shaped harmonic surface by a bubble in the ``branch`` direction
    ("up" along the chart normal or "down"), because the two graphs of a
    positively curved equation differ only by that sign.

    Where K < 0 the linearised operator is hyperbolic and can be singular
    (it is for the harmonic start 2xy on a disk). If Newton stalls and
    ``regularize`` is set, Levenberg-Marquardt steps continue from the best
    iterate for up to ``max_iter`` more iterations.

    Returns (solved grid, report). ``report.final_residual`` is
    ``spacing**2 * max|R|``.
    """
    nodes = grid.inside_nodes()
    index = np.full(grid.shape, -1)
    index[nodes[:, 0], nodes[:, 1]] = np.arange(len(nodes))
    K = grid.K[nodes[:, 0], nodes[:, 1]]
    if len(nodes) == 0:
        return grid, MASolveReport(0, 0.0, True)
    if not np.all(np.isfinite(K)):
        raise ValueError("curvature must be finite on Inside nodes")
    ops = _build_operators(grid, nodes, index)
    lap = (ops.Dxx + ops.Dyy).tocsc()
    u = spla.spsolve(lap, -(ops.bxx + ops.byy))
    kbar = float(K.mean())
    if kbar > 0 and branch in ("up", "down"):
        bubble = spla.spsolve(lap, -np.ones(len(nodes)))
        u = u + (1.0 if branch == "up" else -1.0) * 2.0 * np.sqrt(kbar) * bubble
    scale = grid.spacing**2
    history = [scale * float(np.abs(_residual(ops, u, K)).max())]
    u, it = _newton(ops, u, K, scale, tol_ma, max_iter, history)
    method = "newton"
    if history[-1] > tol_ma and regularize:
        u, extra = _levenberg_marquardt(ops, u, K, scale, tol_ma, max_iter, history)
        it += extra
        method = "newton+lm"
    h = grid.h.copy()
    h[nodes[:, 0], nodes[:, 1]] = u
    solved = replace(grid, h=h)
    report = MASolveReport(it, history[-1], history[-1] <= tol_ma, tuple(history), method)
    if not report.converged:
        log.warning("Monge-Ampere solve stopped at residual %.3g after %d iterations", history[-1], it)
        if raise_on_failure:
            raise NonConvergence(f"Monge-Ampere solve stopped at residual {history[-1]:.3g}", solved, report)
    return solved, report


def first_fundamental_form(grid: HeightGrid, node) -> tuple:
    """(E, F, G) of the graph at an Inside node from central differences."""
    j, i = node
    if grid.mask[j, i] != INSIDE:
        raise ValueError(f"node {node} is not Inside")
    arms = _arms(grid, j, i)
    f0 = grid.h[j, i]
    grads = []
    for k in range(2):
        fwd, bwd = arms[2 * k], arms[2 * k + 1]
        fp = fwd.value if fwd.node is None else grid.h[fwd.node]
        fm = bwd.value if bwd.node is None else grid.h[bwd.node]
        a, b = fwd.length, bwd.length
        grads.append((b * b * fp - a * a * fm - (b * b - a * a) * f0) / (a * b * (a + b)))
    hx, hy = grads
    return 1.0 + hx * hx, hx * hy, 1.0 + hy * hy


def grid_to_patch(grid: HeightGrid, margin: float = 0.25) -> PatchMesh:
    """Triangulated graph of a solved grid, in chart coordinates.

    The boundary ring is exactly the contour polygon with its heights
    (vertices 0..m-1, counterclockwise). Inside nodes closer than
    ``margin * spacing`` to the contour are dropped; grid squares clear of
    the contour are split along their shorter lifted diagonal, and the band
    between them and the contour is filled by a constrained Delaunay
    triangulation without extra points.
    """
    poly, zb = grid.boundary, grid.boundary_h
    if signed_area(poly) < 0:
        raise ValueError("boundary polygon must be counterclockwise")
    m = len(poly)
    ny, nx = grid.shape
    hgt = grid.spacing
    keep = (grid.mask == INSIDE) & (grid.dist >= margin * hgt)
    X, Y = grid.coords()
    vid = np.full(grid.shape, -1)
    kj, ki = np.nonzero(keep)
    vid[kj, ki] = m + np.arange(len(kj))
    verts = np.vstack([np.column_stack([poly, zb]), np.column_stack([X[kj, ki], Y[kj, ki], grid.h[kj, ki]])])

    segs = [np.column_stack([np.arange(m), (np.arange(m) + 1) % m])]
    sq = keep[:-1, :-1] & keep[1:, :-1] & keep[:-1, 1:] & keep[1:, 1:]
    near = np.minimum.reduce([grid.dist[:-1, :-1], grid.dist[1:, :-1], grid.dist[:-1, 1:], grid.dist[1:, 1:]]) < 0.75 * hgt
    a = poly
    b = np.roll(poly, -1, axis=0)
    for j, i in np.argwhere(sq & near):
        lo = grid.origin + hgt * np.array([i, j])
        hi = lo + hgt
        cand = np.flatnonzero((np.minimum(a[:, 0], b[:, 0]) <= hi[0]) & (np.maximum(a[:, 0], b[:, 0]) >= lo[0])
                              & (np.minimum(a[:, 1], b[:, 1]) <= hi[1]) & (np.maximum(a[:, 1], b[:, 1]) >= lo[1]))
        if any(segment_box_hits(a[e], b[e], lo, hi) for e in cand):
            sq[j, i] = False
    edges = set()
    for j, i in np.argwhere(sq):
        v00, v10, v01, v11 = vid[j, i], vid[j, i + 1], vid[j + 1, i], vid[j + 1, i + 1]
        for e in ((v00, v10), (v10, v11), (v11, v01), (v01, v00)):
            edges.add((min(e), max(e)))
        d1 = np.linalg.norm(verts[v00] - verts[v11])
        d2 = np.linalg.norm(verts[v10] - verts[v01])
        edges.add((min(v00, v11), max(v00, v11)) if d1 <= d2 else (min(v10, v01), max(v10, v01)))
    if edges:
        segs.append(np.array(sorted(edges)))
    seg = np.vstack(segs)
    out = _triangle.triangulate({"vertices": verts[:, :2], "segments": seg}, "pQ")
    if len(out["vertices"]) != len(verts):
        raise RuntimeError("patch triangulation inserted points")
    tri = np.asarray(out["triangles"], dtype=np.int64)
    return PatchMesh(verts, tri, np.arange(m))
