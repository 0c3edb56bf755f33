"""Projection charts for cell contours and the biharmonic boundary data."""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ._geometry import cumulative_length, polygon_is_simple, signed_area
from .net import NetError


class PlaneStrategy(str, enum.Enum):
    VECTOR_AREA = "vector_area"
    LEAST_SQUARES = "least_squares"
    THREE_CORNERS = "three_corners"


class ProjectionNotInjective(NetError):
    """The projected contour crosses itself on the chosen plane."""


@dataclass(frozen=True, eq=False)
class AffineChart:
    origin: np.ndarray
    basis_u: np.ndarray
    basis_v: np.ndarray
    normal: np.ndarray

    @classmethod
    def from_normal(cls, origin, normal) -> "AffineChart":
        n = np.asarray(normal, dtype=float)
        n = n / np.linalg.norm(n)
        # least-aligned world axis; near-ties go to the lower index
        a = np.abs(n)
        axis = np.eye(3)[int(np.flatnonzero(a <= a.min() + 1e-9)[0])]
        u = axis - np.dot(axis, n) * n
        u /= np.linalg.norm(u)
        v = np.cross(n, u)
        return cls(np.asarray(origin, dtype=float), u, v, n)

    @property
    def rotation(self) -> np.ndarray:
        """Rows are the chart axes (u, v, normal)."""
        return np.vstack([self.basis_u, self.basis_v, self.normal])

    def to_local(self, points) -> np.ndarray:
        return (np.asarray(points, dtype=float) - self.origin) @ self.rotation.T

    def to_world(self, local) -> np.ndarray:
        return self.origin + np.asarray(local, dtype=float) @ self.rotation

    def flipped(self) -> "AffineChart":
        return AffineChart.from_normal(self.origin, -self.normal)


def turning_angles(points: np.ndarray) -> np.ndarray:
    a = points - np.roll(points, 1, axis=0)
    b = np.roll(points, -1, axis=0) - points
    c = np.einsum("ij,ij->i", a, b) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
    return np.arccos(np.clip(c, -1.0, 1.0))


def _triangle_area(p, q, r) -> float:
    return 0.5 * float(np.linalg.norm(np.cross(q - p, r - p)))


def _three_corners(points: np.ndarray, corners=()) -> tuple:
    cand = list(corners)
    if len(cand) < 3:
        turn = turning_angles(points)
        sharp = [int(i) for i in np.argsort(-turn, kind="stable") if turn[i] > 0.35]
        cand = list(dict.fromkeys(cand + sharp))
    cand = cand[:12]
    if len(cand) >= 3:
        best = max(itertools.combinations(sorted(cand), 3),
                   key=lambda t: _triangle_area(*points[list(t)]))
        if _triangle_area(*points[list(best)]) > 0:
            return best
    # too few corners: spread the triple over the contour
    d = np.linalg.norm(points[:, None] - points[None], axis=2)
    i, j = np.unravel_index(int(np.argmax(d)), d.shape)
    area = np.linalg.norm(np.cross(points[j] - points[i], points - points[i]), axis=1)
    k = int(np.argmax(area))
    return tuple(sorted((int(i), int(j), k)))


def fit_plane(contour, strategy=PlaneStrategy.VECTOR_AREA, corners=()) -> AffineChart:
    """Choose the projection plane of a closed contour.

    ``VECTOR_AREA`` takes the plane of largest projected area (normal along
    the contour's vector area), ``LEAST_SQUARES`` the plane minimising squared
    normal distances, ``THREE_CORNERS`` the plane through three corner nodes.
    The chart is oriented so that the projected contour runs counterclockwise.
    """
    points = np.asarray(getattr(contour, "points", contour), dtype=float)
    strategy = PlaneStrategy(strategy)
    if len(points) < 3:
        raise NetError("need at least three points to fit a plane")
    centroid = points.mean(axis=0)
    scale = max(float(np.ptp(points, axis=0).max()), 1e-300)
    if strategy is PlaneStrategy.VECTOR_AREA:
        rel = points - centroid
        normal = 0.5 * np.cross(rel, np.roll(rel, -1, axis=0)).sum(axis=0)
        if np.linalg.norm(normal) <= 1e-12 * scale**2:
            raise NetError("contour encloses no projected area; no plane defined")
        normal /= np.linalg.norm(normal)
        base = centroid
    elif strategy is PlaneStrategy.LEAST_SQUARES:
        _, sv, vt = np.linalg.svd(points - centroid)
        if sv[1] <= 1e-12 * sv[0]:
            raise NetError("contour is collinear; no plane defined")
        normal = vt[2]
        base = centroid
    else:
        i, j, k = _three_corners(points, corners)
        normal = np.cross(points[j] - points[i], points[k] - points[i])
        if np.linalg.norm(normal) <= 1e-12 * scale**2:
            raise NetError("corner points are collinear; no plane defined")
        normal /= np.linalg.norm(normal)
        base = points[i]
    origin = centroid - np.dot(centroid - base, normal) * normal
    chart = AffineChart.from_normal(origin, normal)
    area = signed_area(chart.to_local(points)[:, :2])
    if area == 0.0:
        raise NetError("contour projects to zero area")
    return chart if area > 0 else chart.flipped()


@dataclass(frozen=True, eq=False)
class CellChart:
    """A contour in chart coordinates: planar boundary plus normal heights."""

    chart: AffineChart
    boundary2d: np.ndarray
    heights: np.ndarray
    corners: tuple = field(default=())

    @cached_property
    def arclength(self) -> np.ndarray:
        return cumulative_length(self.boundary2d, closed=True)

    @cached_property
    def dirichlet_g(self) -> np.ndarray:
        return dirichlet_data(self)

    def lift(self) -> np.ndarray:
        local = np.column_stack([self.boundary2d, self.heights])
        return self.chart.to_world(local)


def project_contour(contour, chart: AffineChart, corners=()) -> CellChart:
    points = np.asarray(getattr(contour, "points", contour), dtype=float)
    local = chart.to_local(points)
    boundary = np.ascontiguousarray(local[:, :2])
    if not polygon_is_simple(boundary):
        raise ProjectionNotInjective("projected contour is not a simple polygon")
    return CellChart(chart, boundary, local[:, 2].copy(), tuple(sorted(corners)))


def _derivative_weights(offsets: np.ndarray) -> np.ndarray:
    """First-derivative weights at offset 0 for arbitrary stencil offsets."""
    h = np.max(np.abs(offsets))
    x = offsets / h
    m = len(x)
    V = np.vander(x, m, increasing=True).T
    rhs = np.zeros(m)
    rhs[1] = 1.0
    return np.linalg.solve(V, rhs) / h


def _slopes_on_arc(s: np.ndarray, z: np.ndarray, width: int = 5) -> np.ndarray:
    """dz/ds at every node of an open arc with a shifted width-point stencil."""
    n = len(s)
    w = min(width, n)
    out = np.empty(n)
    for i in range(n):
        lo = min(max(i - w // 2, 0), n - w)
        idx = np.arange(lo, lo + w)
        out[i] = _derivative_weights(s[idx] - s[i]) @ z[idx]
    return out


@dataclass(frozen=True)
class DirichletTable:
    arclength: np.ndarray
    g: np.ndarray
    g_before: np.ndarray
    g_after: np.ndarray


def _g_from_slope(slope):
    # |d(lift)/dp|^2 = 1 + (dh/dp)^2 exactly, since p is planar arc length
    return 0.25 * np.log1p(np.asarray(slope) ** 2)


def dirichlet_table(cell_chart: CellChart) -> DirichletTable:
    """g = 1/2 log |d lift / dp| at every boundary node, p the planar arc length.

    Derivatives use five-point central stencils that never cross a corner;
    a corner gets the mean of the values from its two sides, both of which
    are kept for diagnostics.
    """
    b = cell_chart.boundary2d
    z = cell_chart.heights
    n = len(b)
    seg = np.linalg.norm(np.roll(b, -1, axis=0) - b, axis=1)
    if np.any(seg <= 0.0):
        raise NetError("degenerate zero-length boundary edge")
    s_all = cell_chart.arclength
    total = s_all[-1]
    g_before = np.empty(n)
    g_after = np.empty(n)
    corners = sorted(set(cell_chart.corners))
    if not corners:
        idx = np.arange(-2, n + 2)
        s = s_all[idx % n] + total * np.floor_divide(idx, n)
        slopes = np.empty(n)
        for i in range(n):
            sl = slice(i, i + 5)
            slopes[i] = _derivative_weights(s[sl] - s[i + 2]) @ z[idx[sl] % n]
        g = _g_from_slope(slopes)
        return DirichletTable(s_all[:-1].copy(), g, g.copy(), g.copy())
    g = np.empty(n)
    for k, c0 in enumerate(corners):
        c1 = corners[(k + 1) % len(corners)]
        span = (c1 - c0) % n or n
        idx = (c0 + np.arange(span + 1)) % n
        s = s_all[c0] + np.concatenate([[0.0], np.cumsum(seg[idx[:-1]])])
        gk = _g_from_slope(_slopes_on_arc(s, z[idx]))
        g_after[idx[0]] = gk[0]
        g_before[idx[-1]] = gk[-1]
        g[idx[1:-1]] = gk[1:-1]
    interior = np.ones(n, dtype=bool)
    interior[corners] = False
    g_before[interior] = g[interior]
    g_after[interior] = g[interior]
    g[corners] = 0.5 * (g_before[corners] + g_after[corners])
    return DirichletTable(s_all[:-1].copy(), g, g_before, g_after)


def dirichlet_data(cell_chart: CellChart) -> np.ndarray:
    """Per-node Dirichlet value for the conformal-factor biharmonic problem."""
    return dirichlet_table(cell_chart).g


def coarsen_boundary(arclength: np.ndarray, corners, target: float) -> np.ndarray:
    """Indices of a subset of closed-boundary nodes spaced roughly ``target`` apart.

    Corners are always kept. ``arclength`` has the closing total as last entry.
    """
    n = len(arclength) - 1
    total = arclength[-1]
    anchors = sorted(set(corners)) or [0]
    keep = []
    for k, a in enumerate(anchors):
        b = anchors[(k + 1) % len(anchors)]
        span = (b - a) % n or n
        idx = a + np.arange(span + 1)
        s = arclength[idx % n] + total * (idx >= n)
        length = s[-1] - s[0]
        pieces = max(int(round(length / target)), 1)
        if len(corners) == 0:
            pieces = max(pieces, 3)
        picks = [0]
        for q in range(1, pieces):
            j = int(np.argmin(np.abs(s - s[0] - q * length / pieces)))
            if j > picks[-1] and j < span:
                picks.append(j)
        keep.extend(int(idx[p] % n) for p in picks)
    return np.array(sorted(set(keep)), dtype=int)
