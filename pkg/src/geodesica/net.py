"""Curve nets: polyline geometry, intersections, cells and the geodecity check."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from ._geometry import cumulative_length


class NetError(ValueError):
    """Structural problem with a net, curve or cell."""


@dataclass(frozen=True, eq=False)
class Polyline3:
    """Ordered 3D polyline.

    A closed polyline stores its first point once; the closing segment is
    implicit.
    """

    points: np.ndarray
    closed: bool = False

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) < 2:
            raise NetError("a polyline needs at least two 3D points")
        if self.closed and len(pts) > 2 and np.array_equal(pts[0], pts[-1]):
            raise NetError("closed polyline repeats its first point; store it once")
        seg = np.diff(np.vstack([pts, pts[:1]]) if self.closed else pts, axis=0)
        if np.any(np.linalg.norm(seg, axis=1) == 0.0):
            raise NetError("polyline has repeated consecutive points")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        s = cumulative_length(pts, self.closed)
        s.setflags(write=False)
        object.__setattr__(self, "_s", s)

    @property
    def arclength(self) -> np.ndarray:
        """Arc-length parameter of every node (closed curves get a trailing total)."""
        return self._s

    @property
    def length(self) -> float:
        return float(self._s[-1])

    @property
    def diameter(self) -> float:
        lo, hi = self.points.min(axis=0), self.points.max(axis=0)
        return float(np.linalg.norm(hi - lo))

    def _wrap(self, s: float) -> float:
        if self.closed:
            return s % self.length
        return s

    def evaluate(self, s: float) -> np.ndarray:
        s = self._wrap(float(s))
        pts = np.vstack([self.points, self.points[:1]]) if self.closed else self.points
        k = int(np.clip(np.searchsorted(self._s, s, side="right") - 1, 0, len(self._s) - 2))
        w = (s - self._s[k]) / (self._s[k + 1] - self._s[k])
        return (1.0 - w) * pts[k] + w * pts[k + 1]

    def extract(self, t0: float, t1: float, reversed: bool = False, eps: float = 1e-12) -> np.ndarray:
        """Points of the sub-arc [t0, t1], endpoints included.

        On closed curves t1 <= t0 wraps through the origin, and t1 - t0 equal
        to the length selects the whole loop.
        """
        L = self.length
        if self.closed:
            if t1 <= t0:
                t1 += L
            if t1 - t0 > L * (1 + eps):
                raise NetError("interval longer than the closed curve")
            s = np.concatenate([self._s[:-1] + k * L for k in range(int(t1 // L) + 2)])
            pts = np.tile(self.points, (int(t1 // L) + 2, 1))
        else:
            if not (-eps * L <= t0 < t1 <= L * (1 + eps)):
                raise NetError(f"interval [{t0}, {t1}] outside curve range [0, {L}]")
            s, pts = self._s, self.points
        tol = eps * max(L, 1.0)
        inner = (s > t0 + tol) & (s < t1 - tol)
        out = np.vstack([self.evaluate(t0), pts[inner], self.evaluate(t1)])
        return out[::-1].copy() if reversed else out


class Frenet(NamedTuple):
    tangent: np.ndarray
    normal: Optional[np.ndarray]
    curvature: float


def _node_frames(curve: Polyline3):
    """Unit tangents and curvature vectors at every node."""
    p = curve.points
    n = len(p)
    if curve.closed:
        prev, nxt = np.roll(p, 1, axis=0), np.roll(p, -1, axis=0)
    else:
        if n < 3:
            t = (p[1] - p[0]) / np.linalg.norm(p[1] - p[0])
            return np.tile(t, (n, 1)), np.zeros((n, 3))
        # forward/backward differences at the two ends
        prev = np.vstack([p[:1], p[:-1]])
        nxt = np.vstack([p[1:], p[-1:]])
    tan = nxt - prev
    tan /= np.linalg.norm(tan, axis=1)[:, None]
    if curve.closed:
        a, b, c = prev, p, nxt
        g1 = np.linalg.norm(p - prev, axis=1)
        g2 = np.linalg.norm(nxt - p, axis=1)
    else:
        # the ends reuse the second difference of their neighbour
        c_idx = np.clip(np.arange(n), 1, n - 2)
        a, b, c = p[c_idx - 1], p[c_idx], p[c_idx + 1]
        g1 = np.linalg.norm(b - a, axis=1)
        g2 = np.linalg.norm(c - b, axis=1)
    acc = 2.0 * (g1[:, None] * c - (g1 + g2)[:, None] * b + g2[:, None] * a) / (g1 * g2 * (g1 + g2))[:, None]
    kvec = acc - np.sum(acc * tan, axis=1)[:, None] * tan
    return tan, kvec


def estimate_frenet(curve: Polyline3, s: float) -> Frenet:
    """Tangent, principal normal and curvature at arc length ``s``.

    Node values come from central differences in arc length and are linearly
    blended between the two nodes bracketing ``s``. The normal is ``None``
    when the curvature is below ``1e-8 / diameter``.
    """
    L = curve.length
    if not (-1e-12 * L <= s <= L * (1 + 1e-12)):
        raise NetError(f"arc-length parameter {s} outside [0, {L}]")
    tan, kvec = _node_frames(curve)
    knots = curve.arclength
    if curve.closed:
        tan = np.vstack([tan, tan[:1]])
        kvec = np.vstack([kvec, kvec[:1]])
        s = s % L
    s = min(max(s, 0.0), L)
    k = int(np.clip(np.searchsorted(knots, s, side="right") - 1, 0, len(knots) - 2))
    w = (s - knots[k]) / (knots[k + 1] - knots[k])
    t = (1 - w) * tan[k] + w * tan[k + 1]
    t /= np.linalg.norm(t)
    kv = (1 - w) * kvec[k] + w * kvec[k + 1]
    kv = kv - np.dot(kv, t) * t
    kappa = float(np.linalg.norm(kv))
    tol_curv = 1e-8 / max(curve.diameter, np.finfo(float).tiny)
    if kappa < tol_curv:
        return Frenet(t, None, kappa)
    return Frenet(t, kv / kappa, kappa)


@dataclass(frozen=True)
class Intersection:
    curve_a: int
    curve_b: int
    param_a: float
    param_b: float
    position: tuple

    def swapped(self) -> "Intersection":
        return Intersection(self.curve_b, self.curve_a, self.param_b, self.param_a, self.position)


@dataclass(frozen=True)
class Segment:
    curve: int
    t0: float
    t1: float
    reversed: bool = False


@dataclass(frozen=True)
class Cell:
    segments: tuple
    id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if not self.segments:
            raise NetError(f"cell {self.id!r} has no segments")


@dataclass(frozen=True, eq=False)
class GeodesicNet:
    curves: tuple = ()
    intersections: tuple = ()
    cells: tuple = ()

    def __post_init__(self):
        for name in ("curves", "intersections", "cells"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    @property
    def bbox_diagonal(self) -> float:
        if not self.curves:
            return 0.0
        pts = np.vstack([c.points for c in self.curves])
        return float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))

    def default_tol_pos(self) -> float:
        return 1e-6 * max(self.bbox_diagonal, 1.0e-300)

    def validate(self, tol_pos: Optional[float] = None) -> None:
        """Raise NetError naming the first broken reference or invariant."""
        tol = self.default_tol_pos() if tol_pos is None else tol_pos
        n = len(self.curves)
        for k, x in enumerate(self.intersections):
            for cid in (x.curve_a, x.curve_b):
                if not 0 <= cid < n:
                    raise NetError(f"intersection {k} references missing curve id {cid}")
            pos = np.asarray(x.position, dtype=float)
            for cid, t in ((x.curve_a, x.param_a), (x.curve_b, x.param_b)):
                c = self.curves[cid]
                if not (0.0 <= t <= c.length * (1 + 1e-12)):
                    raise NetError(f"intersection {k}: parameter {t} outside curve {cid}")
                gap = np.linalg.norm(c.evaluate(t) - pos)
                if gap > tol:
                    raise NetError(f"intersection {k}: position is {gap:.3g} away from curve {cid}")
        for k, cell in enumerate(self.cells):
            label = cell.id or str(k)
            for seg in cell.segments:
                if not 0 <= seg.curve < n:
                    raise NetError(f"cell {label} references missing curve id {seg.curve}")
            cell_contour(cell, self, tol)


def cell_contour(cell: Cell, net: GeodesicNet, tol_pos: Optional[float] = None):
    """Concatenated closed contour of a cell.

    Returns (points, corners): the contour nodes stored once each and the
    node indices where two segments meet.
    """
    tol = net.default_tol_pos() if tol_pos is None else tol_pos
    label = cell.id or "?"
    pieces = []
    for seg in cell.segments:
        if not 0 <= seg.curve < len(net.curves):
            raise NetError(f"cell {label} references missing curve id {seg.curve}")
        pieces.append(net.curves[seg.curve].extract(seg.t0, seg.t1, seg.reversed))
    for k in range(len(pieces)):
        nxt = pieces[(k + 1) % len(pieces)]
        gap = np.linalg.norm(pieces[k][-1] - nxt[0])
        if gap > tol:
            what = "is not closed" if len(pieces) == 1 else f"segments {k} and {(k + 1) % len(pieces)} do not meet"
            raise NetError(f"cell {label} {what} (gap {gap:.3g})")
    corners = []
    pts = []
    for piece in pieces:
        if len(pieces) > 1:
            corners.append(sum(len(p) for p in pts))
        pts.append(piece[:-1])
    points = np.vstack(pts)
    seg = np.linalg.norm(np.diff(np.vstack([points, points[:1]]), axis=0), axis=1)
    keep = np.concatenate([[True], seg[:-1] > tol]) if len(points) > 1 else np.array([True])
    if not keep.all():
        remap = np.cumsum(keep) - 1
        corners = sorted({int(remap[c]) for c in corners})
        points = points[keep]
    if len(points) >= 2 and np.linalg.norm(points[-1] - points[0]) <= tol:
        points = points[:-1]
        corners = [c % len(points) for c in corners]
    if len(points) < 3:
        raise NetError(f"cell {label} contour has fewer than three distinct points")
    centred = points - points.mean(axis=0)
    sv = np.linalg.svd(centred, compute_uv=False)
    if sv[1] <= 1e-12 * max(sv[0], 1e-300):
        raise NetError(f"cell {label} contour is collinear")
    return points, sorted(set(corners))


class GeodecityStatus(enum.Enum):
    PASS = "pass"
    FAIL = "fail"
    DEGENERATE = "degenerate"


@dataclass(frozen=True)
class GeodecityEntry:
    intersection: Intersection
    status: GeodecityStatus
    angle_defect: float


def normal_defect(n1: np.ndarray, n2: np.ndarray) -> float:
    """Angle between two unit normals taken modulo sign, in [0, pi/2]."""
    c = abs(float(np.clip(np.dot(n1, n2), -1.0, 1.0)))
    # atan2 form keeps precision for nearly parallel normals
    s = float(np.linalg.norm(np.cross(n1, n2)))
    return math.atan2(s, c)


def check_geodecity(net: GeodesicNet, tol_angle: float = 0.1) -> list:
    """Compare principal normals of the two curves at every intersection.

    A zero-curvature crossing has no principal normal; it is reported as
    DEGENERATE and treated as compatible.
    """
    report = []
    for x in net.intersections:
        fa = estimate_frenet(net.curves[x.curve_a], x.param_a)
        fb = estimate_frenet(net.curves[x.curve_b], x.param_b)
        if fa.normal is None or fb.normal is None:
            report.append(GeodecityEntry(x, GeodecityStatus.DEGENERATE, float("nan")))
            continue
        d = normal_defect(fa.normal, fb.normal)
        status = GeodecityStatus.PASS if d <= tol_angle else GeodecityStatus.FAIL
        report.append(GeodecityEntry(x, status, d))
    return report
