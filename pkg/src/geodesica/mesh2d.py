"""Planar triangulations of projected cell domains and P1 fields on them."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import triangle as _triangle

from ._geometry import closest_on_polygon, polygon_is_simple, signed_area


class MeshError(ValueError):
    pass


class OutsideDomain(MeshError):
    """Query point lies outside the mesh by more than the snap tolerance."""


@dataclass(frozen=True, eq=False)
class TriMesh2:
    vertices: np.ndarray
    triangles: np.ndarray
    boundary_loop: np.ndarray

    @cached_property
    def areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @cached_property
    def neighbors(self) -> np.ndarray:
        """neighbors[t, k]: triangle across the edge opposite local vertex k, or -1."""
        tri = self.triangles
        m = len(tri)
        a = tri[:, [1, 2, 0]].ravel()
        b = tri[:, [2, 0, 1]].ravel()
        key = np.minimum(a, b) * len(self.vertices) + np.maximum(a, b)
        order = np.argsort(key, kind="stable")
        ks = key[order]
        nb = np.full(3 * m, -1)
        same = np.flatnonzero(ks[1:] == ks[:-1])
        h0, h1 = order[same], order[same + 1]
        nb[h0] = h1 // 3
        nb[h1] = h0 // 3
        return nb.reshape(m, 3)

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(len(self.vertices), dtype=bool)
        mask[self.boundary_loop] = True
        return mask

    @property
    def interior(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_mask)

    def edges(self) -> np.ndarray:
        e = np.vstack([self.triangles[:, [0, 1]], self.triangles[:, [1, 2]], self.triangles[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    def max_edge_length(self) -> float:
        e = self.edges()
        return float(np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1).max())

    def min_angle(self) -> float:
        """Smallest triangle angle in radians."""
        p = self.vertices[self.triangles]
        out = np.inf
        for k in range(3):
            u = p[:, (k + 1) % 3] - p[:, k]
            v = p[:, (k + 2) % 3] - p[:, k]
            c = np.sum(u * v, axis=1) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
            out = min(out, float(np.arccos(np.clip(c, -1, 1)).min()))
        return out

    def write_off(self, path) -> None:
        lines = ["OFF", f"{len(self.vertices)} {len(self.triangles)} 0"]
        lines += [f"{x!r} {y!r} 0.0" for x, y in self.vertices.tolist()]
        lines += [f"3 {a} {b} {c}" for a, b, c in self.triangles.tolist()]
        Path(path).write_text("\n".join(lines) + "\n")


def _subdivide(polygon: np.ndarray, target: float):
    """Split long polygon edges; original nodes keep their indices."""
    n = len(polygon)
    extra = []
    loop = []
    for i in range(n):
        a, b = polygon[i], polygon[(i + 1) % n]
        loop.append(i)
        pieces = int(np.ceil(np.linalg.norm(b - a) / target - 1e-9))
        for k in range(1, pieces):
            loop.append(n + len(extra))
            extra.append(a + (b - a) * (k / pieces))
    pts = np.vstack([polygon] + ([np.array(extra)] if extra else []))
    return pts, np.array(loop)


def triangulate(polygon, target_edge_length: float, min_angle: float = 20.0) -> TriMesh2:
    """Quality constrained Delaunay mesh of a simple polygon's interior.

    The first ``len(polygon)`` vertices are the polygon nodes in input order.
    Edges longer than the target are split before meshing, and no further
    points are added on the boundary.
    """
    poly = np.asarray(polygon, dtype=float)
    if target_edge_length <= 0:
        raise MeshError("target edge length must be positive")
    if not polygon_is_simple(poly):
        raise MeshError("polygon is not simple")
    pts, loop = _subdivide(poly, target_edge_length)
    if signed_area(pts[loop]) < 0:
        loop = np.concatenate([loop[:1], loop[1:][::-1]])
    seg = np.column_stack([loop, np.roll(loop, -1)])
    max_area = np.sqrt(3.0) / 4.0 * target_edge_length**2
    out = _triangle.triangulate({"vertices": pts, "segments": seg},
                                f"pq{min_angle:g}a{max_area:.17g}YQ")
    verts = np.asarray(out["vertices"], dtype=float)
    if not np.array_equal(verts[:len(pts)], pts):
        raise MeshError("mesher moved input vertices")
    tri = np.asarray(out["triangles"], dtype=np.int64)
    mesh = TriMesh2(verts, tri, loop.astype(np.int64))
    if np.any(mesh.areas <= 0):
        raise MeshError("mesher produced non-positive triangles")
    return mesh


@dataclass(frozen=True, eq=False)
class ScalarField:
    mesh: TriMesh2
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (len(self.mesh.vertices),):
            raise MeshError("field needs one value per mesh vertex")
        if not np.all(np.isfinite(v)):
            raise MeshError("field has non-finite values")
        object.__setattr__(self, "values", v)


def _barycentric(mesh: TriMesh2, t: int, p: np.ndarray) -> np.ndarray:
    a, b, c = mesh.vertices[mesh.triangles[t]]
    det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (p[1] - a[1]) * (c[0] - a[0])) / det
    l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])) / det
    return np.array([1.0 - l1 - l2, l1, l2])


class Locator:
    """Point location by walking from the last hit triangle.

    Holds a cursor, so one instance must not be shared between threads.
    """

    def __init__(self, mesh: TriMesh2, snap_tol: float | None = None, eps: float = 1e-12):
        self.mesh = mesh
        scale = float(np.ptp(mesh.vertices, axis=0).max())
        self.snap_tol = 1e-6 * scale if snap_tol is None else snap_tol
        self.eps = eps
        self.cursor = 0

    def locate(self, point) -> tuple:
        """(triangle, barycentric weights) of ``point``, snapping onto the boundary if close."""
        p = np.asarray(point, dtype=float)
        mesh = self.mesh
        t = self.cursor
        for _ in range(len(mesh.triangles)):
            lam = _barycentric(mesh, t, p)
            k = int(np.argmin(lam))
            if lam[k] >= -self.eps:
                self.cursor = t
                return t, lam
            nxt = mesh.neighbors[t, k]
            if nxt < 0:
                break
            t = int(nxt)
        return self._fallback(p)

    def _fallback(self, p):
        mesh = self.mesh
        q = mesh.vertices[mesh.triangles]
        a, b, c = q[:, 0], q[:, 1], q[:, 2]
        det = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
        l1 = ((p[0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (p[1] - a[:, 1]) * (c[:, 0] - a[:, 0])) / det
        l2 = ((b[:, 0] - a[:, 0]) * (p[1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (p[0] - a[:, 0])) / det
        lam = np.column_stack([1 - l1 - l2, l1, l2])
        worst = lam.min(axis=1)
        t = int(np.argmax(worst))
        if worst[t] >= -self.eps:
            self.cursor = t
            return t, lam[t]
        loop = mesh.boundary_loop
        dist, edge, s = closest_on_polygon(p[None], mesh.vertices[loop])
        if dist[0] > self.snap_tol:
            raise OutsideDomain(f"point {tuple(p)} is {dist[0]:.3g} outside the mesh")
        i, j = loop[edge[0]], loop[(edge[0] + 1) % len(loop)]
        snapped = (1 - s[0]) * mesh.vertices[i] + s[0] * mesh.vertices[j]
        for t in np.flatnonzero(np.any(mesh.triangles == i, axis=1) & np.any(mesh.triangles == j, axis=1)):
            lam = np.clip(_barycentric(mesh, int(t), snapped), 0.0, 1.0)
            self.cursor = int(t)
            return int(t), lam / lam.sum()
        raise MeshError("boundary edge has no adjacent triangle")


def interpolate(field: ScalarField, point, locator: Locator | None = None) -> float:
    """Barycentric-linear value of a P1 field at a planar point."""
    loc = Locator(field.mesh) if locator is None else locator
    t, lam = loc.locate(point)
    return float(lam @ field.values[field.mesh.triangles[t]])


def interpolate_many(field: ScalarField, points, locator: Locator | None = None) -> np.ndarray:
    loc = Locator(field.mesh) if locator is None else locator
    return np.array([interpolate(field, p, loc) for p in np.asarray(points, dtype=float)])
