"""Cotangent Laplace-Beltrami operator on an intrinsic Delaunay triangulation.

The operator on a vertex function is

    L f(i) = sum over edges (i, j) of  nu_ij * (f(i) - f(j))

with nu = (cot a + cot b) / 2 on interior edges and cot a / 2 on boundary
edges, a and b being the angles opposite the edge. Before the weights are
formed the mesh is made intrinsically Delaunay by edge flips that only
change edge lengths, never vertex positions.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np


class IntrinsicError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class PatchMesh:
    """Triangulated surface patch with a single boundary loop."""

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_loop: np.ndarray

    @cached_property
    def areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        return 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)

    @property
    def interior(self) -> np.ndarray:
        mask = np.ones(len(self.vertices), dtype=bool)
        mask[self.boundary_loop] = False
        return np.flatnonzero(mask)

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(np.ptp(self.vertices, axis=0)))

    def boundary_edges(self) -> np.ndarray:
        """Directed boundary edges (as they appear in the triangles)."""
        e = np.vstack([self.triangles[:, [0, 1]], self.triangles[:, [1, 2]], self.triangles[:, [2, 0]]])
        key = np.sort(e, axis=1)
        _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
        if counts.max() > 2:
            raise IntrinsicError("mesh is not edge-manifold")
        return e[counts[inv.ravel()] == 1]

    def check(self) -> None:
        """Raise IntrinsicError unless the mesh is a manifold disk with the stated boundary loop."""
        if np.any(self.areas <= 0):
            raise IntrinsicError("patch has degenerate triangles")
        be = self.boundary_edges()
        succ = dict(zip(be[:, 0].tolist(), be[:, 1].tolist()))
        if len(succ) != len(be):
            raise IntrinsicError("boundary is not a simple loop")
        loop = [int(self.boundary_loop[0])]
        while len(loop) <= len(be):
            nxt = succ.get(loop[-1])
            if nxt is None:
                raise IntrinsicError("boundary loop is broken")
            if nxt == loop[0]:
                break
            loop.append(nxt)
        if sorted(loop) != sorted(self.boundary_loop.tolist()) or len(loop) != len(be):
            raise IntrinsicError("mesh boundary does not match boundary_loop (or has several loops)")


def _cot_opposite(a, b, c):
    """Cotangent of the angle opposite side a in a triangle with sides a, b, c."""
    area = _heron(a, b, c)
    return (b * b + c * c - a * a) / (4.0 * area)


def _heron(a, b, c):
    # Kahan's stable form; requires sorted sides, done elementwise here
    s = np.sort(np.stack(np.broadcast_arrays(a, b, c)), axis=0)
    z, y, x = s[0], s[1], s[2]
    prod = (x + (y + z)) * (z - (x - y)) * (z + (x - y)) * (x + (y - z))
    return 0.25 * np.sqrt(np.maximum(prod, 0.0))


def _angle_opposite(a, b, c):
    cosv = (b * b + c * c - a * a) / (2.0 * b * c)
    return math.acos(min(1.0, max(-1.0, cosv)))


@dataclass(eq=False)
class IntrinsicTriangulation:
    """Halfedge form of a triangulation carrying only edge lengths.

    Halfedge ``3f + k`` runs from ``triangles[f, k]`` to ``triangles[f, k+1]``;
    ``lengths`` and ``twin`` are indexed the same way (twin -1 on the boundary).
    """

    n_vertices: int
    triangles: np.ndarray
    lengths: np.ndarray
    twin: np.ndarray
    flip_count: int = 0

    @classmethod
    def from_patch(cls, patch: PatchMesh) -> "IntrinsicTriangulation":
        tri = np.array(patch.triangles, dtype=np.int64)
        p = patch.vertices
        lengths = np.column_stack([np.linalg.norm(p[tri[:, (k + 1) % 3]] - p[tri[:, k]], axis=1) for k in range(3)])
        tails = tri.ravel()
        heads = tri[:, [1, 2, 0]].ravel()
        lookup = {(int(a), int(b)): h for h, (a, b) in enumerate(zip(tails, heads))}
        twin = np.array([lookup.get((int(b), int(a)), -1) for a, b in zip(tails, heads)], dtype=np.int64)
        return cls(len(p), tri, lengths, twin.reshape(-1, 3))

    def copy(self) -> "IntrinsicTriangulation":
        return IntrinsicTriangulation(self.n_vertices, self.triangles.copy(), self.lengths.copy(),
                                      self.twin.copy(), self.flip_count)

    def opposite_angle(self, h: int) -> float:
        f, k = divmod(h, 3)
        L = self.lengths[f]
        return _angle_opposite(L[k], L[(k + 1) % 3], L[(k + 2) % 3])

    def angle_sum(self, h: int) -> float:
        """Sum of the two angles opposite the edge of halfedge ``h`` (one angle on the boundary)."""
        t = int(self.twin.flat[h])
        return self.opposite_angle(h) + (self.opposite_angle(t) if t >= 0 else 0.0)

    def edges(self) -> np.ndarray:
        """One representative halfedge per undirected edge."""
        tw = self.twin.ravel()
        h = np.arange(len(tw))
        return h[(tw < 0) | (h < tw)]

    def edge_vertices(self, h) -> np.ndarray:
        h = np.asarray(h)
        f, k = np.divmod(h, 3)
        return np.column_stack([self.triangles[f, k], self.triangles[f, (k + 1) % 3]])

    def check_triangle_inequality(self, rtol: float = 1e-12) -> None:
        L = np.sort(self.lengths, axis=1)
        if np.any(L[:, 2] >= (L[:, 0] + L[:, 1]) * (1.0 + rtol)) or np.any(L[:, 0] <= 0):
            raise IntrinsicError("triangle inequality violated")

    def is_delaunay(self, tol: float = 1e-10) -> bool:
        return all(self.angle_sum(int(h)) <= math.pi + tol for h in self.edges() if self.twin.flat[h] >= 0)

    def vertex_areas(self) -> np.ndarray:
        """One third of the incident triangle areas at every vertex."""
        L = self.lengths
        area = _heron(L[:, 0], L[:, 1], L[:, 2])
        out = np.zeros(self.n_vertices)
        np.add.at(out, self.triangles.ravel(), np.repeat(area / 3.0, 3))
        return out

    def flip(self, h: int) -> bool:
        """Flip the interior edge of halfedge ``h``; returns False when the flip is not admissible."""
        t = int(self.twin.flat[h])
        if t < 0:
            return False
        f0, a = divmod(h, 3)
        f1, b = divmod(t, 3)
        if f0 == f1:
            return False
        tri, L, tw = self.triangles, self.lengths, self.twin
        i, j, k = tri[f0, a], tri[f0, (a + 1) % 3], tri[f0, (a + 2) % 3]
        l = tri[f1, (b + 2) % 3]
        if k == l:
            return False
        h_jk, h_ki = 3 * f0 + (a + 1) % 3, 3 * f0 + (a + 2) % 3
        h_il, h_lj = 3 * f1 + (b + 1) % 3, 3 * f1 + (b + 2) % 3
        outer = [int(tw.flat[x]) for x in (h_jk, h_ki, h_il, h_lj)]
        if any(o >= 0 and o // 3 in (f0, f1) for o in outer):
            return False
        l_ij = L.flat[h]
        l_jk, l_ki, l_il, l_lj = (L.flat[x] for x in (h_jk, h_ki, h_il, h_lj))
        # lay the quad out flat: i at the origin, j on the x axis, k above, l below
        xk = (l_ij**2 + l_ki**2 - l_jk**2) / (2 * l_ij)
        yk = math.sqrt(max(l_ki**2 - xk**2, 0.0))
        xl = (l_ij**2 + l_il**2 - l_lj**2) / (2 * l_ij)
        yl = -math.sqrt(max(l_il**2 - xl**2, 0.0))
        l_kl = math.hypot(xk - xl, yk - yl)
        tw_jk, tw_ki, tw_il, tw_lj = outer
        tri[f0] = (l, j, k)
        L[f0] = (l_lj, l_jk, l_kl)
        tw[f0] = (tw_lj, tw_jk, 3 * f1 + 2)
        tri[f1] = (k, i, l)
        L[f1] = (l_ki, l_il, l_kl)
        tw[f1] = (tw_ki, tw_il, 3 * f0 + 2)
        for old_twin, new in ((tw_lj, 3 * f0), (tw_jk, 3 * f0 + 1), (tw_ki, 3 * f1), (tw_il, 3 * f1 + 1)):
            if old_twin >= 0:
                tw.flat[old_twin] = new
        self.flip_count += 1
        return True


def intrinsic_delaunay(mesh, tol: float = 1e-10, max_flips: int | None = None) -> IntrinsicTriangulation:
    """Flip non-Delaunay interior edges until every opposite-angle sum is at most pi + tol."""
    intr = mesh.copy() if isinstance(mesh, IntrinsicTriangulation) else IntrinsicTriangulation.from_patch(mesh)
    intr.check_triangle_inequality()
    limit = max_flips if max_flips is not None else 50 * len(intr.lengths.ravel()) + 100
    stack = [int(h) for h in intr.edges()[::-1] if intr.twin.flat[h] >= 0]
    queued = set(stack)
    flips = 0
    while stack:
        h = stack.pop()
        queued.discard(h)
        if intr.twin.flat[h] < 0 or intr.angle_sum(h) <= math.pi + tol:
            continue
        f0, f1 = h // 3, int(intr.twin.flat[h]) // 3
        if not intr.flip(h):
            continue
        flips += 1
        if flips > limit:
            raise IntrinsicError("edge flipping did not terminate")
        for f in (f0, f1):
            for k in range(3):
                e = 3 * f + k
                t = int(intr.twin.flat[e])
                if t >= 0:
                    rep = min(e, t)
                    if rep not in queued:
                        queued.add(rep)
                        stack.append(rep)
    intr.check_triangle_inequality()
    return intr


def cotan_weights(intr: IntrinsicTriangulation):
    """(edge vertex pairs, weights) with nu = (cot a + cot b)/2, or cot a / 2 on the boundary."""
    L = intr.lengths
    cot = np.empty_like(L)
    for k in range(3):
        cot[:, k] = _cot_opposite(L[:, k], L[:, (k + 1) % 3], L[:, (k + 2) % 3])
    hs = intr.edges()
    tw = intr.twin.ravel()[hs]
    w = 0.5 * cot.ravel()[hs]
    inner = tw >= 0
    w[inner] += 0.5 * cot.ravel()[tw[inner]]
    return intr.edge_vertices(hs), w


def apply_lb(intr: IntrinsicTriangulation, values, weights=None) -> np.ndarray:
    """sum_j nu_ij (f_i - f_j) at every vertex; no mass normalisation."""
    f = np.asarray(values, dtype=float)
    if f.shape[0] != intr.n_vertices:
        raise ValueError("need one value per vertex")
    ev, w = cotan_weights(intr) if weights is None else weights
    d = w * (f[ev[:, 0]] - f[ev[:, 1]])
    out = np.zeros(intr.n_vertices)
    np.add.at(out, ev[:, 0], d)
    np.add.at(out, ev[:, 1], -d)
    return out


class Verdict(str, enum.Enum):
    ACCEPT = "accept"
    SPLIT = "split"


@dataclass(frozen=True, eq=False)
class LBReport:
    residual_x: np.ndarray
    residual_y: np.ndarray
    normalized_x: np.ndarray
    normalized_y: np.ndarray
    sup_norm: float
    area_normalized_sup: float
    threshold: float
    flip_count: int


def default_threshold(patch: PatchMesh) -> float:
    return 1e-2 / patch.diameter


def validate_patch(patch: PatchMesh, threshold: float | None = None):
    """Laplace-Beltrami residual of the chart coordinates and the accept/split verdict.

    The verdict compares the lumped-mass normalised residual at interior
    vertices with ``threshold`` (default ``1e-2 / diameter``).
    """
    thr = default_threshold(patch) if threshold is None else threshold
    intr = intrinsic_delaunay(patch)
    weights = cotan_weights(intr)
    rx = apply_lb(intr, patch.vertices[:, 0], weights)
    ry = apply_lb(intr, patch.vertices[:, 1], weights)
    mass = intr.vertex_areas()
    nx, ny = rx / mass, ry / mass
    inner = patch.interior
    if len(inner):
        sup = float(max(np.abs(rx[inner]).max(), np.abs(ry[inner]).max()))
        nsup = float(max(np.abs(nx[inner]).max(), np.abs(ny[inner]).max()))
    else:
        sup = nsup = 0.0
    report = LBReport(rx, ry, nx, ny, sup, nsup, thr, intr.flip_count)
    return report, (Verdict.ACCEPT if nsup <= thr else Verdict.SPLIT)
