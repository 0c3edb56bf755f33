"""Geodesic tracing across a computed patch and splitting of a cell along it.

A path starts as a Dijkstra shortest path along mesh edges. It is then
straightened inside the strip of triangles it visits: the strip is unfolded
into the plane and the shortest path through it is found with the funnel
algorithm. Where that path wraps around an interior vertex whose angle on
the other side is below pi, the strip is rerouted around the other side and
the funnel is rerun. A path that no longer wraps around any such vertex is
locally shortest.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra
from scipy.spatial.distance import pdist, squareform

from .laplace_beltrami import PatchMesh
from .net import Cell, GeodesicNet, Intersection, NetError, Polyline3, Segment
from .projection import CellChart

log = logging.getLogger(__name__)


class RefinementError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SurfacePath:
    points: np.ndarray
    faces: np.ndarray
    endpoints: tuple
    turning_angle: float = 0.0
    stagnated: bool = False
    initial_length: float = float("nan")

    @property
    def length(self) -> float:
        return float(np.linalg.norm(np.diff(self.points, axis=0), axis=1).sum())


def farthest_boundary_pair(patch: PatchMesh) -> tuple:
    """Boundary vertices at maximal Euclidean distance; ties go to the lowest index pair."""
    loop = np.asarray(patch.boundary_loop)
    if len(loop) < 2:
        raise RefinementError("boundary has fewer than two vertices")
    order = np.sort(loop)
    d = squareform(pdist(patch.vertices[order]))
    best = d.max()
    cand = np.argwhere(np.triu(d >= best * (1.0 - 1e-12), k=1))
    i, j = min((int(order[a]), int(order[b])) for a, b in cand)
    return i, j


class _Topology:
    def __init__(self, patch: PatchMesh):
        self.V = np.asarray(patch.vertices, dtype=float)
        self.T = np.asarray(patch.triangles, dtype=np.int64)
        self.edge_faces = {}
        for f, tri in enumerate(self.T.tolist()):
            for k in range(3):
                key = (min(tri[k], tri[(k + 1) % 3]), max(tri[k], tri[(k + 1) % 3]))
                self.edge_faces.setdefault(key, []).append(f)
        self.boundary = np.zeros(len(self.V), dtype=bool)
        for (a, b), fs in self.edge_faces.items():
            if len(fs) == 1:
                self.boundary[[a, b]] = True
        self._corner = {}

    def across(self, f: int, a: int, b: int) -> int:
        fs = self.edge_faces[(min(a, b), max(a, b))]
        for g in fs:
            if g != f:
                return g
        return -1

    def corner(self, f: int, w: int) -> float:
        key = (f, w)
        if key not in self._corner:
            tri = self.T[f].tolist()
            k = tri.index(w)
            p = self.V[w]
            u = self.V[tri[(k + 1) % 3]] - p
            v = self.V[tri[(k + 2) % 3]] - p
            self._corner[key] = _angle(u, v)
        return self._corner[key]

    def rotate(self, f: int, w: int, ccw: bool) -> int:
        """Neighbouring face around vertex w in the given rotational direction."""
        tri = self.T[f].tolist()
        k = tri.index(w)
        other = tri[(k + 2) % 3] if ccw else tri[(k + 1) % 3]
        return self.across(f, w, other)

    def fan_walk(self, start: int, w: int, stop, ccw: bool):
        """Faces from ``start`` around w until ``stop(face)`` holds; None on hitting the boundary."""
        out = [start]
        f = start
        for _ in range(len(self.T)):
            if stop(f):
                return out
            f = self.rotate(f, w, ccw)
            if f < 0 or f == start:
                return None
            out.append(f)
        return None

    def total_angle(self, w: int) -> float:
        fs = np.flatnonzero(np.any(self.T == w, axis=1))
        return float(sum(self.corner(int(f), w) for f in fs))


def _angle(u, v) -> float:
    return math.atan2(float(np.linalg.norm(np.cross(u, v))), float(np.dot(u, v)))


def _initial_strip(top: _Topology, verts: list) -> list:
    first = top.edge_faces[(min(verts[0], verts[1]), max(verts[0], verts[1]))][0]
    strip = [first]
    for k in range(1, len(verts) - 1):
        w, nxt = verts[k], verts[k + 1]
        stop = lambda f, nxt=nxt: nxt in top.T[f]
        best = None
        for ccw in (True, False):
            run = top.fan_walk(strip[-1], w, stop, ccw)
            if run is not None:
                cost = sum(top.corner(f, w) for f in run)
                if best is None or cost < best[0]:
                    best = (cost, run)
        if best is None:
            raise RefinementError(f"cannot walk around vertex {w}")
        strip.extend(best[1][1:])
    return strip


def _clean(strip: list, top: _Topology, a: int, b: int) -> list:
    # cut loops, then trim to the last face holding a and the first holding b
    out = []
    seen = {}
    for f in strip:
        if f in seen:
            cut = seen[f]
            for g in out[cut + 1:]:
                del seen[g]
            out = out[:cut + 1]
        else:
            seen[f] = len(out)
            out.append(f)
    i0 = max(i for i, f in enumerate(out) if a in top.T[f])
    out = out[i0:]
    i1 = min(i for i, f in enumerate(out) if b in top.T[f])
    return out[:i1 + 1]


def _unfold(top: _Topology, strip: list):
    """Planar positions of every strip face and the portals between consecutive faces.

    A portal is (left point, right point, left id, right id) as seen when
    travelling from one face into the next.
    """
    V = top.V
    t0 = [int(v) for v in top.T[strip[0]]]
    p0, p1, p2 = V[t0]
    e = p1 - p0
    L = np.linalg.norm(e)
    x = np.dot(p2 - p0, e) / L
    y = np.linalg.norm(np.cross(p2 - p0, e)) / L
    face_pos = [{t0[0]: np.array([0.0, 0.0]), t0[1]: np.array([L, 0.0]), t0[2]: np.array([x, y])}]
    portals = []
    for k in range(1, len(strip)):
        prev = face_pos[-1]
        f = strip[k]
        u, v = (q for q in prev if q in top.T[f])
        opp = next(q for q in prev if q not in (u, v))
        w = int(next(q for q in top.T[f] if q not in (u, v)))
        pu, pv, po = prev[u], prev[v], prev[opp]
        d = pv - pu
        Ld = np.linalg.norm(d)
        du = np.linalg.norm(V[w] - V[u])
        dv = np.linalg.norm(V[w] - V[v])
        along = (du * du - dv * dv + Ld * Ld) / (2 * Ld)
        off = math.sqrt(max(du * du - along * along, 0.0))
        nrm = np.array([-d[1], d[0]]) / Ld
        side = -1.0 if np.dot(po - pu, nrm) > 0 else 1.0
        pw = pu + along * d / Ld + side * off * nrm
        face_pos.append({u: pu, v: pv, w: pw})
        travel = pw - po
        if travel[0] * (pu - pv)[1] - travel[1] * (pu - pv)[0] > 0:
            portals.append((pu, pv, u, v))
        else:
            portals.append((pv, pu, v, u))
    return face_pos, portals


def _cross(o, a, b) -> float:
    return float((a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]))


def _funnel(start, end, portals):
    """Simple stupid funnel over (left, right, ...) portals.

    Returns the apexes as portal indices into ``[start] + portals + [end]``
    together with which side (0 left, 1 right) each apex came from.
    """
    P = [(start, start)] + [p[:2] for p in portals] + [(end, end)]
    apex, left, right = start, start, start
    ai = li = ri = 0
    out = [(0, 0)]
    i = 1
    while i < len(P):
        L, R = P[i]
        if _cross(apex, right, R) >= 0:
            if ai == ri or _cross(apex, left, R) < 0:
                right, ri = R, i
            else:
                apex, ai = left, li
                out.append((ai, 0))
                left = right = apex
                li = ri = ai
                i = ai + 1
                continue
        if _cross(apex, left, L) <= 0:
            if ai == li or _cross(apex, right, L) > 0:
                left, li = L, i
            else:
                apex, ai = right, ri
                out.append((ai, 1))
                left = right = apex
                li = ri = ai
                i = ai + 1
                continue
        i += 1
    out.append((len(P) - 1, 0))
    return out


def _segment_param(a, b, p, q) -> float:
    """Parameter along p->q where it meets the line a->b, clamped to [0, 1]."""
    d = b - a
    e = q - p
    den = d[0] * e[1] - d[1] * e[0]
    if abs(den) < 1e-300:
        return 0.0
    t = ((a[0] - p[0]) * d[1] - (a[1] - p[1]) * d[0]) / -den
    return min(1.0, max(0.0, t))


@dataclass
class _Route:
    points: np.ndarray
    vids: list       # mesh vertex id of each point, -1 for edge crossings
    faces: np.ndarray
    apexes: list     # (vertex id, portal index) of interior apexes
    portals: list


def _realise(top: _Topology, strip, a, b) -> _Route:
    face_pos, portals = _unfold(top, strip)
    start, end = face_pos[0][a], face_pos[-1][b]
    ap = _funnel(start, end, portals)
    full = [(start, start, a, a)] + portals + [(end, end, b, b)]
    corner_pt = [full[i][side] for i, side in ap]
    corner_id = [full[i][2 + side] for i, side in ap]
    pts, vids, first_portal = [top.V[a].copy()], [a], [0]
    for s in range(len(ap) - 1):
        p0, p1 = corner_pt[s], corner_pt[s + 1]
        for k in range(ap[s][0] + 1, ap[s + 1][0] + 1):
            pl, pr, il, ir = full[k]
            if il == corner_id[s] or il == corner_id[s + 1]:
                q, vid = top.V[il], il
            elif ir == corner_id[s] or ir == corner_id[s + 1]:
                q, vid = top.V[ir], ir
            else:
                t = _segment_param(p0, p1, pl, pr)
                q, vid = (1 - t) * top.V[il] + t * top.V[ir], -1
            if vid >= 0 and vid == vids[-1]:
                continue
            pts.append(q)
            vids.append(vid)
            first_portal.append(k)
    faces = np.array([strip[k - 1] for k in first_portal[1:]], dtype=np.int64)
    apexes = [(corner_id[s], ap[s][0]) for s in range(1, len(ap) - 1)]
    return _Route(np.array(pts), vids, faces, apexes, full)


def _wrap_angle(top: _Topology, strip, P, w, apex_portal, pts_prev, pts_next):
    """Angle at w between the path's incoming and outgoing rays, measured through the strip."""
    ks = [k for k in range(1, len(P) - 1) if w in (P[k][2], P[k][3])]
    # contiguous run of portals through w containing the apex portal
    lo = hi = apex_portal
    while lo - 1 in ks:
        lo -= 1
    while hi + 1 in ks:
        hi += 1
    run = strip[lo:hi]
    e_in = P[lo][3] if P[lo][2] == w else P[lo][2]
    e_out = P[hi][3] if P[hi][2] == w else P[hi][2]
    pw = top.V[w]
    ang = _angle(pts_prev - pw, top.V[e_in] - pw) + sum(top.corner(f, w) for f in run)
    ang += _angle(top.V[e_out] - pw, pts_next - pw)
    return ang, lo - 1, hi


def _interior_wraps(top: _Topology, strip, route: _Route):
    """(vertex, strip-side angle, strip index in, strip index out) for every interior apex."""
    for vid, pk in route.apexes:
        if top.boundary[vid]:
            continue
        k = route.vids.index(vid)
        side, i_in, i_out = _wrap_angle(top, strip, route.portals, vid, pk, route.points[k - 1], route.points[k + 1])
        yield vid, side, i_in, i_out


def trace_geodesic(patch: PatchMesh, source: int, target: int, tol_angle: float = 1e-6,
                   max_rounds: int | None = None) -> SurfacePath:
    """Locally shortest path between two boundary vertices of a patch.

    The turning angle reported is the largest ``pi - min(left, right)`` over
    interior vertices the path passes through, zero for a path that only
    crosses triangle interiors and edges.
    """
    a, b = int(source), int(target)
    if a == b:
        raise RefinementError("source and target coincide")
    top = _Topology(patch)
    for v in (a, b):
        if not top.boundary[v]:
            raise RefinementError(f"vertex {v} is not on the patch boundary")
    keys = np.array(list(top.edge_faces.keys()))
    w = np.linalg.norm(top.V[keys[:, 0]] - top.V[keys[:, 1]], axis=1)
    n = len(top.V)
    G = sp.coo_matrix((w, (keys[:, 0], keys[:, 1])), shape=(n, n)).tocsr()
    dist, pred = dijkstra(G, directed=False, indices=a, return_predecessors=True)
    if not np.isfinite(dist[b]):
        raise RefinementError("target is unreachable")
    verts = [b]
    while verts[-1] != a:
        verts.append(int(pred[verts[-1]]))
    verts = verts[::-1]
    initial = float(dist[b])
    strip = _clean(_initial_strip(top, verts), top, a, b)
    rounds = max_rounds if max_rounds is not None else 4 * len(top.T) + 10
    stagnated = True
    for _ in range(rounds):
        route = _realise(top, strip, a, b)
        worst = None
        for vid, side, i_in, i_out in _interior_wraps(top, strip, route):
            other = top.total_angle(vid) - side
            if other < math.pi - tol_angle and (worst is None or other < worst[0]):
                worst = (other, vid, i_in, i_out)
        if worst is None:
            stagnated = False
            break
        _, vid, i_in, i_out = worst
        f_in, f_out = strip[i_in], strip[i_out]
        detour = None
        for ccw in (True, False):
            run = top.fan_walk(f_in, vid, lambda f: f == f_out, ccw)
            if run is not None and run[1:2] != strip[i_in + 1:i_in + 2]:
                detour = run
        if detour is None:
            log.warning("cannot reroute around vertex %d", vid)
            break
        strip = _clean(strip[:i_in] + detour + strip[i_out + 1:], top, a, b)
    else:
        log.warning("path straightening stopped after %d rounds", rounds)
    route = _realise(top, strip, a, b)
    turning = 0.0
    for vid, side, _, _ in _interior_wraps(top, strip, route):
        turning = max(turning, math.pi - min(side, top.total_angle(vid) - side))
    if stagnated:
        log.warning("geodesic straightening stagnated (turning angle %.3g)", turning)
    # a route through a mesh vertex lists it once per incident crossing
    step = np.linalg.norm(np.diff(route.points, axis=0), axis=1)
    keep = step > 0
    points = np.vstack([route.points[:1], route.points[1:][keep]])
    faces = np.asarray(route.faces)[keep]
    return SurfacePath(points, faces, (a, b), max(turning, 0.0), stagnated, initial)


@dataclass(frozen=True, eq=False)
class CellSplit:
    """Two child cells and the net holding their curves (contour 0, path 1).

    Unpacks as ``first, second``.
    """

    first: Cell
    second: Cell
    net: GeodesicNet

    def __iter__(self):
        return iter((self.first, self.second))


def split_cell(cell_chart: CellChart, path: SurfacePath, parent_id: str = "") -> CellSplit:
    """Split a cell along a path joining two contour nodes.

    The path lies on a patch whose first vertices are the contour nodes, in
    chart coordinates, so its endpoints index the contour directly.
    """
    i, j = (int(e) for e in path.endpoints)
    m = len(cell_chart.boundary2d)
    if i == j:
        raise RefinementError("path endpoints coincide; no split possible")
    if not (0 <= i < m and 0 <= j < m):
        raise RefinementError("path endpoints are not contour nodes")
    contour = cell_chart.lift()
    world = cell_chart.chart.to_world(path.points)
    world[0], world[-1] = contour[i], contour[j]
    keep = np.concatenate([[True], np.linalg.norm(np.diff(world, axis=0), axis=1) > 0])
    world = world[keep]
    if len(world) < 2:
        raise NetError("split path is degenerate")
    ring = Polyline3(contour, closed=True)
    cut = Polyline3(world)
    s = ring.arclength
    si, sj, L = float(s[i]), float(s[j]), cut.length
    stem = parent_id or "cell"
    first = Cell((Segment(0, si, sj), Segment(1, 0.0, L, reversed=True)), id=f"{stem}.0")
    second = Cell((Segment(0, sj, si), Segment(1, 0.0, L)), id=f"{stem}.1")
    crossings = (Intersection(0, 1, si, 0.0, tuple(contour[i])), Intersection(0, 1, sj, L, tuple(contour[j])))
    return CellSplit(first, second, GeodesicNet((ring, cut), crossings, (first, second)))
