"""Small planar/polyline geometry kernels shared by several modules."""
from __future__ import annotations

import numpy as np


def signed_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _orient(ax, ay, bx, by, cx, cy):
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def polygon_is_simple(poly: np.ndarray, chunk: int = 512) -> bool:
    """Exact O(n^2) check that a closed polygon has no self-intersections.

    Non-adjacent edges may not touch at all; adjacent edges may only share
    their common vertex (a fold-back onto the previous edge is rejected).
    """
    poly = np.asarray(poly, dtype=float)
    n = len(poly)
    if n < 3:
        return False
    a = poly
    b = np.roll(poly, -1, axis=0)
    if np.any(np.all(a == b, axis=1)):
        return False
    # adjacent edges: reject collinear reversal
    d0 = b - a
    d1 = np.roll(d0, -1, axis=0)
    cross = d0[:, 0] * d1[:, 1] - d0[:, 1] * d1[:, 0]
    dot = np.sum(d0 * d1, axis=1)
    if np.any((cross == 0.0) & (dot < 0.0)):
        return False
    if n == 3:
        return True
    idx = np.arange(n)
    for start in range(0, n, chunk):
        i = idx[start:start + chunk][:, None]
        j = idx[None, :]
        # each unordered pair once, skipping identical and adjacent edges
        gap = (j - i) % n
        mask = (j > i) & (gap != 1) & (gap != n - 1)
        if not mask.any():
            continue
        ii, jj = np.nonzero(mask)
        ii = ii + start
        ax, ay = a[ii, 0], a[ii, 1]
        bx, by = b[ii, 0], b[ii, 1]
        cx, cy = a[jj, 0], a[jj, 1]
        dx, dy = b[jj, 0], b[jj, 1]
        o1 = _orient(ax, ay, bx, by, cx, cy)
        o2 = _orient(ax, ay, bx, by, dx, dy)
        o3 = _orient(cx, cy, dx, dy, ax, ay)
        o4 = _orient(cx, cy, dx, dy, bx, by)
        proper = (o1 * o2 <= 0) & (o3 * o4 <= 0)
        collinear = (o1 == 0) & (o2 == 0)
        if np.any(proper & ~collinear):
            return False
        if np.any(collinear):
            k = np.nonzero(collinear)[0]
            for q in k:
                if _collinear_overlap(a[ii[q]], b[ii[q]], a[jj[q]], b[jj[q]]):
                    return False
    return True


def _collinear_overlap(a, b, c, d) -> bool:
    axis = 0 if abs(b[0] - a[0]) >= abs(b[1] - a[1]) else 1
    lo1, hi1 = sorted((a[axis], b[axis]))
    lo2, hi2 = sorted((c[axis], d[axis]))
    return max(lo1, lo2) <= min(hi1, hi2)


def points_in_polygon(pts: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Crossing-number inside test (boundary points are unspecified)."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    px, py = pts[:, 0][:, None], pts[:, 1][:, None]
    ax, ay = poly[:, 0][None, :], poly[:, 1][None, :]
    b = np.roll(poly, -1, axis=0)
    bx, by = b[:, 0][None, :], b[:, 1][None, :]
    straddle = (ay > py) != (by > py)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = ax + (py - ay) * (bx - ax) / (by - ay)
    hits = straddle & (px < xint)
    return (np.count_nonzero(hits, axis=1) % 2) == 1


def closest_on_polygon(pts: np.ndarray, poly: np.ndarray, chunk: int = 2048):
    """Nearest point on the closed polygon for each query.

    Returns (distance, edge index, edge parameter in [0, 1]).
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    a = poly
    e = np.roll(poly, -1, axis=0) - poly
    ee = np.maximum(np.sum(e * e, axis=1), np.finfo(float).tiny)
    dist = np.empty(len(pts))
    edge = np.empty(len(pts), dtype=int)
    param = np.empty(len(pts))
    for s in range(0, len(pts), chunk):
        p = pts[s:s + chunk]
        rel = p[:, None, :] - a[None, :, :]
        t = np.clip(np.sum(rel * e[None], axis=2) / ee[None], 0.0, 1.0)
        diff = rel - t[..., None] * e[None]
        d2 = np.sum(diff * diff, axis=2)
        k = np.argmin(d2, axis=1)
        r = np.arange(len(p))
        dist[s:s + chunk] = np.sqrt(d2[r, k])
        edge[s:s + chunk] = k
        param[s:s + chunk] = t[r, k]
    return dist, edge, param


def first_crossing(origin: np.ndarray, step: np.ndarray, poly: np.ndarray):
    """First intersection of the segment origin + s*step, s in (0, 1], with the polygon.

    Returns (s, edge index, edge parameter) or None when the segment stays clear.
    """
    a = poly
    e = np.roll(poly, -1, axis=0) - poly
    denom = step[0] * e[:, 1] - step[1] * e[:, 0]
    rel = a - origin
    with np.errstate(divide="ignore", invalid="ignore"):
        s = (rel[:, 0] * e[:, 1] - rel[:, 1] * e[:, 0]) / denom
        u = (rel[:, 0] * step[1] - rel[:, 1] * step[0]) / denom
    ok = (denom != 0) & (s > 0) & (s <= 1.0) & (u >= 0) & (u <= 1.0)
    if not ok.any():
        return None
    k = np.nonzero(ok)[0]
    q = k[np.argmin(s[k])]
    return float(s[q]), int(q), float(u[q])


def segment_box_hits(p0, p1, lo, hi) -> bool:
    """Liang-Barsky test of a segment against a closed axis-aligned box."""
    t0, t1 = 0.0, 1.0
    d = p1 - p0
    for k in range(2):
        if d[k] == 0.0:
            if p0[k] < lo[k] or p0[k] > hi[k]:
                return False
            continue
        ta = (lo[k] - p0[k]) / d[k]
        tb = (hi[k] - p0[k]) / d[k]
        if ta > tb:
            ta, tb = tb, ta
        t0 = max(t0, ta)
        t1 = min(t1, tb)
        if t0 > t1:
            return False
    return True


def cumulative_length(points: np.ndarray, closed: bool) -> np.ndarray:
    pts = np.vstack([points, points[:1]]) if closed else points
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    return np.concatenate([[0.0], np.cumsum(seg)])
