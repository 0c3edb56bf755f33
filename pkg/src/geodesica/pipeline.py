"""Per-cell reconstruction, net assembly and seam diagnostics."""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from ._geometry import closest_on_polygon
from .biharmonic import MixedSolution, curvature_field, solve_mixed_biharmonic
from .config import RunConfig
from .laplace_beltrami import LBReport, PatchMesh, Verdict, validate_patch
from .mesh2d import Locator, ScalarField, TriMesh2, interpolate_many, triangulate
from .monge_ampere import (INSIDE, HeightGrid, MASolveReport, NonConvergence, grid_to_patch, make_grid,
                           solve_curvature_ma)
from .net import Cell, GeodecityStatus, GeodesicNet, NetError, cell_contour, check_geodecity, normal_defect
from .projection import (CellChart, PlaneStrategy, ProjectionNotInjective, coarsen_boundary, dirichlet_table,
                         fit_plane, project_contour)
from .refinement import SurfacePath, farthest_boundary_pair, split_cell, trace_geodesic

log = logging.getLogger(__name__)

_ALTERNATE = {
    PlaneStrategy.VECTOR_AREA: PlaneStrategy.LEAST_SQUARES,
    PlaneStrategy.LEAST_SQUARES: PlaneStrategy.VECTOR_AREA,
    PlaneStrategy.THREE_CORNERS: PlaneStrategy.VECTOR_AREA,
}


class TraceMismatch(RuntimeError):
    pass


class SeamError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class CellResult:
    """Everything computed for one cell; ``children`` holds the two halves after a split."""

    cell_id: str
    chart: CellChart
    mesh: TriMesh2
    mixed: MixedSolution
    curvature: ScalarField
    solution: HeightGrid
    ma_report: MASolveReport
    patch: PatchMesh
    lb: LBReport
    verdict: Verdict
    lineage: Optional[str] = None
    depth: int = 0
    plane_strategy: PlaneStrategy = PlaneStrategy.VECTOR_AREA
    split_path: Optional[SurfacePath] = None
    split_net: Optional[GeodesicNet] = None
    children: tuple = ()
    errors: tuple = ()

    @property
    def capped(self) -> bool:
        return self.verdict is Verdict.SPLIT and not self.children

    def world_vertices(self) -> np.ndarray:
        return self.chart.chart.to_world(self.patch.vertices)

    def leaves(self) -> list:
        if not self.children:
            return [self]
        return [leaf for c in self.children for leaf in c.leaves()]

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()


@dataclass(frozen=True, eq=False)
class SurfacePatch:
    """A final patch in world coordinates."""

    cell_id: str
    vertices: np.ndarray
    triangles: np.ndarray
    boundary_loop: np.ndarray
    verdict: Verdict = Verdict.ACCEPT
    capped: bool = False
    root: str = ""

    @classmethod
    def from_result(cls, res: CellResult, root: str = "") -> "SurfacePatch":
        return cls(res.cell_id, res.world_vertices(), res.patch.triangles, res.patch.boundary_loop,
                   res.verdict, res.capped, root or res.cell_id)

    def vertex_normal(self, v: int) -> np.ndarray:
        """Area-weighted normal of the triangle fan around vertex v."""
        fan = self.triangles[np.any(self.triangles == v, axis=1)]
        p = self.vertices[fan]
        n = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]).sum(axis=0)
        return n / np.linalg.norm(n)


@dataclass(frozen=True, eq=False)
class Seam:
    """A curve shared by two groups of patches, sampled at its nodes."""

    label: str
    sides: tuple          # (cell id, cell id)
    patches: tuple        # (patch indices of side a, patch indices of side b)
    samples: np.ndarray
    gap: np.ndarray
    angles: np.ndarray


@dataclass(frozen=True, eq=False)
class NetSurface:
    patches: tuple = ()
    seams: tuple = ()
    results: tuple = ()
    failures: tuple = ()   # (cell id, message)
    geodecity: tuple = ()  # GeodecityEntry per net intersection

    @property
    def all_accepted(self) -> bool:
        return (not self.failures and all(p.verdict is Verdict.ACCEPT for p in self.patches)
                and all(r.ma_report.converged for res in self.results for r in res.walk()))


def _project(points, corners, config: RunConfig):
    strategies = [config.plane_strategy, _ALTERNATE[config.plane_strategy]]
    for k, strat in enumerate(strategies):
        try:
            chart = fit_plane(points, strat, corners)
            return project_contour(points, chart, corners), strat
        except (ProjectionNotInjective, NetError) as exc:
            if k == len(strategies) - 1:
                raise
            log.info("plane strategy %s failed (%s); retrying with %s", strat.value, exc, strategies[k + 1].value)


def _boundary_g(cc: CellChart, mesh: TriMesh2) -> np.ndarray:
    """Dirichlet values at the FEM mesh boundary, interpolated along the dense contour."""
    table = dirichlet_table(cc)
    s = cc.arclength
    total = s[-1]
    _, edge, u = closest_on_polygon(mesh.vertices[mesh.boundary_loop], cc.boundary2d)
    param = s[edge] + u * (s[edge + 1] - s[edge])
    return np.interp(param, s, np.append(table.g, table.g[0]), period=total)


def _grid_curvature(grid: HeightGrid, K: ScalarField, snap: float) -> np.ndarray:
    X, Y = grid.coords()
    inside = grid.mask == INSIDE
    vals = np.full(grid.shape, np.nan)
    pts = np.column_stack([X[inside], Y[inside]])
    vals[inside] = interpolate_many(K, pts, Locator(K.mesh, snap_tol=snap))
    return vals


def run_cell(cell: Cell, net: GeodesicNet, config: RunConfig = RunConfig(), depth: int = 0,
             lineage: Optional[str] = None, cell_id: Optional[str] = None) -> CellResult:
    """Reconstruct one cell's patch and validate it, splitting on a failed validation."""
    cid = cell_id or cell.id or "cell"
    tol_pos = config.tol_pos if config.tol_pos is not None else net.default_tol_pos()
    points, corners = cell_contour(cell, net, tol_pos)
    cc, strategy = _project(points, corners, config)
    extent = float(np.ptp(cc.boundary2d, axis=0).max())
    target = config.mesh_target_edge or extent / 24.0
    sub = coarsen_boundary(cc.arclength, cc.corners, target)
    mesh = triangulate(cc.boundary2d[sub], target)
    mixed = solve_mixed_biharmonic(mesh, _boundary_g(cc, mesh))
    K = curvature_field(mixed)
    grid = make_grid(cc.boundary2d, cc.heights, config.grid_n)
    grid = grid.with_curvature(_grid_curvature(grid, K, snap=target))
    solved, report = solve_curvature_ma(grid, config.tol_ma, config.max_newton, config.branch,
                                        raise_on_failure=not config.allow_unconverged)
    patch = grid_to_patch(solved)
    ring = cc.chart.to_world(patch.vertices[patch.boundary_loop])
    gap = float(np.abs(ring - points).max()) if len(ring) == len(points) else np.inf
    if gap > tol_pos:
        raise TraceMismatch(f"cell {cid}: patch boundary is {gap:.3g} away from the contour")
    lb, verdict = validate_patch(patch, config.lb_threshold)
    base = dict(cell_id=cid, chart=cc, mesh=mesh, mixed=mixed, curvature=K, solution=solved, ma_report=report,
                patch=patch, lb=lb, verdict=verdict, lineage=lineage, depth=depth, plane_strategy=strategy)
    if verdict is Verdict.ACCEPT or depth >= config.max_split_depth:
        return CellResult(**base)
    i, j = farthest_boundary_pair(patch)
    path = trace_geodesic(patch, i, j)
    split = split_cell(cc, path, cid)
    children, errors = [], []
    for child in split:
        try:
            children.append(run_cell(child, split.net, config, depth + 1, cid, child.id))
        except Exception as exc:  # the parent patch stays in place of a failed split
            log.warning("cell %s failed: %s", child.id, exc)
            errors.append((child.id, f"{type(exc).__name__}: {exc}"))
    if errors:
        return CellResult(**base, split_path=path, split_net=split.net, errors=tuple(errors))
    return CellResult(**base, split_path=path, split_net=split.net, children=tuple(children))


def _safe_run(args):
    cell, net, config, cid = args
    try:
        return cid, run_cell(cell, net, config, cell_id=cid), None
    except Exception as exc:
        return cid, None, f"{type(exc).__name__}: {exc}"


def _intervals_overlap_samples(net: GeodesicNet, seg_a, seg_b):
    """Nodes of a curve lying in both segment parameter ranges (with the range ends)."""
    curve = net.curves[seg_a.curve]
    L = curve.length
    s_nodes = curve.arclength[:-1] if curve.closed else curve.arclength
    cand = np.unique(np.concatenate([s_nodes, [seg_a.t0, seg_a.t1, seg_b.t0, seg_b.t1]]))
    tol = 1e-12 * max(L, 1.0)

    def inside(s, seg):
        if not curve.closed:
            return (s >= seg.t0 - tol) & (s <= seg.t1 + tol)
        span = (seg.t1 - seg.t0) % L
        if span <= tol:
            span = L
        return ((s - seg.t0) % L <= span + tol) | ((seg.t0 - s) % L <= tol)

    s = cand[inside(cand, seg_a) & inside(cand, seg_b)]
    if curve.closed:
        s = np.unique(np.round(s % L, 15))
    return s, np.array([curve.evaluate(t) for t in s])


def _match(patch: SurfacePatch, x: np.ndarray):
    """(distance, normal) at the boundary vertex of ``patch`` closest to x."""
    loop = patch.boundary_loop
    d = np.linalg.norm(patch.vertices[loop] - x, axis=1)
    k = int(np.argmin(d))
    return float(d[k]), patch.vertex_normal(int(loop[k]))


def _side(patches, idx, x):
    best = min((_match(patches[i], x) for i in idx), key=lambda t: t[0])
    return best


def seam_dihedral(surface: NetSurface, seam: Seam, tol_pos: Optional[float] = None) -> np.ndarray:
    """Angle between the two sides' surface normals at every seam sample (modulo orientation)."""
    tol = np.inf if tol_pos is None else tol_pos
    out = np.empty(len(seam.samples))
    for k, x in enumerate(seam.samples):
        da, na = _side(surface.patches, seam.patches[0], x)
        db, nb = _side(surface.patches, seam.patches[1], x)
        if max(da, db) > tol:
            raise SeamError(f"seam {seam.label}: sample {k} is {max(da, db):.3g} away from a patch")
        out[k] = normal_defect(na, nb)
    return out


def _make_seam(label, sides, patches, idx_a, idx_b, samples, tol):
    gap = np.empty(len(samples))
    ang = np.empty(len(samples))
    for k, x in enumerate(samples):
        da, na = _side(patches, idx_a, x)
        db, nb = _side(patches, idx_b, x)
        gap[k] = max(da, db)
        ang[k] = normal_defect(na, nb)
    if np.any(gap > tol):
        raise SeamError(f"seam {label}: samples not matched within {tol:.3g} (worst {gap.max():.3g})")
    return Seam(label, sides, (tuple(idx_a), tuple(idx_b)), samples, gap, ang)


def _split_seams(res: CellResult, owner: dict, patches, tol, out):
    if not res.children:
        return
    a = [owner[id(leaf)] for leaf in res.children[0].leaves()]
    b = [owner[id(leaf)] for leaf in res.children[1].leaves()]
    path_curve = res.split_net.curves[1]
    out.append(_make_seam(f"{res.cell_id}/split", (res.children[0].cell_id, res.children[1].cell_id),
                          patches, a, b, np.array(path_curve.points), tol))
    for c in res.children:
        _split_seams(c, owner, patches, tol, out)


def assemble(net: GeodesicNet, ids, results, failures, tol_pos) -> NetSurface:
    patches, owner, groups = [], {}, {}
    for cid, res in zip(ids, results):
        if res is None:
            continue
        groups[cid] = []
        for leaf in res.leaves():
            owner[id(leaf)] = len(patches)
            groups[cid].append(len(patches))
            patches.append(SurfacePatch.from_result(leaf, cid))
    seams = []
    errors = list(failures)
    cells = dict(zip(ids, net.cells))
    done = [cid for cid in ids if cid in groups]
    for x in range(len(done)):
        for y in range(x + 1, len(done)):
            ca, cb = cells[done[x]], cells[done[y]]
            for sa in ca.segments:
                for sb in cb.segments:
                    if sa.curve != sb.curve:
                        continue
                    s, samples = _intervals_overlap_samples(net, sa, sb)
                    if len(samples) < 2:
                        continue
                    label = f"curve {sa.curve}: {done[x]}|{done[y]}"
                    try:
                        seams.append(_make_seam(label, (done[x], done[y]), patches,
                                                groups[done[x]], groups[done[y]], samples, tol_pos))
                    except SeamError as exc:
                        errors.append((done[x], str(exc)))
    for cid, res in zip(ids, results):
        if res is not None:
            try:
                _split_seams(res, owner, patches, tol_pos, seams)
            except SeamError as exc:
                errors.append((cid, str(exc)))
            for r in res.walk():
                errors.extend(r.errors)
    return NetSurface(tuple(patches), tuple(seams), tuple(r for r in results if r is not None), tuple(errors))


def cell_ids(net: GeodesicNet) -> list:
    return [c.id or str(k) for k, c in enumerate(net.cells)]


def run_net(net: GeodesicNet, config: RunConfig = RunConfig(), jobs: int = 1) -> NetSurface:
    """Run every cell independently and assemble patches and seams.

    Results are collected in input order whatever the execution order, and
    a failing cell is recorded without stopping the others.
    """
    tol_pos = config.tol_pos if config.tol_pos is not None else net.default_tol_pos()
    ids = cell_ids(net)
    if len(set(ids)) != len(ids):
        raise NetError("cell ids must be unique")
    geodecity = tuple(check_geodecity(net, config.tol_angle))
    bad = sum(e.status is GeodecityStatus.FAIL for e in geodecity)
    if bad:
        log.warning("%d of %d intersections fail the principal-normal check; continuing", bad, len(geodecity))
    work = [(cell, net, config, cid) for cell, cid in zip(net.cells, ids)]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcome = list(pool.map(_safe_run, work))
    else:
        outcome = [_safe_run(w) for w in work]
    results = [r for _, r, _ in outcome]
    failures = [(cid, err) for cid, _, err in outcome if err is not None]
    return replace(assemble(net, ids, results, failures, tol_pos), geodecity=geodecity)
