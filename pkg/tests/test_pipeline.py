import numpy as np
import pytest

from geodesica.config import RunConfig
from geodesica.laplace_beltrami import Verdict
from geodesica.net import Cell, GeodesicNet, Polyline3, Segment
from geodesica.pipeline import SeamError, run_cell, run_net, seam_dihedral
from geodesica.profiles import folded_squares_net, profile_contour, profile_net
from geodesica.projection import PlaneStrategy

RELAXED = RunConfig(grid_n=17, allow_unconverged=True)


def square_cell_net(z=0.0):
    s = np.linspace(0, 1, 9)[:-1]
    pts = np.vstack([np.column_stack([s, 0 * s]), np.column_stack([1 + 0 * s, s]),
                     np.column_stack([1 - s, 1 + 0 * s]), np.column_stack([0 * s, 1 - s])])
    curve = Polyline3(np.column_stack([pts, np.full(len(pts), z)]), closed=True)
    return GeodesicNet((curve,), (), (Cell((Segment(0, 0.0, curve.length),), id="sq"),))


@pytest.fixture(scope="module")
def folded():
    return {a: run_net(folded_squares_net(a), RunConfig(grid_n=33)) for a in (0.0, np.pi / 2)}


def test_planar_square_accepts():
    net = square_cell_net(0.5)
    res = run_cell(net.cells[0], net, RunConfig(grid_n=33))
    assert res.verdict is Verdict.ACCEPT and res.depth == 0 and not res.children
    assert np.abs(res.curvature.values).max() <= 1e-6
    assert np.allclose(res.world_vertices()[:, 2], 0.5, atol=1e-12)


def test_modulated_circle_split_runs_end_to_end():
    net = profile_net("sin(2t)", 256)
    res = run_cell(net.cells[0], net, RELAXED.replace(max_split_depth=1))
    assert res.verdict is Verdict.SPLIT
    assert [c.cell_id for c in res.children] == ["c0.0", "c0.1"]
    assert all(c.lineage == "c0" and c.depth == 1 for c in res.children)
    assert res.split_path is not None and res.split_path.length > 0


def test_depth_cap_keeps_split_patch():
    net = profile_net("sin(2t)", 256)
    res = run_cell(net.cells[0], net, RELAXED.replace(max_split_depth=0))
    assert res.verdict is Verdict.SPLIT and res.capped


def test_plane_strategy_retry():
    net = profile_net("sin(2t)", 256)
    res = run_cell(net.cells[0], net, RELAXED.replace(max_split_depth=0, plane_strategy="least_squares"))
    assert res.plane_strategy is PlaneStrategy.VECTOR_AREA


def test_one_cell_net():
    surface = run_net(square_cell_net(), RunConfig(grid_n=17))
    assert len(surface.patches) == 1 and surface.seams == ()
    assert surface.all_accepted


def test_empty_net():
    surface = run_net(GeodesicNet())
    assert surface.patches == () and surface.seams == () and surface.failures == ()


def test_coplanar_seam(folded):
    surface = folded[0.0]
    assert len(surface.patches) == 2 and len(surface.seams) == 1
    seam = surface.seams[0]
    assert seam.gap.max() <= folded_squares_net(0.0).default_tol_pos()
    assert seam.angles.max() <= 1e-8
    assert np.array_equal(seam_dihedral(surface, seam, 1e-9), seam.angles)


def test_crease_seam(folded):
    seam = folded[np.pi / 2].seams[0]
    assert np.allclose(seam.angles, np.pi / 2, atol=1e-8)


def test_seam_dihedral_rejects_far_samples(folded):
    surface = folded[0.0]
    seam = surface.seams[0]
    moved = type(seam)(seam.label, seam.sides, seam.patches, seam.samples + [0, 0, 1.0], seam.gap, seam.angles)
    with pytest.raises(SeamError):
        seam_dihedral(surface, moved, 1e-6)


def test_cell_order_does_not_change_geometry(folded):
    net = folded_squares_net(np.pi / 2)
    swapped = GeodesicNet(net.curves, net.intersections, net.cells[::-1])
    other = run_net(swapped, RunConfig(grid_n=33))
    a = {p.cell_id: p for p in folded[np.pi / 2].patches}
    for p in other.patches:
        assert np.array_equal(p.vertices, a[p.cell_id].vertices)
        assert np.array_equal(p.triangles, a[p.cell_id].triangles)


def test_parallel_matches_serial(folded):
    par = run_net(folded_squares_net(np.pi / 2), RunConfig(grid_n=33), jobs=2)
    for p, q in zip(par.patches, folded[np.pi / 2].patches):
        assert p.cell_id == q.cell_id and np.array_equal(p.vertices, q.vertices)


def test_failing_cell_does_not_stop_others():
    base = folded_squares_net(0.0)
    ring = Polyline3(profile_contour("sin(4t)", 256) + [5, 5, 0], closed=True)
    net = GeodesicNet(base.curves + (ring,), base.intersections,
                      base.cells + (Cell((Segment(3, 0.0, ring.length),), id="bumpy"),))
    surface = run_net(net, RunConfig(grid_n=17))
    assert [c for c, _ in surface.failures] == ["bumpy"]
    assert "NonConvergence" in surface.failures[0][1]
    assert sorted(p.cell_id for p in surface.patches) == ["east", "west"]
    assert not surface.all_accepted
