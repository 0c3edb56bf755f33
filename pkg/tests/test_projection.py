import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from geodesica.net import NetError
from geodesica.profiles import profile_contour
from geodesica.projection import (AffineChart, PlaneStrategy, ProjectionNotInjective, coarsen_boundary,
                                  dirichlet_data, dirichlet_table, fit_plane, project_contour)

SQUARE_Z2 = np.array([[0, 0, 2], [1, 0, 2], [1, 1, 2], [0, 1, 2]], dtype=float)


def assert_orthonormal(chart):
    R = chart.rotation
    assert np.allclose(R @ R.T, np.eye(3), atol=1e-12)
    assert np.allclose(np.cross(chart.basis_u, chart.basis_v), chart.normal, atol=1e-12)


@pytest.mark.parametrize("strategy", list(PlaneStrategy))
def test_planar_square_chart(strategy):
    chart = fit_plane(SQUARE_Z2, strategy, corners=(0, 1, 2, 3))
    assert_orthonormal(chart)
    assert abs(abs(chart.normal[2]) - 1) < 1e-12
    assert chart.origin[2] == pytest.approx(2.0)


def test_three_corners_triangle():
    chart = fit_plane(np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], dtype=float), PlaneStrategy.THREE_CORNERS)
    assert np.allclose(np.abs(chart.normal), [0, 0, 1])


def test_vector_area_plane_of_modulated_circle():
    chart = fit_plane(profile_contour("sin(4t)", 512), PlaneStrategy.VECTOR_AREA)
    assert np.arccos(abs(chart.normal[2])) < 1e-12


def test_least_squares_plane_of_tilted_circle():
    t = 2 * np.pi * np.arange(200) / 200
    n = np.array([0.3, -0.2, 1.0]) / np.linalg.norm([0.3, -0.2, 1.0])
    chart0 = AffineChart.from_normal([1, 2, 3], n)
    pts = chart0.to_world(np.column_stack([np.cos(t), np.sin(t), 0.01 * np.sin(3 * t)]))
    chart = fit_plane(pts, PlaneStrategy.LEAST_SQUARES)
    assert np.arccos(min(abs(chart.normal @ n), 1.0)) < 0.1


def test_chart_orients_contour_counterclockwise():
    chart = fit_plane(SQUARE_Z2[::-1])
    cc = project_contour(SQUARE_Z2[::-1], chart)
    x, y = cc.boundary2d.T
    assert 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y) > 0


def test_project_square_heights():
    chart = AffineChart.from_normal([0, 0, 0], [0, 0, 1])
    cc = project_contour(SQUARE_Z2, chart)
    assert np.allclose(cc.heights, 2.0)
    assert np.allclose(np.sort(np.abs(cc.boundary2d).sum(axis=1)), [0, 1, 1, 2])
    assert np.allclose(cc.lift(), SQUARE_Z2)


def test_project_sin2t_on_circle():
    pts = profile_contour("sin(2t)", 256)
    cc = project_contour(pts, AffineChart.from_normal([0, 0, 0], [0, 0, 1]))
    t = 2 * np.pi * np.arange(256) / 256
    assert np.allclose(cc.heights, np.sin(2 * t), atol=1e-15)
    assert np.allclose(np.linalg.norm(cc.boundary2d, axis=1), 1.0)


def test_folding_shadow_raises():
    # a simple space curve whose shadow on z = 0 is a figure eight
    t = 2 * np.pi * np.arange(200) / 200
    pts = np.column_stack([np.cos(t), 0.5 * np.sin(2 * t), np.sin(t)])
    with pytest.raises(ProjectionNotInjective):
        project_contour(pts, AffineChart.from_normal([0, 0, 0], [0, 0, 1]))


def test_least_squares_folds_modulated_circle():
    # the least-squares plane of sin(2t) is tilted enough to fold the shadow
    pts = profile_contour("sin(2t)", 512)
    with pytest.raises(ProjectionNotInjective):
        project_contour(pts, fit_plane(pts, PlaneStrategy.LEAST_SQUARES))


def test_collinear_contour_rejected():
    with pytest.raises(NetError):
        fit_plane(np.column_stack([np.arange(5.0), np.zeros(5), np.zeros(5)]), PlaneStrategy.LEAST_SQUARES)


def test_planar_contour_has_zero_g():
    cc = project_contour(SQUARE_Z2, fit_plane(SQUARE_Z2), corners=(0, 1, 2, 3))
    assert np.all(dirichlet_data(cc) == 0.0)


def test_sin2t_g_at_zero():
    pts = profile_contour("sin(2t)", 2048)
    g = dirichlet_data(project_contour(pts, fit_plane(pts)))
    assert g[0] == pytest.approx(0.25 * np.log(5.0), abs=1e-6)


def test_sin4t_g_vanishes_at_pi_over_8():
    pts = profile_contour("sin(4t)", 512)
    g = dirichlet_data(project_contour(pts, fit_plane(pts)))
    assert abs(g[32]) < 1e-10


def test_corner_values_keep_both_sides():
    # a roof: heights rise then fall, so the slope flips sign at the corners
    sq = np.array([[0, 0, 0], [0.5, 0, 0.5], [1, 0, 0], [1, 1, 0], [0.5, 1, 0.5], [0, 1, 0]], dtype=float)
    dense = np.vstack([a + (b - a) * u for a, b in zip(sq, np.roll(sq, -1, axis=0))
                       for u in np.linspace(0, 1, 9)[:-1]])
    cc = project_contour(dense, AffineChart.from_normal([0, 0, 0], [0, 0, 1]), corners=(8,))
    tab = dirichlet_table(cc)
    assert tab.g_before[8] == pytest.approx(0.25 * np.log(2.0))
    assert tab.g_after[8] == pytest.approx(0.25 * np.log(2.0))
    assert tab.g[8] == pytest.approx(0.25 * np.log(2.0))


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 1.5), st.floats(-1, 1), st.floats(-1, 1))
def test_lift_reproduces_contour(amp, nx, ny):
    t = 2 * np.pi * np.arange(128) / 128
    pts = np.column_stack([np.cos(t), np.sin(t), amp * np.sin(2 * t)])
    chart = AffineChart.from_normal([0.1, -0.2, 0.3], [0.1 * nx, 0.1 * ny, 1.0])
    cc = project_contour(pts, chart)
    assert np.abs(cc.lift() - pts).max() < 1e-12


def test_coarsen_keeps_corners():
    s = np.linspace(0.0, 4.0, 401)
    keep = coarsen_boundary(s, (0, 100, 200, 300), 0.3)
    assert {0, 100, 200, 300} <= set(keep.tolist())
    assert np.all(np.abs(np.diff(s[keep]) - 0.3) <= 0.15)
