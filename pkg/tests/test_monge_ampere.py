import numpy as np
import pytest

from conftest import circle
from geodesica.monge_ampere import (BOUNDARY, INSIDE, NonConvergence, discrete_residual, first_fundamental_form,
                                    grid_to_patch, make_grid, solve_curvature_ma)

DISK = circle(200, 0.5)


def test_grid_covers_domain():
    grid = make_grid(DISK, np.zeros(200), 33)
    assert grid.spacing == pytest.approx(1 / 32)
    X, Y = grid.coords()
    r = np.hypot(X, Y)
    assert np.all(r[grid.mask == INSIDE] < 0.5)
    assert np.all(np.isfinite(grid.h[grid.mask == BOUNDARY]))


def test_affine_exact():
    a, b, c = 0.3, -0.7, 0.2
    grid = make_grid(DISK, a * DISK[:, 0] + b * DISK[:, 1] + c, 33, curvature=0.0)
    sol, rep = solve_curvature_ma(grid)
    X, Y = grid.coords()
    inside = grid.mask == INSIDE
    assert rep.converged and rep.iterations <= 2
    assert np.abs(sol.h - (a * X + b * Y + c))[inside].max() < 1e-12


def test_cap(cap_solution):
    grid, sol, rep = cap_solution
    X, Y = grid.coords()
    inside = grid.mask == INSIDE
    assert rep.converged
    assert np.abs(sol.h - np.sqrt(1 - X**2 - Y**2))[inside].max() <= 5e-3
    # the reported residual is the discrete equation's residual at the returned heights
    assert grid.spacing**2 * np.nanmax(np.abs(discrete_residual(sol))) == pytest.approx(rep.final_residual, abs=1e-14)


def test_flat_saddle_by_residual():
    t = 2 * np.pi * np.arange(200) / 200
    grid = make_grid(circle(200), np.sin(2 * t), 33, curvature=0.0)
    sol, rep = solve_curvature_ma(grid, max_iter=60)
    assert rep.converged and rep.final_residual <= 1e-8


def test_nonconvergence_raises_on_request():
    t = 2 * np.pi * np.arange(200) / 200
    grid = make_grid(circle(200), np.sin(4 * t), 17, curvature=-50.0)
    with pytest.raises(NonConvergence) as info:
        solve_curvature_ma(grid, max_iter=5, raise_on_failure=True)
    assert not info.value.report.converged


def test_first_fundamental_form(cap_solution):
    grid, sol, _ = cap_solution
    ny, nx = grid.shape
    centre = (ny // 2, nx // 2)
    flat, _ = solve_curvature_ma(make_grid(DISK, np.zeros(200), 33, curvature=0.0))
    assert first_fundamental_form(flat, (16, 16)) == (1.0, 0.0, 1.0)
    tilted = make_grid(DISK, DISK[:, 0], 33)
    tilted, _ = solve_curvature_ma(tilted.with_curvature(0.0))
    E, F, G = first_fundamental_form(tilted, (16, 16))
    assert (E, F, G) == pytest.approx((2.0, 0.0, 1.0), abs=1e-12)
    E, F, G = first_fundamental_form(sol, centre)
    assert (E, F, G) == pytest.approx((1.0, 0.0, 1.0), abs=1e-6)


def test_flat_patch_area():
    grid, _ = solve_curvature_ma(make_grid(DISK, np.zeros(200), 33, curvature=0.0))
    patch = grid_to_patch(grid)
    patch.check()
    poly_area = 0.5 * 200 * 0.25 * np.sin(2 * np.pi / 200)
    assert patch.areas.sum() == pytest.approx(poly_area, rel=1e-12)


def test_cap_patch_area(cap_patch):
    cap_patch.check()
    exact = 2 * np.pi * (1 - np.sqrt(0.75))
    assert cap_patch.areas.sum() == pytest.approx(exact, rel=0.02)
    assert np.allclose(cap_patch.vertices[:200, :2], DISK)


def test_small_square():
    sq = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    grid, _ = solve_curvature_ma(make_grid(sq, np.zeros(4), 3, curvature=0.0))
    patch = grid_to_patch(grid)
    patch.check()
    assert patch.areas.sum() == pytest.approx(1.0)
