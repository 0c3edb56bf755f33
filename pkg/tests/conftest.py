import numpy as np
import pytest

from geodesica.laplace_beltrami import PatchMesh
from geodesica.mesh2d import triangulate
from geodesica.monge_ampere import grid_to_patch, make_grid, solve_curvature_ma


def flat_patch(polygon, target):
    m = triangulate(np.asarray(polygon, dtype=float), target)
    return PatchMesh(np.column_stack([m.vertices, np.zeros(len(m.vertices))]), m.triangles, m.boundary_loop)


def circle(n, radius=1.0):
    t = 2.0 * np.pi * np.arange(n) / n
    return radius * np.column_stack([np.cos(t), np.sin(t)])


@pytest.fixture(scope="session")
def cap_solution():
    """K = 1 over the radius-0.5 disk with the unit-sphere trace, 65 x 65 grid."""
    grid = make_grid(circle(200, 0.5), np.full(200, np.sqrt(0.75)), 65, curvature=1.0)
    sol, report = solve_curvature_ma(grid)
    return grid, sol, report


@pytest.fixture(scope="session")
def cap_patch(cap_solution):
    return grid_to_patch(cap_solution[1])


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])
