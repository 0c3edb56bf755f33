"""Manufactured-solution refinement studies with observed orders."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .biharmonic import solve_mixed_biharmonic
from .mesh2d import triangulate
from .monge_ampere import INSIDE, make_grid, solve_curvature_ma


@dataclass(frozen=True)
class StudyLevel:
    resolution: float     # mesh target edge, or grid spacing
    size: int             # vertices, or inside grid nodes
    error: float
    seconds: float
    converged: bool = True


@dataclass(frozen=True)
class Study:
    name: str
    levels: tuple

    @property
    def errors(self) -> np.ndarray:
        return np.array([lv.error for lv in self.levels])

    @property
    def orders(self) -> np.ndarray:
        """Observed order between consecutive levels."""
        h = np.array([lv.resolution for lv in self.levels])
        e = self.errors
        return np.log(e[:-1] / e[1:]) / np.log(h[:-1] / h[1:])

    @property
    def fitted_order(self) -> float:
        h = np.array([lv.resolution for lv in self.levels])
        return float(np.polyfit(np.log(h), np.log(self.errors), 1)[0])

    @property
    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.errors) < 0))


def disk_polygon(radius: float, target: float) -> np.ndarray:
    n = max(12, int(np.ceil(2.0 * np.pi * radius / target)))
    t = 2.0 * np.pi * np.arange(n) / n
    return radius * np.column_stack([np.cos(t), np.sin(t)])


def biharmonic_disk_study(targets=(0.2, 0.1, 0.05)) -> Study:
    """Delta^2 f = 64 on the unit disk with f = df/dn = 0; exact f = (1 - r^2)^2."""
    levels = []
    for h in targets:
        t0 = time.perf_counter()
        mesh = triangulate(disk_polygon(1.0, h), h)
        sol = solve_mixed_biharmonic(mesh, np.zeros(len(mesh.boundary_loop)), rhs=64.0)
        r2 = (mesh.vertices**2).sum(axis=1)
        inner = mesh.interior
        err = float(np.abs(sol.f.values[inner] - (1.0 - r2[inner]) ** 2).max())
        levels.append(StudyLevel(h, len(mesh.vertices), err, time.perf_counter() - t0))
    return Study("biharmonic disk", tuple(levels))


def cap_study(grid_ns=(33, 65, 129), radius: float = 0.5, samples: int = 400) -> Study:
    """K = 1 over a disk of the given radius; exact height sqrt(1 - x^2 - y^2)."""
    t = 2.0 * np.pi * np.arange(samples) / samples
    boundary = radius * np.column_stack([np.cos(t), np.sin(t)])
    heights = np.full(samples, np.sqrt(1.0 - radius**2))
    levels = []
    for n in grid_ns:
        t0 = time.perf_counter()
        grid = make_grid(boundary, heights, n, curvature=1.0)
        sol, rep = solve_curvature_ma(grid)
        X, Y = grid.coords()
        inside = grid.mask == INSIDE
        err = float(np.abs(sol.h - np.sqrt(1.0 - X**2 - Y**2))[inside].max())
        levels.append(StudyLevel(grid.spacing, int(inside.sum()), err, time.perf_counter() - t0, rep.converged))
    return Study("curvature cap", tuple(levels))


def format_study(study: Study) -> str:
    lines = [study.name, f"{'resolution':>12} {'size':>7} {'error':>12} {'order':>7} {'seconds':>8}"]
    orders = [float("nan")] + list(study.orders)
    for lv, p in zip(study.levels, orders):
        lines.append(f"{lv.resolution:12.5g} {lv.size:7d} {lv.error:12.5e} {p:7.3f} {lv.seconds:8.2f}")
    lines.append(f"fitted order {study.fitted_order:.3f}, monotone {'yes' if study.monotone else 'no'}")
    return "\n".join(lines)
