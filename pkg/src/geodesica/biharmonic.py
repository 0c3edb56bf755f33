"""Two-field (Ciarlet-Raviart) P1 solver for the conformal-factor biharmonic problem.

Unknowns are the conformal factor ``f`` and ``omega = -laplacian(f)``. The
weak system is

    (grad f, grad psi) = (omega, psi)   for every P1 basis function psi
    (grad omega, grad v) = (rhs, v)     for interior basis functions v

with ``f = g`` on the boundary. Testing the first equation against boundary
basis functions as well is what imposes the zero normal derivative.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh2d import ScalarField, TriMesh2

log = logging.getLogger(__name__)


class BiharmonicError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class MixedSolution:
    f: ScalarField
    omega: ScalarField
    residual_norm: float


def assemble_p1(mesh: TriMesh2):
    """Stiffness and consistent mass matrices of the P1 space."""
    p = mesh.vertices[mesh.triangles]
    area = mesh.areas
    if np.any(area <= 0):
        raise BiharmonicError("mesh has degenerate or inverted triangles")
    # grad(lambda_k) = rot90(p[k+2] - p[k+1]) / (2 area)
    grads = np.empty((len(area), 3, 2))
    for k in range(3):
        e = p[:, (k + 2) % 3] - p[:, (k + 1) % 3]
        grads[:, k, 0] = -e[:, 1]
        grads[:, k, 1] = e[:, 0]
    grads /= (2.0 * area)[:, None, None]
    local_k = area[:, None, None] * np.einsum("tid,tjd->tij", grads, grads)
    local_m = area[:, None, None] / 12.0 * (np.ones((3, 3)) + np.eye(3))[None]
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    n = len(mesh.vertices)
    K = sp.coo_matrix((local_k.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    M = sp.coo_matrix((local_m.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    return K, M


def mixed_system(mesh: TriMesh2, g, rhs=None):
    """Symmetric saddle-point system in the unknowns (omega, f_interior)."""
    n = len(mesh.vertices)
    g = np.asarray(g, dtype=float)
    if g.shape != (len(mesh.boundary_loop),):
        raise BiharmonicError("need one Dirichlet value per boundary vertex")
    if not np.all(np.isfinite(g)):
        raise BiharmonicError("Dirichlet data must be finite")
    r = np.zeros(n) if rhs is None else np.broadcast_to(np.asarray(getattr(rhs, "values", rhs), dtype=float), (n,))
    K, M = assemble_p1(mesh)
    B = mesh.boundary_loop
    I = mesh.interior
    KI = K[:, I]
    A = sp.bmat([[-M, KI], [KI.T, None]], format="csc")
    b = np.concatenate([-(K[:, B] @ g), (M @ r)[I]])
    return A, b


def solve_mixed_biharmonic(mesh: TriMesh2, g, rhs=None, tol: float = 1e-10, maxiter: int = 20000) -> MixedSolution:
    """Solve bilaplacian(f) = rhs with f = g and zero normal derivative on the boundary.

    ``g`` is ordered like ``mesh.boundary_loop``; ``rhs`` defaults to zero.
    """
    n = len(mesh.vertices)
    A, b = mixed_system(mesh, g, rhs)
    bnorm = np.linalg.norm(b)
    scale = bnorm if bnorm > 0 else 1.0
    with np.errstate(all="ignore"):
        try:
            x = spla.spsolve(A, b)
        except RuntimeError:
            x = np.full(len(b), np.nan)
    if not np.all(np.isfinite(x)) or np.linalg.norm(A @ x - b) > tol * scale:
        log.warning("direct solve failed, falling back to MINRES")
        x, info = spla.minres(A, b, rtol=tol, maxiter=maxiter)
        if info != 0:
            raise BiharmonicError(f"MINRES did not converge (info={info})")
    res = float(np.linalg.norm(A @ x - b) / scale)
    if not np.isfinite(res) or res > tol:
        raise BiharmonicError(f"mixed system is singular (relative residual {res:.3g})")
    f = np.empty(n)
    f[mesh.boundary_loop] = g
    f[mesh.interior] = x[n:]
    return MixedSolution(ScalarField(mesh, f), ScalarField(mesh, x[:n]), res)


def curvature_field(sol: MixedSolution) -> ScalarField:
    """Gaussian curvature -exp(-2f) laplacian(f) = exp(-2f) omega at every vertex."""
    f = sol.f.values
    if np.any(np.abs(f) > 300.0):
        raise BiharmonicError("conformal factor exceeds |f| = 300")
    return ScalarField(sol.f.mesh, np.exp(-2.0 * f) * sol.omega.values)


def dump_system(mesh: TriMesh2, g, path, rhs=None) -> None:
    """Write the assembled matrix (``path``) and right-hand side (``path`` + ``.rhs``) as Matrix Market."""
    A, b = mixed_system(mesh, g, rhs)
    scipy.io.mmwrite(str(path), A, symmetry="symmetric")
    scipy.io.mmwrite(str(path) + ".rhs", b[:, None])
