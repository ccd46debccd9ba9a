"""Linear configuration-space problem of one fixed-point iteration.

Unknowns are ordered like ``psi.ravel()`` for ``psi`` of shape ``(nx, ny, M)``.
The operator is written so that ``theta @ (A @ psi)`` equals the bilinear
form ``b(u)(psi, theta)`` with cell-volume and angular quadrature weights::

    int psi theta - tau int psi u . grad theta
        + tau / De int (eps^2 grad psi . grad theta + grad_g psi . grad_g theta)

Advection uses face velocities times face-averaged ``psi``, so every
row sum over cells of the advection and diffusion parts vanishes and the
total mass is conserved exactly by the assembled system.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConservationViolation, SolverFailure
from .grids import DomainGrid, OrientationGrid
from .potential import PotentialField
from .regularization import Q0L

log = logging.getLogger(__name__)

POSITIVITY_TOL = 1e-8


@dataclass
class ConfigSystem:
    grid: DomainGrid
    ogrid: OrientationGrid
    matrix: sp.csr_matrix
    rhs: np.ndarray
    psi_prev: np.ndarray
    blocks: dict = field(default_factory=dict)
    rhs_terms: dict = field(default_factory=dict)

    def mass_audit(self):
        """Column sums of each operator block; all but ``mass`` vanish for a conservative scheme."""
        ones = np.ones(self.matrix.shape[0])
        return {k: np.abs(ones @ b).max() for k, b in self.blocks.items()}


@dataclass
class ConfigSolution:
    psi: np.ndarray
    iterations: int
    residual: float
    mass_drift: float
    min_psi: float
    negative_flag: bool


@lru_cache(maxsize=8)
def _fixed_blocks(grid: DomainGrid, ogrid: OrientationGrid):
    """Mass, spatial and angular stiffness matrices (unscaled), cached per grid."""
    ops = grid.ops
    M = ogrid.M
    vw = grid.vol * ogrid.weight
    IM = sp.identity(M, format="csr")
    Ic = sp.identity(grid.ncells, format="csr")
    kx = ops.sgrad_x.T @ ops.sgrad_x + ops.sgrad_y.T @ ops.sgrad_y
    D = ogrid.diff_matrix
    mass = vw * sp.identity(grid.ncells * M, format="csr")
    space = vw * sp.kron(kx, IM, format="csr")
    angle = vw * sp.kron(Ic, sp.csr_matrix(D.T @ D), format="csr")
    return mass, space, angle


def advection_matrix(grid: DomainGrid, ogrid: OrientationGrid, vel):
    """Matrix of ``sum_faces vol w u_f avg(psi)_f grad(theta)_f``."""
    ops = grid.ops
    u, v = vel[: grid.nu], vel[grid.nu:]
    a = ops.sgrad_x.T @ sp.diags(u) @ ops.savg_x + ops.sgrad_y.T @ sp.diags(v) @ ops.savg_y
    return (grid.vol * ogrid.weight) * sp.kron(a, sp.identity(ogrid.M), format="csr")


def config_rhs_terms(grid, ogrid, params, vel, psi_bar, psi_prev, P: PotentialField):
    ops = grid.ops
    M = ogrid.M
    vw = grid.vol * ogrid.weight
    tau, De = params.tau, params.De
    q0 = np.asarray(Q0L(psi_bar, params.L))
    D = ogrid.diff_matrix

    terms = {"previous": vw * psi_prev.ravel()}

    # spatial drift -(eps^2 / De) int Q0 grad_x P . grad theta, on faces
    gx, gy = P.grad_x(grid, ogrid)
    qx, qy = ops.face_average(q0)
    fx = (qx * gx).reshape(grid.nu, M)
    fy = (qy * gy).reshape(grid.nv, M)
    drift_x = ops.sgrad_x.T @ fx + ops.sgrad_y.T @ fy
    terms["drift_x"] = -(tau * params.eps ** 2 / De) * vw * drift_x.ravel()

    # angular drift -(1 / De) int Q0 grad_g P . grad_g theta
    gt = P.grad_g_tangential(ogrid)
    terms["drift_g"] = -(tau / De) * vw * ((q0 * gt) @ D).ravel()

    # rotation + int Q0 ((I - mm) grad u m) . grad_g theta
    G = ops.velocity_gradient(vel)
    tGm = np.einsum("...ab,jab->...j", G, ogrid.tm)
    terms["rotation"] = tau * vw * ((q0 * tGm) @ D).ravel()
    return terms


def assemble_config(grid: DomainGrid, ogrid: OrientationGrid, params, vel, psi_bar, psi_prev,
                    P: PotentialField) -> ConfigSystem:
    """Assemble ``b(u)(psi, theta) = l(u, psi_bar)(theta)``.

    ``P`` must be the half-sum potential ``U[psi_bar + psi_prev] / 2``.
    """
    shape = grid.shape + (ogrid.M,)
    psi_bar = np.asarray(psi_bar, dtype=float)
    psi_prev = np.asarray(psi_prev, dtype=float)
    if psi_bar.shape != shape or psi_prev.shape != shape:
        raise ValueError(f"configuration fields must have shape {shape}")
    vel = np.asarray(vel, dtype=float)
    if vel.shape != (grid.nvel,):
        raise ValueError(f"velocity must have {grid.nvel} entries")
    div = float(np.abs(grid.ops.div @ vel).max(initial=0.0))
    if div > params.tol_div:
        raise ValueError(
            f"velocity is not discretely divergence-free (max|div u| = {div:.3e} > {params.tol_div:.1e})"
        )

    mass, space, angle = _fixed_blocks(grid, ogrid)
    tau, De = params.tau, params.De
    blocks = {
        "mass": mass,
        "advection": -tau * advection_matrix(grid, ogrid, vel),
        "diffusion_x": (tau * params.eps ** 2 / De) * space,
        "diffusion_g": (tau / De) * angle,
    }
    matrix = sum(blocks.values()).tocsr()
    terms = config_rhs_terms(grid, ogrid, params, vel, psi_bar, psi_prev, P)
    rhs = sum(terms.values())
    return ConfigSystem(grid, ogrid, matrix, rhs, psi_prev, blocks, terms)


def solve_config(sys_: ConfigSystem, tol_linear=1e-10, x0=None, maxiter=2000) -> ConfigSolution:
    A = sys_.matrix
    b = sys_.rhs
    n = b.size
    shape = sys_.psi_prev.shape
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        psi = np.zeros(shape)
        return ConfigSolution(psi, 0, 0.0, 0.0, 0.0, False)

    dinv = 1.0 / A.diagonal()
    Mpre = spla.LinearOperator((n, n), matvec=lambda r: dinv * r, dtype=float)
    x0 = sys_.psi_prev.ravel() if x0 is None else np.ravel(x0)
    count = [0]

    def cb(_):
        count[0] += 1

    x, info = spla.bicgstab(A, b, x0=x0, rtol=tol_linear, atol=0.0, maxiter=maxiter, M=Mpre, callback=cb)
    res = float(np.linalg.norm(b - A @ x)) / bnorm
    if info != 0 or res > tol_linear:
        log.debug("bicgstab returned info=%d, residual %.3e; retrying with GMRES", info, res)
        x, info = spla.gmres(A, b, x0=x, rtol=tol_linear, atol=0.0, restart=80, maxiter=maxiter,
                             M=Mpre, callback=cb, callback_type="pr_norm")
        res = float(np.linalg.norm(b - A @ x)) / bnorm
        if info != 0 or res > tol_linear:
            raise SolverFailure(
                f"configuration solve stagnated at relative residual {res:.3e} (tol {tol_linear:.1e})",
                iterations=count[0], residuals=[res],
            )

    psi = x.reshape(shape)
    grid, ogrid = sys_.grid, sys_.ogrid
    vw = grid.vol * ogrid.weight
    m_prev = vw * float(np.abs(sys_.psi_prev).sum())
    drift = vw * abs(float(x.sum() - sys_.psi_prev.sum()))
    mass_tol = 10.0 * tol_linear * m_prev
    if drift > mass_tol:
        raise ConservationViolation(
            f"configuration solve changed total mass by {drift:.3e} (allowed {mass_tol:.3e})",
            drift=drift, tol=mass_tol,
        )
    pmin = float(psi.min())
    flag = pmin < -POSITIVITY_TOL * float(np.abs(psi).max())
    if flag:
        log.info("negative density excursion: min psi = %.3e", pmin)
    return ConfigSolution(psi, count[0], res, drift, pmin, flag)
