"""Linearised momentum problem of one fixed-point iteration.

Velocity block (all terms are volume-weighted variational forms)::

    Re De M + tau Re De C(u_prev) + tau gamma De K
        + tau (1 - gamma) De / 2 * sum_j w Q0(psi_bar) (G u : mm)(G w : mm)

where ``C`` is the skew-symmetrised convection, ``K`` the vector Dirichlet
form and ``G`` the cell-centred velocity gradient. Incompressibility is
enforced by a pressure multiplier and solved with a preconditioned Uzawa
iteration on the pressure Schur complement.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import SolverFailure
from .grids import DomainGrid, OrientationGrid, moments
from .potential import PotentialField
from .regularization import Q0L

log = logging.getLogger(__name__)


@dataclass
class FlowState:
    u: np.ndarray
    p: np.ndarray
    div_residual: float
    iterations: int = 0
    energy_residual: float = 0.0


@dataclass
class OseenSystem:
    grid: DomainGrid
    matrix: sp.csr_matrix
    rhs: np.ndarray
    blocks: dict = field(default_factory=dict)
    rhs_terms: dict = field(default_factory=dict)


def polymer_viscosity_matrix(grid: DomainGrid, ogrid: OrientationGrid, coeff):
    """Matrix of ``sum_cells vol sum_j w coeff_j (G u : m m)(G w : m m)``.

    ``coeff`` has shape ``(nx, ny, M)``.
    """
    ops = grid.ops
    m = ogrid.m
    # G : mm = Gxx mx^2 + (Gxy + Gyx) mx my + Gyy my^2
    c = np.stack([m[:, 0] ** 2, m[:, 0] * m[:, 1], m[:, 1] ** 2], axis=-1)  # (M, 3)
    K = ogrid.weight * np.einsum("...j,jk,jl->...kl", coeff, c, c).reshape(grid.ncells, 3, 3)
    (gxx, gxy), (gyx, gyy) = ops.vgrad
    e = (gxx, (gxy + gyx).tocsr(), gyy)
    out = sp.csr_matrix((grid.nvel, grid.nvel))
    for k in range(3):
        for l in range(3):
            out = out + e[k].T @ sp.diags(grid.vol * K[:, k, l]) @ e[l]
    return out.tocsr()


def flow_rhs_terms(grid, ogrid, params, psi_bar, u_prev, P: PotentialField):
    """Right-hand side pieces keyed by name; they sum to the full load vector."""
    ops = grid.ops
    w = ogrid.weight
    vol = grid.vol
    g1 = 1.0 - params.gamma
    tau = params.tau
    q0 = np.asarray(Q0L(psi_bar, params.L))

    terms = {"inertia": params.Re * params.De * vol * u_prev}

    # body force -(1-gamma) int psi_bar grad_x P . w, on faces
    gx, gy = P.grad_x(grid, ogrid)
    fx, fy = ops.face_average(psi_bar)
    body = np.concatenate([(w * (fx * gx).sum(-1)).ravel(), (w * (fy * gy).sum(-1)).ravel()])
    terms["body"] = -tau * g1 * vol * body

    # elastic: -(1-gamma) int Q0 ((I - mm) grad w m) . grad_g P = G(w) : sum_j w Q0 g_j (x) m_j
    gt = P.grad_g_tangential(ogrid)
    E = w * np.einsum("...j,...j,jab->...ab", q0, gt, ogrid.tm)
    terms["elastic"] = -tau * g1 * vol * ops.velocity_gradient_adjoint(E)

    # -(1-gamma) int psi_bar (2 mm - I) : grad w
    omega, S = moments(psi_bar, ogrid)
    orient = 2.0 * S - omega[..., None, None] * np.eye(2)
    terms["orientation"] = -tau * g1 * vol * ops.velocity_gradient_adjoint(orient)

    # -alpha (1-gamma) int Q0 mm : grad w
    _, SQ = moments(q0, ogrid)
    terms["active"] = -tau * params.alpha * g1 * vol * ops.velocity_gradient_adjoint(SQ)
    return terms


def assemble_flow(grid: DomainGrid, ogrid: OrientationGrid, params, psi_bar, psi_prev,
                  u_prev, P: PotentialField) -> OseenSystem:
    """Assemble ``a(psi_bar)(u, w) = k(psi_bar)(w)``.

    ``P`` must be the half-sum potential ``U[psi_bar + psi_prev] / 2``.
    """
    shape = grid.shape + (ogrid.M,)
    psi_bar = np.asarray(psi_bar, dtype=float)
    if psi_bar.shape != shape or np.shape(psi_prev) != shape:
        raise ValueError(f"configuration fields must have shape {shape}")
    if np.shape(u_prev) != (grid.nvel,):
        raise ValueError(f"velocity must have {grid.nvel} entries")
    if P.a.shape != grid.shape:
        raise ValueError("potential does not match the grid")

    ops = grid.ops
    Re, De, tau, gamma = params.Re, params.De, params.tau, params.gamma
    q0 = np.asarray(Q0L(psi_bar, params.L))
    blocks = {
        "mass": Re * De * ops.mass_vel,
        "convection": tau * Re * De * ops.convection(u_prev),
        "viscous": tau * gamma * De * ops.stiffness,
        "polymer": tau * (1.0 - gamma) * De / 2.0 * polymer_viscosity_matrix(grid, ogrid, q0),
    }
    matrix = sum(blocks.values()).tocsr()
    terms = flow_rhs_terms(grid, ogrid, params, psi_bar, u_prev, P)
    rhs = sum(terms.values())
    return OseenSystem(grid=grid, matrix=matrix, rhs=rhs, blocks=blocks, rhs_terms=terms)


# --------------------------------------------------------------------------
# saddle-point solver
# --------------------------------------------------------------------------


class _PressurePreconditioner:
    """Exact pseudo-inverse of ``B diag(A)^-1 B^T`` on mean-zero pressures."""

    def __init__(self, Bop, diag):
        P = (Bop @ sp.diags(1.0 / diag) @ Bop.T).tolil()
        P[0, :] = 0.0
        P[:, 0] = 0.0
        P[0, 0] = 1.0
        self.lu = spla.splu(P.tocsc())
        self.n = Bop.shape[0]

    def __call__(self, r):
        r = r - r.mean()
        z = self.lu.solve(r)
        return z - z.mean()


def solve_saddle(A, f, grid: DomainGrid, tol_div=1e-10, tol_linear=1e-10, p0=None, maxiter=500):
    """Solve ``A u + B^T p = f, B u = 0`` with ``B = -vol div`` by Uzawa-Krylov.

    Inner velocity solves use a sparse LU factorisation of ``A``. The outer
    iteration is CG when ``A`` is symmetric and GMRES otherwise.
    """
    A = sp.csc_matrix(A)
    n = grid.ncells
    Bop = (-grid.vol) * grid.ops.div
    Bt = Bop.T.tocsr()
    try:
        lu = spla.splu(A)
    except RuntimeError as exc:
        raise SolverFailure(f"velocity block is singular: {exc}") from exc

    symmetric = abs(A - A.T).max() == 0.0
    if symmetric:
        d = A.diagonal()
        if np.any(d <= 0):
            raise SolverFailure("velocity block is not positive definite (non-positive diagonal)")

    u_f = lu.solve(f)
    b = Bop @ u_f
    b = b - b.mean()
    count = [0]

    def schur(p):
        count[0] += 1
        return Bop @ lu.solve(Bt @ p)

    S = spla.LinearOperator((n, n), matvec=schur, dtype=float)
    Mpre = spla.LinearOperator((n, n), matvec=_PressurePreconditioner(Bop, A.diagonal()), dtype=float)
    atol = 0.5 * grid.vol * tol_div
    p = np.zeros(n) if p0 is None else np.asarray(p0, dtype=float).copy()

    def velocity(p):
        return lu.solve(f - Bt @ p)

    u = velocity(p)
    div_res = float(np.abs(grid.ops.div @ u).max(initial=0.0))
    history = [div_res]
    for attempt in range(4):
        if div_res <= tol_div:
            break
        if symmetric:
            p, info = spla.cg(S, b, x0=p, rtol=0.0, atol=atol, maxiter=maxiter, M=Mpre)
        else:
            p, info = spla.gmres(S, b, x0=p, rtol=0.0, atol=atol, restart=60,
                                 maxiter=maxiter, M=Mpre)
        u = velocity(p)
        div_res = float(np.abs(grid.ops.div @ u).max(initial=0.0))
        history.append(div_res)
        atol *= 0.1
    if div_res > tol_div:
        raise SolverFailure(
            f"Uzawa iteration stagnated: max|div u| = {div_res:.3e} > tol_div = {tol_div:.1e}",
            iterations=count[0], residuals=history,
        )
    p = p - p.mean()
    return u, p, div_res, count[0]


def solve_flow(sys_: OseenSystem, tol_div=1e-10, tol_linear=1e-10, p0=None) -> FlowState:
    u, p, div_res, its = solve_saddle(sys_.matrix, sys_.rhs, sys_.grid, tol_div, tol_linear, p0)
    auu = float(u @ (sys_.matrix @ u))
    ku = float(sys_.rhs @ u)
    scale = max(abs(auu), abs(ku), np.finfo(float).tiny)
    energy_res = abs(auu - ku) / scale if (auu or ku) else 0.0
    if energy_res > 10 * tol_linear:
        log.debug("flow energy identity residual %.3e exceeds %.1e", energy_res, 10 * tol_linear)
    return FlowState(u=u, p=p, div_residual=div_res, iterations=its, energy_residual=energy_res)


def coercivity_ratio(sys_: OseenSystem, vel, params):
    """``a(u, u) / (De min(Re, tau gamma) ||u||_{H1,h}^2)``; >= 1 when coercive."""
    grid = sys_.grid
    h1 = grid.ops.l2_norm2(vel) + grid.ops.h1_seminorm2(vel)
    lower = params.De * min(params.Re, params.tau * params.gamma) * h1
    return float(vel @ (sys_.matrix @ vel)) / lower
