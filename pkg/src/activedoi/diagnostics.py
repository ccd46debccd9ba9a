"""Energy functionals, chemical potential, nematic order parameters and the entropy ledger."""

from __future__ import annotations

import numpy as np

from .grids import DomainGrid, OrientationGrid, moments
from .potential import PotentialField
from .regularization import Q0L, entropy_F

LEDGER_COLUMNS = (
    "step", "t", "mass", "kinetic", "entropy", "potential", "visc_inc", "poly_inc",
    "fisher_x_inc", "fisher_g_inc", "active_budget", "total_energy", "picard_iters",
    "min_psi", "div_residual",
)
INT_COLUMNS = ("step", "picard_iters")

OMEGA_FLOOR = 1e-12
S_FLOOR = 1e-8


def total_mass(psi, grid: DomainGrid, ogrid: OrientationGrid) -> float:
    return float(grid.vol * ogrid.weight * np.sum(psi))


def l1_norm(psi, grid: DomainGrid, ogrid: OrientationGrid) -> float:
    return float(grid.vol * ogrid.weight * np.abs(psi).sum())


def kinetic_energy(vel, grid: DomainGrid, params) -> float:
    return 0.5 * params.Re * params.De * grid.ops.l2_norm2(vel)


def entropy_integral(psi, grid, ogrid):
    """``int F(max(psi, 0))`` and the number of clamped nodes."""
    psi = np.asarray(psi)
    clamped = int(np.count_nonzero(psi < 0))
    val = grid.vol * ogrid.weight * float(np.sum(entropy_F(np.maximum(psi, 0.0))))
    return val, clamped


def potential_energy(psi, P: PotentialField, grid, ogrid) -> float:
    """``int psi U`` computed from moments: ``sum vol (a omega - B : S)``."""
    omega, S = moments(psi, ogrid)
    return float(grid.vol * np.sum(P.a * omega - np.einsum("...ab,...ab->...", P.B, S)))


def polymer_dissipation(vel, psi, grid, ogrid, L) -> float:
    """``int Q0(psi) (grad u : m m)^2``."""
    G = grid.ops.velocity_gradient(vel)
    Gmm = np.einsum("...ab,jab->...j", G, ogrid.mm)
    return float(grid.vol * ogrid.weight * np.sum(np.asarray(Q0L(psi, L)) * Gmm ** 2))


def fisher_x(psi, grid, ogrid) -> float:
    """``4 int |grad_x sqrt(psi)|^2`` from face differences of ``sqrt(max(psi, 0))``."""
    r = np.sqrt(np.maximum(psi, 0.0))
    gx, gy = grid.ops.grad(r)
    return 4.0 * grid.vol * ogrid.weight * float(np.sum(gx ** 2) + np.sum(gy ** 2))


def fisher_g(psi, grid, ogrid) -> float:
    """``4 int |grad_g sqrt(psi)|^2`` with spectral angular differences."""
    r = np.sqrt(np.maximum(psi, 0.0))
    d = r @ ogrid.diff_matrix.T
    return 4.0 * grid.vol * ogrid.weight * float(np.sum(d ** 2))


def chemical_potential(psi, P: PotentialField, ogrid: OrientationGrid):
    """``log psi + U`` where ``psi > 0``; other nodes are NaN and reported in the mask."""
    psi = np.asarray(psi, dtype=float)
    ok = psi > 0
    mu = np.full(psi.shape, np.nan)
    mu[ok] = np.log(psi[ok])
    mu = mu + P.values(ogrid)
    return mu, ~ok


def order_parameters(omega, S):
    """Scalar order ``s = 2 lambda_max(S / omega - I / 2)`` and director angle in ``[0, pi)``.

    Nodes with ``omega <= OMEGA_FLOOR`` are NaN in both outputs; the director
    is also NaN where ``s <= S_FLOOR``.
    """
    omega = np.asarray(omega, dtype=float)
    S = np.asarray(S, dtype=float)
    good = omega > OMEGA_FLOOR
    safe = np.where(good, omega, 1.0)
    Q = S / safe[..., None, None] - 0.5 * np.eye(2)
    a = 0.5 * (Q[..., 0, 0] - Q[..., 1, 1])
    b = 0.5 * (Q[..., 0, 1] + Q[..., 1, 0])
    # Q is trace-free, so lambda_max = sqrt(a^2 + b^2)
    s = 2.0 * np.hypot(a, b)
    director = np.mod(0.5 * np.arctan2(b, a), np.pi)
    s = np.where(good, s, np.nan)
    director = np.where(good & (s > S_FLOOR), director, np.nan)
    return s, director


def entropy_ledger_row(step, t, vel, psi, P: PotentialField, grid, ogrid, params, psi0_l1,
                       picard_iters=0, div_residual=0.0):
    """One ledger row; ``P`` must be the full potential ``U[psi]``."""
    g1 = 1.0 - params.gamma
    tau, De = params.tau, params.De
    kin = kinetic_energy(vel, grid, params)
    ent, _ = entropy_integral(psi, grid, ogrid)
    ent *= g1
    pot = 0.5 * g1 * potential_energy(psi, P, grid, ogrid)
    if step == 0:
        visc = poly = fx = fg = 0.0
    else:
        visc = tau * params.gamma * De * grid.ops.h1_seminorm2(vel)
        poly = tau * g1 * De / 2.0 * polymer_dissipation(vel, psi, grid, ogrid, params.L)
        fx = tau * g1 * params.eps ** 2 / De * fisher_x(psi, grid, ogrid)
        fg = tau * g1 / De * fisher_g(psi, grid, ogrid)
    return {
        "step": int(step),
        "t": float(t),
        "mass": total_mass(psi, grid, ogrid),
        "kinetic": kin,
        "entropy": ent,
        "potential": pot,
        "visc_inc": visc,
        "poly_inc": poly,
        "fisher_x_inc": fx,
        "fisher_g_inc": fg,
        "active_budget": params.alpha ** 2 * g1 * t / De * psi0_l1,
        "total_energy": kin + ent + pot,
        "picard_iters": int(picard_iters),
        "min_psi": float(np.min(psi)),
        "div_residual": float(div_residual),
    }


def dissipation(row) -> float:
    return row["visc_inc"] + row["poly_inc"] + row["fisher_x_inc"] + row["fisher_g_inc"]


def energy_increments(ledger):
    """``E(n) - E(n-1)`` per step."""
    e = np.array([row["total_energy"] for row in ledger])
    return np.diff(e)


def entropy_tol(defects) -> float:
    """Largest magnitude of the per-step energy-identity defect.

    Every other contribution to ``E(n) - E(n-1)`` is dissipative, so
    ``E(n) <= E(n-1) + entropy_tol`` whenever the source terms vanish.
    """
    return float(np.abs(np.asarray(defects, dtype=float)).max(initial=0.0))


def energy_budget_slack(ledger) -> float:
    """Largest excess of the energy inequality with the active budget on the right.

    The left side carries the dissipation with the coefficients of the
    continuous energy inequality: half of the solvent viscous term and a
    quarter of each Fisher term.
    """
    e0 = ledger[0]["total_energy"]
    acc = 0.0
    worst = 0.0
    for row in ledger[1:]:
        acc += 0.5 * row["visc_inc"] + 0.25 * (row["fisher_x_inc"] + row["fisher_g_inc"])
        worst = max(worst, row["total_energy"] + acc - e0 - row["active_budget"])
    return float(worst)


def entropy_balance_defect(vel_prev, psi_prev, vel, psi, P: PotentialField, grid, ogrid, params) -> float:
    """Defect of the discrete energy identity of one converged step.

    Tests the configuration equation with ``(1 - gamma)(log psi + P)`` and the
    flow equation with ``u``, where ``P`` is the half-sum potential of the step,
    and adds back every term that is dissipative by construction (implicit
    Euler increments, the convexity remainder of ``F`` and the discrete
    diffusive and drift products). What is left comes only from the terms
    whose cancellation is not exact on the grid: advection and rotation
    tested with ``log psi``. It vanishes as the spatial and angular
    resolution increase (and with the solver tolerances).
    """
    ops = grid.ops
    vw = grid.vol * ogrid.weight
    g1 = 1.0 - params.gamma
    tau, De, eps = params.tau, params.De, params.eps
    D = ogrid.diff_matrix
    pos = np.maximum(psi, 0.0)
    with np.errstate(divide="ignore"):
        logpsi = np.where(pos > 0, np.log(np.where(pos > 0, pos, 1.0)), 0.0)
    Pv = P.values(ogrid)
    mu = logpsi + Pv
    q0 = np.asarray(Q0L(psi, params.L))

    dkin = kinetic_energy(vel, grid, params) - kinetic_energy(vel_prev, grid, params)
    dent = g1 * (entropy_integral(psi, grid, ogrid)[0] - entropy_integral(psi_prev, grid, ogrid)[0])
    dpot = g1 * vw * float(np.sum((psi - psi_prev) * Pv))

    num_kin = 0.5 * params.Re * params.De * ops.l2_norm2(vel - vel_prev)
    prev_pos = np.maximum(psi_prev, 0.0)
    remainder = np.sum(np.asarray(entropy_F(prev_pos)) - np.asarray(entropy_F(pos)) - logpsi * (prev_pos - pos))
    num_ent = g1 * vw * float(remainder)

    visc = tau * params.gamma * De * ops.h1_seminorm2(vel)
    poly = tau * g1 * De / 2.0 * polymer_dissipation(vel, psi, grid, ogrid, params.L)

    mx, my = ops.grad(mu)
    px, py = ops.grad(psi)
    gx, gy = P.grad_x(grid, ogrid)
    qx, qy = ops.face_average(q0)
    space = np.sum((px + qx * gx) * mx) + np.sum((py + qy * gy) * my)
    gt = P.grad_g_tangential(ogrid)
    angle = np.sum((psi @ D.T + q0 * gt) * (mu @ D.T))
    diff = tau * g1 / De * vw * float(eps ** 2 * space + angle)

    G = ops.velocity_gradient(vel)
    _, SQ = moments(q0, ogrid)
    active = tau * params.alpha * g1 * grid.vol * float(np.sum(SQ * G))

    return dkin + dent + dpot + num_kin + num_ent + visc + poly + diff + active
