"""Initial data, the fixed-point iteration and the time loop."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import entropy_balance_defect, entropy_ledger_row, l1_norm, order_parameters
from .errors import ActiveDoiError, NonConvergence
from .flow import assemble_flow, solve_flow, solve_saddle
from .grids import DomainGrid, OrientationGrid, moments
from .params import Params
from .potential import MollifierKernel, build_potential
from .regularization import QL
from .smoluchowski import assemble_config, solve_config

log = logging.getLogger(__name__)


# --------------------------------------------------------------------------
# setup
# --------------------------------------------------------------------------


@dataclass
class Discretization:
    params: Params
    grid: DomainGrid
    ogrid: OrientationGrid
    kernel: MollifierKernel

    @classmethod
    def from_params(cls, params: Params):
        grid = DomainGrid(params.nx, params.ny, params.Lx, params.Ly, params.bc_mode)
        ogrid = OrientationGrid(params.M)
        with warnings.catch_warnings():
            # the coarse-kernel warning is already issued by Params
            warnings.simplefilter("ignore")
            kernel = MollifierKernel.build(grid, params.eps)
        return cls(params, grid, ogrid, kernel)

    def potential(self, psi):
        return build_potential(psi, self.params.U0, self.kernel, self.grid, self.ogrid)


def _smooth_random_field(grid: DomainGrid, rng, modes=2):
    """Sum of low Fourier modes with random coefficients, scaled to max |f| = 1."""
    X, Y = grid.cell_centers()
    f = np.zeros(grid.shape)
    for kx in range(modes + 1):
        for ky in range(modes + 1):
            if kx == 0 and ky == 0:
                continue
            c = rng.standard_normal(4)
            ax = 2 * np.pi * kx * X / grid.Lx
            ay = 2 * np.pi * ky * Y / grid.Ly
            f += (c[0] * np.cos(ax) * np.cos(ay) + c[1] * np.cos(ax) * np.sin(ay)
                  + c[2] * np.sin(ax) * np.cos(ay) + c[3] * np.sin(ax) * np.sin(ay))
    return f / np.abs(f).max()


def _von_mises(ogrid, axis, kappa):
    """Density ``exp(kappa cos 2(phi - axis))`` normalised to unit integral over the circle.

    ``axis`` may be an array of angles; the result then gets a trailing axis.
    """
    axis = np.asarray(axis, dtype=float)
    e = kappa * (np.cos(2.0 * (ogrid.angles - axis[..., None])) - 1.0)
    g = np.exp(e)
    return g / (ogrid.weight * g.sum(axis=-1, keepdims=True))


def initial_psi(params: Params, grid: DomainGrid, ogrid: OrientationGrid):
    """Preset initial configuration field with unit number density on average.

    * ``isotropic``: ``1 / (2 pi)`` everywhere.
    * ``nematic``: ``exp(kappa cos 2(phi - axis))`` normalised per cell, with
      ``kappa = init_sharpness`` and ``axis = init_axis``.
    * ``perturbed``: the nematic state with density ``1 + A f(x)`` and director
      ``axis + A pi / 4 g(x)``, where ``f, g`` are smooth random fields drawn from
      ``numpy.random.Generator(PCG64(seed))`` and ``A = init_perturbation``.
    """
    shape = grid.shape + (ogrid.M,)
    if params.init_psi == "isotropic":
        return np.full(shape, 1.0 / (2.0 * np.pi))
    if params.init_psi == "nematic":
        return np.broadcast_to(_von_mises(ogrid, params.init_axis, params.init_sharpness), shape).copy()
    rng = np.random.Generator(np.random.PCG64(params.seed))
    amp = params.init_perturbation
    dens = 1.0 + amp * _smooth_random_field(grid, rng)
    axis = params.init_axis + amp * (np.pi / 4) * _smooth_random_field(grid, rng)
    return dens[..., None] * _von_mises(ogrid, axis, params.init_sharpness)


def initial_velocity_raw(params: Params, grid: DomainGrid):
    """Preset (not yet regularised) initial velocity, discretely divergence-free.

    ``vortex`` is a single cell of circulation; ``random`` uses a random
    smooth stream function (seeded like :func:`initial_psi`, with an
    independent stream). Both vanish on walls.
    """
    amp = params.init_velocity_amplitude
    if params.init_velocity == "zero" or amp == 0.0:
        return grid.zero_velocity()
    Lx, Ly = grid.Lx, grid.Ly
    if params.init_velocity == "vortex":
        if grid.periodic:
            def stream(X, Y):
                return np.sin(2 * np.pi * X / Lx) * np.sin(2 * np.pi * Y / Ly) / (2 * np.pi)
        else:
            def stream(X, Y):
                return np.sin(np.pi * X / Lx) ** 2 * np.sin(np.pi * Y / Ly) ** 2 / np.pi
        return amp * grid.velocity_from_streamfunction(stream)
    rng = np.random.Generator(np.random.PCG64([params.seed, 1]))
    coef = rng.standard_normal((3, 3))

    def stream(X, Y):
        s = np.zeros_like(X)
        for i in range(3):
            for j in range(3):
                if grid.periodic:
                    s += coef[i, j] * np.sin(2 * np.pi * (i + 1) * X / Lx + j) * np.cos(2 * np.pi * (j + 1) * Y / Ly + i)
                else:
                    s += coef[i, j] * np.sin(np.pi * (i + 1) * X / Lx) * np.sin(np.pi * (j + 1) * Y / Ly)
        if not grid.periodic:
            s *= np.sin(np.pi * X / Lx) * np.sin(np.pi * Y / Ly)
        return s / (2 * np.pi)

    vel = grid.velocity_from_streamfunction(stream)
    return amp * vel / max(np.abs(vel).max(), 1e-300)


def initialize_velocity(u0, grid: DomainGrid, L, tol_div=1e-10, tol_linear=1e-10):
    """Screened projection: ``<u, w> + <grad u, grad w> / L = <u0, w>`` on divergence-free ``w``."""
    u0 = np.asarray(u0, dtype=float)
    if not np.any(u0):
        return grid.zero_velocity()
    ops = grid.ops
    A = (ops.mass_vel + ops.stiffness / L).tocsc()
    u, _, _, _ = solve_saddle(A, ops.mass_vel @ u0, grid, tol_div, tol_linear)
    return u


def initialize_config(psi0, L):
    """Clamp at the cut-off level."""
    psi0 = np.asarray(psi0, dtype=float)
    if np.any(psi0 < 0):
        raise ValueError("initial configuration field must be nonnegative")
    return np.asarray(QL(psi0, L))


# --------------------------------------------------------------------------
# state and fixed-point iteration
# --------------------------------------------------------------------------


@dataclass
class SimulationState:
    n: int
    t: float
    u: np.ndarray
    psi: np.ndarray
    p: np.ndarray | None = None
    omega: np.ndarray | None = None
    S: np.ndarray | None = None
    ledger_row: dict | None = None

    def refresh_moments(self, ogrid):
        self.omega, self.S = moments(self.psi, ogrid)


@dataclass
class PicardResult:
    u: np.ndarray
    p: np.ndarray
    psi: np.ndarray
    iterations: int
    history: list
    div_residual: float
    min_psi: float
    config_iterations: int = 0
    flow_iterations: int = 0


def _wnorm(x, vw):
    return float(np.sqrt(vw * np.sum(x * x)))


def picard_step(disc: Discretization, state: SimulationState, psi_bar0=None) -> PicardResult:
    """One time step solved by fixed-point iteration on the lagged density."""
    prm = disc.params
    grid, ogrid = disc.grid, disc.ogrid
    vw = grid.vol * ogrid.weight
    psi_prev = state.psi
    U_prev = disc.potential(psi_prev)
    psi_bar = psi_prev.copy() if psi_bar0 is None else np.array(psi_bar0, dtype=float)
    p_guess = state.p
    history = []
    flow_its = conf_its = 0
    for k in range(1, prm.max_picard + 1):
        P = (disc.potential(psi_bar) + U_prev).scaled(0.5)
        fsys = assemble_flow(grid, ogrid, prm, psi_bar, psi_prev, state.u, P)
        fs = solve_flow(fsys, prm.tol_div, prm.tol_linear, p0=p_guess)
        p_guess = fs.p
        csys = assemble_config(grid, ogrid, prm, fs.u, psi_bar, psi_prev, P)
        cs = solve_config(csys, prm.tol_linear, x0=psi_bar)
        flow_its += fs.iterations
        conf_its += cs.iterations
        new = cs.psi if prm.damping == 1.0 else (1.0 - prm.damping) * psi_bar + prm.damping * cs.psi
        res = _wnorm(new - psi_bar, vw) / max(_wnorm(psi_bar, vw), 1.0)
        history.append(res)
        psi_bar = new
        if res <= prm.tol_fp:
            return PicardResult(fs.u, fs.p, psi_bar, k, history, fs.div_residual, float(psi_bar.min()),
                                conf_its, flow_its)
    raise NonConvergence(
        f"fixed-point iteration did not reach tol_fp={prm.tol_fp:.1e} in {prm.max_picard} "
        f"iterations (last change {history[-1]:.3e})",
        history=history, step=state.n + 1,
    )


# --------------------------------------------------------------------------
# time loop
# --------------------------------------------------------------------------


@dataclass
class RunResult:
    state: SimulationState
    ledger: list
    snapshots: list = field(default_factory=list)
    defects: list = field(default_factory=list)
    params: Params | None = None
    disc: Discretization | None = None


def initial_state(disc: Discretization, psi0=None, u0=None) -> SimulationState:
    prm = disc.params
    grid, ogrid = disc.grid, disc.ogrid
    if psi0 is None:
        psi0 = initial_psi(prm, grid, ogrid)
    if u0 is None:
        u0 = initial_velocity_raw(prm, grid)
    psi = initialize_config(psi0, prm.L)
    u = initialize_velocity(u0, grid, prm.L, prm.tol_div, prm.tol_linear)
    st = SimulationState(0, 0.0, u, psi, p=None)
    st.refresh_moments(ogrid)
    return st


def snapshot(disc: Discretization, state: SimulationState, store_full_psi=False):
    grid = disc.grid
    s, director = order_parameters(state.omega, state.S)
    ux, uy = grid.ops.cell_velocity(state.u)
    snap = {
        "step": state.n,
        "t": state.t,
        "fields": {
            "omega": state.omega,
            "order": s,
            "director": director,
            "u": state.u[: grid.nu].reshape(grid.u_shape),
            "v": state.u[grid.nu:].reshape(grid.v_shape),
            "ux_center": ux,
            "uy_center": uy,
            "p": np.zeros(grid.shape) if state.p is None else state.p.reshape(grid.shape),
        },
    }
    if store_full_psi:
        snap["fields"]["psi"] = state.psi
    return snap


def run_simulation(params: Params, psi0=None, u0=None, steps=None, snapshot_every=0,
                   store_full_psi=False, callback=None) -> RunResult:
    """Advance ``steps`` (default ``T / tau``) time steps and collect the ledger."""
    disc = Discretization.from_params(params)
    grid, ogrid = disc.grid, disc.ogrid
    state = initial_state(disc, psi0, u0)
    psi0_l1 = l1_norm(state.psi, grid, ogrid)
    if params.tau * psi0_l1 ** 2 > 1.0:
        warnings.warn(
            f"tau * ||psi0||_1^2 = {params.tau * psi0_l1 ** 2:.3g} > 1: time step may be too large "
            "for the fixed-point iteration", stacklevel=2,
        )
    nsteps = params.n_steps if steps is None else int(steps)

    U_cur = disc.potential(state.psi)
    row = entropy_ledger_row(0, 0.0, state.u, state.psi, U_cur, grid, ogrid,
                             params, psi0_l1, 0, float(np.abs(grid.ops.div @ state.u).max(initial=0.0)))
    state.ledger_row = row
    ledger = [row]
    snaps = []
    defects = []
    if snapshot_every:
        snaps.append(snapshot(disc, state, store_full_psi))

    for n in range(1, nsteps + 1):
        try:
            res = picard_step(disc, state)
        except NonConvergence as exc:
            exc.step = n
            raise
        except ActiveDoiError as exc:
            exc.args = (f"step {n}: {exc.args[0] if exc.args else exc}",) + exc.args[1:]
            raise
        prev, U_prev = state, U_cur
        state = SimulationState(n, n * params.tau, res.u, res.psi, p=res.p)
        state.refresh_moments(ogrid)
        U_cur = disc.potential(state.psi)
        defects.append(entropy_balance_defect(prev.u, prev.psi, state.u, state.psi,
                                              (U_cur + U_prev).scaled(0.5), grid, ogrid, params))
        row = entropy_ledger_row(n, state.t, state.u, state.psi, U_cur, grid,
                                 ogrid, params, psi0_l1, res.iterations, res.div_residual)
        state.ledger_row = row
        ledger.append(row)
        log.info("step %d t=%.4g picard=%d E=%.10g", n, state.t, res.iterations, row["total_energy"])
        if snapshot_every and n % snapshot_every == 0:
            snaps.append(snapshot(disc, state, store_full_psi))
        if callback is not None:
            callback(state, res)
    return RunResult(state, ledger, snaps, defects, params, disc)
