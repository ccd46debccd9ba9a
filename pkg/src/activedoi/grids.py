"""Grids and discrete calculus on the square domain and the orientation circle.

Layout conventions
------------------
* Cell-centred scalars have shape ``(nx, ny)``; index ``[i, j]`` sits at
  ``((i + 1/2) hx, (j + 1/2) hy)``.
* Configuration fields have shape ``(nx, ny, M)``.
* Velocities are flat vectors ``concat(u.ravel(), v.ravel())`` of the MAC
  unknowns. ``u`` lives on x-faces, ``v`` on y-faces. With walls, faces on the
  boundary are not unknowns (they are pinned to zero), so ``u`` has shape
  ``(nx - 1, ny)``; in periodic mode it has shape ``(nx, ny)`` and face ``0``
  doubles as face ``nx``.
* Tensors at cell centres have shape ``(nx, ny, 2, 2)`` with
  ``G[..., a, b] = d u_a / d x_b``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

NO_SLIP = "no_slip_noflux"
PERIODIC = "periodic"
BC_MODES = (NO_SLIP, PERIODIC)


# --------------------------------------------------------------------------
# orientation circle
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class OrientationGrid:
    """Equispaced nodes on the unit circle with rectangle-rule weights."""

    M: int

    def __post_init__(self):
        if self.M < 6 or self.M % 2:
            raise ValueError(f"M must be even and >= 6, got {self.M}")

    @cached_property
    def angles(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.M) / self.M

    @cached_property
    def m(self) -> np.ndarray:
        """Unit vectors, shape ``(M, 2)``."""
        return np.stack([np.cos(self.angles), np.sin(self.angles)], axis=-1)

    @cached_property
    def t(self) -> np.ndarray:
        """Unit tangents, shape ``(M, 2)``."""
        return np.stack([-np.sin(self.angles), np.cos(self.angles)], axis=-1)

    @property
    def weight(self) -> float:
        return 2.0 * np.pi / self.M

    @cached_property
    def mm(self) -> np.ndarray:
        """``m_j (x) m_j``, shape ``(M, 2, 2)``."""
        return np.einsum("ja,jb->jab", self.m, self.m)

    @cached_property
    def tm(self) -> np.ndarray:
        """``t_j (x) m_j``, shape ``(M, 2, 2)``."""
        return np.einsum("ja,jb->jab", self.t, self.m)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        k = np.fft.fftfreq(self.M, d=1.0 / self.M)
        k[self.M // 2] = 0.0  # Nyquist mode has no odd derivative
        return k

    @cached_property
    def diff_matrix(self) -> np.ndarray:
        """Dense spectral d/dphi; skew-symmetric, annihilates constants."""
        eye = np.eye(self.M)
        d = np.fft.ifft(1j * self.wavenumbers[:, None] * np.fft.fft(eye, axis=0), axis=0)
        d = d.real
        # exact skew-symmetry; rounding otherwise leaves ~1e-16 asymmetry
        return 0.5 * (d - d.T)


def sphere_integrate(f, ogrid: OrientationGrid):
    """Integrate samples over the circle (last axis)."""
    f = np.asarray(f)
    if f.shape[-1] != ogrid.M:
        raise ValueError(f"expected {ogrid.M} orientation samples, got {f.shape[-1]}")
    return ogrid.weight * f.sum(axis=-1)


def angular_derivative(f, ogrid: OrientationGrid):
    return np.asarray(f) @ ogrid.diff_matrix.T


def surface_gradient(f, ogrid: OrientationGrid):
    """Tangential gradient ``(df/dphi)_j t_j``; output has a trailing axis of 2."""
    return angular_derivative(f, ogrid)[..., None] * ogrid.t


def surface_divergence(v, ogrid: OrientationGrid, tol=1e-10):
    """Divergence of a tangential field on the circle, ``d(v . t)/dphi``."""
    v = np.asarray(v)
    normal = np.einsum("...ja,ja->...j", v, ogrid.m)
    scale = max(1.0, float(np.abs(v).max(initial=0.0)))
    if np.abs(normal).max(initial=0.0) > tol * scale:
        raise ValueError("surface_divergence: field has a normal component")
    return angular_derivative(np.einsum("...ja,ja->...j", v, ogrid.t), ogrid)


def laplace_beltrami(f, ogrid: OrientationGrid):
    d = ogrid.diff_matrix
    return np.asarray(f) @ (d @ d).T


def moments(psi, ogrid: OrientationGrid):
    """Number density and second moment of ``psi`` over the last axis.

    Returns ``(omega, S)`` with ``S[..., a, b] = w sum_j psi_j m_ja m_jb``.
    """
    psi = np.asarray(psi)
    omega = sphere_integrate(psi, ogrid)
    S = ogrid.weight * np.einsum("...j,jab->...ab", psi, ogrid.mm)
    return omega, S


# --------------------------------------------------------------------------
# physical domain
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DomainGrid:
    nx: int
    ny: int
    Lx: float = 1.0
    Ly: float = 1.0
    bc_mode: str = NO_SLIP

    def __post_init__(self):
        if self.nx < 4 or self.ny < 4:
            raise ValueError("nx, ny must be >= 4")
        if self.Lx <= 0 or self.Ly <= 0:
            raise ValueError("domain lengths must be positive")
        if self.bc_mode not in BC_MODES:
            raise ValueError(f"bc_mode must be one of {BC_MODES}, got {self.bc_mode!r}")

    @property
    def hx(self) -> float:
        return self.Lx / self.nx

    @property
    def hy(self) -> float:
        return self.Ly / self.ny

    @property
    def vol(self) -> float:
        return self.hx * self.hy

    @property
    def periodic(self) -> bool:
        return self.bc_mode == PERIODIC

    @property
    def shape(self):
        return (self.nx, self.ny)

    @property
    def ncells(self) -> int:
        return self.nx * self.ny

    @property
    def u_shape(self):
        return (self.nx if self.periodic else self.nx - 1, self.ny)

    @property
    def v_shape(self):
        return (self.nx, self.ny if self.periodic else self.ny - 1)

    @property
    def nu(self) -> int:
        return self.u_shape[0] * self.u_shape[1]

    @property
    def nv(self) -> int:
        return self.v_shape[0] * self.v_shape[1]

    @property
    def nvel(self) -> int:
        return self.nu + self.nv

    def cell_centers(self):
        x = (np.arange(self.nx) + 0.5) * self.hx
        y = (np.arange(self.ny) + 0.5) * self.hy
        return np.meshgrid(x, y, indexing="ij")

    def u_faces(self):
        i0 = 0 if self.periodic else 1
        x = (np.arange(self.u_shape[0]) + i0) * self.hx
        y = (np.arange(self.ny) + 0.5) * self.hy
        return np.meshgrid(x, y, indexing="ij")

    def v_faces(self):
        j0 = 0 if self.periodic else 1
        x = (np.arange(self.nx) + 0.5) * self.hx
        y = (np.arange(self.v_shape[1]) + j0) * self.hy
        return np.meshgrid(x, y, indexing="ij")

    def split_velocity(self, vel):
        vel = np.asarray(vel)
        return vel[: self.nu].reshape(self.u_shape), vel[self.nu:].reshape(self.v_shape)

    def join_velocity(self, u, v):
        return np.concatenate([np.ravel(u), np.ravel(v)])

    def zero_velocity(self):
        return np.zeros(self.nvel)

    def velocity_from_streamfunction(self, stream):
        """Discretely divergence-free velocity from corner values of a stream function.

        ``stream(x, y)`` is evaluated at cell corners; ``u = d/dy``,
        ``v = -d/dx``. The result has ``div_h = 0`` to rounding. For walls the
        stream function must vanish on the boundary.
        """
        xc = np.arange(self.nx + 1) * self.hx
        yc = np.arange(self.ny + 1) * self.hy
        X, Y = np.meshgrid(xc, yc, indexing="ij")
        s = stream(X, Y)
        u_full = (s[:, 1:] - s[:, :-1]) / self.hy  # (nx+1, ny)
        v_full = -(s[1:, :] - s[:-1, :]) / self.hx  # (nx, ny+1)
        if self.periodic:
            return self.join_velocity(u_full[:-1], v_full[:, :-1])
        return self.join_velocity(u_full[1:-1], v_full[:, 1:-1])

    @cached_property
    def ops(self) -> "MacOperators":
        return MacOperators(self)


# --------------------------------------------------------------------------
# 1-D building blocks
# --------------------------------------------------------------------------


def _face_expand(n, periodic):
    """Map face unknowns to the full ``n + 1`` face array."""
    if periodic:
        rows = np.arange(n + 1)
        cols = np.r_[np.arange(n), 0]
        return sp.csr_matrix((np.ones(n + 1), (rows, cols)), shape=(n + 1, n))
    rows = np.arange(1, n)
    return sp.csr_matrix((np.ones(n - 1), (rows, rows - 1)), shape=(n + 1, n - 1))


def _face_to_cell_diff(n, h):
    return sp.diags([-np.ones(n), np.ones(n)], [0, 1], shape=(n, n + 1), format="csr") / h


def _face_to_cell_avg(n):
    return sp.diags([0.5 * np.ones(n), 0.5 * np.ones(n)], [0, 1], shape=(n, n + 1), format="csr")


def _cell_centered_diff(n, h, periodic):
    """Centred difference of a cell quantity; walls reflect with odd symmetry."""
    d = sp.lil_matrix((n, n))
    for i in range(n):
        for off, sgn in ((1, 1.0), (-1, -1.0)):
            k = i + off
            if 0 <= k < n:
                d[i, k] += sgn
            elif periodic:
                d[i, k % n] += sgn
            else:
                d[i, i] -= sgn  # ghost value is -c[i]
    return d.tocsr() / (2.0 * h)


def _face_centered_diff(n, h, periodic):
    """Centred difference along the normal direction on face unknowns."""
    nf = n if periodic else n - 1
    d = sp.lil_matrix((nf, nf))
    for i in range(nf):
        for off, sgn in ((1, 1.0), (-1, -1.0)):
            k = i + off
            if 0 <= k < nf:
                d[i, k] += sgn
            elif periodic:
                d[i, k % nf] += sgn
    return d.tocsr() / (2.0 * h)


def _edge_diff(n, h, periodic):
    """Tangential differences of a cell-located quantity with zero wall values.

    Returns the difference matrix and the length weight of each edge.
    """
    if periodic:
        d = sp.diags([np.ones(n), -np.ones(1), -np.ones(n - 1)], [0, n - 1, -1],
                     shape=(n, n), format="csr") / h
        return d, np.full(n, h)
    rows, cols, vals = [0], [0], [2.0 / h]
    for k in range(1, n):
        rows += [k, k]
        cols += [k, k - 1]
        vals += [1.0 / h, -1.0 / h]
    rows.append(n)
    cols.append(n - 1)
    vals.append(-2.0 / h)
    d = sp.csr_matrix((vals, (rows, cols)), shape=(n + 1, n))
    w = np.full(n + 1, h)
    w[0] = w[-1] = 0.5 * h
    return d, w


# --------------------------------------------------------------------------
# 2-D MAC operators
# --------------------------------------------------------------------------


class MacOperators:
    """Sparse matrices of the staggered-grid calculus for one ``DomainGrid``."""

    def __init__(self, grid: DomainGrid):
        self.grid = grid
        nx, ny, hx, hy = grid.nx, grid.ny, grid.hx, grid.hy
        per = grid.periodic
        Ix, Iy = sp.identity(nx, format="csr"), sp.identity(ny, format="csr")
        nfx, nfy = grid.u_shape[0], grid.v_shape[1]
        Ifx, Ify = sp.identity(nfx, format="csr"), sp.identity(nfy, format="csr")

        Ex, Ey = _face_expand(nx, per), _face_expand(ny, per)
        dfc_x = _face_to_cell_diff(nx, hx) @ Ex
        dfc_y = _face_to_cell_diff(ny, hy) @ Ey
        afc_x = _face_to_cell_avg(nx) @ Ex
        afc_y = _face_to_cell_avg(ny) @ Ey

        # scalars: cells -> flux faces (no-flux walls: interior faces only)
        self.sgrad_x = sp.kron(-dfc_x.T, Iy, format="csr")
        self.sgrad_y = sp.kron(Ix, -dfc_y.T, format="csr")
        self.savg_x = sp.kron(afc_x.T, Iy, format="csr")
        self.savg_y = sp.kron(Ix, afc_y.T, format="csr")

        # velocity unknowns -> cells
        self.dudx = sp.kron(dfc_x, Iy, format="csr")
        self.dvdy = sp.kron(Ix, dfc_y, format="csr")
        self.u_center = sp.kron(afc_x, Iy, format="csr")
        self.v_center = sp.kron(Ix, afc_y, format="csr")
        self.dudy = sp.kron(Ix, _cell_centered_diff(ny, hy, per)) @ self.u_center
        self.dvdx = sp.kron(_cell_centered_diff(nx, hx, per), Iy) @ self.v_center

        Zu = sp.csr_matrix((grid.ncells, grid.nu))
        Zv = sp.csr_matrix((grid.ncells, grid.nv))
        self.div = sp.hstack([self.dudx, self.dvdy], format="csr")
        # G[a, b] = d u_a / d x_b as four (ncells x nvel) blocks
        self.vgrad = (
            (sp.hstack([self.dudx, Zv], format="csr"), sp.hstack([self.dudy.tocsr(), Zv], format="csr")),
            (sp.hstack([Zu, self.dvdx.tocsr()], format="csr"), sp.hstack([Zu, self.dvdy], format="csr")),
        )

        # vector Dirichlet form <grad u, grad w>
        vol = grid.vol
        ey_d, ey_w = _edge_diff(ny, hy, per)
        ex_d, ex_w = _edge_diff(nx, hx, per)
        kxu = self.dudx
        kyu = sp.kron(Ifx, ey_d, format="csr")
        wyu = np.kron(np.full(nfx, hx), ey_w)
        kxv = sp.kron(ex_d, Ify, format="csr")
        wxv = np.kron(ex_w, np.full(nfy, hy))
        kyv = self.dvdy
        lap_u = vol * (kxu.T @ kxu) + kyu.T @ sp.diags(wyu) @ kyu
        lap_v = kxv.T @ sp.diags(wxv) @ kxv + vol * (kyv.T @ kyv)
        self.stiffness = sp.block_diag([lap_u, lap_v], format="csr")
        self.mass_vel = vol * sp.identity(grid.nvel, format="csr")

        # pieces for the convection operator
        self._cx_face = sp.kron(_face_centered_diff(nx, hx, per), Iy, format="csr")
        self._cy_cellu = sp.kron(Ifx, _cell_centered_diff(ny, hy, per), format="csr")
        self._cx_cellv = sp.kron(_cell_centered_diff(nx, hx, per), Ify, format="csr")
        self._cy_face = sp.kron(Ix, _face_centered_diff(ny, hy, per), format="csr")

    # -- scalar calculus ---------------------------------------------------

    def grad(self, p):
        """Face-normal gradient of a cell field; returns ``(gx, gy)`` face arrays."""
        g = self.grid
        p = np.asarray(p)
        extra = p.shape[2:]
        flat = p.reshape(g.ncells, -1)
        gx = (self.sgrad_x @ flat).reshape(g.u_shape + extra)
        gy = (self.sgrad_y @ flat).reshape(g.v_shape + extra)
        return gx, gy

    def grad_vector(self, p):
        """Pressure-style gradient packed as a velocity vector."""
        p = np.ravel(p)
        return np.concatenate([self.sgrad_x @ p, self.sgrad_y @ p])

    def face_average(self, c):
        g = self.grid
        c = np.asarray(c)
        extra = c.shape[2:]
        flat = c.reshape(g.ncells, -1)
        ax = (self.savg_x @ flat).reshape(g.u_shape + extra)
        ay = (self.savg_y @ flat).reshape(g.v_shape + extra)
        return ax, ay

    def divergence(self, vel):
        return (self.div @ vel).reshape(self.grid.shape)

    def laplacian(self, p):
        """5-point Laplacian, ``div(grad p)``; no-flux at walls."""
        return self.divergence(self.grad_vector(p))

    def velocity_gradient(self, vel):
        """Cell-centred velocity gradient, shape ``(nx, ny, 2, 2)``."""
        g = self.grid
        out = np.empty(g.shape + (2, 2))
        for a in range(2):
            for b in range(2):
                out[..., a, b] = (self.vgrad[a][b] @ vel).reshape(g.shape)
        return out

    def velocity_gradient_adjoint(self, T):
        """Velocity vector ``w`` such that ``w . x = sum_cells T : G(x)``."""
        T = np.asarray(T).reshape(self.grid.ncells, 2, 2)
        out = np.zeros(self.grid.nvel)
        for a in range(2):
            for b in range(2):
                out += self.vgrad[a][b].T @ T[:, a, b]
        return out

    def cell_velocity(self, vel):
        g = self.grid
        u, v = vel[: g.nu], vel[g.nu:]
        return (self.u_center @ u).reshape(g.shape), (self.v_center @ v).reshape(g.shape)

    # -- velocity inner products -------------------------------------------

    def l2_norm2(self, vel):
        return float(self.grid.vol * vel @ vel)

    def h1_seminorm2(self, vel):
        return float(vel @ (self.stiffness @ vel))

    def convection(self, b):
        """Matrix of ``w . ((b . grad) u)`` weighted by cell volume, skew part only."""
        g = self.grid
        bu, bv = b[: g.nu], b[g.nu:]
        bx_u = bu
        by_u = self.savg_x @ (self.v_center @ bv)
        bx_v = self.savg_y @ (self.u_center @ bu)
        by_v = bv
        nu_blk = sp.diags(bx_u) @ self._cx_face + sp.diags(by_u) @ self._cy_cellu
        nv_blk = sp.diags(bx_v) @ self._cx_cellv + sp.diags(by_v) @ self._cy_face
        n = sp.block_diag([nu_blk, nv_blk], format="csr")
        return (0.5 * g.vol) * (n - n.T).tocsr()

