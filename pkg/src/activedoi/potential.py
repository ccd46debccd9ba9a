"""Mollifier and the mollified Maier-Saupe interaction potential.

The potential is kept in moment form, ``U(x, m) = a(x) - B(x) : m (x) m``,
with ``a = U0 J[omega]`` and ``B = U0 J[S]``. It is quadratic in ``m``, so
the moment pair represents it exactly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .grids import DomainGrid, OrientationGrid, angular_derivative, moments


def bump(r):
    """Unnormalised bump ``exp(-1 / (1 - r^2))`` on ``r < 1``, zero outside."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = r < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))
    return out


def maier_saupe_kernel(m, mt):
    """``1 - (m . mt)^2``."""
    return 1.0 - np.dot(m, mt) ** 2


@dataclass(frozen=True)
class MollifierKernel:
    """Discrete samples of the scaled bump on a ``(2rx+1) x (2ry+1)`` patch."""

    eps: float
    hx: float
    hy: float
    stencil: np.ndarray
    c: float

    @classmethod
    def build(cls, grid: DomainGrid, eps: float, mass_scale: float = 1.0):
        """Sample and normalise so that ``sum(stencil) hx hy == 1``.

        ``mass_scale`` exists for fault-injection tests only.
        """
        h = max(grid.hx, grid.hy)
        if not eps >= h:
            raise ConfigError(
                f"mollifier radius eps={eps} is below one cell ({h}); kernel unresolvable",
                key="eps",
            )
        if eps < 2 * h:
            warnings.warn(f"eps={eps} < 2h={2 * h}: mollifier is coarsely resolved", stacklevel=2)
        rx = math.ceil(eps / grid.hx)
        ry = math.ceil(eps / grid.hy)
        ox = np.arange(-rx, rx + 1) * grid.hx
        oy = np.arange(-ry, ry + 1) * grid.hy
        X, Y = np.meshgrid(ox, oy, indexing="ij")
        raw = bump(np.hypot(X, Y) / eps)
        c = 1.0 / (raw.sum() * grid.vol)
        stencil = mass_scale * c * raw
        return cls(eps=eps, hx=grid.hx, hy=grid.hy, stencil=stencil, c=c)

    @property
    def radius(self):
        return (self.stencil.shape[0] - 1) // 2, (self.stencil.shape[1] - 1) // 2

    @property
    def mass(self) -> float:
        return float(self.stencil.sum() * self.hx * self.hy)

    @property
    def sup(self) -> float:
        return float(self.stencil.max())

    @property
    def lipschitz(self) -> float:
        """Largest neighbour difference quotient of the stencil (zero outside)."""
        s = np.pad(self.stencil, 1)
        dx = np.abs(np.diff(s, axis=0)).max() / self.hx
        dy = np.abs(np.diff(s, axis=1)).max() / self.hy
        return float(max(dx, dy))

    @property
    def w1inf_constant(self) -> float:
        """``C`` with ``max(|J f|, |grad_h J f|) <= C ||f||_1`` on the grid."""
        return max(self.sup, self.lipschitz)


def _shift(f, a, b, periodic):
    """``out[i, j] = f[i - a, j - b]``, zero outside the domain unless periodic."""
    if periodic:
        return np.roll(f, (a, b), axis=(0, 1))
    out = np.zeros_like(f)
    nx, ny = f.shape[:2]
    if abs(a) >= nx or abs(b) >= ny:
        return out
    src_x = slice(max(0, -a), nx - max(0, a))
    dst_x = slice(max(0, a), nx - max(0, -a))
    src_y = slice(max(0, -b), ny - max(0, b))
    dst_y = slice(max(0, b), ny - max(0, -b))
    out[dst_x, dst_y] = f[src_x, src_y]
    return out


def mollify(f, kernel: MollifierKernel, grid: DomainGrid):
    """Discrete convolution over the first two axes; extra axes are carried along.

    Walls truncate the sum to points inside the domain; periodic mode wraps.
    """
    f = np.asarray(f, dtype=float)
    out = np.zeros_like(f)
    rx, ry = kernel.radius
    vol = grid.vol
    for a in range(-rx, rx + 1):
        for b in range(-ry, ry + 1):
            wgt = kernel.stencil[a + rx, b + ry]
            if wgt == 0.0:
                continue
            out += (wgt * vol) * _shift(f, a, b, grid.periodic)
    return out


@dataclass
class PotentialField:
    """``U(x, m) = a(x) - B(x) : m (x) m`` on cell centres."""

    a: np.ndarray  # (nx, ny)
    B: np.ndarray  # (nx, ny, 2, 2)

    def scaled(self, c):
        return PotentialField(c * self.a, c * self.B)

    def __add__(self, other):
        return PotentialField(self.a + other.a, self.B + other.B)

    def values(self, ogrid: OrientationGrid):
        return self.a[..., None] - np.einsum("...ab,jab->...j", self.B, ogrid.mm)

    def grad_g(self, ogrid: OrientationGrid):
        """Surface gradient ``-2 (I - m m) B m``, shape ``(nx, ny, M, 2)``."""
        Bm = np.einsum("...ab,jb->...ja", self.B, ogrid.m)
        tBm = np.einsum("...ja,ja->...j", Bm, ogrid.t)
        return -2.0 * tBm[..., None] * ogrid.t

    def grad_g_tangential(self, ogrid: OrientationGrid):
        """Tangential component ``t . grad_g U``, shape ``(nx, ny, M)``."""
        Bm = np.einsum("...ab,jb->...ja", self.B, ogrid.m)
        return -2.0 * np.einsum("...ja,ja->...j", Bm, ogrid.t)

    def grad_x(self, grid: DomainGrid, ogrid: OrientationGrid):
        """Face-normal spatial gradients ``(gx, gy)``; shapes ``u_shape + (M,)`` and ``v_shape + (M,)``."""
        ops = grid.ops
        ax, ay = ops.grad(self.a)
        Bx, By = ops.grad(self.B)
        gx = ax[..., None] - np.einsum("...ab,jab->...j", Bx, ogrid.mm)
        gy = ay[..., None] - np.einsum("...ab,jab->...j", By, ogrid.mm)
        return gx, gy

    def grad_x_centered(self, grid: DomainGrid, ogrid: OrientationGrid):
        """Cell-centred gradient (average of adjacent face gradients), shape ``(nx, ny, M, 2)``."""
        gx, gy = self.grad_x(grid, ogrid)
        ops = grid.ops
        M = ogrid.M
        gxc = (ops.u_center @ gx.reshape(grid.nu, M)).reshape(grid.shape + (M,))
        gyc = (ops.v_center @ gy.reshape(grid.nv, M)).reshape(grid.shape + (M,))
        return np.stack([gxc, gyc], axis=-1)


def build_potential(psi, U0, kernel: MollifierKernel, grid: DomainGrid, ogrid: OrientationGrid):
    omega, S = moments(psi, ogrid)
    return PotentialField(U0 * mollify(omega, kernel, grid), U0 * mollify(S, kernel, grid))


def grad_g_spectral(P: PotentialField, ogrid: OrientationGrid):
    """Independent check: spectral derivative of the reconstructed potential."""
    return angular_derivative(P.values(ogrid), ogrid)
