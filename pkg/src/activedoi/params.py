"""Nondimensional model constants plus discretisation and solver settings."""

from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass, field, fields

from .errors import ConfigError
from .grids import BC_MODES, NO_SLIP


@dataclass(frozen=True)
class Params:
    # model
    Re: float = 1.0
    De: float = 1.0
    gamma: float = 0.5
    alpha: float = 0.0
    eps: float = 0.15
    U0: float = 0.0
    L: float = 10.0
    # time
    tau: float = 5e-3
    T: float = 5e-2
    # discretisation
    nx: int = 16
    ny: int = 16
    M: int = 16
    Lx: float = 1.0
    Ly: float = 1.0
    bc_mode: str = NO_SLIP
    # solver
    tol_fp: float = 1e-8
    tol_linear: float = 1e-10
    tol_div: float = 1e-10
    max_picard: int = 50
    damping: float = 1.0
    # initial data
    init_psi: str = "isotropic"
    init_axis: float = 0.0
    init_sharpness: float = 2.0
    init_perturbation: float = 0.0
    init_velocity: str = "zero"
    init_velocity_amplitude: float = 0.0
    seed: int = 0
    # D_par = D_perp = 1 is fixed by the model and is not a parameter.
    _warnings: tuple = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        msgs = list(validate(self))
        object.__setattr__(self, "_warnings", tuple(msgs))
        for m in msgs:
            warnings.warn(m, stacklevel=3)

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.tau))

    def replace(self, **changes) -> "Params":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self) if not f.name.startswith("_")}


PARAM_NAMES = tuple(f.name for f in fields(Params) if not f.name.startswith("_"))
INIT_PSI_PRESETS = ("isotropic", "nematic", "perturbed")
INIT_VELOCITY_PRESETS = ("zero", "vortex", "random")


def validate(p: Params):
    """Raise ``ConfigError`` on hard violations; return soft-warning messages."""
    for name in ("Re", "De", "eps", "U0"):
        if not getattr(p, name) >= 0:
            raise ConfigError(f"{name} must be >= 0", key=name)
    if p.De <= 0:
        raise ConfigError("De must be > 0", key="De")
    if p.Re <= 0:
        raise ConfigError("Re must be > 0", key="Re")
    if not 0 < p.gamma < 1:
        raise ConfigError("0 < gamma < 1 required (solvent viscosity fraction)", key="gamma")
    if not p.L > 1:
        raise ConfigError("L > 1 required", key="L")
    if not p.tau > 0:
        raise ConfigError("tau > 0 required", key="tau")
    if not p.T >= 0:
        raise ConfigError("T >= 0 required", key="T")
    n = p.T / p.tau
    if not math.isclose(n, round(n), rel_tol=0, abs_tol=1e-9 * max(1.0, n)):
        raise ConfigError(f"T / tau = {n} must be an integer", key="T")
    if p.nx < 4 or p.ny < 4:
        raise ConfigError("nx, ny >= 4 required", key="nx")
    if p.M < 6 or p.M % 2:
        raise ConfigError("M must be even and >= 6", key="M")
    if p.Lx <= 0 or p.Ly <= 0:
        raise ConfigError("Lx, Ly > 0 required", key="Lx")
    if p.bc_mode not in BC_MODES:
        raise ConfigError(f"bc_mode must be one of {BC_MODES}", key="bc_mode")
    for name in ("tol_fp", "tol_linear", "tol_div"):
        if not getattr(p, name) > 0:
            raise ConfigError(f"{name} must be > 0", key=name)
    if p.max_picard < 1:
        raise ConfigError("max_picard >= 1 required", key="max_picard")
    if not 0 < p.damping <= 1:
        raise ConfigError("damping must lie in (0, 1]", key="damping")
    if p.init_psi not in INIT_PSI_PRESETS:
        raise ConfigError(f"init_psi must be one of {INIT_PSI_PRESETS}", key="init_psi")
    if p.init_velocity not in INIT_VELOCITY_PRESETS:
        raise ConfigError(f"init_velocity must be one of {INIT_VELOCITY_PRESETS}", key="init_velocity")
    if not 0 <= p.init_perturbation < 1:
        raise ConfigError("init_perturbation must lie in [0, 1)", key="init_perturbation")
    if p.init_sharpness < 0:
        raise ConfigError("init_sharpness must be >= 0", key="init_sharpness")
    h = max(p.Lx / p.nx, p.Ly / p.ny)
    if p.eps < h:
        raise ConfigError(f"eps={p.eps} is below one cell width {h}", key="eps")

    out = []
    if p.tau * p.L > 0.1:
        out.append(f"tau*L = {p.tau * p.L:g} > 0.1: time step is not small against 1/L")
    if p.eps < 2 * h:
        out.append(f"eps={p.eps} < 2h={2 * h}: mollifier is coarsely resolved")
    return out
