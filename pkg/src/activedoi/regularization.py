"""Entropy density and its cut-off regularisation.

All functions accept scalars or arrays and are vectorised.
"""

import numpy as np


def _check_level(L):
    if not L > 1:
        raise ValueError(f"cut-off level must satisfy L > 1, got {L}")


def _nonneg(s):
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("entropy is only defined for s >= 0")
    return s


def _ret(x):
    return x.item() if np.ndim(x) == 0 else x


def entropy_F(s):
    """``s (log s - 1) + 1`` with the continuous value 1 at ``s = 0``."""
    s = _nonneg(s)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(s > 0, s * (np.log(np.where(s > 0, s, 1.0)) - 1.0) + 1.0, 1.0)
    return _ret(out)


def entropy_F_d1(s):
    s = _nonneg(s)
    with np.errstate(divide="ignore"):
        return _ret(np.log(s))


def entropy_F_d2(s):
    s = _nonneg(s)
    with np.errstate(divide="ignore", over="ignore"):
        return _ret(1.0 / s)


def entropy_FL(s, L):
    """Entropy continued quadratically above ``L``."""
    _check_level(L)
    s = _nonneg(s)
    upper = (s * s - L * L) / (2.0 * L) + s * (np.log(L) - 1.0) + 1.0
    lower = np.asarray(entropy_F(np.minimum(s, L)))
    return _ret(np.where(s <= L, lower, upper))


def entropy_FL_d1(s, L):
    _check_level(L)
    s = _nonneg(s)
    with np.errstate(divide="ignore"):
        lower = np.log(np.minimum(s, L))
    return _ret(np.where(s <= L, lower, s / L + np.log(L) - 1.0))


def entropy_FL_d2(s, L):
    _check_level(L)
    s = _nonneg(s)
    with np.errstate(divide="ignore", over="ignore"):
        lower = 1.0 / np.minimum(s, L)
    return _ret(np.where(s <= L, lower, 1.0 / L))


def QL(s, L):
    """``min(s, L)``."""
    _check_level(L)
    return _ret(np.minimum(np.asarray(s, dtype=float), L))


def Q0L(s, L):
    """``clamp(s, 0, L)``."""
    _check_level(L)
    return _ret(np.clip(np.asarray(s, dtype=float), 0.0, L))
