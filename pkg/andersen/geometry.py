"""Torus arithmetic: wrapping, translations and the minimal difference vector zeta

All functions are vectorized over numpy arrays and pure.
"""
import numpy as np

from .errors import InvalidStateError

# Relative tolerance for detecting z in ell/2 + ell*Z
BOUNDARY_TOL = 1e-12


def _require_finite(*arrays: np.ndarray) -> None:
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise InvalidStateError("non-finite component in torus coordinates")


def wrap_position(x, ell: float) -> np.ndarray:
    """Canonical projection of covering-space coordinates onto [0, ell)"""
    if ell <= 0:
        raise InvalidStateError(f"circumference must be positive, got {ell}")
    x = np.asarray(x, dtype=float)
    _require_finite(x)
    out = np.remainder(x, ell)
    # remainder can round tiny negatives up to exactly ell
    return np.where(out >= ell, 0.0, out)


def translate(x, z, ell: float) -> np.ndarray:
    """tau_z(x): move torus point x by tangent vector z"""
    return wrap_position(np.asarray(x, dtype=float) + np.asarray(z, dtype=float), ell)


def on_boundary(z, ell: float) -> np.ndarray:
    """Mask of entries of z lying in ell/2 + ell*Z (within BOUNDARY_TOL * ell)"""
    r = np.remainder(np.asarray(z, dtype=float) - 0.5 * ell, ell)
    return np.minimum(r, ell - r) <= BOUNDARY_TOL * ell


def minimal_difference(z, w, ell: float) -> np.ndarray:
    """zeta(z, w): representative of z mod ell in [-ell/2, ell/2]

    On the boundary z in ell/2 + ell*Z the sign follows the relative velocity
    w: +ell/2 when w < 0 and -ell/2 otherwise, which keeps t -> zeta(z_t, w)
    right-continuous along straight-line motion.
    """
    z = np.asarray(z, dtype=float)
    w = np.asarray(w, dtype=float)
    _require_finite(z, w)
    half = 0.5 * ell
    zeta = z - np.floor((z + half) / ell) * ell
    zeta = np.clip(zeta, -half, half)
    tie = np.where(w < 0, half, -half)
    return np.where(on_boundary(z, ell), tie, zeta)
