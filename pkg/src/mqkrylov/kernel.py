"""Multiquadric basis function and the derivatives needed for Kansa collocation.

All functions broadcast over numpy arrays of distances, so they serve both
scalar evaluation and whole-matrix assembly.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class KernelParams:
    """Shape parameter of the multiquadric ``sqrt(1 + (eps*r)**2)``."""

    epsilon: float

    def __post_init__(self):
        if not np.isfinite(self.epsilon) or self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon!r}")


def _eps(p):
    return p.epsilon if isinstance(p, KernelParams) else KernelParams(float(p)).epsilon


def mq_value(r, p):
    """phi(r) = sqrt(1 + eps^2 r^2)."""
    e = _eps(p)
    r = np.asarray(r, dtype=float)
    return np.sqrt(1.0 + (e * r) ** 2)


def mq_laplacian3d(r, p):
    """Three-dimensional Laplacian of the multiquadric as a function of r.

    Uses the closed form ``eps^2 (3 + 2 eps^2 r^2) / (1 + eps^2 r^2)^(3/2)``,
    which is regular at ``r = 0`` (value ``3 eps^2``).
    """
    e = _eps(p)
    s = (e * np.asarray(r, dtype=float)) ** 2
    return e * e * (3.0 + 2.0 * s) / (1.0 + s) ** 1.5


def mq_helmholtz(r, p, k):
    """Helmholtz operator applied to the multiquadric: Laplacian + k^2 phi."""
    if k < 0:
        raise ValueError("wavenumber must be nonnegative")
    return mq_laplacian3d(r, p) + k * k * mq_value(r, p)


def mq_gradient_factor(r, p):
    """phi'(r)/r = eps^2 / phi(r); finite at r = 0."""
    e = _eps(p)
    return e * e / mq_value(r, p)


def mq_normal_derivative(x, center, normal, p):
    """Directional derivative of ``phi(|x - center|)`` along ``normal``.

    ``x`` and ``center`` may be stacks of points with shape ``(..., 3)``;
    the gradient vanishes at ``x == center``.
    """
    x = np.asarray(x, dtype=float)
    center = np.asarray(center, dtype=float)
    normal = np.asarray(normal, dtype=float)
    if not np.allclose(np.linalg.norm(normal, axis=-1), 1.0, rtol=0, atol=1e-12):
        raise ValueError("normal must have unit length")
    d = x - center
    r = np.linalg.norm(d, axis=-1)
    return mq_gradient_factor(r, p) * np.sum(d * normal, axis=-1)
