"""Manufactured Gaussian solutions, reconstruction from coefficients, and the
relative max-norm error."""

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .kernel import mq_value
from .points import PointSet


@dataclass(frozen=True)
class ManufacturedCase:
    """Exact solution ``exp(-|x - center|^2 / sigma)`` for wavenumber ``k``."""

    center: tuple
    sigma: float
    wavenumber: float = 3.0
    name: str = ""

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    def with_wavenumber(self, k):
        return ManufacturedCase(self.center, self.sigma, k, self.name)


CUBE = ManufacturedCase((0.0, 0.0, 0.0), 20.0, 3.0, "cube")
SPHERE = ManufacturedCase((0.25, 0.25, 0.0), 20.0, 3.0, "sphere")
PUMP = ManufacturedCase((0.0, 0.0, 0.0), 10.0, 3.0, "pump")

CASES = {c.name: c for c in (CUBE, SPHERE, PUMP)}


def _sq_dist(case, x):
    d = np.asarray(x, dtype=float) - np.asarray(case.center)
    return np.sum(d * d, axis=-1)


def exact_u(case, x):
    return np.exp(-_sq_dist(case, x) / case.sigma)


def manufactured_source(case, x):
    """``Lap u + k^2 u`` for the Gaussian, ``u (4 r^2/s^2 - 6/s + k^2)``."""
    r2 = _sq_dist(case, x)
    s = case.sigma
    return exact_u(case, x) * (4.0 * r2 / s ** 2 - 6.0 / s + case.wavenumber ** 2)


def reconstruct(alpha, centers, p, targets):
    """Evaluate ``sum_j alpha_j phi(|x - x_j|)`` at each target."""
    C = centers.centers if isinstance(centers, PointSet) else np.asarray(centers, float)
    alpha = np.asarray(alpha, dtype=float).ravel()
    if alpha.size != C.shape[0]:
        raise ValueError(f"{alpha.size} coefficients for {C.shape[0]} centers")
    T = np.atleast_2d(np.asarray(targets, dtype=float))
    return mq_value(cdist(T, C), p) @ alpha


def relative_error(u_exact, u_approx):
    """``max|u - u_a| / max|u|``."""
    u = np.asarray(u_exact, dtype=float).ravel()
    ua = np.asarray(u_approx, dtype=float).ravel()
    if u.shape != ua.shape:
        raise ValueError("sequences differ in length")
    scale = np.max(np.abs(u)) if u.size else 0.0
    if scale == 0.0:
        raise ValueError("exact field is identically zero")
    return float(np.max(np.abs(u - ua)) / scale)
