"""Dense Kansa collocation systems for the Helmholtz equation."""

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.spatial.distance import cdist

from . import kernel
from .kernel import KernelParams
from .points import PointSet
from .regularize import numerical_rank

Field = Callable[[np.ndarray], np.ndarray]


def constant(c):
    """Scalar field equal to ``c`` everywhere (vectorized over rows of points)."""
    c = float(c)
    return lambda X: np.full(np.asarray(X).shape[0], c)


@dataclass(frozen=True)
class BoundarySpec:
    """Robin data ``a u + b du/dn = g``; Dirichlet mode requires ``b`` unset."""

    a: Field
    b: Optional[Field] = None
    mode: str = "dirichlet"

    def __post_init__(self):
        if self.mode not in ("dirichlet", "robin"):
            raise ValueError(f"unknown boundary mode {self.mode!r}")
        if self.mode == "dirichlet" and self.b is not None:
            raise ValueError("Dirichlet boundary conditions take no b coefficient")
        if self.mode == "robin" and self.b is None:
            raise ValueError("Robin boundary conditions need a b coefficient")

    @classmethod
    def dirichlet(cls):
        return cls(constant(1.0))


@dataclass(frozen=True)
class ProblemSpec:
    """Helmholtz problem ``Lap u + k^2 u = source`` with boundary data ``g``.

    Scalar fields map an ``(n, 3)`` array of points to ``n`` values.
    """

    wavenumber: float
    kernel: KernelParams
    bc: BoundarySpec
    source: Field
    boundary_data: Field

    def __post_init__(self):
        if self.wavenumber < 0:
            raise ValueError("wavenumber must be nonnegative")


@dataclass(frozen=True, eq=False)
class CollocationSystem:
    A: np.ndarray
    f: np.ndarray
    row_split: int
    centers: PointSet
    spec: ProblemSpec

    @property
    def H(self):
        """Interior (PDE) rows."""
        return self.A[: self.row_split]

    @property
    def R(self):
        """Boundary-operator rows."""
        return self.A[self.row_split:]


def _field(fn, X):
    v = np.asarray(fn(X), dtype=float).reshape(-1)
    if v.size != X.shape[0]:
        raise ValueError("scalar field returned the wrong number of values")
    return v


def assemble(points, spec):
    """Interior Helmholtz rows followed by boundary-operator rows."""
    C = points.centers
    Xi, Xb = points.interior, points.boundary
    p, k = spec.kernel, spec.wavenumber

    H = kernel.mq_helmholtz(cdist(Xi, C), p, k)

    a = _field(spec.bc.a, Xb)
    if spec.bc.mode == "dirichlet" and np.any(a == 0.0):
        raise ValueError("Dirichlet coefficient a vanishes at a boundary node")
    Rb = cdist(Xb, C)
    R = a[:, None] * kernel.mq_value(Rb, p)
    if spec.bc.b is not None:
        b = _field(spec.bc.b, Xb)
        # d/dn phi(|x - c|) = (phi'(r)/r) (x - c).n
        proj = np.einsum("bd,bd->b", Xb, points.normals)[:, None] - points.normals @ C.T
        R = R + b[:, None] * kernel.mq_gradient_factor(Rb, p) * proj

    A = np.vstack([H, R])
    f = np.concatenate([_field(spec.source, Xi), _field(spec.boundary_data, Xb)])
    A.setflags(write=False)
    f.setflags(write=False)
    return CollocationSystem(A, f, len(Xi), points, spec)


def interpolation_matrix(points, p):
    C = points.centers if isinstance(points, PointSet) else np.asarray(points, dtype=float)
    return kernel.mq_value(cdist(C, C), p)


def assemble_augmented_interpolation(points, p):
    """MQ interpolation matrix bordered by a row and column of ones."""
    B = interpolation_matrix(points, p)
    n = B.shape[0]
    M = np.zeros((n + 1, n + 1))
    M[:n, :n] = B
    M[:n, n] = 1.0
    M[n, :n] = 1.0
    return M


def condition_number(A):
    """sigma_1 / sigma_r with r the numerical rank at ``sigma_1 * N * eps``."""
    A = np.asarray(A, dtype=float)
    s = np.linalg.svd(A, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        raise ValueError("condition number of a zero matrix is undefined")
    r = numerical_rank(s, max(A.shape))
    return float(s[0] / s[r - 1])


def dump_matrix(A, path):
    """Write ``matrix v1: N M`` followed by one row per line."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(f"matrix v1: {A.shape[0]} {A.shape[1]}\n")
        for row in A:
            fh.write(" ".join(repr(float(x)) for x in row) + "\n")


def load_matrix(path):
    with Path(path).open(encoding="utf-8") as fh:
        header = fh.readline().split()
        if header[:2] != ["matrix", "v1:"] or len(header) != 4:
            raise ValueError(f"{path}: not a 'matrix v1' file")
        n, m = int(header[2]), int(header[3])
        data = np.array(fh.read().split(), dtype=float)
    if data.size != n * m:
        raise ValueError(f"{path}: expected {n * m} entries, found {data.size}")
    return data.reshape(n, m)
