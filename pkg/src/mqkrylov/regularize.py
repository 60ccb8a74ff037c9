"""Spectral-filter solvers and regularization-parameter rules.

Full-SVD methods (TSVD, Tikhonov with GCV or L-curve), their projected
counterparts built on Golub-Kahan bidiagonalization (inexpensive TSVD and
hybrid Krylov-Tikhonov), and an Arnoldi-Tikhonov GMRES baseline.
"""

import csv
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.sparse.linalg import aslinearoperator

from .bidiag import gkb

_EPS = np.finfo(float).eps

DEFAULT_GRID = (1e-14, 1.0, 60)


class DegenerateGCVError(ArithmeticError):
    """The GCV denominator vanished; the point carries no information."""


class LowConfidenceCornerWarning(UserWarning):
    """The L-curve has no pronounced corner."""


@dataclass(frozen=True)
class SvdFactors:
    """Retained singular triplets, ``A ~= U @ diag(sigma) @ V.T``.

    ``n_rows`` is the row count of the factored matrix; it enters the GCV
    denominator.
    """

    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray
    n_rows: int

    @property
    def rank(self):
        return self.sigma.size

    def project(self, f):
        """Return ``(U.T f, |f - U U.T f|^2)``."""
        f = np.asarray(f, dtype=float).ravel()
        fhat = self.U.T @ f
        perp = f - self.U @ fhat
        return fhat, float(perp @ perp)


@dataclass
class SolveReport:
    """Coefficients and diagnostics of one regularized solve."""

    alpha: np.ndarray
    method: str
    param: float
    rho: float
    eta: float
    gcv_trace: Optional[np.ndarray] = None
    lcurve_trace: Optional[np.ndarray] = None
    iterations: int = 0
    wall_time: float = 0.0
    info: dict = field(default_factory=dict)


def svd(A):
    """Economy SVD with singular values above ``sigma_1 * max(N, M) * eps`` kept."""
    A = np.asarray(A, dtype=float)
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    r = numerical_rank(s, max(A.shape))
    return SvdFactors(U[:, :r].copy(), s[:r].copy(), Vt[:r].T.copy(), A.shape[0])


def numerical_rank(sigma, n):
    if sigma.size == 0 or sigma[0] == 0.0:
        return 0
    return int(np.count_nonzero(sigma > sigma[0] * n * _EPS))


def default_grid(sigma1, spec=DEFAULT_GRID):
    lo, hi, count = spec
    return np.logspace(np.log10(lo * sigma1), np.log10(hi * sigma1), int(count))


def filter_factors(sigma, lam):
    """Tikhonov filter factors and their complements ``(phi, 1 - phi)``.

    The complement is formed as ``lam^2 / (sigma^2 + lam^2)`` so it keeps full
    relative accuracy when ``lam << sigma``.
    """
    s2 = sigma * sigma
    l2 = lam * lam
    denom = s2 + l2
    return s2 / denom, l2 / denom


def _spectral_norms(sigma, fhat, perp, lam):
    phi, comp = filter_factors(sigma, lam)
    rho2 = float(np.sum((comp * fhat) ** 2) + perp)
    eta2 = float(np.sum((phi * fhat / sigma) ** 2))
    return np.sqrt(rho2), np.sqrt(eta2)


def _gcv(sigma, fhat, perp, lam, m):
    """GCV for data of length ``m``; nan when the denominator degenerates."""
    phi, comp = filter_factors(sigma, lam)
    num = float(np.sum((comp * fhat) ** 2) + perp)
    # m - sum(phi) written as (m - r) + sum(1 - phi) for accuracy
    dof = (m - sigma.size) + float(np.sum(comp))
    if dof <= 0.0:
        return np.nan
    return num / dof ** 2


def _scan_gcv(sigma, fhat, perp, grid, m):
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("lambda grid is empty")
    if np.any(grid <= 0) or np.any(np.diff(grid) < 0):
        raise ValueError("lambda grid must be positive and ascending")
    values = np.array([_gcv(sigma, fhat, perp, lam, m) for lam in grid])
    ok = np.isfinite(values)
    if not ok.any():
        raise DegenerateGCVError("GCV is undefined at every grid point")
    best = int(np.flatnonzero(ok)[np.argmin(values[ok])])
    return float(grid[best]), np.column_stack([grid, values])


def _lcurve_samples(sigma, fhat, perp, grid):
    return np.array([(lam, *_spectral_norms(sigma, fhat, perp, lam)) for lam in grid])


def tsvd_solve(s, f, k):
    """Truncated SVD solution keeping the ``k`` largest triplets."""
    if not 1 <= k <= s.rank:
        raise ValueError(f"k must lie in [1, {s.rank}], got {k}")
    t0 = time.perf_counter()
    fhat, perp = s.project(f)
    coef = fhat[:k] / s.sigma[:k]
    alpha = s.V[:, :k] @ coef
    rho = np.sqrt(float(np.sum(fhat[k:] ** 2)) + perp)
    return SolveReport(alpha, "tsvd", k, rho, float(np.linalg.norm(coef)),
                       wall_time=time.perf_counter() - t0)


def tikhonov_filter_solve(s, f, lam):
    """Tikhonov solution ``sum_i phi_i (u_i.f / sigma_i) v_i``."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    t0 = time.perf_counter()
    fhat, perp = s.project(f)
    phi, _ = filter_factors(s.sigma, lam)
    alpha = s.V @ (phi * fhat / s.sigma)
    rho, eta = _spectral_norms(s.sigma, fhat, perp, lam)
    return SolveReport(alpha, "tikhonov", float(lam), rho, eta,
                       wall_time=time.perf_counter() - t0)


def gcv_value(s, f, lam, N=None):
    """GCV(lambda) from the singular values and the projected data alone."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    fhat, perp = s.project(f)
    value = _gcv(s.sigma, fhat, perp, lam, s.n_rows if N is None else N)
    if not np.isfinite(value):
        raise DegenerateGCVError(f"GCV denominator vanishes at lambda={lam:g}")
    return value


def select_lambda_gcv(s, f, grid):
    """Grid minimizer of GCV and the full ``(lambda, gcv)`` trace.

    Points where GCV is undefined appear as nan in the trace.
    """
    fhat, perp = s.project(f)
    return _scan_gcv(s.sigma, fhat, perp, grid, s.n_rows)


def lcurve_curvature(samples):
    """Signed curvature of ``(log rho, log eta)`` parametrized by ``log lambda``."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[0] < 5 or samples.shape[1] != 3:
        raise ValueError("L-curve needs at least 5 samples of (lambda, rho, eta)")
    lam, rho, eta = samples.T
    if np.any(lam <= 0) or np.any(np.diff(lam) <= 0):
        raise ValueError("lambda must be positive and ascending")
    with np.errstate(divide="ignore", invalid="ignore"):
        t, x, y = np.log(lam), np.log(rho), np.log(eta)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("rho and eta must be positive and finite")
    dx, dy = np.gradient(x, t), np.gradient(y, t)
    ddx, ddy = np.gradient(dx, t), np.gradient(dy, t)
    speed = (dx * dx + dy * dy) ** 1.5
    with np.errstate(divide="ignore", invalid="ignore"):
        kappa = np.where(speed > 0, (dx * ddy - ddx * dy) / speed, 0.0)
    return kappa


def lcurve_corner(samples):
    """Lambda at the point of maximal curvature of the L-curve.

    Only interior samples are candidates. Warns with
    :class:`LowConfidenceCornerWarning` when the peak curvature is not at least
    ten times the median curvature.
    """
    samples = np.asarray(samples, dtype=float)
    kappa = lcurve_curvature(samples)
    inner = kappa[1:-1]
    j = int(np.argmax(inner)) + 1
    if kappa[j] <= 10.0 * np.median(np.abs(inner)):
        warnings.warn("L-curve has no pronounced corner", LowConfidenceCornerWarning,
                      stacklevel=2)
    return float(samples[j, 0])


def _choose_lambda(sigma, fhat, perp, grid, m, rule):
    """Pick lambda on ``grid`` by GCV or L-curve; returns (lam, gcv_trace, lcurve_trace)."""
    lcurve = _lcurve_samples(sigma, fhat, perp, grid)
    if rule == "gcv":
        lam, trace = _scan_gcv(sigma, fhat, perp, grid, m)
        return lam, trace, lcurve
    if rule == "lcurve":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", LowConfidenceCornerWarning)
            lam = lcurve_corner(lcurve)
        return lam, None, lcurve
    raise ValueError(f"unknown parameter rule {rule!r}")


def tikhonov_solve(A, f, rule="gcv", grid=None, lam=None, factors=None):
    """Tikhonov with the parameter chosen on the full SVD (GCV or L-curve)."""
    t0 = time.perf_counter()
    s = svd(A) if factors is None else factors
    fhat, perp = s.project(f)
    gcv_trace = lcurve_trace = None
    if lam is None:
        if grid is None:
            grid = default_grid(s.sigma[0])
        lam, gcv_trace, lcurve_trace = _choose_lambda(
            s.sigma, fhat, perp, grid, s.n_rows, rule)
    report = tikhonov_filter_solve(s, f, lam)
    report.method = "tikh_rg"
    report.gcv_trace = gcv_trace
    report.lcurve_trace = lcurve_trace
    report.iterations = 0
    report.wall_time = time.perf_counter() - t0
    return report


def rank_rule_gcv(sigma_ritz, fhat, ell):
    """Truncation index minimizing ``sum_{i>k} fhat_i^2 / (ell + 1 - k)^2``.

    ``fhat`` may be longer than ``sigma_ritz`` (it includes the data component
    outside the range); candidates are ``k = 1 .. len(sigma_ritz)``.
    """
    fhat = np.asarray(fhat, dtype=float)
    kmax = len(sigma_ritz)
    if kmax < 1:
        raise ValueError("no singular values to truncate")
    tail = np.cumsum((fhat ** 2)[::-1])[::-1]  # tail[i] = sum_{j>=i} fhat_j^2
    best_k, best = 1, np.inf
    for k in range(1, kmax + 1):
        denom = ell + 1 - k
        if denom <= 0:
            break
        res = tail[k] if k < fhat.size else 0.0
        value = res / denom ** 2
        if value < best:
            best_k, best = k, value
    return best_k


def _projected_svd(C, beta1):
    """SVD of the bidiagonal surrogate and the rotated data ``U~.T (beta1 e1)``."""
    Ut, st, Vtt = np.linalg.svd(C, full_matrices=True)
    ftil = beta1 * Ut[0, :]
    return st, Vtt.T, ftil


def _check_breakdown(fact, k=None):
    if fact.steps_completed == 0:
        raise ArithmeticError("bidiagonalization broke down at the first step")
    if k is not None and fact.steps_completed < k:
        warnings.warn(
            f"bidiagonalization stopped after {fact.steps_completed} steps (< k={k})",
            RuntimeWarning, stacklevel=3)


def ine_tsvd(A, f, ell=None, k="auto", rank_rule="gcv", reorth="full"):
    """Truncated SVD on a short Golub-Kahan projection.

    ``ell`` defaults to ``3 k`` when ``k`` is given. With ``k="auto"`` the
    truncation index comes from ``rank_rule`` applied to the Ritz values.
    """
    t0 = time.perf_counter()
    f = np.asarray(f, dtype=float).ravel()
    auto = isinstance(k, str)
    if auto and k != "auto":
        raise ValueError("k must be an integer or 'auto'")
    if ell is None:
        if auto:
            raise ValueError("ell is required when k='auto'")
        ell = min(3 * k, f.size)
    if not auto and not 1 <= k <= ell:
        raise ValueError(f"k must lie in [1, ell={ell}], got {k}")
    fact = gkb(A, f, ell, reorth=reorth)
    _check_breakdown(fact, None if auto else k)
    st, Vt, ftil = _projected_svd(fact.C, fact.beta1)
    r = numerical_rank(st, fact.C.shape[0])
    if auto:
        if rank_rule != "gcv":
            raise ValueError(f"unknown rank rule {rank_rule!r}")
        k_used = rank_rule_gcv(st[:r], ftil, fact.steps_completed)
    else:
        k_used = min(k, r)
    coef = ftil[:k_used] / st[:k_used]
    y = Vt[:, :k_used] @ coef
    alpha = fact.Z @ y
    rho = float(np.sqrt(np.sum(ftil[k_used:] ** 2)))
    return SolveReport(alpha, "ine_tsvd", k_used, rho, float(np.linalg.norm(coef)),
                       iterations=fact.steps_completed,
                       wall_time=time.perf_counter() - t0,
                       info={"breakdown": fact.breakdown, "ritz_values": st})


def _surrogate_tikhonov(C, beta1, rule, grid, lam, grid_spec):
    """Tikhonov on ``min |C y - beta1 e1|^2 + lam^2 |y|^2`` via the SVD of C.

    Returns ``(y, lam, rho, eta, gcv_trace, lcurve_trace)``.
    """
    st, Vt, ftil = _projected_svd(C, beta1)
    n_cols = C.shape[1]
    r = numerical_rank(st, C.shape[0])
    sig, fr = st[:r], ftil[:r]
    perp = float(np.sum(ftil[r:] ** 2))
    gcv_trace = lcurve_trace = None
    if lam is None:
        if grid is None:
            grid = default_grid(st[0], grid_spec)
        lam, gcv_trace, lcurve_trace = _choose_lambda(sig, fr, perp, grid, n_cols + 1, rule)
    phi, _ = filter_factors(sig, lam)
    y = Vt[:, :r] @ (phi * fr / sig)
    rho, eta = _spectral_norms(sig, fr, perp, lam)
    return y, float(lam), rho, eta, gcv_trace, lcurve_trace


def hkt_solve(A, f, ell, rule="gcv", grid=None, lam=None, reorth="full",
              grid_spec=DEFAULT_GRID):
    """Hybrid Krylov-Tikhonov: project with ``ell`` GKB steps, regularize the
    small bidiagonal problem, lift back with ``Z``.

    ``lam`` fixes the parameter and skips the selection rule.
    """
    t0 = time.perf_counter()
    f = np.asarray(f, dtype=float).ravel()
    fact = gkb(A, f, ell, reorth=reorth)
    _check_breakdown(fact)
    y, lam, rho, eta, gcv_trace, lcurve_trace = _surrogate_tikhonov(
        fact.C, fact.beta1, rule, grid, lam, grid_spec)
    return SolveReport(fact.Z @ y, "hkt", lam, rho, eta, gcv_trace, lcurve_trace,
                       iterations=fact.steps_completed,
                       wall_time=time.perf_counter() - t0,
                       info={"breakdown": fact.breakdown})


def arnoldi(A, f, m, breakdown_tol=None):
    """Arnoldi process with reorthogonalized modified Gram-Schmidt.

    Returns ``(V, H, beta1)`` with ``V`` of shape ``(N, j + 1)`` and ``H`` of
    shape ``(j + 1, j)`` for the ``j <= m`` steps completed.
    """
    f = np.asarray(f, dtype=float).ravel()
    N = f.size
    if not 1 <= m <= N:
        raise ValueError(f"m must lie in [1, {N}], got {m}")
    beta1 = float(np.linalg.norm(f))
    if beta1 == 0.0:
        raise ValueError("right-hand side must be nonzero")
    if breakdown_tol is None:
        breakdown_tol = N * _EPS * np.linalg.norm(A) if isinstance(A, np.ndarray) else 0.0
    op = aslinearoperator(A)
    V = np.zeros((N, m + 1))
    H = np.zeros((m + 1, m))
    V[:, 0] = f / beta1
    steps = 0
    for j in range(m):
        w = op.matvec(V[:, j])
        for _ in range(2):
            for i in range(j + 1):
                h = V[:, i] @ w
                H[i, j] += h
                w = w - h * V[:, i]
        H[j + 1, j] = np.linalg.norm(w)
        steps = j + 1
        if H[j + 1, j] <= breakdown_tol or H[j + 1, j] == 0.0:
            H[j + 1, j] = 0.0
            break
        V[:, j + 1] = w / H[j + 1, j]
    return V[:, : steps + 1], H[: steps + 1, :steps], beta1


def reg_gmres(A, f, m, rule="gcv", grid=None, lam=None, error_fn: Optional[Callable] = None,
              grid_spec=DEFAULT_GRID):
    """Arnoldi-Tikhonov (regularized GMRES) on a Krylov space of dimension ``m``.

    ``info["residual_trace"]`` and, when ``error_fn`` is given,
    ``info["error_trace"]`` follow the plain GMRES iterates
    ``x_j = V_j argmin |H_j y - beta1 e1|`` for ``j = 1 .. m``; that sequence
    exhibits semi-convergence on noisy problems. The returned coefficients are
    the Tikhonov-regularized solution on the final space.
    """
    t0 = time.perf_counter()
    V, H, beta1 = arnoldi(A, f, m)
    steps = H.shape[1]
    if steps == 0:
        raise ArithmeticError("Arnoldi broke down at the first step")
    e1 = np.zeros(steps + 1)
    e1[0] = beta1
    residuals, errors = [], []
    for j in range(1, steps + 1):
        yj, *_ = np.linalg.lstsq(H[: j + 1, :j], e1[: j + 1], rcond=None)
        residuals.append(float(np.linalg.norm(H[: j + 1, :j] @ yj - e1[: j + 1])))
        if error_fn is not None:
            errors.append(float(error_fn(V[:, :j] @ yj)))
    y, lam, rho, eta, gcv_trace, lcurve_trace = _surrogate_tikhonov(
        H, beta1, rule, grid, lam, grid_spec)
    info = {"residual_trace": np.array(residuals)}
    if error_fn is not None:
        info["error_trace"] = np.array(errors)
    return SolveReport(V[:, :steps] @ y, "reg_gmres", lam, rho, eta, gcv_trace,
                       lcurve_trace, iterations=steps,
                       wall_time=time.perf_counter() - t0, info=info)


def write_gcv_csv(trace, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["lambda", "gcv"])
        for lam, g in trace:
            w.writerow([repr(float(lam)), repr(float(g))])


def write_lcurve_csv(trace, path):
    """``trace`` rows are ``(lambda, rho, eta)``; logs are written."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["lambda", "log_rho", "log_eta"])
        for lam, rho, eta in trace:
            w.writerow([repr(float(lam)), repr(float(np.log(rho))), repr(float(np.log(eta)))])
