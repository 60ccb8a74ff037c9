"""Executable invariant checks behind ``mqkrylov validate``.

Each check returns ``(passed, detail)``; :func:`run_checks` collects them.
Module attributes are looked up at call time so that a patched kernel is
what gets checked.
"""

import time
from dataclasses import dataclass

import numpy as np

from . import assembly, bidiag, evaluate, kernel, points, regularize


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def fd_laplacian(fn, x, h=1e-4):
    """Seven-point central-difference Laplacian of ``fn`` at points ``x`` (n, 3)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    total = -6.0 * fn(x)
    for axis in range(3):
        e = np.zeros(3)
        e[axis] = h
        total = total + fn(x + e) + fn(x - e)
    return total / (h * h)


def check_kernel_laplacian(rng, n=100, tol=1e-5):
    x = rng.uniform(-2, 2, size=(n, 3))
    worst = 0.0
    for eps in (0.5, 1.0, 2.0):
        p = kernel.KernelParams(eps)
        fd = fd_laplacian(lambda y: kernel.mq_value(np.linalg.norm(y, axis=-1), p), x)
        exact = kernel.mq_laplacian3d(np.linalg.norm(x, axis=-1), p)
        worst = max(worst, float(np.max(np.abs(fd - exact))))
    return worst <= tol, f"max |FD - closed form| = {worst:.2e} (tol {tol:g})"


def check_complete_monotonicity():
    s = np.linspace(0.1, 10.0, 100)
    h = 1e-3
    for eps in (0.25, 1.0, 4.0):
        psi = lambda t: np.sqrt(1.0 + eps * eps * t)  # noqa: E731
        d1 = (psi(s + h) - psi(s - h)) / (2 * h)
        d2 = (psi(s + h) - 2 * psi(s) + psi(s - h)) / h ** 2
        d3 = (psi(s + 2 * h) - 2 * psi(s + h) + 2 * psi(s - h) - psi(s - 2 * h)) / (2 * h ** 3)
        if not (np.all(d1 > 0) and np.all(d2 < 0) and np.all(d3 > 0)):
            return False, f"sign pattern broken at eps={eps}"
    return True, "psi', psi'', psi''' alternate (+, -, +)"


def check_manufactured_source(rng, n=50, tol=1e-5):
    worst = 0.0
    for case in evaluate.CASES.values():
        x = np.asarray(case.center) + rng.uniform(-1, 1, size=(n, 3))
        lap = fd_laplacian(lambda y: evaluate.exact_u(case, y), x)
        fd = lap + case.wavenumber ** 2 * evaluate.exact_u(case, x)
        worst = max(worst, float(np.max(np.abs(fd - evaluate.manufactured_source(case, x)))))
    return worst <= tol, f"max |FD - source| = {worst:.2e} (tol {tol:g})"


def check_cpd1(rng, n_sets=5, n_points=50, n_vectors=200):
    """MQ is conditionally negative definite of order 1: c'Bc < 0 for zero-sum c.

    Equivalently -phi is CPD(1); either way the ones-bordered system is
    nonsingular.
    """
    worst, min_sv = -np.inf, np.inf
    for _ in range(n_sets):
        X = rng.uniform(0, 1, size=(n_points, 3))
        for eps in (0.5, 1.0, 2.0):
            p = kernel.KernelParams(eps)
            B = assembly.interpolation_matrix(X, p)
            c = rng.standard_normal((n_vectors, n_points))
            c -= c.mean(axis=1, keepdims=True)
            q = np.einsum("ij,jk,ik->i", c, B, c) / np.sum(c * c, axis=1)
            worst = max(worst, float(q.max()))
            M = assembly.assemble_augmented_interpolation(X, p)
            min_sv = min(min_sv, float(np.linalg.svd(M, compute_uv=False)[-1]))
    ok = worst < 0 and min_sv > 0
    return ok, f"max c'Bc/|c|^2 = {worst:.3e}, min sv of bordered matrix = {min_sv:.2e}"


def check_point_sets():
    cube = points.generate_cube(359, points.Distribution.random(0))
    on_face = np.any((cube.boundary == 0) | (cube.boundary == 1), axis=1)
    inside = np.all((cube.interior > 0) & (cube.interior < 1), axis=1)
    ball = points.generate_sphere(359, points.Distribution.halton(1))
    ok = (
        on_face.all() and inside.all() and len(ball) == 359
        and np.all(np.abs(np.linalg.norm(ball.boundary, axis=1) - 1) < 1e-12)
        and np.all(np.linalg.norm(ball.interior, axis=1) < 1)
    )
    return bool(ok), f"cube N={len(cube)}, sphere N={len(ball)}"


def check_gkb(rng, n=100, ell=30, count=20, tau=1e-10):
    """A Z = W C and A' W_ell = Z B' (B the square part of C), orthonormal bases.

    The last column of A' W_{ell+1} carries the extra term alpha_{ell+1} z_{ell+1},
    so the transpose relation is checked on the first ell columns.
    """
    worst = 0.0
    for _ in range(count):
        A = rng.standard_normal((n, n))
        f = rng.standard_normal(n)
        g = bidiag.gkb(A, f, ell)
        nA = np.linalg.norm(A)
        worst = max(
            worst,
            np.linalg.norm(A @ g.Z - g.W @ g.C) / nA,
            np.linalg.norm(A.T @ g.W[:, :ell] - g.Z @ g.C[:ell].T) / nA,
            np.abs(g.W.T @ g.W - np.eye(ell + 1)).max(),
            np.abs(g.Z.T @ g.Z - np.eye(ell)).max(),
        )
    return worst <= tau, f"max relative defect {worst:.2e} (tol {tau:g})"


def check_ine_tsvd(rng, n=40, count=10, tol=1e-8):
    worst = 0.0
    for _ in range(count):
        A = rng.standard_normal((n, n))
        f = rng.standard_normal(n)
        s = regularize.svd(A)
        for k in (1, 5, 10, 20):
            a = regularize.ine_tsvd(A, f, ell=n, k=k).alpha
            b = regularize.tsvd_solve(s, f, k).alpha
            worst = max(worst, np.linalg.norm(a - b) / np.linalg.norm(b))
    return worst <= tol, f"max relative difference {worst:.2e} (tol {tol:g})"


def random_with_condition(rng, n, kappa):
    U, _ = np.linalg.qr(rng.standard_normal((n, n)))
    V, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return U @ np.diag(np.logspace(0, -np.log10(kappa), n)) @ V.T


def check_tikhonov_normal_equations(rng, n=30, count=10, tol=1e-8):
    worst = 0.0
    for _ in range(count):
        A = random_with_condition(rng, n, 1e6)
        f = rng.standard_normal(n)
        s = regularize.svd(A)
        for factor in (1e-3, 1.0, 10.0):
            lam = factor * s.sigma[0]
            a = regularize.tikhonov_filter_solve(s, f, lam).alpha
            b = np.linalg.solve(A.T @ A + lam ** 2 * np.eye(n), A.T @ f)
            worst = max(worst, np.linalg.norm(a - b) / np.linalg.norm(b))
    return worst <= tol, f"max relative difference {worst:.2e} (tol {tol:g})"


def gcv_hat_matrix(A, f, lam):
    """GCV from the explicit influence matrix ``A (A'A + lam^2 I)^-1 A'``."""
    n = A.shape[1]
    H = A @ np.linalg.solve(A.T @ A + lam ** 2 * np.eye(n), A.T)
    r = f - H @ f
    return float(r @ r) / (A.shape[0] - np.trace(H)) ** 2


def check_gcv_oracle(rng, n=8, count=5, tol=1e-10):
    worst = 0.0
    for _ in range(count):
        A = rng.standard_normal((n, n))
        f = rng.standard_normal(n)
        s = regularize.svd(A)
        for lam in np.logspace(-2, 1, 20) * s.sigma[0]:
            g = regularize.gcv_value(s, f, lam)
            worst = max(worst, abs(g - gcv_hat_matrix(A, f, lam)) / g)
    return worst <= tol, f"max relative difference {worst:.2e} (tol {tol:g})"


def check_hkt_full_projection(rng, n=40, tol=1e-8):
    A = rng.standard_normal((n, n))
    f = rng.standard_normal(n)
    s = regularize.svd(A)
    worst = 0.0
    for factor in (1e-3, 1e-1, 1.0):
        lam = factor * s.sigma[0]
        a = regularize.hkt_solve(A, f, n, lam=lam).alpha
        b = regularize.tikhonov_filter_solve(s, f, lam).alpha
        worst = max(worst, np.linalg.norm(a - b) / np.linalg.norm(b))
    return worst <= tol, f"max relative difference {worst:.2e} (tol {tol:g})"


def check_filter_monotonicity(rng, n=30):
    A = random_with_condition(rng, n, 1e8)
    f = rng.standard_normal(n)
    s = regularize.svd(A)
    grid = regularize.default_grid(s.sigma[0])
    reps = [regularize.tikhonov_filter_solve(s, f, lam) for lam in grid]
    rho = np.array([r.rho for r in reps])
    eta = np.array([r.eta for r in reps])
    phi = np.concatenate([regularize.filter_factors(s.sigma, lam)[0] for lam in grid])
    ok = (np.all(np.diff(rho) >= -1e-12 * rho[1:]) and np.all(np.diff(eta) <= 1e-12 * eta[:-1])
          and np.all((phi > 0) & (phi <= 1)))
    return bool(ok), "rho non-decreasing, eta non-increasing, 0 < phi <= 1"


def check_cube_end_to_end(seed=0, tol=1e-3):
    pts = points.generate_cube(359, points.Distribution.random(seed))
    case = evaluate.CUBE
    ue = evaluate.exact_u(case, pts.centers)
    best = np.inf
    for eps in (0.5, 1.0, 2.0, 4.0):
        p = kernel.KernelParams(eps)
        spec = assembly.ProblemSpec(3.0, p, assembly.BoundarySpec.dirichlet(),
                                    lambda X: evaluate.manufactured_source(case, X),
                                    lambda X: evaluate.exact_u(case, X))
        s = assembly.assemble(pts, spec)
        rep = regularize.hkt_solve(np.array(s.A), np.array(s.f), 140)
        best = min(best, evaluate.relative_error(
            ue, evaluate.reconstruct(rep.alpha, pts, p, pts.centers)))
    return best <= tol, f"best-eps HKT(140) Re = {best:.2e} (tol {tol:g})"


def run_checks(level="fast", seed=0):
    rng = np.random.default_rng(seed)
    fast = [
        ("kernel: Laplacian vs finite differences", lambda: check_kernel_laplacian(rng)),
        ("kernel: complete monotonicity", check_complete_monotonicity),
        ("evaluate: manufactured source vs finite differences",
         lambda: check_manufactured_source(rng)),
        ("points: partition and membership", check_point_sets),
        ("assembly: conditional definiteness of order 1", lambda: check_cpd1(rng)),
        ("bidiag: GKB identities", lambda: check_gkb(rng)),
        ("regularize: Ine-TSVD matches TSVD", lambda: check_ine_tsvd(rng)),
        ("regularize: Tikhonov filter matches normal equations",
         lambda: check_tikhonov_normal_equations(rng)),
        ("regularize: GCV matches hat-matrix oracle", lambda: check_gcv_oracle(rng)),
        ("regularize: HKT full-projection limit", lambda: check_hkt_full_projection(rng)),
        ("regularize: filter bounds and monotone norms",
         lambda: check_filter_monotonicity(rng)),
    ]
    checks = list(fast)
    if level == "full":
        checks.append(("end-to-end: cube N=359 HKT(140)", check_cube_end_to_end))
    elif level != "fast":
        raise ValueError("level must be 'fast' or 'full'")
    results = []
    for name, fn in checks:
        t0 = time.perf_counter()
        try:
            passed, detail = fn()
        except Exception as exc:  # a crashing check is a failed check
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(name, bool(passed), detail, time.perf_counter() - t0))
    return results
