"""Acceptance criteria, each at its stated tolerance.

Every test records a one-line verdict; the lines are printed in the pytest
terminal summary, or directly when this file is run as a script.
"""

import csv
import json
import time

import numpy as np
import pytest
from scipy.linalg import toeplitz

from conftest import cube_system
from mqkrylov import assembly, bidiag, cli, evaluate, kernel, points
from mqkrylov import regularize as R
from mqkrylov.checks import fd_laplacian, gcv_hat_matrix, random_with_condition

VERDICTS = {}
EPSILONS = (0.5, 1.0, 2.0, 4.0)


def record(number, title, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] {number:>2}. {title}: {detail}"
    VERDICTS[number] = line
    print(line)
    assert passed, line


def test_01_gkb_identities():
    rng = np.random.default_rng(0)
    t0 = time.perf_counter()
    az = atw = orth = 0.0
    for _ in range(20):
        A = rng.standard_normal((100, 100))
        f = rng.standard_normal(100)
        g = bidiag.gkb(A, f, 30, reorth="full")
        nA = np.linalg.norm(A)
        az = max(az, np.linalg.norm(A @ g.Z - g.W @ g.C) / nA)
        atw = max(atw, np.linalg.norm(A.T @ g.W - g.Z @ g.C.T) / nA)
        orth = max(orth, np.abs(g.W.T @ g.W - np.eye(31)).max(),
                   np.abs(g.Z.T @ g.Z - np.eye(30)).max())
    dt = time.perf_counter() - t0
    ok = az <= 1e-10 and atw <= 1e-10 and orth <= 1e-10 and dt < 5
    record(1, "GKB identities", ok,
           f"|AZ-WC|/|A|={az:.1e}, |A'W-ZC'|/|A|={atw:.1e}, orth={orth:.1e}, {dt:.2f}s "
           "(tol 1e-10, <5s)")


def test_02_ine_tsvd_equals_tsvd():
    rng = np.random.default_rng(0)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(10):
        A = rng.standard_normal((40, 40))
        f = rng.standard_normal(40)
        s = R.svd(A)
        for k in (1, 5, 10, 20):
            a = R.ine_tsvd(A, f, ell=40, k=k).alpha
            b = R.tsvd_solve(s, f, k).alpha
            worst = max(worst, np.linalg.norm(a - b) / np.linalg.norm(b))
    dt = time.perf_counter() - t0
    record(2, "Ine-TSVD vs TSVD", worst <= 1e-8 and dt < 5,
           f"max rel diff {worst:.1e}, {dt:.2f}s (tol 1e-8, <5s)")


def test_03_tikhonov_filter_equals_normal_equations():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(10):
        A = random_with_condition(rng, 30, 1e6)
        f = rng.standard_normal(30)
        s = R.svd(A)
        for factor in (1e-3, 1.0, 10.0):
            lam = factor * s.sigma[0]
            a = R.tikhonov_filter_solve(s, f, lam).alpha
            b = np.linalg.solve(A.T @ A + lam ** 2 * np.eye(30), A.T @ f)
            worst = max(worst, np.linalg.norm(a - b) / np.linalg.norm(b))
    record(3, "Tikhonov filter vs normal equations", worst <= 1e-8,
           f"max rel diff {worst:.1e} (tol 1e-8)")


def test_04_gcv_equals_hat_matrix():
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(10):
        A = rng.standard_normal((8, 8))
        f = rng.standard_normal(8)
        s = R.svd(A)
        for lam in np.logspace(-2, 1, 20) * s.sigma[0]:
            g = R.gcv_value(s, f, lam)
            worst = max(worst, abs(g - gcv_hat_matrix(A, f, lam)) / g)
    record(4, "GCV vs hat matrix", worst <= 1e-10, f"max rel diff {worst:.1e} (tol 1e-10)")


def _picard(seed, n=100):
    rng = np.random.default_rng(seed)
    U, _ = np.linalg.qr(rng.standard_normal((n, n)))
    V, _ = np.linalg.qr(rng.standard_normal((n, n)))
    s = np.maximum(0.5 ** np.arange(n), 1e-16)
    A = U @ np.diag(s) @ V.T
    x = V @ (np.sqrt(s) * rng.choice([-1.0, 1.0], n))
    b = A @ x
    e = rng.standard_normal(n)
    return A, b + 1e-6 * np.linalg.norm(b) * e / np.linalg.norm(e), x


def test_05_hkt_full_projection_and_short_projection():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((40, 40))
    f = rng.standard_normal(40)
    s = R.svd(A)
    full_diff = 0.0
    for factor in (1e-3, 1e-1, 1.0):
        lam = factor * s.sigma[0]
        a = R.hkt_solve(A, f, 40, lam=lam).alpha
        b = R.tikhonov_filter_solve(s, f, lam).alpha
        full_diff = max(full_diff, np.linalg.norm(a - b) / np.linalg.norm(b))
    ratio = 0.0
    k = 10
    for seed in range(5):
        Ap, fp, x = _picard(seed)
        ref = R.tikhonov_solve(Ap, fp)
        hkt = R.hkt_solve(Ap, fp, 3 * k, lam=ref.param)
        err = lambda a: np.linalg.norm(a - x) / np.linalg.norm(x)  # noqa: E731
        ratio = max(ratio, err(hkt.alpha) / err(ref.alpha))
    ok = full_diff <= 1e-8 and ratio <= 1.10
    record(5, "HKT projection limits", ok,
           f"ell=N rel diff {full_diff:.1e} (tol 1e-8); ell=3k error ratio {ratio:.4f} "
           "(tol 1.10)")


def test_06_cpd1_as_stated():
    rng = np.random.default_rng(0)
    lowest = np.inf
    for _ in range(5):
        X = rng.uniform(0, 1, size=(50, 3))
        for eps in (0.5, 1.0, 2.0):
            B = assembly.interpolation_matrix(X, kernel.KernelParams(eps))
            c = rng.standard_normal((200, 50))
            c -= c.mean(axis=1, keepdims=True)
            q = np.einsum("ij,jk,ik->i", c, B, c)
            lowest = min(lowest, float(q.min()))
    record(6, "c'Bc > 0 on zero-sum c", lowest > 0, f"min c'Bc = {lowest:.3e} (need > 0)")


def _best_eps(build, solve, ue_nodes):
    best = (np.inf, None)
    for eps in EPSILONS:
        pts, system = build(eps)
        rep = solve(np.array(system.A), np.array(system.f))
        u = evaluate.reconstruct(rep.alpha, pts, kernel.KernelParams(eps), pts.centers)
        best = min(best, (evaluate.relative_error(ue_nodes, u), eps))
    return best


def test_07_cube_end_to_end():
    t0 = time.perf_counter()
    pts, _ = cube_system(1.0)
    ue = evaluate.exact_u(evaluate.CUBE, pts.centers)
    hkt, e_h = _best_eps(cube_system, lambda A, f: R.hkt_solve(A, f, 140), ue)
    gm, e_g = _best_eps(cube_system, lambda A, f: R.reg_gmres(A, f, 140), ue)
    dt = time.perf_counter() - t0
    ok = hkt <= 1e-3 and hkt <= gm and dt < 60
    record(7, "cube N=359 end-to-end", ok,
           f"HKT(140) {hkt:.2e} at eps={e_h}, Reg-GMRES(140) {gm:.2e} at eps={e_g}, "
           f"{dt:.1f}s (tol 1e-3, HKT <= Reg-GMRES, <60s)")


def _sphere_system(eps):
    pts = points.generate_sphere(359, points.Distribution.random(0))
    case = evaluate.SPHERE
    spec = assembly.ProblemSpec(3.0, kernel.KernelParams(eps),
                                assembly.BoundarySpec.dirichlet(),
                                lambda X: evaluate.manufactured_source(case, X),
                                lambda X: evaluate.exact_u(case, X))
    return pts, assembly.assemble(pts, spec)


def test_08_sphere_end_to_end():
    t0 = time.perf_counter()
    pts, _ = _sphere_system(1.0)
    ue = evaluate.exact_u(evaluate.SPHERE, pts.centers)
    hkt, eps = _best_eps(_sphere_system, lambda A, f: R.hkt_solve(A, f, 180), ue)
    dt = time.perf_counter() - t0
    record(8, "sphere N=359 end-to-end", hkt <= 1e-3 and dt < 60,
           f"HKT(180) {hkt:.2e} at eps={eps}, {dt:.1f}s (tol 1e-3, <60s)")


def test_09_gcv_trace_interior_minimum():
    details, ok = [], True
    for eps in EPSILONS:
        _, system = cube_system(eps)
        A, f = np.array(system.A), np.array(system.f)
        e = np.random.default_rng([0, 2]).standard_normal(f.size)
        f = f + 1e-8 * np.linalg.norm(f) * e / np.linalg.norm(e)
        s = R.svd(A)
        grid = R.default_grid(s.sigma[0])
        _, trace = R.select_lambda_gcv(s, f, grid)
        j = int(np.nanargmin(trace[:, 1]))
        ok &= 0 < j < len(grid) - 1
        details.append(f"eps={eps}: argmin {j}/{len(grid) - 1}")
    record(9, "GCV trace interior minimum", bool(ok), ", ".join(details))


def test_10_semi_convergence():
    n = 100
    t = np.arange(n) / n
    width = 0.03
    A = toeplitz(np.exp(-t ** 2 / (2 * width ** 2))) / (np.sqrt(2 * np.pi) * width * n)
    x = np.sin(np.pi * t) + 0.5 * np.sin(3 * np.pi * t)
    b = A @ x
    e = np.random.default_rng(0).standard_normal(n)
    f = b + 1e-3 * np.linalg.norm(b) * e / np.linalg.norm(e)
    rep = R.reg_gmres(A, f, 40, error_fn=lambda a: np.linalg.norm(a - x) / np.linalg.norm(x))
    errors = rep.info["error_trace"]
    ratio = errors[-1] / errors.min()
    record(10, "Reg-GMRES semi-convergence", ratio >= 2,
           f"min error {errors.min():.2e} at step {int(errors.argmin()) + 1}, final "
           f"{errors[-1]:.2e}, ratio {ratio:.1e} (need >= 2)")


def test_11_kernel_calculus():
    rng = np.random.default_rng(0)
    x = rng.uniform(-2, 2, size=(100, 3))
    lap = 0.0
    for eps in (0.5, 1.0, 2.0):
        p = kernel.KernelParams(eps)
        fd = fd_laplacian(lambda y: kernel.mq_value(np.linalg.norm(y, axis=-1), p), x)
        lap = max(lap, np.max(np.abs(fd - kernel.mq_laplacian3d(np.linalg.norm(x, axis=1), p))))
    src = 0.0
    for case in evaluate.CASES.values():
        y = np.asarray(case.center) + rng.uniform(-1, 1, size=(100, 3))
        fd = fd_laplacian(lambda z: evaluate.exact_u(case, z), y) \
            + case.wavenumber ** 2 * evaluate.exact_u(case, y)
        src = max(src, np.max(np.abs(fd - evaluate.manufactured_source(case, y))))
    record(11, "kernel calculus", lap <= 1e-5 and src <= 1e-5,
           f"Laplacian FD defect {lap:.1e}, source FD defect {src:.1e} (tol 1e-5)")


def test_12_reproducibility(tmp_path):
    config = {"geometry": "cube", "distribution": ["random", "halton"], "n_target": 125,
              "epsilon": [1.0, 2.0], "ell": 60, "seed": 3, "noise": 1e-8,
              "output_dir": str(tmp_path / "out")}
    (tmp_path / "c.json").write_text(json.dumps(config))
    runs = []
    for _ in range(2):
        assert cli.main(["run", str(tmp_path / "c.json")]) == 0
        with open(tmp_path / "out" / "results.csv", newline="") as fh:
            runs.append([row[:-1] for row in csv.reader(fh)])
    same = runs[0] == runs[1]
    record(12, "CSV reproducibility", same and len(runs[0]) == 17,
           f"{len(runs[0]) - 1} rows, identical apart from cpu_seconds: {same}")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
