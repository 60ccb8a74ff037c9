import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from mqkrylov import regularize as R
from mqkrylov.estimators import (SOLVERS, HybridKrylovTikhonov, InexpensiveTSVD,
                                 KansaHelmholtz, RegularizedGMRES, TikhonovRegularized)
from mqkrylov.evaluate import CUBE, exact_u, relative_error
from mqkrylov.points import Distribution, generate_cube


@pytest.mark.parametrize("name", sorted(SOLVERS))
def test_solver_api(name, rng):
    A = rng.standard_normal((30, 30)) + 10 * np.eye(30)
    f = A @ rng.standard_normal(30)
    est = SOLVERS[name]()
    assert clone(est).get_params() == est.get_params()
    est.fit(A, f)
    assert est.coef_.shape == (30,) and est.n_features_in_ == 30
    assert est.report_.method == name
    assert np.linalg.norm(est.predict(A) - f) < 1e-2 * np.linalg.norm(f)


def test_solver_set_params_and_fixed_lambda(rng):
    A = rng.standard_normal((20, 20))
    f = rng.standard_normal(20)
    est = TikhonovRegularized().set_params(lam=0.5)
    est.fit(A, f)
    expected = R.tikhonov_filter_solve(R.svd(A), f, 0.5).alpha
    np.testing.assert_allclose(est.coef_, expected)
    assert est.param_ == 0.5


def test_non_square_rejected(rng):
    with pytest.raises(ValueError, match="square"):
        HybridKrylovTikhonov().fit(rng.standard_normal((5, 3)), np.ones(5))


def test_predict_before_fit():
    with pytest.raises(NotFittedError):
        RegularizedGMRES().predict(np.eye(3))


def test_ine_tsvd_estimator_fixed_k(rng):
    A = rng.standard_normal((40, 40))
    f = rng.standard_normal(40)
    est = InexpensiveTSVD(ell=40, k=5).fit(A, f)
    np.testing.assert_allclose(est.coef_, R.tsvd_solve(R.svd(A), f, 5).alpha, rtol=1e-8)


@pytest.mark.parametrize("name", sorted(SOLVERS))
def test_kansa_uniform_cube_best_epsilon(name):
    pts = generate_cube(125, Distribution.uniform())
    solver = SOLVERS[name]()
    if name == "ine_tsvd":
        solver.set_params(ell=100)
    else:
        solver.set_params(**({"m": 100} if name == "reg_gmres" else {}))
    best, residual = np.inf, None
    for eps in (1.0, 2.0, 4.0):
        model = KansaHelmholtz(epsilon=eps, solver=solver).fit(pts, CUBE)
        err = relative_error(exact_u(CUBE, pts.centers), model.predict(pts.centers))
        if err < best:
            best, residual = err, model.residual()
    assert best <= 1e-2
    assert np.isfinite(residual)


def test_kansa_requires_problem_data():
    pts = generate_cube(27, Distribution.uniform())
    with pytest.raises(ValueError):
        KansaHelmholtz().fit(pts)
