"""scikit-learn style wrappers around the regularized solvers.

The linear solvers treat ``fit(A, f)`` as "find coefficients for the system
``A alpha = f``"; ``predict(A)`` returns ``A @ coef_``. :class:`KansaHelmholtz`
composes one of them with collocation assembly and reconstructs the solution
at arbitrary points.
"""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, clone
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import regularize
from .assembly import BoundarySpec, ProblemSpec, assemble
from .evaluate import exact_u, manufactured_source, reconstruct
from .kernel import KernelParams


class _RegularizedSolver(RegressorMixin, BaseEstimator):
    method = ""

    def _solve(self, A, f):
        raise NotImplementedError

    def fit(self, A, f):
        A, f = check_X_y(A, f, y_numeric=True)
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"{type(self).__name__} needs a square system, got {A.shape}")
        report = self._solve(A, f)
        self.coef_ = report.alpha
        self.param_ = report.param
        self.report_ = report
        self.n_features_in_ = A.shape[1]
        return self

    def predict(self, A):
        check_is_fitted(self, "coef_")
        A = check_array(A)
        return A @ self.coef_


class TikhonovRegularized(_RegularizedSolver):
    """Full-SVD Tikhonov; ``lam`` fixes the parameter, otherwise ``rule`` picks it.

    Parameters
    ----------
    rule : {"gcv", "lcurve"}
    lam : float, optional
    grid : tuple (min_factor, max_factor, count)
        Log grid relative to the largest singular value.
    """

    method = "tikh_rg"

    def __init__(self, rule="gcv", lam=None, grid=regularize.DEFAULT_GRID):
        self.rule = rule
        self.lam = lam
        self.grid = grid

    def _solve(self, A, f):
        s = regularize.svd(A)
        return regularize.tikhonov_solve(
            A, f, rule=self.rule, grid=regularize.default_grid(s.sigma[0], self.grid),
            lam=self.lam, factors=s)


class InexpensiveTSVD(_RegularizedSolver):
    """TSVD on an ``ell``-step Golub-Kahan projection.

    Without ``ell`` the projection has ``3 k`` steps for a fixed ``k`` and
    ``min(140, N)`` steps when ``k="auto"``.
    """

    method = "ine_tsvd"

    def __init__(self, ell=None, k="auto", rank_rule="gcv"):
        self.ell = ell
        self.k = k
        self.rank_rule = rank_rule

    def _solve(self, A, f):
        ell = self.ell
        if ell is None and self.k == "auto":
            ell = min(140, len(f))
        return regularize.ine_tsvd(A, f, ell=ell, k=self.k, rank_rule=self.rank_rule)


class HybridKrylovTikhonov(_RegularizedSolver):
    """Tikhonov on the ``ell``-step Golub-Kahan surrogate."""

    method = "hkt"

    def __init__(self, ell=140, rule="gcv", lam=None, grid=regularize.DEFAULT_GRID):
        self.ell = ell
        self.rule = rule
        self.lam = lam
        self.grid = grid

    def _solve(self, A, f):
        return regularize.hkt_solve(A, f, min(self.ell, len(f)), rule=self.rule,
                                    lam=self.lam, grid_spec=self.grid)


class RegularizedGMRES(_RegularizedSolver):
    """Arnoldi-Tikhonov on a Krylov space of dimension ``m``."""

    method = "reg_gmres"

    def __init__(self, m=140, rule="gcv", lam=None, grid=regularize.DEFAULT_GRID):
        self.m = m
        self.rule = rule
        self.lam = lam
        self.grid = grid

    def _solve(self, A, f):
        return regularize.reg_gmres(A, f, min(self.m, len(f)), rule=self.rule,
                                    lam=self.lam, grid_spec=self.grid)


SOLVERS = {
    "tikh_rg": TikhonovRegularized,
    "ine_tsvd": InexpensiveTSVD,
    "hkt": HybridKrylovTikhonov,
    "reg_gmres": RegularizedGMRES,
}


class KansaHelmholtz(BaseEstimator):
    """Multiquadric Kansa collocation for ``Lap u + k^2 u = f`` with Dirichlet data.

    ``fit`` takes a :class:`~mqkrylov.points.PointSet` and either a
    :class:`~mqkrylov.evaluate.ManufacturedCase` or explicit ``source`` and
    ``boundary_data`` callables. ``predict`` evaluates the RBF expansion.

    Parameters
    ----------
    epsilon : float
        Multiquadric shape parameter.
    wavenumber : float
    solver : estimator
        Any of the regularized solvers in this module; cloned before fitting.
    """

    def __init__(self, epsilon=1.0, wavenumber=3.0, solver=None):
        self.epsilon = epsilon
        self.wavenumber = wavenumber
        self.solver = solver

    def fit(self, points, case=None, source=None, boundary_data=None):
        if case is not None:
            case = case.with_wavenumber(self.wavenumber)
            source = lambda X: manufactured_source(case, X)  # noqa: E731
            boundary_data = lambda X: exact_u(case, X)  # noqa: E731
        if source is None or boundary_data is None:
            raise ValueError("fit needs a manufactured case or source and boundary data")
        self.kernel_ = KernelParams(self.epsilon)
        spec = ProblemSpec(self.wavenumber, self.kernel_, BoundarySpec.dirichlet(),
                           source, boundary_data)
        self.system_ = assemble(points, spec)
        solver = HybridKrylovTikhonov() if self.solver is None else self.solver
        self.solver_ = clone(solver).fit(np.array(self.system_.A), np.array(self.system_.f))
        self.coef_ = self.solver_.coef_
        self.centers_ = points.centers
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        if X.shape[1] != 3:
            raise ValueError("targets must be points in R^3")
        return reconstruct(self.coef_, self.centers_, self.kernel_, X)

    def residual(self):
        """Max-norm PDE residual ``|H alpha - f_I|`` at the interior nodes."""
        check_is_fitted(self, "coef_")
        s = self.system_
        return float(np.max(np.abs(s.H @ self.coef_ - s.f[: s.row_split])))
