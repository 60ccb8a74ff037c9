import numpy as np
import pytest

from mqkrylov import assembly, evaluate, kernel, points


def cube_system(eps, n=359, dist=None, case=evaluate.CUBE):
    pts = points.generate_cube(n, dist or points.Distribution.random(0))
    spec = assembly.ProblemSpec(case.wavenumber, kernel.KernelParams(eps),
                                assembly.BoundarySpec.dirichlet(),
                                lambda X: evaluate.manufactured_source(case, X),
                                lambda X: evaluate.exact_u(case, X))
    return pts, assembly.assemble(pts, spec)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.VERDICTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(test_acceptance.VERDICTS):
            terminalreporter.write_line(test_acceptance.VERDICTS[number])
