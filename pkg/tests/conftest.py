import numpy as np
import pytest
from hypothesis import settings

from cznd.problem import TimeMatrix, TvsscmeProblem, example3

settings.register_profile("repro", derandomize=True)
settings.load_profile("repro")


@pytest.fixture(scope="session")
def ex3():
    return example3()


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def constant_problem(F, A, C, exact=None):
    F, A, C = (np.atleast_2d(np.asarray(z, dtype=complex)) for z in (F, A, C))
    return TvsscmeProblem(
        m=A.shape[0],
        n=F.shape[0],
        F=TimeMatrix.constant(F),
        A=TimeMatrix.constant(A),
        C=TimeMatrix.constant(C),
        exact=None if exact is None else TimeMatrix.constant(exact),
    )


ACCEPTANCE_LINES = []


def record_acceptance(label, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} {label}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def complex_step_derivative(e, t, h=1e-30):
    """Independent d/dt oracle: ``Im f(t + ih) / h``, free of cancellation error."""
    import cmath

    from cznd.texpr import Add, Const, Cos, Div, Mul, Neg, Pow, Sin, Sub, Time

    def ev(x):
        match x:
            case Const(v):
                return complex(v)
            case Time():
                return z
            case Neg(a):
                return -ev(a)
            case Add(a, b):
                return ev(a) + ev(b)
            case Sub(a, b):
                return ev(a) - ev(b)
            case Mul(a, b):
                return ev(a) * ev(b)
            case Div(a, b):
                return ev(a) / ev(b)
            case Pow(a, k):
                return ev(a) ** k
            case Sin(a):
                return cmath.sin(ev(a))
            case Cos(a):
                return cmath.cos(ev(a))

    z = complex(t, h)
    return ev(e).imag / h
