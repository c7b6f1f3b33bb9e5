import numpy as np
import pytest

from cuspmle import ModelParams

# Shared reference configuration: unit signal and noise, quarter cusp,
# half-unit front, arrival at 2 inside (1, 3), horizon 5.
REF = dict(S=1.0, lambda0=1.0, kappa=0.25, delta=0.5, tau=5.0, theta0=2.0,
           theta0_window=(1.0, 3.0))


def reference_params(h: float) -> ModelParams:
    return ModelParams(h=h, **REF)


@pytest.fixture(scope="session")
def params_pos() -> ModelParams:
    return reference_params(0.5)


@pytest.fixture(scope="session")
def params_neg() -> ModelParams:
    return reference_params(-0.3)


@pytest.fixture(scope="session")
def params_zero() -> ModelParams:
    return reference_params(0.0)


def midpoint_integral(f, a: float, b: float, n: int = 1_000_000) -> float:
    """Brute-force midpoint rule; the independent quadrature oracle."""
    t = a + (np.arange(n) + 0.5) * (b - a) / n
    return float(np.sum(f(t)) * (b - a) / n)
