import numpy as np
import pytest

from stablespde.coefficients import (ConstantDiffusion, DiagonalSigmoidDiffusion, SigmoidDrift,
                                     ZeroDiffusion, ZeroDrift, decay_profile)
from stablespde.hilbert import GalerkinModel
from stablespde.spde_solver import InitialLaw, Scenario, Scheme


def make_scenario(dim=4, F="sigmoid", G="sigmoid", alpha=1.5, T=1.0, n_cells=32, x0=None,
                  **scheme):
    model = GalerkinModel.dirichlet_laplacian(dim)
    drift = {"zero": ZeroDrift(dim),
             "sigmoid": SigmoidDrift(decay_profile(dim, 1.0, 2.0))}[F] if isinstance(F, str) else F
    diff = {"zero": ZeroDiffusion(dim),
            "constant": ConstantDiffusion(decay_profile(dim, 0.5, 1.0)),
            "sigmoid": DiagonalSigmoidDiffusion(decay_profile(dim, 0.5, 1.0))}[G] \
        if isinstance(G, str) else G
    mean = np.zeros(dim) if x0 is None else np.asarray(x0, float)
    return Scenario(alpha, T, model, drift, diff, InitialLaw(mean),
                    Scheme(n_cells=n_cells, **scheme))


@pytest.fixture
def scenario_factory():
    return make_scenario


CRITERIA: dict = {}


@pytest.fixture(scope="session")
def criterion_log():
    """Sink for the one-line verdict of each acceptance criterion."""
    return CRITERIA


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(CRITERIA):
        terminalreporter.write_line(CRITERIA[k])
