import numpy as np
import pytest

from advopt import backend
from advopt.core import FeasibleBox, default_hyperparams
from advopt.optimizers import METHODS, make_method, run_attack, sign_as_matrix
from advopt.oracles import ConcaveQuadratic


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Trigger jit compilation of every kernel once, so tests that assert
    wall-clock budgets measure the checks rather than the compiler."""
    sign_as_matrix(np.array([1.0, -1.0, 0.0]), 0.0)
    oracle = ConcaveQuadratic([0.0, 0.0], [1.0, 1.0])
    box = FeasibleBox(np.array([0.5, 0.5]), 0.4)
    hyper = default_hyperparams(box.epsilon, steps=2)
    for name in METHODS:
        run_attack(make_method(name, hyper), oracle, box, 2, np.random.default_rng(0))
    yield


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def pytest_report_header(config):
    return f"advopt kernel backend: {backend.backend_name()}"
