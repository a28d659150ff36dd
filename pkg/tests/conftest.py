import warnings

import numpy as np
import pytest

from stackfeat_rl.core import ExpressionDataset
from stackfeat_rl.synth import SynthSpec, gen_linear


def make_dataset(X, y, prefix="g"):
    X = np.asarray(X, dtype=float)
    return ExpressionDataset(X, np.asarray(y), [f"{prefix}{j}" for j in range(X.shape[1])],
                             [f"s{i}" for i in range(X.shape[0])])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def planted_small():
    """3 strong signals, 60 x 20."""
    return gen_linear(SynthSpec.planted(60, 20, 3, 1.5, 0.5, seed=7))


@pytest.fixture(scope="session")
def planted_medium():
    return gen_linear(SynthSpec.planted(200, 50, 3, 1.0, 0.5, seed=3))


@pytest.fixture(autouse=True)
def _quiet_convergence():
    with warnings.catch_warnings():
        warnings.simplefilter("error", RuntimeWarning)
        yield


# acceptance verdicts, printed once at the end of the run
ACCEPTANCE: dict[int, str] = {}


def record_criterion(number: int, passed: bool, detail: str):
    ACCEPTANCE[number] = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
