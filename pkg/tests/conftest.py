import numpy as np
import pytest

from gevqmc.field import GevreyField
from gevqmc.weights import SpaceParams, build_pod_weights, kernel_constant_K, select_lambda


def study_space():
    return SpaceParams(tau=0.5, theta=1.001, r=0.70, delta=0.05, beta=0.5)


def study_weights(vartheta=1.75, s_max=64):
    sp = study_space()
    p = 1.0 / vartheta + 1e-3
    lam = select_lambda(p, 1.5, sp)
    seq = GevreyField(vartheta, s_max).sequences(s_max, p)
    return build_pod_weights(s_max, 1.5, lam, 1.0, seq.b, seq.alpha, sp, kernel_constant_K(sp))


@pytest.fixture(scope="session")
def pod_weights():
    return study_weights()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for num in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[num])
