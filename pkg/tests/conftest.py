import numpy as np
import pytest

from adaptive_mpc.config import bundled_config_path, load_config
from adaptive_mpc.geometry import BoxSet, Polytope
from adaptive_mpc.synthesis import synthesize
from adaptive_mpc.system import ChanceConstraints, RobustConstraints, SystemConfig

A_EX = np.array([[1.2, 1.5], [0.0, 1.3]])
B_EX = np.array([[0.0], [1.0]])
X_START = np.array([-3.21, -0.25])


def example_system(mode="robust", w_bar=0.1, omega=0.5, rate=0.05, N=6, R_lqr=1.0, E=None):
    """The two-state example with its robust and chance constraints; knobs for variants."""
    I = np.eye(2)
    E = I if E is None else np.asarray(E, dtype=float)
    return SystemConfig(
        A=A_EX, B=B_EX, E=E,
        W=BoxSet.symmetric([w_bar, w_bar]),
        Omega=Polytope.from_box([-omega, -omega], [omega, omega]),
        P_rate=Polytope.from_box([-rate, -rate], [rate, rate]),
        P=I, R=[[10.0]], N=N, mode=mode,
        robust=RobustConstraints(np.vstack([I, -I, np.zeros((2, 2))]),
                                 [[0.0], [0.0], [0.0], [0.0], [1.0], [-1.0]],
                                 [5.0, 2.5, 5.0, 2.5, 4.0, 4.0]),
        chance=ChanceConstraints(np.vstack([I, -I]), [5.0, 2.5, 5.0, 2.5], 0.4, [0.2] * 4,
                                 [[1.0], [-1.0]], [4.0, 4.0]),
        Q_lqr=I, R_lqr=[[R_lqr]])


@pytest.fixture(scope="session")
def robust_cfg():
    return load_config(bundled_config_path("robust"))


@pytest.fixture(scope="session")
def stochastic_cfg():
    return load_config(bundled_config_path("stochastic"))


@pytest.fixture(scope="session")
def robust_terminal(robust_cfg):
    return synthesize(robust_cfg.system, robust_cfg.noise)


@pytest.fixture(scope="session")
def stochastic_terminal(stochastic_cfg):
    return synthesize(stochastic_cfg.system, stochastic_cfg.noise)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_RESULTS = []


def record_criterion(number, title, passed, detail):
    ACCEPTANCE_RESULTS.append((number, title, bool(passed), detail))
    print(f"criterion {number} [{'PASS' if passed else 'FAIL'}] {title}: {detail}")
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(ACCEPTANCE_RESULTS, key=lambda r: r[0]):
        terminalreporter.write_line(f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}: {detail}")
