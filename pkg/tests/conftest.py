import numpy as np
import pytest

from clothtrack.camera import CameraIntrinsics, CameraPose
from clothtrack.mesh import ClothParams
from clothtrack.synth import centered_mesh

# (criterion, passed, detail) rows filled in by test_acceptance.py
ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in sorted(ACCEPTANCE_RESULTS, key=lambda r: r[0]):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")


@pytest.fixture
def cam():
    return CameraIntrinsics(500.0)


@pytest.fixture
def pose():
    return CameraPose.overhead(1.0)


@pytest.fixture(scope="session")
def mesh10():
    return centered_mesh(10, 10, 0.04)


@pytest.fixture
def cloth():
    return ClothParams()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
