import pytest

from antiplane.constitutive import BodyForce, ConstitutiveModel, ModelKind
from antiplane.discretization import build_grid


@pytest.fixture
def model_i():
    return ConstitutiveModel.from_expansion(-0.3, 0.2)


@pytest.fixture
def force_i():
    return BodyForce((-0.1,))


@pytest.fixture
def model_ii():
    return ConstitutiveModel.from_expansion(-0.5, model_kind=ModelKind.MODEL_II)


@pytest.fixture
def force_ii():
    return BodyForce((0.0,))


@pytest.fixture
def linear_model():
    return ConstitutiveModel((1.0,))


@pytest.fixture
def small_grid():
    return build_grid(12.0, 24, 16)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(mod, "REPORT", None)
    if lines:
        terminalreporter.section("acceptance")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
