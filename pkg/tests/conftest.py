import numpy as np
import pytest

from fracinv.dfn import Case1, FractureSample, build_realization
from fracinv.geometry import AxisBox

# Three-fracture synthetic network of the worked example.
TRUTH_NORMALS = [(-0.355, -0.646, 0.676), (-0.996, 0.077, -0.038), (0.316, 0.715, 0.623)]
TRUTH_CENTERS = [(-5.543, -19.861, 98.218), (0.577, 19.39, 91.1), (9.42, 39.088, 53.548)]
TRUTH_ASPECTS = [1.1, 1.2, 1.25]
TRUTH_MINOR = 250.0
DOMAIN = AxisBox((-100.0, -100.0, -100.0), (100.0, 100.0, 100.0))
PUBLISHED_OBS_MPA = (21.86, 19.08, 18.33)


def unit_normals():
    return [np.asarray(n, float) / np.linalg.norm(n) for n in TRUTH_NORMALS]


def truth_samples():
    return [FractureSample.from_normal(n, TRUTH_MINOR, a, c)
            for n, a, c in zip(unit_normals(), TRUTH_ASPECTS, TRUTH_CENTERS)]


@pytest.fixture(scope="session")
def truth_realization():
    return build_realization(truth_samples(), Case1(1e-5, 1e-12), DOMAIN, normals=unit_normals())


# criterion number -> "PASS ..." / "FAIL ..." line, filled by test_acceptance
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
