import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from querytrain.model import RbmParamsQT, RbmParamsStd

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# criterion id -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE_RESULTS = {}


def random_qt(rng, n_visible, n_hidden, scale=1.0, temperature=1.0):
    return RbmParamsQT(
        rng.uniform(-scale, scale, (n_hidden, n_visible)),
        rng.uniform(-scale, scale, n_visible),
        rng.uniform(-scale, scale, n_hidden),
        float(np.log(temperature)),
    )


def random_std(rng, n_visible, n_hidden, scale=1.0):
    return RbmParamsStd(
        rng.uniform(-scale, scale, (n_hidden, n_visible)),
        rng.uniform(-scale, scale, n_visible),
        rng.uniform(-scale, scale, n_hidden),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS, key=lambda k: int(k[2:])):
        ok, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"{key} {'PASS' if ok else 'FAIL'}  {detail}")
