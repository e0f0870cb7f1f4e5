import numpy as np
import pytest

from flexrs import reference_config

# verdict lines filled in by the acceptance tests, echoed after the run so
# they stay visible even when pytest captures per-test stdout
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def ref_cfg():
    return reference_config()


@pytest.fixture(scope="session")
def desk_cfg():
    # smaller array, same physics constants; keeps heavy loops quick
    return reference_config(n_antennas=33)


def tiny_config(**overrides):
    """Small-system config for exhaustive checks."""
    base = dict(n_antennas=17, n_users=3, n_devices=2, coverage_radius_m=60.0)
    base.update(overrides)
    return reference_config(**base)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
