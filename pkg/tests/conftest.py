import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from entecho import ModelSpec, QuenchProtocol

settings.register_profile(
    "default",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def two_region_profiles(L):
    """Two-region rings: pre (1.5 | 0.3), post (0.5 | 1.7)."""
    h = L // 2
    return [1.5] * h + [0.3] * (L - h), [0.5] * h + [1.7] * (L - h)


@pytest.fixture
def quench_1d():
    return QuenchProtocol(ModelSpec.chain(1.5, 40), ModelSpec.chain(0.3, 40), 0.0, (0, 12))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for cid in sorted(lines):
            terminalreporter.write_line(lines[cid])
