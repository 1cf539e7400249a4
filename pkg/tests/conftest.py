import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "fefflab", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("fefflab")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Collects one (criterion, passed, detail) line per acceptance criterion."""
    return request.config.stash.setdefault(ACCEPTANCE, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for num, title, passed, detail in sorted(lines):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {num:>2}. {title}: {detail}")
