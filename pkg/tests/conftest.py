import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("mstld", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("mstld")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def ramp(h, w):
    return np.add.outer(np.arange(h, dtype=float), np.arange(w, dtype=float)) * (255.0 / (h + w))


ACCEPTANCE: dict[int, str] = {}


def record(number: int, title: str, ok: bool, detail: str = "") -> bool:
    """Store the one-line verdict printed at the end of the run."""
    ACCEPTANCE[number] = f"{'PASS' if ok else 'FAIL'} criterion {number:2d} {title}" + (f": {detail}" if detail else "")
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
