import numpy as np
import pytest

from _gen import make_traj


@pytest.fixture
def five_frame():
    """Hand-traced fixture: x = (0, .05, .5, .52, .55), unit features."""
    xs = [0.0, 0.05, 0.5, 0.52, 0.55]
    feats = [[1, 0], [1, 0], [0, 1], [1, 0], [1, 0]]
    return make_traj(xs, feats)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE: list[tuple[str, str]] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if item.module.__name__.endswith("test_acceptance") and rep.when == "call":
        doc = (item.function.__doc__ or item.name).strip().splitlines()[0]
        _ACCEPTANCE.append((doc, "PASS" if rep.passed else "FAIL"))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for doc, status in _ACCEPTANCE:
        terminalreporter.write_line(f"[{status}] {doc}")
