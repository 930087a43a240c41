import numpy as np
import pytest

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    crit = getattr(report, "criterion", None)
    if crit is None:
        return
    n, title = crit
    prev = _ACCEPTANCE.get(n, (title, True))
    _ACCEPTANCE[n] = (title, prev[1] and report.outcome == "passed")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result().criterion = tuple(marker.args)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        title, ok = _ACCEPTANCE[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {n}: {title}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_physical_covariance(rng, modes):
    """``S S^T`` for a random symplectic ``S`` plus a PSD excess: always physical."""
    from scipy.linalg import expm

    from cvteleport.gaussian import symplectic_form

    J = symplectic_form(modes, "interleaved")
    H = rng.normal(size=(2 * modes, 2 * modes))
    H = 0.3 * (H + H.T)
    S = expm(J @ H)
    B = rng.normal(size=(2 * modes, 2 * modes))
    return S @ S.T + 0.1 * B @ B.T
