import pytest

from cqed_entanglement.hilbert import SystemParams


@pytest.fixture
def small_params():
    return SystemParams(omega_bar=1.0, gamma_a_bar=2.0, gamma_b_bar=0.5)


def pytest_terminal_summary(terminalreporter):
    # Acceptance lines are recorded while the tests run and echoed here so
    # they appear in the log even when output capture is on.
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in RESULTS:
        terminalreporter.write_line(line)
