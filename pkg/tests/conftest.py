import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from kvlab.discretization import FlowParameters, GridSpec  # noqa: E402
from kvlab.shapes import steady_forcing  # noqa: E402
from kvlab.spectral import compute_constants  # noqa: E402
from kvlab.steady import SteadyProblem, solve_steady  # noqa: E402

ACCEPTANCE_LINES = {}


@pytest.fixture(scope="session")
def small_flow():
    """16x16 vortex-forced steady state with its spectral constants (nu = 1)."""
    g = GridSpec(16)
    prob = SteadyProblem(FlowParameters(1.0, 0.0), steady_forcing("vortex", g, 5.0, 1.0))
    st = solve_steady(prob)
    sc = compute_constants(st.u_inf, 1.0, 0.0, n_samples=200)
    return prob, st, sc


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
