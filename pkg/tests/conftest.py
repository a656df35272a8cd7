import pytest

from two_step_agent.inference import McmcConfig

# short chains for unit tests; statistical tests pick their own sizes
FAST = McmcConfig(chains=2, warmup=150, draws=150)


@pytest.fixture
def fast_mcmc():
    return FAST


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
