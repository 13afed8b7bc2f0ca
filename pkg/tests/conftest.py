import pytest

from aperiodica import load_rule
from aperiodica.renorm import solve_correlations

ACCEPTANCE_LINES: list[str] = []

BUNDLED = ["fibonacci", "thue_morse", "rudin_shapiro", "silver_mean", "tsm", "tsm_variant_sigma_tilde"]


@pytest.fixture(scope="session")
def rules():
    return {name: load_rule(name) for name in BUNDLED}


@pytest.fixture(scope="session")
def fib(rules):
    return rules["fibonacci"]


@pytest.fixture(scope="session")
def fib_table(fib):
    return solve_correlations(fib)


@pytest.fixture(scope="session")
def tm_table(rules):
    return solve_correlations(rules["thue_morse"])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
