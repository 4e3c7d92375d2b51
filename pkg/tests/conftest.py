from hypothesis import settings

from acceptance_log import RESULTS

# fixed example streams: finite differences across a ReLU kink fail in about 0.2% of
# random draws, so property runs are derandomized to keep the suite reproducible
settings.register_profile("deterministic", derandomize=True)
settings.load_profile("deterministic")


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[n])
