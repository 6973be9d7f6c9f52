import pytest


def pytest_configure(config):
    config.acceptance_lines = []


def pytest_terminal_summary(terminalreporter, config):
    if config.acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(config.acceptance_lines):
            terminalreporter.write_line(line)


@pytest.fixture
def record(request):
    """Report one acceptance line: printed now and repeated in the terminal summary."""
    def _record(label, passed, detail, elapsed):
        line = f"{label:<4} {'PASS' if passed else 'FAIL'}  {detail}  [{elapsed:.1f} s]"
        print(line)
        request.config.acceptance_lines.append(line)
    return _record
