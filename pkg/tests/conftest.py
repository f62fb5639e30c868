import pytest


@pytest.fixture
def report(request, capsys):
    """Print one acceptance line per criterion and keep it for the summary."""
    lines = request.config.__dict__.setdefault("_acceptance_lines", [])

    def emit(number, title, ok, detail, elapsed, limit):
        status = "PASS" if ok and elapsed < limit else "FAIL"
        line = (f"criterion {number:2d} {status}  {title}: {detail} "
                f"[{elapsed:.1f} s, limit {limit:g} s]")
        lines.append(line)
        with capsys.disabled():
            print("\n" + line)
        return status == "PASS"

    return emit


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
