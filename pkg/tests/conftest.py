import pytest

ACCEPTANCE_KEY = pytest.StashKey[list]()
CRITERIA = range(1, 12)


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = []


@pytest.fixture
def acceptance(request):
    """Record (criterion, label, status, detail) tuples for the end-of-run summary."""
    return request.config.stash[ACCEPTANCE_KEY]


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(ACCEPTANCE_KEY, [])
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for c in CRITERIA:
        mine = [r for r in results if r[0] == c]
        if not mine:
            terminalreporter.write_line(f"FAIL criterion {c:2d}: not run")
            continue
        failed = [r for r in mine if r[2] in ("FAIL", "XPASS")]
        xfailed = [r for r in mine if r[2] == "XFAIL"]
        verdict = "FAIL" if failed else "PASS"
        parts = [f"{r[1]} {r[3]}" if r[2] == "PASS" else f"{r[1]} [{r[2]}] {r[3]}" for r in mine]
        note = f" ({len(xfailed)} expected failure{'s' * (len(xfailed) != 1)})" if xfailed else ""
        terminalreporter.write_line(f"{verdict} criterion {c:2d}{note}: " + "; ".join(parts))
