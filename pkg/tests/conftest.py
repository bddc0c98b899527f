from __future__ import annotations

import pytest

ACCEPTANCE_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_LINES] = []


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line for an acceptance criterion and assert it."""
    lines = request.config.stash[ACCEPTANCE_LINES]

    def record(label: str, ok: bool, detail: str, elapsed: float | None = None, limit: float | None = None):
        if elapsed is not None and limit is not None:
            detail += f" [{elapsed:.2f} s, limit {limit:g} s]"
            ok = ok and elapsed < limit
        line = f"{'PASS' if ok else 'FAIL'}  criterion {label}: {detail}"
        lines.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(lines, key=_order):
        terminalreporter.write_line(line)


def _order(line: str):
    label = line.split("criterion ", 1)[1].split(":", 1)[0]
    num = "".join(ch for ch in label if ch.isdigit())
    return int(num), label
