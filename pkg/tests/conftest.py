from __future__ import annotations

import pytest

ACCEPTANCE_CRITERIA = 12

# criterion number -> list of (part, ok, detail); filled by the acceptance tests
_results: dict[int, list[tuple[str, bool, str]]] = {}


@pytest.fixture
def record():
    """record(criterion, part, ok, detail) stores one measured outcome for the summary."""

    def _record(criterion: int, part: str, ok: bool, detail: str) -> bool:
        _results.setdefault(criterion, []).append((part, bool(ok), detail))
        return bool(ok)

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in range(1, ACCEPTANCE_CRITERIA + 1):
        parts = _results.get(n)
        if not parts:
            tr.write_line(f"FAIL criterion {n:2d}: not measured (test errored or was deselected)")
            continue
        ok = all(p[1] for p in parts)
        detail = "; ".join(f"{name}{'' if good else ' [FAIL]'}: {d}" for name, good, d in parts)
        tr.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n:2d}: {detail}")
