import pytest

# (criterion, part) -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[tuple[int, str], tuple[bool, str]] = {}


@pytest.fixture
def verdict():
    def record(number: int, passed: bool, detail: str, part: str = "") -> None:
        ACCEPTANCE[(number, part)] = (bool(passed), detail)
        print(f"criterion {number}{part}: {'PASS' if passed else 'FAIL'} {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted({n for n, _ in ACCEPTANCE}):
        parts = sorted((p, v) for (n, p), v in ACCEPTANCE.items() if n == number)
        ok = all(v[0] for _, v in parts)
        detail = "; ".join(f"({p}) {d}" if p else d for p, (_, d) in parts)
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")
