import pytest

# criterion id -> (passed, detail), filled by the acceptance tests
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE, key=lambda c: int(c[1:])):
        ok, detail = ACCEPTANCE[cid]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {cid}  {detail}")


@pytest.fixture
def record():
    def _record(cid: str, ok: bool, detail: str) -> None:
        ACCEPTANCE[cid] = (bool(ok), detail)
        print(f"{'PASS' if ok else 'FAIL'}  {cid}  {detail}")
        assert ok, f"{cid}: {detail}"

    return _record
