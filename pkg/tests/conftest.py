from pathlib import Path

import pytest

DATA_DIR = Path(__file__).resolve().parents[1] / "data"
BOSTON_CSV = DATA_DIR / "boston_housing.csv"

CRITERIA = {
    1: "TCP region equals grid oracle {p > delta}",
    2: "ICP closed interval consistent with {p > delta} at endpoints",
    3: "empirical validity on synthetic normal-model data",
    4: "Boston widths and error rates reproduce the reference table",
    5: "Boston ICP combo_exp narrower than standard at 90/95/99%",
    6: "regions nest as delta grows",
    7: "Boston runtime ceilings (TCP < 60 s, ICP < 5 s)",
    8: "score * half_width_multiplier == residual",
}

_results: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def record_criterion():
    """Call ``record(number, passed, detail)`` before asserting."""

    def record(number: int, passed: bool, detail: str = "") -> None:
        prev = _results.get(number)
        ok = bool(passed) and (prev is None or prev[0])
        detail = detail if prev is None else f"{prev[1]}; {detail}"
        _results[number] = (ok, detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number, name in CRITERIA.items():
        if number not in _results:
            tr.write_line(f"[NOT RUN] {number}. {name}")
            continue
        ok, detail = _results[number]
        tr.write_line(f"[{'PASS' if ok else 'FAIL'}] {number}. {name}: {detail}")
