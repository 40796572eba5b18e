from fractions import Fraction

import pytest

from mobius_va.vertex import build_heisenberg, build_virasoro

_ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(criterion: int, ok: bool, detail: str) -> None:
    """Store one acceptance verdict; repeated calls keep the worst outcome."""
    prev = _ACCEPTANCE.get(criterion)
    if prev is None:
        _ACCEPTANCE[criterion] = (ok, detail)
    elif prev[0] and ok:
        _ACCEPTANCE[criterion] = (True, f"{prev[1]}; {detail}")
    elif prev[0]:
        _ACCEPTANCE[criterion] = (False, detail)
    line = f"criterion {criterion:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def heis8():
    return build_heisenberg(8)


@pytest.fixture(scope="session")
def vir_half():
    return build_virasoro(Fraction(1, 2), 8)


@pytest.fixture(scope="session")
def vir_yl():
    return build_virasoro(Fraction(-22, 5), 8)


@pytest.fixture(scope="session")
def vir_yl_simple():
    return build_virasoro(Fraction(-22, 5), 8, simple=True)
