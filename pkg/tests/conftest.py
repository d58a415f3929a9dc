import sys
from decimal import Decimal
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from multiplex_contagion.portfolio import InstitutionRecord, LayerExposures, Portfolio  # noqa: E402


def make_portfolio(capital, exposures=None, ids=None):
    """``capital``: list of (own_funds, min_capital); ``exposures``: {(layer, basis): {(rep, cpty): amt}}."""
    ids = ids or [f"I{k}" for k in range(len(capital))]
    insts = tuple(InstitutionRecord(i, Decimal(str(c)), Decimal(str(mc))) for i, (c, mc) in zip(ids, capital))
    tables = {}
    for (layer, basis), entries in (exposures or {}).items():
        tables[(layer, basis)] = LayerExposures(
            layer, basis, {(ids[r], ids[c]): Decimal(str(a)) for (r, c), a in entries.items()})
    return Portfolio(insts, tables)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, name: str, passed: bool, detail: str = ""):
    status = "PASS" if passed else "FAIL"
    ACCEPTANCE_LINES[number] = f"criterion {number:>2} {status}  {name}" + (f"  [{detail}]" if detail else "")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
