from __future__ import annotations

import json
from pathlib import Path

import pytest

from genthiele import rates as R
from genthiele.discrete import DiscreteModel
from genthiele.duration import default_rates
from genthiele.model import Discount, PaymentSpec

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def annuity_certain(r: float = 0.05) -> DiscreteModel:
    return DiscreteModel(1, lambda t, i, j: 0.0, PaymentSpec(sojourn_rate=lambda t, g: 1.0), Discount(r))


def term_insurance(mu: float = 0.01, r: float = 0.03, benefit: float = 1.0) -> DiscreteModel:
    def rate(t, i, j):
        return mu if (i, j) == (0, 1) else 0.0

    def transfer(t, g, h):
        return benefit if (g.index, h.index) == (0, 1) else 0.0

    return DiscreteModel(2, rate, PaymentSpec(transition=transfer), Discount(r), names=("alive", "dead"))


@pytest.fixture
def ref_rates():
    return default_rates(30)


@pytest.fixture
def gm():
    return R.MU_ACTIVE_DEAD


@pytest.fixture
def write_config(tmp_path):
    def write(doc: dict, name: str = "cfg.json") -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(doc))
        return path

    return write


def load_config_doc(name: str) -> dict:
    return json.loads((CONFIGS / name).read_text())


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(criterion: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = (passed, detail)
    print(f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
