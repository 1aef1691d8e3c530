import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from genthiele.duration import default_rates, disability_kernel
from genthiele.model import (
    ACTIVE,
    DEAD,
    ContinuousPart,
    Discount,
    DomainError,
    IntensityKernel,
    Label,
    PaymentSpec,
    State,
    disabled,
    discrete,
    parse_state,
    total_rate,
    widowed,
)


def test_total_rate_active_at_40():
    k = disability_kernel(default_rates(30), 30, 67)
    assert total_rate(k, 40, ACTIVE) == pytest.approx(0.0012710 + 0.0030119, abs=5e-7)


def test_total_rate_no_transitions_and_absorbing():
    k = IntensityKernel(lambda t, x: [])
    assert total_rate(k, 1.0, ACTIVE) == 0.0
    assert total_rate(disability_kernel(default_rates(30), 30, 67), 50, DEAD) == 0.0


def test_total_rate_outside_horizon():
    k = disability_kernel(default_rates(30), 30, 67)
    with pytest.raises(DomainError):
        total_rate(k, 70, ACTIVE)


def test_self_targeting_atom_rejected():
    k = IntensityKernel(lambda t, x: [(x, 0.1)])
    with pytest.raises(DomainError):
        total_rate(k, 0.0, ACTIVE)


def test_total_rate_includes_continuous_mass():
    nodes = (widowed(0.0), widowed(2.0))
    k = IntensityKernel(lambda t, x: [(DEAD, 0.01)],
                        lambda t, x: ContinuousPart(nodes, np.array([0.5, 0.5]), 0.03))
    assert total_rate(k, 0.0, ACTIVE) == pytest.approx(0.04)


@given(st.lists(st.floats(0, 5), min_size=1, max_size=6), st.data())
def test_total_rate_additive(rates, data):
    targets = [discrete(i + 1) for i in range(len(rates))]
    drop = data.draw(st.integers(0, len(rates) - 1))
    full = IntensityKernel(lambda t, x: list(zip(targets, rates)))
    kept = [(y, r) for i, (y, r) in enumerate(zip(targets, rates)) if i != drop]
    reduced = IntensityKernel(lambda t, x: kept)
    diff = total_rate(full, 0.0, discrete(0)) - total_rate(reduced, 0.0, discrete(0))
    assert diff == pytest.approx(rates[drop], abs=1e-12)


@given(st.floats(-0.1, 0.2), st.floats(0, 50), st.floats(0, 50), st.floats(0, 50))
def test_discount_composition_constant(r, a, b, c):
    t, u, s = sorted((a, b, c))
    d = Discount(r)
    assert d.factor(t, u) * d.factor(u, s) == pytest.approx(d.factor(t, s), rel=1e-12, abs=0)
    assert d.factor(t, t) == 1.0


def test_discount_table_matches_quadrature():
    d = Discount(knots=((0.0, 0.02), (10.0, 0.05), (30.0, 0.03)))
    for t, s in ((0, 5), (3, 25), (-2, 40), (12, 12)):
        integral = integrate.quad(lambda u: float(d.short_rate(u)), t, s, points=[0, 10, 30], limit=200)[0]
        assert float(d.factor(t, s)) == pytest.approx(math.exp(-integral), rel=1e-12)
    ann = integrate.quad(lambda u: float(d.factor(2.0, u)), 2.0, 35.0, points=[10, 30])[0]
    assert d.annuity(2.0, 2.0, 35.0) == pytest.approx(ann, rel=1e-10)


@settings(max_examples=50)
@given(st.floats(0.001, 0.1), st.floats(0, 10), st.floats(0, 10), st.floats(0, 10))
def test_discount_table_composition(r0, a, b, c):
    d = Discount(knots=((0.0, r0), (5.0, 2 * r0), (8.0, 0.5 * r0)))
    t, u, s = sorted((a, b, c))
    assert float(d.factor(t, u) * d.factor(u, s)) == pytest.approx(float(d.factor(t, s)), rel=1e-12)


def test_constant_annuity_closed_form():
    d = Discount(0.05)
    assert d.annuity(0, 0, 10) == pytest.approx((1 - math.exp(-0.5)) / 0.05, rel=1e-14)
    assert Discount(0.0).annuity(0, 2, 5) == pytest.approx(3.0)


def test_state_invariants():
    with pytest.raises(ValueError):
        State(Label.DISABLED)
    with pytest.raises(ValueError):
        State(Label.ACTIVE, 1.0)
    with pytest.raises(ValueError):
        State(Label.DISCRETE)
    with pytest.raises(ValueError):
        disabled(-1.0)
    assert disabled(30) == disabled(30.0)


@pytest.mark.parametrize("state", [ACTIVE, DEAD, disabled(31.5), widowed(-2), discrete(3)])
def test_parse_state_roundtrip(state):
    assert parse_state(str(state)) == state


def test_parse_state_unknown():
    with pytest.raises(ValueError):
        parse_state("retired")


def test_transfer_on_non_jump_is_zero():
    pay = PaymentSpec(transition=lambda t, g, h: 5.0)
    assert pay.transfer(1.0, ACTIVE, ACTIVE) == 0.0
    assert pay.transfer(1.0, ACTIVE, DEAD) == 5.0
