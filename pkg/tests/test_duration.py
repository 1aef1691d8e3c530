import dataclasses
import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from genthiele import rates as R
from genthiele.discrete import solve_reserves_discrete
from genthiele.duration import (
    RehabRates,
    default_rates,
    emit_figures,
    solve_disability,
    three_state_reduction,
    validate_rates,
)
from genthiele.model import DomainError, NumericError


def no_exit(rates: RehabRates) -> RehabRates:
    return dataclasses.replace(rates, mu_diamond_star_base=R.Constant(0.0), mu_diamond_dagger=R.Constant(0.0))


def test_zero_annuity_gives_zero_surface(ref_rates):
    s = solve_disability(ref_rates, 0.03, 67, 30, 1 / 12, annuity_rate=0.0)
    assert not s.active.any() and not s.onset.any()
    assert not np.nan_to_num(s.disabled).any()


def test_negative_annuity_rejected(ref_rates):
    with pytest.raises(DomainError):
        solve_disability(ref_rates, 0.03, 67, 30, 1 / 12, annuity_rate=-1.0)


def test_absorbing_disability_is_annuity_certain(ref_rates):
    s = solve_disability(no_exit(ref_rates), 0.03, 67, 30, 1 / 360, slice_onsets=(30, 31 + 1 / 3, 43 + 8 / 9))
    exact = (1 - np.exp(-0.03 * (67 - s.times))) / 0.03
    np.testing.assert_allclose(s.onset, exact, atol=1e-3)
    # every onset row carries the same curve
    for k in s.slices:
        row = np.array([s.disabled_at(k, n) for n in range(k, len(s.times), 97)])
        np.testing.assert_allclose(row, exact[k::97], atol=1e-3)


def test_reference_configuration_shape(ref_rates):
    s = solve_disability(ref_rates, 0.03, 67, 30, 1 / 12)
    assert s.active[-1] == 0.0 and s.onset[-1] == 0.0
    # the explicit scheme carries V_active(t_N) = 0 one step back, so the first
    # positive value appears at t_{N-2}
    assert s.active[-2] == 0.0
    assert (s.active[:-2] > 0).all()
    assert (s.onset[:-1] > 0).all()
    assert s.active[0] == pytest.approx(0.41948, abs=1e-5)
    assert s.onset[0] == pytest.approx(2.55180, abs=1e-5)


def test_upper_triangle_never_written(ref_rates):
    s = solve_disability(ref_rates, 0.03, 67, 30, 1 / 4, keep_surface=True)
    N = len(s.times) - 1
    upper = np.triu_indices(N + 1, k=1)
    # rows are onset indices k, columns time indices n: k > n is the lower triangle of the array
    assert np.isnan(s.disabled[upper[1], upper[0]]).all()
    assert np.isfinite(s.disabled[upper[0], upper[1]]).all()
    with pytest.raises(IndexError):
        s.disabled_at(5, 4)


def naive_surface(rates, r, T, t_start, dt, a=1.0):
    """Element-by-element recursion with the rehabilitation indicator spelled out."""
    N = round((T - t_start) / dt)
    t = [t_start + n * dt for n in range(N + 1)]
    V = [[0.0] * (N + 1) for _ in range(N + 1)]
    act = [0.0] * (N + 1)
    for n in range(N, 0, -1):
        tn = t[n]
        for k in range(n):
            rehab = rates.rehab(tn, t[k])
            lam = rehab + float(rates.mu_diamond_dagger(tn))
            V[k][n - 1] = V[k][n] - dt * ((lam + r) * V[k][n] - a - rehab * act[n])
        mu_sd, mu_si = float(rates.mu_star_dagger(tn)), float(rates.mu_star_diamond(tn))
        act[n - 1] = act[n] - dt * ((mu_sd + mu_si + r) * act[n] - mu_si * V[n][n])
    return act, V


def test_surface_matches_naive_recursion(ref_rates):
    dt = 0.5
    s = solve_disability(ref_rates, 0.03, 67, 30, dt, keep_surface=True)
    act, V = naive_surface(ref_rates, 0.03, 67, 30, dt)
    np.testing.assert_allclose(s.active, act, rtol=1e-12, atol=1e-15)
    N = len(act) - 1
    for k in range(N + 1):
        for n in range(k, N + 1):
            assert s.disabled_at(k, n) == pytest.approx(V[k][n], rel=1e-12, abs=1e-15)


def test_streaming_matches_full_surface(ref_rates):
    full = solve_disability(ref_rates, 0.03, 67, 30, 1 / 12, keep_surface=True)
    lean = solve_disability(ref_rates, 0.03, 67, 30, 1 / 12, keep_surface=False, slice_onsets=(30, 45.5))
    assert lean.disabled is None
    np.testing.assert_array_equal(full.active, lean.active)
    np.testing.assert_array_equal(full.onset, lean.onset)
    for s in (30, 45.5):
        k = full.onset_index(s)
        np.testing.assert_array_equal(lean.slices[k][k:], full.disabled[k, k:])
    with pytest.raises(LookupError):
        lean.disabled_at(3, 10)


def test_reduction_to_three_state_chain(ref_rates):
    dt = 1 / 12
    rates = dataclasses.replace(ref_rates, onset_factor=R.Constant(1.0))
    s = solve_disability(rates, 0.03, 67, 30, dt, keep_surface=True)
    chain = solve_reserves_discrete(three_state_reduction(rates, 0.03), [0, 0, 0], 30, 67, dt)
    tol = 2 * dt * 37 * 0.48
    np.testing.assert_allclose(s.active, chain.at("active"), atol=tol)
    dis = chain.at("disabled")
    lower = np.tril_indices(len(s.times))
    np.testing.assert_allclose(s.disabled[lower[1], lower[0]], dis[lower[0]], atol=tol)
    # the collapse is in fact exact up to rounding
    np.testing.assert_allclose(s.active, chain.at("active"), rtol=1e-12, atol=1e-14)


@settings(max_examples=10, deadline=None, suppress_health_check=[HealthCheck.too_slow,
                                                                  HealthCheck.function_scoped_fixture])
@given(bump=st.floats(0.0, 0.3), centre=st.floats(30, 67), width=st.floats(0.5, 20))
def test_more_rehabilitation_never_raises_disabled_reserve(ref_rates, bump, centre, width):
    base = ref_rates.mu_diamond_star_base

    def bumped(t):
        return base(t) + bump * np.exp(-((np.asarray(t) - centre) / width) ** 2)

    s0 = solve_disability(ref_rates, 0.03, 67, 30, 1 / 4, keep_surface=True)
    s1 = solve_disability(dataclasses.replace(ref_rates, mu_diamond_star_base=bumped), 0.03, 67, 30, 1 / 4,
                          keep_surface=True)
    ok = np.isfinite(s0.disabled)
    assert (s1.disabled[ok] <= s0.disabled[ok] + 1e-12).all()


def test_first_order_convergence_active(ref_rates):
    ref = solve_disability(ref_rates, 0.03, 67, 30, 1 / 768, keep_surface=False).active[0]
    errs = [solve_disability(ref_rates, 0.03, 67, 30, 1 / m).active[0] - ref for m in (12, 24, 48)]
    for e1, e2 in zip(errs, errs[1:]):
        assert 1.7 <= e1 / e2 <= 2.3


def test_non_finite_rate_reported(ref_rates):
    bad = dataclasses.replace(ref_rates, mu_star_diamond=lambda t: np.where(np.asarray(t) > 50, np.inf, 0.01))
    with pytest.raises(NumericError, match="mu_star_diamond"):
        solve_disability(bad, 0.03, 67, 30, 1 / 12)


def test_emit_figures(ref_rates):
    s = solve_disability(ref_rates, 0.03, 67, 30, 1 / 12)
    fig = emit_figures(s, slice_onsets=(40.0,))
    assert fig.active.shape == (len(s.times), 2)
    assert fig.active[-1].tolist() == [67.0, 0.0]
    assert fig.onset[-1].tolist() == [67.0, 0.0]
    sl = fig.slices[40.0]
    assert sl[0, 0] == pytest.approx(40.0) and sl[-1, 1] == 0.0
    assert sl[0, 1] == pytest.approx(s.onset[s.onset_index(40.0)])


def test_final_year_monotone(ref_rates):
    s = solve_disability(ref_rates, 0.03, 67, 30, 1 / 360, keep_surface=False)
    tail = s.active[s.times >= 66.0]
    assert (np.diff(tail) <= 0).all()


def test_validate_rates_flags_negative_rehabilitation(ref_rates):
    assert validate_rates(ref_rates, 30, 67) == []
    warnings = validate_rates(ref_rates, 30, 80)
    assert [lvl for lvl, _ in warnings] == ["warning"]
    assert "74.0" in warnings[0][1] or "74.1" in warnings[0][1]


def test_default_rates_reject_negative_inception():
    with pytest.raises(DomainError):
        default_rates(-1)


def test_rehab_indicator(ref_rates):
    assert ref_rates.rehab(40.0, 45.0) == 0.0
    expected = float(R.MU_REHAB_BASE(50.0)) * (1 - float(R.MU_ACTIVE_DEAD(45.0)))
    assert ref_rates.rehab(50.0, 45.0) == pytest.approx(expected)
    assert math.isfinite(ref_rates.rehab(66.9, 31.0))
