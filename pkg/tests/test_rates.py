import numpy as np
import pytest

from genthiele import rates as R
from genthiele.duration import default_rates


def test_ref_rates_at_reference_ages():
    rt = default_rates(30)
    assert rt.mu_star_dagger(40) == pytest.approx(0.0004 + 10 ** -3.06, rel=1e-14)
    assert rt.mu_star_dagger(40) == pytest.approx(0.00127096, abs=5e-9)
    assert rt.mu_star_diamond(40) == pytest.approx(0.00301189, abs=5e-9)
    assert rt.mu_diamond_star_base(30) == pytest.approx(0.460263, abs=1e-12)


def test_disabled_mortality_defaults_to_active():
    rt = default_rates(30)
    assert rt.mu_diamond_dagger is rt.mu_star_dagger
    other = R.Constant(0.02)
    assert default_rates(30, other).mu_diamond_dagger is other


def test_linear_root():
    assert R.MU_REHAB_BASE.root() == pytest.approx(74.044306, abs=1e-6)


def test_vectorised_evaluation():
    t = np.array([30.0, 40.0, 50.0])
    np.testing.assert_allclose(R.MU_ACTIVE_DEAD(t), [R.MU_ACTIVE_DEAD(float(x)) for x in t])
    assert R.Constant(0.1)(t).shape == t.shape


@pytest.mark.parametrize("spec,t,expected", [
    (0.02, 5.0, 0.02),
    ({"const": 0.1}, 1.0, 0.1),
    ({"linear": [1.0, -0.5]}, 1.0, 0.5),
    ({"gompertz_makeham": [0.0004, 0.06, -5.46]}, 40.0, 0.0004 + 10 ** -3.06),
    ({"table": [[10, 1.0], [0, 0.0]]}, 2.5, 0.25),
    ({"table": [[0, 0.0], [10, 1.0]]}, 20.0, 1.0),
])
def test_parse_rate(spec, t, expected):
    assert R.parse_rate(spec)(t) == pytest.approx(expected)


@pytest.mark.parametrize("spec", ["abc", {"weird": 1}, {"const": 1, "linear": [0, 1]}, True])
def test_parse_rate_rejects(spec):
    with pytest.raises(ValueError):
        R.parse_rate(spec)


def test_table_requires_increasing_times():
    with pytest.raises(ValueError):
        R.Table((0.0, 0.0), (1.0, 2.0))
