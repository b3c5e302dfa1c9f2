import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lyapmc import reference as ref
from lyapmc.errors import ConfigError, SingularityError

# j_{0,1} from scipy.special.jn_zeros(0, 1), frozen
J01 = 2.4048255576957724
# K_0(2) / pi from scipy.special.k0, frozen: the d = 2 Green function at eta = 0.5, l = 2
G2_AT_2 = 0.03625354567193512


def test_alpha_const_values():
    assert ref.alpha_const(0.5, [1.0]) == pytest.approx(1.0, rel=1e-15)
    assert ref.alpha_const(0.0, [3.0, 4.0]) == 0.0
    assert ref.alpha_const(2.0, [0.0, 3.0, 0.0]) == pytest.approx(6.0, rel=1e-15)


def test_hitting_laplace_values():
    assert ref.hitting_laplace_1d(0.5, 1.0) == pytest.approx(math.exp(-1), rel=1e-15)
    assert ref.hitting_laplace_1d(0.7, 0.0) == 1.0
    assert ref.hitting_laplace_1d(2.0, 2.0) == pytest.approx(0.0183156388887342, rel=1e-12)


def test_volume_and_area_tables():
    assert [ref.unit_ball_volume(d) for d in (1, 2, 3)] == pytest.approx([2.0, math.pi, 4 * math.pi / 3])
    assert [ref.unit_sphere_area(d) for d in (1, 2, 3)] == pytest.approx([2.0, 2 * math.pi, 4 * math.pi])
    with pytest.raises(ConfigError):
        ref.unit_ball_volume(4)


def test_dirichlet_eigenvalues():
    assert ref.dirichlet_eigenvalue(1) == pytest.approx(1.2337005501361697, rel=1e-14)
    assert ref.dirichlet_eigenvalue(3) == pytest.approx(4.934802200544679, rel=1e-14)
    assert ref.first_bessel_j0_zero() == pytest.approx(J01, abs=1e-13)
    assert ref.dirichlet_eigenvalue(2) == pytest.approx(J01 ** 2 / 2, rel=1e-12)
    assert ref.dirichlet_eigenvalue(2) == pytest.approx(2.891593, abs=1e-6)


def test_one_dimensional_green_function():
    assert ref.green_const(0.5, [0.0], [2.0]) == pytest.approx(math.exp(-2.0), rel=1e-15)
    assert ref.green_const(2.0, [1.0], [1.0]) == pytest.approx(0.5, rel=1e-15)


@pytest.mark.parametrize("l", [0.5, 1.0, 5.0, 17.0, 120.0])
def test_three_dimensional_green_matches_closed_form(l):
    k = 1.0
    assert ref.green_const_at(0.5, l, 3) == pytest.approx(math.exp(-k * l) / (2 * math.pi * l), rel=1e-9)


def test_two_dimensional_green_matches_bessel_value():
    assert ref.green_const(0.5, [0.0, 0.0], [2.0, 0.0]) == pytest.approx(G2_AT_2, rel=1e-9)


def test_green_is_singular_at_zero_separation():
    with pytest.raises(SingularityError):
        ref.green_const(0.5, [1.0, 1.0], [1.0, 1.0])
    with pytest.raises(ValueError):
        ref.green_const(0.0, [0.0], [1.0])


def test_log_space_avoids_underflow():
    lg = ref.log_green_const(0.5, 2000.0, 3)
    assert lg == pytest.approx(-2000.0 - math.log(2 * math.pi * 2000.0), rel=1e-12)
    assert ref.green_asymptotic_ratio(0.5, 2000.0, 3) == pytest.approx(2 * math.pi, rel=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=2, max_size=2), st.lists(st.floats(-5, 5), min_size=2, max_size=2))
def test_green_is_symmetric(x, y):
    if np.linalg.norm(np.subtract(x, y)) < 1e-3:
        return
    assert ref.green_const(0.3, x, y) == ref.green_const(0.3, y, x)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_green_decreases_in_separation_and_rate(d):
    ls = np.geomspace(0.2, 50, 30)
    g = [ref.green_const_at(0.5, l, d) for l in ls]
    assert np.all(np.diff(g) < 0)
    etas = [0.1, 0.3, 1.0, 3.0]
    assert np.all(np.diff([ref.green_const_at(e, 2.0, d) for e in etas]) < 0)


def test_ratio_is_exactly_k_in_one_dimension():
    for eta in (0.1, 0.5, 2.0):
        for l in (1.0, 7.0, 300.0):
            assert ref.green_asymptotic_ratio(eta, l, 1) == math.sqrt(2 * eta)


def test_ratio_is_constant_in_three_dimensions():
    r = [ref.green_asymptotic_ratio(0.5, l, 3) for l in (1.0, 4.0, 40.0)]
    assert r == pytest.approx([2 * math.pi] * 3, rel=1e-10)


def test_ratio_stabilizes_in_two_dimensions():
    r20 = ref.green_asymptotic_ratio(0.5, 20.0, 2)
    r40 = ref.green_asymptotic_ratio(0.5, 40.0, 2)
    assert abs(r40 - r20) / r20 < 0.01
    # approaches sqrt(2 pi k) from above
    assert r20 > r40 > math.sqrt(2 * math.pi)


def test_shape_integral_monotone_in_separation():
    d2 = [ref.green_shape_integral(0.5, l, 2) for l in (1.0, 2.0, 8.0, 32.0)]
    assert np.all(np.diff(d2) > 0)
    d3 = [ref.green_shape_integral(0.5, l, 3) for l in (1.0, 2.0, 8.0, 32.0)]
    assert d3 == pytest.approx([1.0] * 4, rel=1e-10)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_decay_rate_approaches_sqrt_two_eta(d):
    # the prefactor contributes O(ln l / l)
    for l, tol in ((40.0, 0.15), (2000.0, 0.01)):
        rate = -ref.log_green_const(0.5, l, d) / l
        assert abs(rate - 1.0) < tol


def test_green_table_rows():
    rows = ref.green_table(0.5, 1, 0.5, 64.0, 9)
    assert len(rows) == 9
    assert math.isnan(rows[0][2])
    l, g, ratio, rate = rows[-1]
    assert l == pytest.approx(64.0)
    assert ratio == 1.0
    assert rate == pytest.approx(1.0, abs=1e-12)
