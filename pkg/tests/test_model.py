import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from besselfrac.model import (ChamberError, Configuration, ModelParams, RootSystem,
                              SingularityError, drift, dunkl_bessel_envelope, edge_distance,
                              in_edge_set, is_in_closed_chamber, is_in_open_chamber, k_prime,
                              kappa, log_weight, origin, type_a, type_b, weight,
                              weight_scaling_exponent)

TOL = 1e-12


# -- closed forms ----------------------------------------------------------------

@pytest.mark.parametrize("params,expected", [
    (type_a(2, 0.3), 0.3),
    (type_b(2, 0.4, 0.5), 0.2),
    (type_b(2, 0.3, 2.0), 0.3),
])
def test_k_prime(params, expected):
    assert k_prime(params) == pytest.approx(expected, abs=TOL)


@pytest.mark.parametrize("params,expected", [
    (type_a(3, 0.5), 1.5),
    (type_b(2, 0.5, 1.0), 2.0),
    (type_b(3, 0.25, 0.5), 0.25 * 3 * 2.5),
])
def test_kappa(params, expected):
    assert kappa(params) == pytest.approx(expected, abs=TOL)


def test_nonpositive_multiplicity_rejected():
    with pytest.raises(ValueError):
        type_a(2, 0.0)
    with pytest.raises(ValueError):
        type_a(2, -0.1)
    with pytest.raises(ValueError):
        type_b(2, 0.3, 0.0)
    with pytest.raises(ValueError):
        type_a(1, 0.3)
    with pytest.raises(ValueError):
        ModelParams(RootSystem.A, 2, 0.3, alpha=1.0)


def test_root_system_aliases():
    assert ModelParams("A", 2, 0.1).root_system is RootSystem.A
    assert ModelParams("typeb", 1, 0.1, 1.0).root_system is RootSystem.B


@pytest.mark.parametrize("params,x,expected", [
    (type_a(3, 0.3), (0, 1, 3), 6.0),
    (type_b(2, 0.3, 2.0), (1, 2), 12.0),
    (type_a(3, 0.3), (1, 1, 3), 0.0),
    (type_b(2, 0.3, 2.0), (0, 2), 0.0),
])
def test_weight_examples(params, x, expected):
    assert weight(params, x) == pytest.approx(expected, abs=TOL)


def test_weight_exact_rational_points():
    # exact products computed with Fractions
    x = (Fraction(1, 3), Fraction(1, 2), Fraction(7, 4), Fraction(5, 2))
    exact = Fraction(1)
    for i in range(4):
        for j in range(i + 1, 4):
            exact *= x[j] - x[i]
    assert weight(type_a(4, 0.2), [float(v) for v in x]) == pytest.approx(float(exact),
                                                                         rel=TOL)
    exact_b = Fraction(1)
    for v in x:
        exact_b *= v * v  # alpha = 2
    for i in range(4):
        for j in range(i + 1, 4):
            exact_b *= x[j] ** 2 - x[i] ** 2
    assert weight(type_b(4, 0.2, 2.0), [float(v) for v in x]) == pytest.approx(
        float(exact_b), rel=TOL)


def test_weight_log_space_for_many_particles():
    x = np.arange(1.0, 8.0)
    p = type_a(7, 0.1)
    exact = math.prod(x[j] - x[i] for i in range(7) for j in range(i + 1, 7))
    assert weight(p, x) == pytest.approx(exact, rel=1e-12)
    assert log_weight(p, x) == pytest.approx(math.log(exact), rel=1e-13)


@pytest.mark.parametrize("params,expected", [
    (type_a(3, 0.3), 3), (type_a(5, 0.3), 10), (type_b(2, 0.3, 1.0), 4),
    (type_b(3, 0.3, 0.5), 7.5),
])
def test_weight_scaling_exponent(params, expected):
    assert weight_scaling_exponent(params) == pytest.approx(expected, abs=TOL)


@pytest.mark.parametrize("params,x,expected", [
    (type_a(3, 0.3), (0, 0.2, 1), 0.2),
    (type_b(3, 0.3, 1.0), (0.05, 1, 2), 0.05),
    (type_a(3, 0.3), (1, 1, 5), 0.0),
    (type_b(2, 0.3, 1.0), (0.5, 0.75), 0.25),
])
def test_edge_distance_examples(params, x, expected):
    assert edge_distance(params, x) == pytest.approx(expected, abs=TOL)


def test_edge_distance_vectorized():
    p = type_a(3, 0.3)
    xs = np.array([[0, 0.2, 1], [0, 1, 1.5]])
    np.testing.assert_allclose(edge_distance(p, xs), [0.2, 0.5])


@pytest.mark.parametrize("params,x,expected", [
    (type_a(2, 0.3), (0, 1), (-0.3, 0.3)),
    (type_b(2, 0.5, 1.0), (1, 2), (1 / 6, 11 / 12)),
    (type_a(3, 1.0), (0, 1, 3), (-1 - 1 / 3, 1 - 0.5, 1 / 3 + 0.5)),
    (type_b(1, 0.4, 2.5), (0.5,), (2.0,)),
])
def test_drift_examples(params, x, expected):
    np.testing.assert_allclose(drift(params, x), expected, rtol=0, atol=TOL)


def test_drift_singular_on_boundary():
    with pytest.raises(SingularityError):
        drift(type_a(3, 0.3), (0, 0, 1))
    with pytest.raises(SingularityError):
        drift(type_b(2, 0.3, 1.0), (0, 1))


def test_outside_chamber_rejected():
    with pytest.raises(ChamberError):
        weight(type_b(2, 0.3, 1.0), (-0.5, 1))
    with pytest.raises(ChamberError):
        edge_distance(type_a(2, 0.3), np.array([1.0, 0.0]))


def test_configuration_sorts_and_records_permutation():
    c = Configuration([3.0, 1.0, 2.0])
    np.testing.assert_array_equal(c.coords, [1, 2, 3])
    assert c.permuted
    assert not Configuration([1.0, 2.0]).permuted
    assert edge_distance(type_a(3, 0.2), c) == 1.0


def test_chamber_membership():
    pa, pb = type_a(3, 0.3), type_b(2, 0.3, 1.0)
    assert is_in_closed_chamber(pa, (0, 0, 1)) and not is_in_open_chamber(pa, (0, 0, 1))
    assert is_in_open_chamber(pa, (0, 0.5, 1))
    assert is_in_closed_chamber(pb, (0, 1)) and not is_in_open_chamber(pb, (0, 1))
    assert not is_in_closed_chamber(pb, (-0.1, 1))
    assert edge_distance(pa, origin(pa)) == 0.0


@pytest.mark.parametrize("params,x,y,expected", [
    (type_a(2, 0.3), (0, 0), (0.3, 2.0), (2.0, 2.0)),
    (type_b(1, 0.3, 1.0), (1.0,), (1.0,), (2 / math.e, 2 * math.e)),
    (type_b(2, 0.3, 1.0), (0, 0), (1, 2), (8.0, 8.0)),
])
def test_envelope_examples(params, x, y, expected):
    lo, hi = dunkl_bessel_envelope(params, x, y)
    assert lo == pytest.approx(expected[0], rel=TOL)
    assert hi == pytest.approx(expected[1], rel=TOL)


# -- invariants --------------------------------------------------------------------

def chamber_points(n, lo=-3.0, hi=3.0, nonneg=False, min_gap=0.0):
    floats = st.floats(0.0 if nonneg else lo, hi, allow_nan=False)
    return st.lists(floats, min_size=n, max_size=n).map(sorted).filter(
        lambda v: min(np.diff(v), default=1.0) >= min_gap and (not nonneg or v[0] >= min_gap))


@settings(max_examples=60, deadline=None)
@given(n=st.integers(2, 5), data=st.data(), c=st.floats(0.1, 10))
def test_weight_homogeneity_type_a(n, data, c):
    x = np.array(data.draw(chamber_points(n, min_gap=1e-3)))
    p = type_a(n, 0.3)
    assert weight(p, c * x) == pytest.approx(c ** weight_scaling_exponent(p) * weight(p, x),
                                             rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 4), data=st.data(), c=st.floats(0.1, 10),
       alpha=st.floats(0.1, 3.0))
def test_weight_homogeneity_type_b(n, data, c, alpha):
    x = np.array(data.draw(chamber_points(n, nonneg=True, min_gap=1e-2)))
    p = type_b(n, 0.3, alpha)
    assert weight(p, c * x) == pytest.approx(c ** weight_scaling_exponent(p) * weight(p, x),
                                             rel=1e-11)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(-20, 20), min_size=3, max_size=3).map(sorted),
       st.booleans())
def test_weight_zero_iff_boundary(ints, type_b_case):
    # integer points: products are exact in floating point
    x = np.array(ints, dtype=float) / 4
    if type_b_case:
        x = np.abs(x)
        x.sort()
        p = type_b(3, 0.3, 1.0)
    else:
        p = type_a(3, 0.3)
    assert (weight(p, x) == 0) == (edge_distance(p, x) == 0)


@settings(max_examples=80, deadline=None)
@given(n=st.integers(2, 6), data=st.data(), shift=st.floats(-50, 50))
def test_drift_translation_invariance(n, data, shift):
    x = np.array(data.draw(chamber_points(n, min_gap=0.05)))
    p = type_a(n, 0.37)
    d = drift(p, x)
    np.testing.assert_allclose(drift(p, x + shift), d, atol=1e-12 * max(1, np.abs(d).max()),
                               rtol=1e-9)
    assert abs(d.sum()) <= 1e-12 * max(1.0, np.abs(d).max() * n)
    assert d[0] <= 0 <= d[-1]


@settings(max_examples=80, deadline=None)
@given(n=st.integers(2, 5), data=st.data(), alpha=st.floats(0.2, 3.0),
       x1=st.floats(1e-4, 1e-2))
def test_drift_type_b_pushes_off_origin_wall(n, data, alpha, x1):
    rest = np.array(data.draw(chamber_points(n - 1, lo=0.5, hi=3.0, min_gap=0.05)))
    x = np.concatenate([[x1], rest])
    assume(x[1] - x[0] > x1)
    assert drift(type_b(n, 0.3, alpha), x)[0] > 0


@settings(max_examples=80, deadline=None)
@given(data=st.data(), r1=st.floats(0, 2), r2=st.floats(0, 2))
def test_edge_set_nesting(data, r1, r2):
    r1, r2 = sorted((r1, r2))
    p = type_a(4, 0.2)
    x = np.array(data.draw(chamber_points(4)))
    if in_edge_set(p, x, r1):
        assert in_edge_set(p, x, r2)


@settings(max_examples=60, deadline=None)
@given(data=st.data(), s=st.floats(0.1, 5.0))
def test_envelope_depends_on_norm_product(data, s):
    p = type_b(2, 0.3, 1.0)
    x = np.array(data.draw(chamber_points(2, nonneg=True, hi=2.0)))
    y = np.array(data.draw(chamber_points(2, nonneg=True, hi=2.0)))
    lo, hi = dunkl_bessel_envelope(p, x, y)
    assert lo <= hi
    assert dunkl_bessel_envelope(p, y, x) == (lo, hi)
    lo2, hi2 = dunkl_bessel_envelope(p, s * x, y / s)
    assert lo2 == pytest.approx(lo, rel=1e-12) and hi2 == pytest.approx(hi, rel=1e-12)
    prod = np.linalg.norm(x) * np.linalg.norm(y)
    if prod == 0:
        assert lo == hi
    elif prod > 1e-15:
        assert lo < hi
