from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from achgjms.series import (
    QI, FieldValue, JetSeries, exact_array, is_zero, jet_inverse, jet_mul, jet_sqrt, qi,
    radial_derivative, series_einsum, series_mul, series_shift, zeros,
)

fracs = st.fractions(min_value=-50, max_value=50, max_denominator=30)
settings.register_profile("series", max_examples=40, deadline=None)
settings.load_profile("series")
gauss = st.builds(QI, fracs, fracs)


def pair(z: QI):
    return tuple(Fraction(p) for p in z.to_pair())


@given(gauss, gauss)
def test_qi_field_ops_match_fraction_pairs(a, b):
    (p, q), (r, s) = pair(a), pair(b)
    assert pair(a + b) == (p + r, q + s)
    assert pair(a - b) == (p - r, q - s)
    assert pair(a * b) == (p * r - q * s, p * s + q * r)
    if b:
        n = r * r + s * s
        assert pair(a / b) == ((p * r + q * s) / n, (q * r - p * s) / n)


@given(gauss)
def test_qi_conjugate_and_abs2(a):
    assert (a * a.conjugate()).imag == 0
    assert (a * a.conjugate()).real == a.abs2()
    assert complex(a.conjugate()) == complex(a).conjugate()


@given(gauss)
def test_qi_pair_roundtrip(a):
    assert QI.from_pair(a.to_pair()) == a


def test_qi_mixed_arithmetic():
    assert QI(1, 2) + 1 == QI(2, 2)
    assert 2 * QI(1, 1) == QI(2, 2)
    assert QI(0, 1) ** 2 == QI(-1)
    assert 1 / QI(0, 1) == QI(0, -1)
    assert qi(Fraction(3, 4)) == QI(Fraction(3, 4))
    assert not QI(0)


series = st.lists(gauss, min_size=1, max_size=7)


@given(series, series)
def test_series_mul_is_truncated_convolution(a, b):
    S = min(len(a), len(b))
    got = series_mul(exact_array(a), exact_array(b))
    for k in range(S):
        re = sum(pair(a[i])[0] * pair(b[k - i])[0] - pair(a[i])[1] * pair(b[k - i])[1]
                 for i in range(k + 1))
        im = sum(pair(a[i])[0] * pair(b[k - i])[1] + pair(a[i])[1] * pair(b[k - i])[0]
                 for i in range(k + 1))
        assert pair(got[k]) == (re, im)


@given(series)
def test_inverse_times_series_is_one(a):
    if not a[0]:
        a[0] = QI(1)
    s = JetSeries(exact_array(a))
    one = jet_mul(s, jet_inverse(s))
    assert one.coeffs[0] == QI(1)
    assert all(not z for z in one.coeffs[1:])


def test_inverse_matches_geometric_series():
    s = JetSeries.from_list([1, -1, 0, 0, 0, 0])
    inv = jet_inverse(s)
    assert list(inv.coeffs) == [QI(1)] * 6


@settings(max_examples=30)
@given(st.lists(gauss, min_size=1, max_size=6))
def test_sqrt_squares_back(tail):
    a = [QI(4)] + tail
    s = JetSeries(exact_array(a))
    r = jet_sqrt(s)
    assert r.coeffs[0] == QI(2)
    assert (jet_mul(r, r) - s).is_zero()


def test_sqrt_matches_binomial_series():
    # sqrt(1 + r) = 1 + r/2 - r^2/8 + r^3/16 - 5 r^4/128
    r = jet_sqrt(JetSeries.from_list([1, 1, 0, 0, 0]))
    want = [QI(1), QI(Fraction(1, 2)), QI(Fraction(-1, 8)), QI(Fraction(1, 16)), QI(Fraction(-5, 128))]
    assert list(r.coeffs) == want


def test_float_mode_on_grid_agrees_with_exact():
    rng = np.random.default_rng(1)
    a = rng.normal(size=(5, 3)) + 1j * rng.normal(size=(5, 3))
    a[0] += 4
    inv = jet_inverse(JetSeries(a))
    prod = jet_mul(JetSeries(a), inv)
    assert np.abs(prod.coeffs[0] - 1).max() < 1e-13
    assert np.abs(prod.coeffs[1:]).max() < 1e-12


def test_radial_derivative_and_shift():
    s = JetSeries.from_list([1, 2, 3])
    assert list(radial_derivative(s).coeffs) == [QI(0), QI(2), QI(6)]
    assert list(series_shift(s.coeffs, 1)) == [QI(0), QI(1), QI(2)]


def test_series_einsum_contracts_frame_axes_per_order():
    rng = np.random.default_rng(2)
    a = rng.normal(size=(3, 4, 4, 5))
    b = rng.normal(size=(3, 4, 5))
    got = series_einsum("ij,j->i", a, b)
    want = np.zeros((3, 4, 5))
    for i in range(3):
        for j in range(3 - i):
            want[i + j] += np.einsum("ij...,j...->i...", a[i], b[j])
    assert np.allclose(got, want)


def test_field_value_and_zero_checks():
    f = FieldValue(np.array([1e-13, -1e-13]), tol=1e-12)
    assert f.is_zero()
    assert not FieldValue(np.array([1.0, 0.0])).is_zero()
    assert is_zero(zeros((2, 2), True))


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        jet_mul(JetSeries(np.zeros((3, 2))), JetSeries(np.zeros((3, 4))))
