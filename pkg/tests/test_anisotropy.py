from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anisolab import ExponentError, validate_exponents
from anisolab.anisotropy import barenblatt_exponents, check_range, harmonic_mean


def exact_exponents(p):
    """Rational-arithmetic evaluation of pbar, lambda, alpha, alpha_i."""
    p = [Fraction(v).limit_denominator(10**6) for v in p]
    n = len(p)
    pbar = n / sum(1 / v for v in p)
    lam = n * (pbar - 2) + pbar
    alpha = n / lam
    return pbar, lam, alpha, [(1 + 2 * alpha) / v - alpha for v in p]


def test_isotropic_21():
    P = validate_exponents([2.1, 2.1, 2.1], 3)
    assert P.pbar == pytest.approx(2.1, abs=1e-15)
    assert P.lam == pytest.approx(2.4, abs=1e-14)
    assert P.alpha == pytest.approx(1.25, abs=1e-14)
    assert P.alpha_i == pytest.approx((5 / 12,) * 3, abs=1e-14)
    assert P.in_range


def test_two_dimensional_boundary_case_out_of_range():
    P = validate_exponents([2.0, 2.0], 2)
    assert P.pbar == 2.0
    assert not P.in_range
    with pytest.raises(ExponentError):
        P.require_range()


@pytest.mark.parametrize("bad", [[3.0, 2.5], [1.0, 2.0], [0.5], [2.0, np.nan], [2.0, np.inf], []])
def test_rejects_bad_vectors(bad):
    with pytest.raises(ExponentError):
        validate_exponents(bad)


def test_dimension_mismatch():
    with pytest.raises(ExponentError):
        validate_exponents([2.1, 2.2], 3)


@pytest.mark.parametrize("p, expected", [((2, 2), 2.0), ((2, 4), 8 / 3), ((2.1, 2.1, 2.1), 2.1)])
def test_harmonic_mean(p, expected):
    assert harmonic_mean(p) == pytest.approx(expected, rel=1e-15)


def test_barenblatt_against_rational_evaluation():
    p = (2.05, 2.10, 2.16)
    P = validate_exponents(p)
    lam, alpha, alpha_i = barenblatt_exponents(P)
    pbar, lam_x, alpha_x, ai_x = exact_exponents(p)
    assert P.pbar == pytest.approx(float(pbar), rel=1e-14)
    assert lam == pytest.approx(float(lam_x), rel=1e-13)
    assert alpha == pytest.approx(float(alpha_x), rel=1e-13)
    assert np.allclose(alpha_i, [float(a) for a in ai_x], rtol=1e-12)
    assert abs(sum(alpha_i) - alpha) < 1e-12
    assert alpha_i[0] > alpha_i[1] > alpha_i[2] > 0


def test_isotropic_alpha_i_split_evenly():
    P = validate_exponents([2.6] * 4)
    assert np.allclose(P.alpha_i, P.alpha / 4, rtol=1e-14)


def test_one_dimensional_params_constructible_out_of_range():
    P = validate_exponents([3.0])
    assert P.N == 1 and not P.in_range


ascending = st.integers(1, 6).flatmap(
    lambda n: st.lists(st.floats(1.05, 6.0), min_size=n, max_size=n).map(sorted))


@settings(max_examples=300, deadline=None)
@given(ascending)
def test_identities_hold(p):
    P = validate_exponents(p)
    if np.isfinite(P.alpha):
        assert abs(sum(P.alpha_i) - P.alpha) <= 1e-12 * max(1.0, abs(P.alpha))
    assert min(p) - 1e-12 <= P.pbar <= max(p) + 1e-12
    if len(set(p)) > 1:
        assert min(p) < P.pbar < max(p)
    assert P.pbar2 == pytest.approx(P.pbar * (1 + 2 / P.N))
    pb = len(p) / sum(1 / v for v in p)
    assert P.in_range == (p[0] > 2 and p[-1] < pb * (1 + 1 / len(p)) and pb < len(p))
    if P.in_range:
        assert all(a > 0 for a in P.alpha_i)
    again = validate_exponents(list(P.p))
    assert repr(again) == repr(P)


def test_in_range_requires_three_dimensions():
    assert not check_range([2.1, 2.1])
    assert check_range([2.1, 2.1, 2.1])


def test_frozen():
    P = validate_exponents([2.1, 2.2, 2.3])
    with pytest.raises(Exception):
        P.pbar = 3.0
