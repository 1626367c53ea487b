from math import comb

import pytest
from hypothesis import given, strategies as st

from tm2flow import euler


def test_small_cases():
    assert euler.harmonic_capacity(2, 1) == 9
    for d in range(21):
        assert euler.harmonic_capacity(2, d) == (d + 2) ** 2


@given(st.integers(2, 20), st.integers(0, 60))
def test_terms_are_integers_and_match_harmonic_dimensions(n, d):
    terms = euler.capacity_terms(n, d)
    assert len(terms) == d + 2
    # dimension of degree-j spherical harmonics on S^n: C(n+j, j) - C(n+j-2, j-2)
    for j, t in enumerate(terms):
        harm = comb(n + j, j) - (comb(n + j - 2, j - 2) if j >= 2 else 0)
        assert t == harm


def test_headline_numbers():
    rep = euler.headline_report(17, 58)
    assert rep.N == 67897436626471500
    assert rep.dim_M == rep.N * (rep.N - 1) // 2 + rep.N
    assert rep.dim_M == 2305030950222856807255988469360750
    assert rep.headline_check
    obj = rep.to_json_obj()
    assert obj["dim_M_exponent"] == 33 and obj["dim_M_significand"].startswith("2.305")


def test_errors():
    with pytest.raises(ValueError):
        euler.capacity_terms(1, 3)
    with pytest.raises(ValueError):
        euler.capacity_terms(3, -1)
    with pytest.raises(ValueError):
        euler.manifold_dimension(0)
    assert euler.manifold_dimension(3) == 6
