import random
from fractions import Fraction

import gmpy2
import pytest
from hypothesis import given, settings, strategies as st

from tm2flow import corpus, pivp, sphere
from tm2flow.poly import Polynomial, PolyVectorField


def random_field(n, deg, rng, terms=4):
    comps = []
    for _ in range(n):
        t = {}
        for _ in range(terms):
            e = [0] * n
            for _ in range(rng.randint(0, deg)):
                e[rng.randrange(n)] += 1
            t[tuple(e)] = Fraction(rng.randint(-9, 9), rng.randint(1, 5))
        comps.append(Polynomial(n, t))
    # make the top degree exact; no random coefficient can cancel 101/100
    e = [0] * n
    e[0] = deg
    comps[0] = comps[0] + Polynomial(n, {tuple(e): Fraction(101, 100)})
    return PolyVectorField(comps)


def rational_points(n, k, rng):
    return [[Fraction(rng.randint(-12, 12), rng.randint(1, 7)) for _ in range(n)] for _ in range(k)]


def test_stereo_roundtrip_and_norm():
    x = [Fraction(3, 4), Fraction(-2), Fraction(1, 9)]
    y = sphere.stereo(x)
    assert sum(v * v for v in y) == 1
    assert sphere.stereo_inv(y) == tuple(x)
    with pytest.raises(ValueError):
        sphere.stereo_inv([1, 0, 0, 0])


def test_constant_field_example():
    # P = d/dx1 on R^2 lifts (d = 0) to (1 - y0) y1 d/dy0 + ((1 - y0) - y1^2) d/dy1 - y1 y2 d/dy2
    P = PolyVectorField([Polynomial.constant(1, 2), Polynomial.zero(2)])
    X = sphere.pushforward_closed_form(P, 0)
    y0, y1, y2 = Polynomial.variables(3)
    assert X.field.components == ((1 - y0) * y1, (1 - y0) - y1 * y1, -y1 * y2)


@pytest.mark.parametrize("deg", range(0, 7))
def test_lift_identities(deg):
    rng = random.Random(deg)
    for n in (1, 2, 3):
        P = random_field(n, deg, rng)
        X, report = sphere.lift(P, samples=rational_points(n, 5, rng))
        assert report.lifted_degree == deg + 2 == X.degree
        assert report.tangent and report.north_pole_zero and report.consistency_passed


@settings(max_examples=15)
@given(st.integers(0, 4), st.integers(0, 2**16))
def test_factor_conventions_differ_by_two_to_the_d(deg, seed):
    rng = random.Random(seed)
    P = random_field(2, deg, rng)
    pts = rational_points(2, 4, rng)
    sec4 = sphere.pushforward_consistency(P, deg, pts, "sec4")
    sec6 = sphere.pushforward_consistency(P, deg, pts, "sec6")
    assert sec4.passed and sec6.passed
    for r in sec6.ratios:
        assert r is None or r == 2**deg
    assert all(r is None or r == 1 for r in sec4.ratios)


def test_consistency_detects_a_wrong_lift():
    x1, x2 = Polynomial.variables(2)
    P = PolyVectorField([x1 * x2, x2])
    X = sphere.pushforward_closed_form(P, 2)
    wrong = sphere.SphereField(X.field.scale(Fraction(3, 2)), 2)
    rep = sphere.pushforward_consistency(P, 2, [[1, 2], [Fraction(1, 3), -1]], "sec4", wrong)
    assert not rep.passed


def test_degree_too_small_is_rejected():
    x = Polynomial.variables(1)[0]
    with pytest.raises(ValueError):
        sphere.pushforward_closed_form(PolyVectorField([x * x]), 1)


def test_higher_prefactor_adds_factor():
    x1, x2 = Polynomial.variables(2)
    P = PolyVectorField([x2, -x1])
    X1 = sphere.pushforward_closed_form(P, 1).field
    X3 = sphere.pushforward_closed_form(P, 3).field
    s = 1 - Polynomial.var(0, 3)
    assert X3 == X1.scale(1).__class__([c * s * s for c in X1.components])


def test_degree_58_instance():
    rng = random.Random(56)
    n = 3
    P = random_field(n, 56, rng, terms=2)
    X, report = sphere.lift(P, samples=rational_points(n, 2, rng))
    assert P.degree() == 56 and report.lifted_degree == 58
    assert report.tangent and report.north_pole_zero and report.consistency_passed


def test_numeric_lift_matches_closed_form():
    x1, x2 = Polynomial.variables(2)
    P = PolyVectorField([x2 * x2 - x1, x1 + Fraction(1, 2)])
    d = 2
    X = sphere.pushforward_closed_form(P, d)
    numeric = sphere.NumericSphereLift(P, exponent=d)
    f = numeric.rhs_function(256)
    with gmpy2.context(gmpy2.get_context(), precision=256):
        y = sphere.stereo_mp([gmpy2.mpfr("0.3"), gmpy2.mpfr("-1.7")])
        exact = X.rhs_function(256)(y)
        approx = f(y)
    assert max(abs(a - b) for a, b in zip(exact, approx)) < 1e-70


def test_lifted_region_agrees_with_chart_region():
    m = corpus.machine("INC")
    region = pivp.build_halting_region(m, (1,), 0, k0=2)
    lifted = sphere.lift_region(region)
    for chart in ([Fraction(1, 8), 1, 0, 2], [Fraction(1, 8), Fraction(9, 8), 0, 2], [Fraction(3, 4), 1, 0, 2],
                  [Fraction(5, 2), 11, 3, Fraction(15, 8)]):
        y = sphere.stereo(chart)
        assert lifted.contains(y) == region.contains(chart)
        assert lifted.margin(y) == region.margin(chart)
    assert lifted.margin([1, 0, 0, 0, 0]) == float("inf")
    assert lifted.watch_indices == [0, 1, 2, 3, 4]


def test_report_json():
    P = PolyVectorField([Polynomial.var(0, 1)])
    _, rep = sphere.lift(P, samples=[[2]])
    assert '"tangency": true' in rep.to_json()
