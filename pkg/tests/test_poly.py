import json
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from tm2flow.poly import Polynomial, PolyVectorField

N = 3
coeffs = st.fractions(min_value=-5, max_value=5, max_denominator=7)
monos = st.tuples(*[st.integers(0, 3)] * N)
polys = st.dictionaries(monos, coeffs, max_size=5).map(lambda t: Polynomial(N, t))
points = st.tuples(*[st.fractions(min_value=-3, max_value=3, max_denominator=5)] * N)


@given(polys, polys, polys)
def test_ring_axioms(a, b, c):
    assert a + b == b + a
    assert a * b == b * a
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c
    assert a - a == Polynomial.zero(N)


@given(polys, polys, points)
def test_evaluation_is_a_homomorphism(a, b, x):
    assert (a * b).evaluate(x) == a.evaluate(x) * b.evaluate(x)
    assert (a + b).evaluate(x) == a.evaluate(x) + b.evaluate(x)


@given(polys, polys, st.integers(0, N - 1))
def test_leibniz_rule(a, b, i):
    assert (a * b).partial(i) == a.partial(i) * b + a * b.partial(i)


@given(polys, points)
def test_partial_against_difference_quotient(p, x):
    # exact: p(x + h e_i) - p(x) is a polynomial in h whose linear coefficient is the partial
    i = 0
    h = Polynomial.var(0, 1)
    shifted = p.substitute([Polynomial.constant(x[j], 1) + (h if j == i else 0) for j in range(N)])
    linear = shifted.terms.get((1,), Fraction(0))
    assert linear == p.partial(i).evaluate(x)


@given(polys)
def test_json_roundtrip(p):
    assert Polynomial.from_json(p.to_json()) == p


@given(polys, points)
def test_float_mode_is_correctly_rounded(p, x):
    exact = p.evaluate(x)
    assert p.evaluate(x, "float", 256) == pytest.approx(float(exact), rel=1e-15, abs=1e-300)


def test_degree_and_pow():
    x, y, z = Polynomial.variables(3)
    p = (x + y * z) ** 3
    assert p.degree() == 6
    assert p.degree_in(0) == 3
    assert p.evaluate([1, 2, 3]) == 343


@given(polys)
def test_sphere_ideal_membership(p):
    n = N
    sphere = sum((v * v for v in Polynomial.variables(n)), Polynomial.constant(-1, n))
    assert (p * sphere).reduce_mod_sphere().is_zero()


@given(polys)
def test_reduction_preserves_values_on_the_sphere(p):
    # rational points on S^2 from Pythagorean quadruples
    for a, b, c, d in [(1, 2, 2, 3), (2, 3, 6, 7), (1, 4, 8, 9), (4, 4, 7, 9)]:
        pt = [Fraction(a, d), Fraction(-b, d), Fraction(c, d)]
        assert p.reduce_mod_sphere().evaluate(pt) == p.evaluate(pt)
    assert p.reduce_mod_sphere().degree_in(0) <= 1


def test_field_json_roundtrip():
    x, y = Polynomial.variables(2)
    F = PolyVectorField([x * y - 1, Polynomial.constant(Fraction(2, 3), 2)])
    assert PolyVectorField.from_json(F.to_json()) == F
    assert json.loads(F.to_json())["dimension"] == 2
    assert F.degree() == 2
    assert F.evaluate([2, 5]) == [9, Fraction(2, 3)]


def test_bad_monomials():
    with pytest.raises(ValueError):
        Polynomial(2, {(1,): 1})
    with pytest.raises(ValueError):
        Polynomial(2, {(1, -1): 1})
