"""Stereographic lift of polynomial fields from R^n to the unit sphere in R^(n+1).

The chart is ``y0 = (r^2 - 1)/(1 + r^2)``, ``y_k = 2 x_k/(1 + r^2)`` with the
north pole ``(1, 0, ..., 0)`` removed.  A field ``P = sum F_i d/dx_i`` of degree
at most ``d`` lifts to the polynomial field ``X = (1 - y0)^d phi_* P`` of
degree at most ``d + 2``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import gmpy2

from .poly import Polynomial, PolyVectorField

__all__ = [
    "SphereField",
    "LiftReport",
    "ConsistencyReport",
    "SphereRegion",
    "NumericSphereLift",
    "stereo",
    "stereo_inv",
    "stereo_mp",
    "stereo_inv_mp",
    "pushforward_closed_form",
    "verify_tangency",
    "vanishes_at_north_pole",
    "pushforward_consistency",
    "lift",
    "lift_region",
]

FACTORS = ("sec4", "sec6")


def stereo(x: Sequence) -> tuple[Fraction, ...]:
    x = [Fraction(v) for v in x]
    r2 = sum(v * v for v in x)
    den = 1 + r2
    return ((r2 - 1) / den, *(2 * v / den for v in x))


def stereo_inv(y: Sequence) -> tuple[Fraction, ...]:
    y = [Fraction(v) for v in y]
    if y[0] == 1:
        raise ValueError("the north pole has no chart image")
    return tuple(v / (1 - y[0]) for v in y[1:])


def stereo_mp(x: Sequence) -> list:
    r2 = sum(v * v for v in x)
    den = 1 + r2
    return [(r2 - 1) / den, *(2 * v / den for v in x)]


def stereo_inv_mp(y: Sequence) -> list:
    s = 1 - y[0]
    if s == 0:
        raise ValueError("the north pole has no chart image")
    return [v / s for v in y[1:]]


@dataclass(frozen=True)
class SphereField:
    field: PolyVectorField
    source_degree: int
    source_id: str = ""

    @property
    def dimension(self) -> int:
        return self.field.dimension

    @property
    def degree(self) -> int:
        return self.field.degree()

    def evaluate(self, point, mode: str = "exact", precision: int = 256) -> list:
        return self.field.evaluate(point, mode, precision)

    def rhs_function(self, precision: int = 256):
        return self.field.rhs_function(precision)


def pushforward_closed_form(P: PolyVectorField, d: int, source_id: str = "") -> SphereField:
    """``(1 - y0)^d phi_* P`` as an exact polynomial field in ``y0..yn``."""
    n = P.dimension
    if P.degree() > d:
        raise ValueError(f"prefactor degree {d} cannot clear a field of degree {P.degree()}")
    m = n + 1
    y = Polynomial.variables(m)
    s = 1 - y[0]
    s_pow = [Polynomial.constant(1, m)]
    for _ in range(d):
        s_pow.append(s_pow[-1] * s)
    homog = []
    for comp in P.components:
        if comp.nvars != n:
            raise ValueError("component arity does not match field dimension")
        h = Polynomial.zero(m)
        by_deg: dict[int, dict] = {}
        for exps, c in comp.terms.items():
            by_deg.setdefault(sum(exps), {})[(0, *exps)] = c
        for e, terms in by_deg.items():
            h = h + Polynomial(m, terms) * s_pow[d - e]
        homog.append(h)
    radial = Polynomial.zero(m)
    for i, h in enumerate(homog):
        radial = radial + h * y[i + 1]
    comps = [s * radial]
    comps += [homog[j] * s - y[j + 1] * radial for j in range(n)]
    return SphereField(PolyVectorField(comps), d, source_id)


def verify_tangency(X) -> bool:
    """True iff ``<X, y>`` lies in the ideal of the unit sphere."""
    fld = X.field if isinstance(X, SphereField) else X
    m = fld.dimension
    y = Polynomial.variables(m)
    inner = Polynomial.zero(m)
    for i in range(m):
        inner = inner + y[i] * fld[i]
    return inner.reduce_mod_sphere().is_zero()


def vanishes_at_north_pole(X) -> bool:
    fld = X.field if isinstance(X, SphereField) else X
    pole = [Fraction(1)] + [Fraction(0)] * (fld.dimension - 1)
    return all(v == 0 for v in fld.evaluate(pole))


def _factor(x: Sequence[Fraction], d: int, which: str) -> Fraction:
    if which not in FACTORS:
        raise ValueError(f"factor must be one of {FACTORS}")
    r2 = sum(v * v for v in x)
    base = Fraction(1) / (1 + r2) ** d
    return base * 2**d if which == "sec4" else base


@dataclass
class ConsistencyReport:
    samples: int
    factor: str
    mismatches: list = field(default_factory=list)
    ratios: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.mismatches

    def to_json_obj(self) -> dict:
        return {"samples": self.samples, "factor": self.factor, "passed": self.passed,
                "mismatches": [[str(v) for v in x] for x in self.mismatches]}


def pushforward_consistency(P: PolyVectorField, d: int, points: Sequence[Sequence], factor: str = "sec4",
                            lifted: SphereField | None = None) -> ConsistencyReport:
    """Compare ``D stereo(x) . (c(x) P(x))`` with ``X(stereo(x))`` exactly at each point.

    ``c`` is ``2^d/(1+r^2)^d`` for ``"sec4"`` (equality expected) or
    ``1/(1+r^2)^d`` for ``"sec6"``, where the two sides differ by exactly
    ``2^d``; ``ratios`` records the observed ratio per sample.
    """
    X = lifted or pushforward_closed_form(P, d)
    n = P.dimension
    report = ConsistencyReport(len(points), factor)
    for x in points:
        x = [Fraction(v) for v in x]
        y = stereo(x)
        s = 1 - y[0]
        c = _factor(x, d, factor)
        px = [c * v for v in P.evaluate(x)]
        push = [sum(s * y[i + 1] * px[i] for i in range(n))]
        push += [sum(((s if k == i else 0) - y[k + 1] * y[i + 1]) * px[i] for i in range(n)) for k in range(n)]
        target = X.evaluate(list(y))
        expected = target if factor == "sec4" else [v / 2**d for v in target]
        if push != expected:
            report.mismatches.append(tuple(x))
        nz = [(a, b) for a, b in zip(target, push) if b != 0]
        report.ratios.append(nz[0][0] / nz[0][1] if nz else None)
    return report


@dataclass
class LiftReport:
    source_degree: int
    lifted_degree: int
    tangent: bool
    north_pole_zero: bool
    consistency_samples: int
    consistency_passed: bool

    def to_json_obj(self) -> dict:
        return {
            "source_degree": self.source_degree,
            "lifted_degree": self.lifted_degree,
            "tangency": self.tangent,
            "north_pole_zero": self.north_pole_zero,
            "consistency_samples": self.consistency_samples,
            "consistency_passed": self.consistency_passed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), indent=1, sort_keys=True)


def lift(P: PolyVectorField, d: int | None = None, samples: Sequence[Sequence] = (),
         factor: str = "sec4", source_id: str = "") -> tuple[SphereField, LiftReport]:
    """Lift ``P`` with prefactor degree ``d`` (default: its degree) and verify the result."""
    d = P.degree() if d is None else d
    d = max(d, 0)
    X = pushforward_closed_form(P, d, source_id)
    cons = pushforward_consistency(P, d, samples, factor, X) if samples else None
    report = LiftReport(
        source_degree=P.degree(),
        lifted_degree=X.degree,
        tangent=verify_tangency(X),
        north_pole_zero=vanishes_at_north_pole(X),
        consistency_samples=len(samples),
        consistency_passed=True if cons is None else cons.passed,
    )
    return X, report


@dataclass(frozen=True)
class SphereRegion:
    """Pullback of a chart region; the north pole is outside by definition."""

    chart_region: object

    @property
    def delta_v(self):
        return self.chart_region.delta_v

    @property
    def watch_indices(self) -> list[int]:
        return [0, *(1 + i for i in self.chart_region.watch_indices)]

    def clock(self, y):
        return self.chart_region.clock(_ChartView(y))

    def margin(self, y):
        if y[0] == 1:
            return float("inf")
        return self.chart_region.margin(_ChartView(y))

    def contains(self, y) -> bool:
        return self.margin(y) < 0


class _ChartView:
    """Lazy chart coordinates of a sphere point; only the requested entries are computed."""

    def __init__(self, y):
        self.y = y
        self.s = 1 - y[0]
        if self.s == 0:
            raise ValueError("the north pole has no chart image")

    def __getitem__(self, i):
        return self.y[i + 1] / self.s


def lift_region(region) -> SphereRegion:
    return SphereRegion(region)


class NumericSphereLift:
    """Pushforward of a chart field given only as a numeric right-hand side.

    Evaluates ``(1 - y0)^e phi_* P`` directly from ``P(stereo_inv(y))``.  For
    ``e >= deg P`` this is the polynomial lift; smaller ``e`` gives a positive
    rescaling of it on the punctured sphere with the same oriented orbits.
    """

    def __init__(self, chart_field, exponent: int = 0):
        self.chart_field = chart_field
        self.exponent = exponent
        self.dimension = chart_field.dimension + 1

    def rhs_function(self, precision: int = 256):
        f = self.chart_field.rhs_function(precision)
        e = self.exponent

        def rhs(y):
            s = 1 - y[0]
            x = [v / s for v in y[1:]]
            F = f(x)
            radial = sum(a * b for a, b in zip(F, y[1:]))
            scale = s**e if e else 1
            return [scale * s * radial] + [scale * (s * Fj - yj * radial) for Fj, yj in zip(F, y[1:])]

        return rhs

    def to_sphere(self, x):
        return stereo_mp(x)

    def to_chart(self, y):
        return stereo_inv_mp(y)
