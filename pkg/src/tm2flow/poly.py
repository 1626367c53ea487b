"""Sparse multivariate polynomials and polynomial vector fields over the rationals.

Terms live in a dict mapping exponent tuples to nonzero ``Fraction``
coefficients.  Iteration and serialization use graded-lex order (higher total
degree first, ties broken lexicographically), so JSON output is deterministic.
"""
from __future__ import annotations

import json
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Mapping, Sequence

import gmpy2

__all__ = ["Polynomial", "PolyVectorField", "grlex_key"]


def grlex_key(exps: tuple[int, ...]):
    return (-sum(exps), tuple(-e for e in exps))


def _as_fraction(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, (int, Rational)):
        return Fraction(c)
    if isinstance(c, str):
        return Fraction(c)
    raise TypeError(f"exact rational coefficient required, got {type(c).__name__}")


class Polynomial:
    __slots__ = ("nvars", "terms", "_hash")

    def __init__(self, nvars: int, terms: Mapping[tuple[int, ...], object] | None = None):
        self.nvars = nvars
        clean = {}
        for exps, c in (terms or {}).items():
            exps = tuple(exps)
            if len(exps) != nvars:
                raise ValueError(f"monomial {exps} does not have {nvars} exponents")
            if any(e < 0 for e in exps):
                raise ValueError("negative exponent")
            c = _as_fraction(c)
            if c:
                clean[exps] = clean.get(exps, 0) + c
        self.terms = {m: c for m, c in clean.items() if c}
        self._hash = None

    # construction -------------------------------------------------------

    @classmethod
    def zero(cls, nvars: int) -> "Polynomial":
        return cls(nvars)

    @classmethod
    def constant(cls, c, nvars: int) -> "Polynomial":
        return cls(nvars, {(0,) * nvars: c})

    @classmethod
    def var(cls, i: int, nvars: int) -> "Polynomial":
        """The coordinate ``x_i`` (0-based)."""
        if not 0 <= i < nvars:
            raise IndexError(f"variable {i} out of range for {nvars} variables")
        exps = [0] * nvars
        exps[i] = 1
        return cls(nvars, {tuple(exps): 1})

    @classmethod
    def variables(cls, nvars: int) -> list["Polynomial"]:
        return [cls.var(i, nvars) for i in range(nvars)]

    # basic properties ---------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int:
        """Total degree; the zero polynomial has degree -1."""
        return max((sum(m) for m in self.terms), default=-1)

    def degree_in(self, i: int) -> int:
        return max((m[i] for m in self.terms), default=-1)

    def sorted_terms(self) -> list[tuple[tuple[int, ...], Fraction]]:
        return sorted(self.terms.items(), key=lambda t: grlex_key(t[0]))

    def constant_term(self) -> Fraction:
        return self.terms.get((0,) * self.nvars, Fraction(0))

    def __eq__(self, other):
        if isinstance(other, Polynomial):
            return self.nvars == other.nvars and self.terms == other.terms
        if isinstance(other, (int, Fraction)):
            return self == Polynomial.constant(other, self.nvars)
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.nvars, frozenset(self.terms.items())))
        return self._hash

    def __repr__(self):
        return f"Polynomial({self.nvars}, {self})"

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for exps, c in self.sorted_terms():
            mono = "*".join(
                f"x{i}" if e == 1 else f"x{i}^{e}" for i, e in enumerate(exps) if e
            )
            if not mono:
                parts.append(str(c))
            elif c == 1:
                parts.append(mono)
            elif c == -1:
                parts.append("-" + mono)
            else:
                parts.append(f"{c}*{mono}")
        return " + ".join(parts).replace("+ -", "- ")

    # arithmetic ----------------------------------------------------------

    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            if other.nvars != self.nvars:
                raise ValueError(f"dimension mismatch: {self.nvars} vs {other.nvars}")
            return other
        return Polynomial.constant(_as_fraction(other), self.nvars)

    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self.terms)
        for m, c in other.terms.items():
            out[m] = out.get(m, 0) + c
        return Polynomial(self.nvars, out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.nvars, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            c = _as_fraction(other)
            return Polynomial(self.nvars, {m: c * v for m, v in self.terms.items()})
        other = self._coerce(other)
        out: dict[tuple[int, ...], Fraction] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = tuple(a + b for a, b in zip(m1, m2))
                out[m] = out.get(m, 0) + c1 * c2
        return Polynomial(self.nvars, out)

    __rmul__ = __mul__

    def __truediv__(self, c):
        c = _as_fraction(c)
        return self * (1 / c)

    def __pow__(self, n: int):
        if n < 0:
            raise ValueError("negative power")
        result = Polynomial.constant(1, self.nvars)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    # calculus and composition --------------------------------------------

    def partial(self, i: int) -> "Polynomial":
        """Formal derivative with respect to ``x_i`` (0-based)."""
        if not 0 <= i < self.nvars:
            raise IndexError(f"variable {i} out of range for {self.nvars} variables")
        out = {}
        for m, c in self.terms.items():
            if m[i]:
                mm = list(m)
                mm[i] -= 1
                out[tuple(mm)] = c * m[i]
        return Polynomial(self.nvars, out)

    def substitute(self, assignment: Mapping[int, "Polynomial"] | Sequence["Polynomial"]) -> "Polynomial":
        """Compose: replace ``x_i`` by ``assignment[i]``.

        A sequence must cover every variable; a mapping may leave variables
        that do not occur in ``self`` unassigned.  All images share one
        ambient dimension, which becomes the result's.
        """
        if isinstance(assignment, Mapping):
            images = dict(assignment)
        else:
            if len(assignment) != self.nvars:
                raise ValueError(f"need {self.nvars} images, got {len(assignment)}")
            images = dict(enumerate(assignment))
        used = {i for m in self.terms for i, e in enumerate(m) if e}
        missing = used - images.keys()
        if missing:
            raise ValueError(f"no image for variables {sorted(missing)}")
        dims = {p.nvars for p in images.values()}
        if len(dims) > 1:
            raise ValueError("images have mismatched dimensions")
        n = dims.pop() if dims else self.nvars
        powers: dict[tuple[int, int], Polynomial] = {}

        def power(i, e):
            key = (i, e)
            if key not in powers:
                powers[key] = images[i] if e == 1 else power(i, e - 1) * images[i]
            return powers[key]

        out = Polynomial.zero(n)
        for m, c in self.terms.items():
            term = Polynomial.constant(c, n)
            for i, e in enumerate(m):
                if e:
                    term = term * power(i, e)
            out = out + term
        return out

    def evaluate(self, point: Sequence, mode: str = "exact", precision: int = 256):
        """Value at ``point``: exact ``Fraction`` or a ``gmpy2.mpfr`` of ``precision`` bits.

        In float mode the exact rational is computed first and rounded once,
        so the result is correctly rounded whenever the point is rational.
        """
        if len(point) != self.nvars:
            raise ValueError(f"point has {len(point)} coordinates, expected {self.nvars}")
        if mode == "exact":
            pt = [_as_fraction(x) for x in point]
            total = Fraction(0)
            for m, c in self.terms.items():
                v = c
                for x, e in zip(pt, m):
                    if e:
                        v *= x**e
                total += v
            return total
        if mode == "float":
            if precision < 64:
                raise ValueError("float mode needs at least 64 bits")
            if all(isinstance(x, (int, Fraction)) for x in point):
                exact = self.evaluate(point, "exact")
                with gmpy2.context(precision=precision):
                    return gmpy2.mpfr(gmpy2.mpq(exact.numerator, exact.denominator))
            with gmpy2.context(precision=precision):
                pt = [gmpy2.mpfr(x) for x in point]
                total = gmpy2.mpfr(0)
                for m, c in self.terms.items():
                    v = gmpy2.mpfr(gmpy2.mpq(c.numerator, c.denominator))
                    for x, e in zip(pt, m):
                        if e:
                            v *= x**e
                    total += v
                return total
        raise ValueError(f"unknown evaluation mode {mode!r}")

    def __call__(self, *point):
        return self.evaluate(point)

    def reduce_mod_sphere(self) -> "Polynomial":
        """Normal form modulo ``x0^2 + ... + x_{n-1}^2 - 1``.

        Repeatedly rewrites ``x0^2`` as ``1 - x1^2 - ...``; the result has
        degree at most one in ``x0`` and vanishes iff ``self`` lies in the ideal.
        """
        n = self.nvars
        rest = Polynomial.constant(1, n)
        for i in range(1, n):
            rest = rest - Polynomial.var(i, n) ** 2
        rest_powers = [Polynomial.constant(1, n)]
        out: dict[tuple[int, ...], Fraction] = {}
        for m, c in self.terms.items():
            if m[0] < 2:
                out[m] = out.get(m, 0) + c
                continue
            half, odd = divmod(m[0], 2)
            while len(rest_powers) <= half:
                rest_powers.append(rest_powers[-1] * rest)
            # rest has no x0, so every product has degree <= 1 in x0
            for rm, rc in rest_powers[half].terms.items():
                key = (odd,) + tuple(a + b for a, b in zip(m[1:], rm[1:]))
                out[key] = out.get(key, 0) + c * rc
        return Polynomial(n, out)

    # serialization -------------------------------------------------------

    def to_json_obj(self) -> dict:
        return {
            "terms": [
                {"exponents": list(m), "coefficient": f"{c.numerator}/{c.denominator}"}
                for m, c in self.sorted_terms()
            ]
        }

    @classmethod
    def from_json_obj(cls, obj: dict, nvars: int) -> "Polynomial":
        return cls(nvars, {tuple(t["exponents"]): Fraction(t["coefficient"]) for t in obj["terms"]})

    def to_json(self) -> str:
        return json.dumps({"dimension": self.nvars, **self.to_json_obj()}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Polynomial":
        obj = json.loads(text)
        return cls.from_json_obj(obj, obj["dimension"])


class PolyVectorField:
    """``sum_i F_i d/dx_i`` with every ``F_i`` a :class:`Polynomial` in ``n`` variables."""

    __slots__ = ("components",)

    def __init__(self, components: Iterable[Polynomial]):
        comps = tuple(components)
        if not comps:
            raise ValueError("a vector field needs at least one component")
        n = len(comps)
        for p in comps:
            if p.nvars != n:
                raise ValueError(f"component in {p.nvars} variables, field has dimension {n}")
        self.components = comps

    @property
    def dimension(self) -> int:
        return len(self.components)

    def degree(self) -> int:
        return max(p.degree() for p in self.components)

    def __eq__(self, other):
        return isinstance(other, PolyVectorField) and self.components == other.components

    def __hash__(self):
        return hash(self.components)

    def __getitem__(self, i) -> Polynomial:
        return self.components[i]

    def __add__(self, other: "PolyVectorField"):
        return PolyVectorField(a + b for a, b in zip(self.components, other.components))

    def scale(self, factor) -> "PolyVectorField":
        return PolyVectorField(p * factor for p in self.components)

    def evaluate(self, point, mode: str = "exact", precision: int = 256) -> list:
        return [p.evaluate(point, mode, precision) for p in self.components]

    def is_zero(self) -> bool:
        return all(p.is_zero() for p in self.components)

    def rhs_function(self, precision: int = 256):
        """Numeric right-hand side on sequences of ``mpfr``; coefficients rounded at ``precision`` bits."""
        with gmpy2.context(gmpy2.get_context(), precision=precision):
            terms = [[(exps, gmpy2.mpfr(gmpy2.mpq(c.numerator, c.denominator))) for exps, c in p.sorted_terms()]
                     for p in self.components]

        def rhs(y):
            out = []
            for tl in terms:
                acc = gmpy2.mpfr(0)
                for exps, c in tl:
                    m = c
                    for v, e in zip(y, exps):
                        if e:
                            m = m * v**e
                    acc = acc + m
                out.append(acc)
            return out

        return rhs

    def to_json_obj(self) -> dict:
        return {
            "dimension": self.dimension,
            "components": [p.to_json_obj() for p in self.components],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), sort_keys=True, indent=1)

    @classmethod
    def from_json_obj(cls, obj: dict) -> "PolyVectorField":
        n = obj["dimension"]
        comps = [Polynomial.from_json_obj(c, n) for c in obj["components"]]
        if len(comps) != n:
            raise ValueError(f"field of dimension {n} has {len(comps)} components")
        return cls(comps)

    @classmethod
    def from_json(cls, text: str) -> "PolyVectorField":
        return cls.from_json_obj(json.loads(text))
