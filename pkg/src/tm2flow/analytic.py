"""Analytic extension of the encoded transition map.

The map ``F(y1, y2, q)`` is assembled from three gadgets:

* a digit kernel ``K(u) = (1/10) sum_{k=0}^{9} cos(pi k u / 5)``, which is 1 on
  multiples of 10 and 0 on the other integers;
* ``mod10(x) = sum_s s K(x - s)``, reading the digit under the head;
* bivariate Lagrange interpolants of the transition table on ``{1..r} x {0..9}``,
  blended over the three move branches with quadratic selectors.

It agrees with :func:`tm2flow.machine.delta_encoded` at every integer encoding.
Robustness to perturbations comes from ``sigma(x) = x - sin(2 pi x) / 5``,
which fixes the integers and contracts nearby points by ``|1 - 2 pi / 5|``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import gmpy2
import numpy as np

from .graph import Graph
from .machine import EncodedConfig, TuringMachine, delta_encoded, encode, run, step, Configuration, Tape
from .poly import Polynomial

__all__ = [
    "SIGMA_AMPLITUDE",
    "AnalyticMap",
    "RobustnessCert",
    "digit_kernel",
    "mod10",
    "sigma",
    "sigma_k",
    "move_selectors",
    "interpolate_transition",
    "build_analytic_step",
    "robustify",
    "verify_robustness",
    "sigma_contraction_bound",
    "reachable_encodings",
]

SIGMA_AMPLITUDE = Fraction(1, 5)


def digit_kernel(g: Graph, u: int) -> int:
    terms = [g.cos(g.scale(Fraction(k, 5), u, pi_power=1)) for k in range(10)]
    return g.scale(Fraction(1, 10), g.add(*terms))


def mod10(g: Graph, x: int) -> int:
    return g.add(*(g.scale(s, digit_kernel(g, g.add(x, g.const(-s)))) for s in range(1, 10)))


def sigma(g: Graph, x: int) -> int:
    return g.sub(x, g.scale(SIGMA_AMPLITUDE, g.sin(g.scale(2, x, pi_power=1))))


def sigma_k(g: Graph, x: int, k: int) -> int:
    for _ in range(k):
        x = sigma(g, x)
    return x


def move_selectors(g: Graph, e: int) -> dict[int, int]:
    """Quadratics that are 1 at their own move in {-1, 0, 1} and 0 at the others."""
    one = g.const(1)
    e_minus_1 = g.sub(e, one)
    e_plus_1 = g.add(e, one)
    return {
        -1: g.scale(Fraction(1, 2), g.mul(e, e_minus_1)),
        0: g.neg(g.mul(e_minus_1, e_plus_1)),
        1: g.scale(Fraction(1, 2), g.mul(e, e_plus_1)),
    }


def _lagrange_basis(nodes: Sequence[int], i: int) -> Polynomial:
    x = Polynomial.var(0, 1)
    out = Polynomial.constant(1, 1)
    for j, nj in enumerate(nodes):
        if j != i:
            out = out * (x - nj) / (nodes[i] - nj)
    return out


def _tensor_interpolant(values: dict[tuple[int, int], int], qs: Sequence[int], ss: Sequence[int]) -> Polynomial:
    bq = [_lagrange_basis(qs, i) for i in range(len(qs))]
    bs = [_lagrange_basis(ss, j) for j in range(len(ss))]
    out = Polynomial.zero(2)
    for i, q in enumerate(qs):
        lq = Polynomial(2, {(m[0], 0): c for m, c in bq[i].terms.items()})
        for j, s in enumerate(ss):
            v = values[(q, s)]
            if v:
                ls = Polynomial(2, {(0, m[0]): c for m, c in bs[j].terms.items()})
                out = out + lq * ls * v
    return out


def interpolate_transition(machine: TuringMachine) -> tuple[Polynomial, Polynomial, Polynomial]:
    """Exact interpolants ``(Qnext, Wsym, Emove)`` in the variables ``(q, s)``."""
    qs = list(range(1, machine.r + 1))
    ss = list(range(10))
    tables = [{}, {}, {}]
    for q in qs:
        for s in ss:
            for t, v in zip(tables, machine.rule(q, s)):
                t[(q, s)] = v
    return tuple(_tensor_interpolant(t, qs, ss) for t in tables)


def _step_nodes(g: Graph, machine: TuringMachine, y1: int, y2: int, q: int,
                interpolants=None) -> list[int]:
    qn_p, w_p, e_p = interpolants or interpolate_transition(machine)
    u1 = mod10(g, y1)
    u2 = mod10(g, y2)
    qn = g.polynomial(qn_p, [q, u1])
    w = g.polynomial(w_p, [q, u1])
    e = g.polynomial(e_p, [q, u1])
    sel = move_selectors(g, e)
    cleared = g.sub(y1, u1)
    written = g.add(cleared, w)
    branches = {
        0: (written, y2),
        1: (g.scale(Fraction(1, 10), cleared), g.add(g.scale(10, y2), w)),
        -1: (g.add(u2, g.scale(10, written)), g.scale(Fraction(1, 10), g.sub(y2, u2))),
    }
    out1 = g.add(*(g.mul(sel[m], b[0]) for m, b in branches.items()))
    out2 = g.add(*(g.mul(sel[m], b[1]) for m, b in branches.items()))
    return [out1, out2, qn]


@dataclass
class AnalyticMap:
    """A map R^3 -> R^3 stored as an expression graph over variables (y1, y2, q)."""

    graph: Graph
    outputs: list[int]
    machine: TuringMachine
    stages: int = 0
    meta: dict = field(default_factory=dict)

    def evaluate(self, point, precision: int = 256) -> list:
        return self.graph.evaluate(self.outputs, point, "mpfr", precision)

    def evaluate_float(self, point) -> list[float]:
        return self.graph.evaluate(self.outputs, point, "float")

    def __call__(self, point, precision: int = 256) -> list:
        return self.evaluate(point, precision)

    def rounded(self, enc: EncodedConfig, precision: int = 256) -> EncodedConfig:
        vals = self.evaluate(enc.as_tuple(), precision)
        return EncodedConfig(*(int(gmpy2.rint(v)) for v in vals))

    def trig_arguments_affine(self) -> bool:
        return all(self.graph.is_affine(a) for a in self.graph.trig_arguments(self.outputs))

    def to_json_obj(self) -> dict:
        return {
            "machine": self.machine.name,
            "sigma_stages": self.stages,
            "graph": self.graph.to_json_obj(self.outputs),
        }


def build_analytic_step(machine: TuringMachine) -> AnalyticMap:
    g = Graph(3)
    outs = _step_nodes(g, machine, g.var(0), g.var(1), g.var(2))
    return AnalyticMap(g, outs, machine, 0, {"name": machine.name})


def robustify(fmap: AnalyticMap, k: int) -> AnalyticMap:
    """``sigma_k o F o sigma_k`` applied componentwise; ``k = 0`` returns a copy of ``F``."""
    if k < 0:
        raise ValueError("stage count must be nonnegative")
    g = Graph(3)
    inner = [sigma_k(g, g.var(i), k) for i in range(3)]
    mid = g.substitute(fmap.graph, fmap.outputs, inner)
    outs = [sigma_k(g, m, k) for m in mid]
    return AnalyticMap(g, outs, fmap.machine, fmap.stages + k, dict(fmap.meta))


# robustness certification ----------------------------------------------------


@dataclass
class RobustnessCert:
    eps_in: Fraction
    eps_out: Fraction
    samples: int
    worst_error: float
    precision: int
    corpus_id: str
    passed: bool
    witness: tuple | None = None
    configurations: int = 0

    def to_json_obj(self) -> dict:
        return {
            "eps_in": str(self.eps_in),
            "eps_out": str(self.eps_out),
            "samples": self.samples,
            "worst_error": self.worst_error,
            "precision": self.precision,
            "corpus_id": self.corpus_id,
            "passed": self.passed,
            "witness": None if self.witness is None else [str(v) for v in self.witness],
            "configurations": self.configurations,
        }


def reachable_encodings(machine: TuringMachine, tapes: Sequence[Tape], max_steps: int = 20) -> list[EncodedConfig]:
    """Every encoding visited by the machine from each tape within ``max_steps``."""
    seen: dict[tuple, EncodedConfig] = {}
    for tape in tapes:
        config = Configuration(1, tape)
        for _ in range(max_steps + 1):
            enc = encode(config)
            seen.setdefault(enc.as_tuple(), enc)
            if config.q == machine.q_halt:
                break
            config = step(machine, config)
    return list(seen.values())


def _perturbations(eps: Fraction, samples: int, rng: np.random.Generator) -> list[tuple[Fraction, ...]]:
    corners = [tuple(Fraction(s) * eps for s in signs) for signs in itertools.product((-1, 1), repeat=3)]
    out = corners[:samples]
    denom = 2**20
    while len(out) < samples:
        ints = rng.integers(-denom, denom + 1, size=3)
        out.append(tuple(eps * Fraction(int(v), denom) for v in ints))
    return out


def verify_robustness(
    fmap: AnalyticMap,
    configs: Sequence[EncodedConfig],
    eps_in=Fraction(1, 4),
    samples: int = 1000,
    precision: int = 256,
    seed: int = 0,
    corpus_id: str = "",
) -> RobustnessCert:
    """Check ``|F(x + d) - Delta(x)|_inf <= eps_in`` for sampled ``|d|_inf <= eps_in``.

    The eight corners of the perturbation cube are always among the samples.
    A failure is reported in the certificate together with the offending point.
    """
    eps_in = Fraction(eps_in)
    if eps_in > Fraction(1, 4) or eps_in < 0:
        raise ValueError("perturbation radius must lie in [0, 1/4]")
    if samples < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    fn = fmap.graph.compile(fmap.outputs, "mpfr", precision)
    worst = gmpy2.mpfr(0)
    witness = None
    passed = True
    deltas = _perturbations(eps_in, samples, rng) if eps_in else [(Fraction(0),) * 3]
    with gmpy2.context(gmpy2.get_context(), precision=precision):
        tol = gmpy2.mpfr(eps_in)
        for enc in configs:
            target = delta_encoded(fmap.machine, enc).as_tuple()
            base = enc.as_tuple()
            for d in deltas:
                pt = [gmpy2.mpfr(gmpy2.mpq(b + di)) for b, di in zip(base, d)]
                vals = fn(pt)
                err = max(abs(v - t) for v, t in zip(vals, target))
                if err > worst:
                    worst = err
                    if err > tol or (eps_in == 0 and err > gmpy2.mpfr(2) ** (-precision // 2)):
                        passed = False
                        witness = tuple(b + di for b, di in zip(base, d))
    return RobustnessCert(
        eps_in=eps_in,
        eps_out=eps_in if passed else Fraction(worst.as_integer_ratio()[0], worst.as_integer_ratio()[1]),
        samples=len(deltas),
        worst_error=float(worst),
        precision=precision,
        corpus_id=corpus_id or fmap.machine.name,
        passed=passed,
        witness=witness,
        configurations=len(configs),
    )


def sigma_contraction_bound(radius=Fraction(1, 8), grid: int = 20001, precision: int = 256) -> float:
    """Upper bound on ``|sigma(n + e) - n| / |e|`` over ``0 < |e| <= radius``.

    The ratio ``|e - sin(2 pi e)/5| / |e|`` is even in ``e``, so the positive
    half suffices.  The bound is the grid maximum plus a slack of the ratio's
    derivative bound times the grid spacing.
    """
    radius = Fraction(radius)
    with gmpy2.context(gmpy2.get_context(), precision=precision):
        two_pi = 2 * gmpy2.const_pi()
        amp = gmpy2.mpfr(gmpy2.mpq(SIGMA_AMPLITUDE.numerator, SIGMA_AMPLITUDE.denominator))
        r = gmpy2.mpfr(gmpy2.mpq(radius.numerator, radius.denominator))
        best = abs(1 - amp * two_pi)  # limit at e -> 0
        h = r / (grid - 1)
        for i in range(1, grid):
            e = h * i
            ratio = abs(e - amp * gmpy2.sin(two_pi * e)) / e
            best = max(best, ratio)
        # |d/de (sin(a e)/e)| <= a^2 / 2 for all e > 0, with a = 2 pi
        slack = amp * two_pi**2 / 2 * h
        return float(best + slack)
