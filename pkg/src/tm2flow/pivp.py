"""Compile trig-bearing ODEs into polynomial ones, plus the clocked simulator and its halting region.

For every distinct trig argument ``a`` the compiler adds a pair
``(u, v) = (cos a, sin a)`` with ``u' = -a' v`` and ``v' = a' u``, where ``a'``
is the symbolic time derivative of ``a`` along the (already rewritten) vector
field.  Arguments may themselves contain trig nodes; their derivatives then
refer to earlier pairs, so the closure is still polynomial.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import gmpy2

from .analytic import AnalyticMap, RobustnessCert, sigma_k
from .graph import Graph, NonPolynomialError
from .machine import EncodedConfig, TuringMachine
from .poly import PolyVectorField

__all__ = [
    "NonAffineArgument",
    "CertificationError",
    "AnalyticSystem",
    "AutonomousPolyODE",
    "ClockedSystem",
    "RegionSpec",
    "pivp_compile",
    "build_clocked_system",
    "autonomize",
    "build_halting_region",
    "region_margin",
    "DEFAULT_GAIN",
    "DEFAULT_SHARPNESS",
]

DEFAULT_GAIN = Fraction(40)
DEFAULT_SHARPNESS = 12


class NonAffineArgument(ValueError):
    pass


class CertificationError(RuntimeError):
    pass


@dataclass
class AnalyticSystem:
    """``x' = f(x)`` with ``f`` given by graph nodes, possibly containing sin/cos."""

    graph: Graph
    rhs: list[int]
    roles: dict[str, list[int]] = field(default_factory=dict)

    @property
    def dimension(self) -> int:
        return len(self.rhs)

    def evaluate(self, point, precision: int = 256) -> list:
        return self.graph.evaluate(self.rhs, point, "mpfr", precision)


@dataclass
class AutonomousPolyODE:
    """Polynomial ODE stored as a trig-free circuit over ``dimension`` variables.

    ``aux_pairs`` lists, per auxiliary pair, the argument node in the source
    system's graph and the indices of its (cos, sin) variables.
    """

    graph: Graph
    rhs: list[int]
    roles: dict[str, list[int]]
    source: AnalyticSystem
    aux_pairs: list[tuple[int, int, int]]

    @property
    def dimension(self) -> int:
        return len(self.rhs)

    @property
    def base_dimension(self) -> int:
        return self.source.dimension

    def degree(self) -> int:
        return max(self.graph.degree(a) for a in self.rhs)

    def rhs_function(self, precision: int = 256):
        return self.graph.compile(self.rhs, "mpfr", precision)

    def evaluate(self, point, precision: int = 256) -> list:
        return self.graph.evaluate(self.rhs, point, "mpfr", precision)

    def initial_point(self, base_point: Sequence, precision: int = 256) -> list:
        """Extend a base-variable point with the matching (cos, sin) auxiliaries."""
        base = list(base_point)
        if len(base) != self.base_dimension:
            raise ValueError(f"base point needs {self.base_dimension} coordinates")
        args = [a for a, _, _ in self.aux_pairs]
        with gmpy2.context(gmpy2.get_context(), precision=precision):
            pt = [_to_mpfr(v) for v in base]
            vals = self.source.graph.compile(args, "mpfr", precision)(pt) if args else []
            out = pt + [gmpy2.mpfr(0)] * (2 * len(args))
            for val, (_, iu, iv) in zip(vals, self.aux_pairs):
                out[iu] = gmpy2.cos(val)
                out[iv] = gmpy2.sin(val)
        return out

    def pair_residuals(self, point) -> list:
        return [point[iu] ** 2 + point[iv] ** 2 - 1 for _, iu, iv in self.aux_pairs]

    def to_field(self) -> PolyVectorField:
        """Expanded sparse form; raises if a coefficient involves pi."""
        return PolyVectorField(self.graph.to_polynomial(a, self.dimension) for a in self.rhs)

    def to_json_obj(self) -> dict:
        try:
            body = {"field": self.to_field().to_json_obj()}
        except NonPolynomialError:
            body = {"circuit": self.graph.to_json_obj(self.rhs)}
        return {
            "dimension": self.dimension,
            **body,
            "variables": {k: list(v) for k, v in sorted(self.roles.items())},
            "initial_template": {
                "base_dimension": self.base_dimension,
                "aux_arguments": self.source.graph.to_json_obj([a for a, _, _ in self.aux_pairs]),
                "aux_indices": [[iu, iv] for _, iu, iv in self.aux_pairs],
            },
        }


def _to_mpfr(v):
    if isinstance(v, Fraction):
        return gmpy2.mpfr(gmpy2.mpq(v.numerator, v.denominator))
    return gmpy2.mpfr(v)


def pivp_compile(system: AnalyticSystem, require_affine: bool = False) -> AutonomousPolyODE:
    """Replace every sin/cos by auxiliary variables with polynomial derivatives.

    The compiled dimension is ``n + 2 * (number of distinct trig arguments)``.
    With ``require_affine`` every argument must be affine in the base variables.
    """
    src = system.graph
    n = system.dimension
    args = src.trig_arguments(system.rhs)
    if require_affine:
        for a in args:
            if not src.is_affine(a):
                raise NonAffineArgument(f"trig argument node {a} is not affine")
    # process arguments innermost-first (node order is topological)
    args.sort()
    g = Graph(n + 2 * len(args))
    pair_of = {a: (n + 2 * i, n + 2 * i + 1) for i, a in enumerate(args)}
    new: dict[int, int] = {}

    def rewrite(roots):
        for a in src.reachable(roots):
            if a in new:
                continue
            node = src.nodes[a]
            op = node[0]
            if op == "var":
                new[a] = g.var(node[1])
            elif op == "const":
                new[a] = g.const(node[1], node[2])
            elif op == "cospi":
                new[a] = g.cospi(node[1])
            elif op == "add":
                new[a] = g.add(*(new[c] for c in node[1]))
            elif op == "mul":
                new[a] = g.mul(new[node[1]], new[node[2]])
            elif op == "cos":
                new[a] = g.var(pair_of[node[1]][0])
            else:
                new[a] = g.var(pair_of[node[1]][1])
        return [new[a] for a in roots]

    base_rhs = rewrite(system.rhs)
    var_derivs = {i: base_rhs[i] for i in range(n)}
    rhs = list(base_rhs) + [None] * (2 * len(args))
    for a in args:
        (arg_node,) = rewrite([a])
        # derivatives of earlier pairs are already registered in var_derivs
        d = g.time_derivatives([arg_node], var_derivs)[arg_node]
        iu, iv = pair_of[a]
        du = g.neg(g.mul(d, g.var(iv)))
        dv = g.mul(d, g.var(iu))
        rhs[iu], rhs[iv] = du, dv
        var_derivs[iu], var_derivs[iv] = du, dv
    roles = {k: list(v) for k, v in system.roles.items()}
    roles["aux"] = list(range(n, n + 2 * len(args)))
    return AutonomousPolyODE(g, rhs, roles, system, [(a, *pair_of[a]) for a in args])


@dataclass
class ClockedSystem:
    """Two-phase simulator of a step map, driven by an explicit time variable.

    Variables are ``z1 = (0, 1, 2)``, ``z2 = (3, 4, 5)`` and the time ``tau = 6``.
    In phase A (``sin 2 pi tau > 0``) ``z2`` is pulled toward ``F(sigma_k(z1))``;
    in phase B ``z1`` is pulled toward ``sigma_k(z2)``.  One full period applies
    ``sigma_k o F o sigma_k``.
    """

    graph: Graph
    rhs: list[int]
    gain: Fraction
    sharpness: int
    stages: int
    phase_a: int
    phase_b: int
    fmap: AnalyticMap
    cert: RobustnessCert | None = None


def build_clocked_system(
    fmap: AnalyticMap,
    stages: int,
    gain=DEFAULT_GAIN,
    sharpness: int = DEFAULT_SHARPNESS,
    cert: RobustnessCert | None = None,
    require_cert: bool = True,
) -> ClockedSystem:
    """Assemble the clocked system for the unrobustified map ``fmap``.

    ``cert`` must be a passing certificate for ``robustify(fmap, stages)``.
    """
    if require_cert:
        if cert is None:
            raise CertificationError("a robustness certificate is required")
        if not cert.passed:
            raise CertificationError(f"certificate failed; witness {cert.witness}")
    gain = Fraction(gain)
    g = Graph(7)
    z1 = [g.var(i) for i in range(3)]
    z2 = [g.var(3 + i) for i in range(3)]
    tau = g.var(6)
    s = g.sin(g.scale(2, tau, pi_power=1))
    half = Fraction(1, 2)
    phase_a = g.power(g.add(g.const(half), g.scale(half, s)), sharpness)
    phase_b = g.power(g.sub(g.const(half), g.scale(half, s)), sharpness)
    target = g.substitute(fmap.graph, fmap.outputs, [sigma_k(g, z, stages) for z in z1])
    settle = [sigma_k(g, z, stages) for z in z2]
    rhs = [g.scale(gain, g.mul(phase_b, g.sub(settle[i], z1[i]))) for i in range(3)]
    rhs += [g.scale(gain, g.mul(phase_a, g.sub(target[i], z2[i]))) for i in range(3)]
    return ClockedSystem(g, rhs, gain, sharpness, stages, phase_a, phase_b, fmap, cert)


def autonomize(clocked: ClockedSystem) -> AutonomousPolyODE:
    """Prepend a clock ``omega' = 1`` in place of explicit time and compile to polynomial form.

    Coordinates of the result: ``omega = 0``, ``z1 = 1..3``, ``z2 = 4..6``, then auxiliaries.
    """
    g = Graph(7)
    images = [g.var(1 + i) for i in range(6)] + [g.var(0)]
    rhs = g.substitute(clocked.graph, clocked.rhs, images)
    system = AnalyticSystem(
        g,
        [g.const(1)] + rhs,
        {"omega": [0], "z1": [1, 2, 3], "z2": [4, 5, 6]},
    )
    ode = pivp_compile(system)
    ode.roles["clock"] = [0]
    return ode


def initial_state(ode: AutonomousPolyODE, enc: EncodedConfig, precision: int = 256) -> list:
    """``omega = 0``, ``z1 = z2 = enc``, auxiliaries consistent with that point."""
    x = enc.as_tuple()
    return ode.initial_point([0, *x, *x], precision)


# halting region ----------------------------------------------------------------


@dataclass(frozen=True)
class RegionSpec:
    """``V x U_eps x R^m`` with ``V`` the union of ``(i, i + delta_v)`` over ``i >= 0``.

    ``U_eps`` is the open sup-norm ``eps``-neighbourhood of all halting
    encodings whose tape shows ``t_star`` at positions ``-k..k``.
    """

    delta_v: Fraction
    eps: Fraction
    k: int
    t_star: tuple[int, ...]
    machine: str
    r: int
    k0: int
    omega_index: int = 0
    z1_index: tuple[int, int, int] = (1, 2, 3)

    def __post_init__(self):
        if not 0 < self.delta_v <= Fraction(1, 2):
            raise ValueError("window width must lie in (0, 1/2]")
        if not 0 < self.eps or 2 * self.eps >= 1:
            raise ValueError("tube radius must satisfy 0 < eps < 1/2")
        if len(self.t_star) != 2 * self.k + 1:
            raise ValueError(f"output window of radius {self.k} needs {2 * self.k + 1} symbols")
        if self.k > self.k0:
            raise ValueError("output window exceeds the tape window")
        if any(s not in range(10) for s in self.t_star):
            raise ValueError("output symbols must lie in 0..9")

    @property
    def y1_residue(self) -> tuple[int, int]:
        c = sum(self.t_star[self.k + i] * 10**i for i in range(self.k + 1))
        return c, 10 ** (self.k + 1)

    @property
    def y2_residue(self) -> tuple[int, int]:
        c = sum(self.t_star[self.k - i] * 10 ** (i - 1) for i in range(1, self.k + 1))
        return c, 10**self.k

    def window_distance(self, omega):
        """Signed distance of ``omega`` to ``V``: negative inside, positive outside."""
        if omega <= 0:
            return -omega
        frac = omega - _floor(omega)
        if frac == 0:
            return frac
        if frac < self.delta_v:
            return -min(frac, self.delta_v - frac)
        return min(frac - self.delta_v, 1 - frac)

    def tube_distance(self, z1) -> object:
        """Sup-norm distance from ``z1`` to the admissible halting encodings."""
        a, b, q = z1
        c1, m1 = self.y1_residue
        c2, m2 = self.y2_residue
        d1 = _progression_distance(a, c1, m1, 10 ** (self.k0 + 1) - 1)
        d2 = _progression_distance(b, c2, m2, 10**self.k0 - 1)
        return max(d1, d2, abs(q - self.r))

    @property
    def watch_indices(self) -> list[int]:
        return [self.omega_index, *self.z1_index]

    def clock(self, point):
        return point[self.omega_index]

    def margin(self, point):
        z1 = [point[i] for i in self.z1_index]
        return max(self.window_distance(point[self.omega_index]), self.tube_distance(z1) - self.eps)

    def contains(self, point) -> bool:
        return self.margin(point) < 0

    def nearest_admissible(self, z1) -> EncodedConfig:
        a, b, _ = z1
        c1, m1 = self.y1_residue
        c2, m2 = self.y2_residue
        y1 = _progression_nearest(a, c1, m1, 10 ** (self.k0 + 1) - 1)
        y2 = _progression_nearest(b, c2, m2, 10**self.k0 - 1)
        return EncodedConfig(y1, y2, self.r)

    def admissible_points(self) -> list[EncodedConfig]:
        """Brute-force enumeration; only sensible for small ``k0``."""
        c1, m1 = self.y1_residue
        c2, m2 = self.y2_residue
        return [
            EncodedConfig(y1, y2, self.r)
            for y1 in range(c1, 10 ** (self.k0 + 1), m1)
            for y2 in range(c2, 10**self.k0, m2)
        ]

    def to_json_obj(self) -> dict:
        return {
            "delta_v": str(self.delta_v),
            "eps": str(self.eps),
            "k": self.k,
            "t_star": list(self.t_star),
            "machine": self.machine,
            "r": self.r,
            "k0": self.k0,
        }

    @classmethod
    def from_json_obj(cls, obj: dict) -> "RegionSpec":
        return cls(
            Fraction(obj["delta_v"]), Fraction(obj["eps"]), obj["k"], tuple(obj["t_star"]),
            obj["machine"], obj["r"], obj["k0"],
        )

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), sort_keys=True)


def _floor(x):
    if isinstance(x, (int, Fraction)):
        return int(x // 1)
    return int(gmpy2.floor(x)) if not isinstance(x, float) else int(x // 1)


def _progression_nearest(a, c: int, m: int, top: int) -> int:
    last = c + m * ((top - c) // m)
    lo = c + m * _floor((a - c) / m)
    cands = [min(max(v, c), last) for v in (lo, lo + m)]
    return min(cands, key=lambda v: abs(a - v))


def _progression_distance(a, c: int, m: int, top: int):
    return abs(a - _progression_nearest(a, c, m, top))


def build_halting_region(
    machine: TuringMachine,
    t_star: Sequence[int],
    k: int,
    eps=Fraction(1, 8),
    delta_v=Fraction(1, 4),
    k0: int = 3,
) -> RegionSpec:
    return RegionSpec(Fraction(delta_v), Fraction(eps), k, tuple(t_star), machine.name, machine.r, k0)


def region_margin(region: RegionSpec, point):
    return region.margin(point)


class LoadedODE:
    """A compiled system read back from JSON: enough to integrate and to build initial points."""

    def __init__(self, graph: Graph, rhs: list[int], roles: dict, base_dimension: int,
                 aux_graph: Graph | None, aux_args: list[int], aux_indices: list[tuple[int, int]]):
        self.graph = graph
        self.rhs = rhs
        self.roles = roles
        self.base_dimension = base_dimension
        self.aux_graph = aux_graph
        self.aux_args = aux_args
        self.aux_pairs = [(a, iu, iv) for a, (iu, iv) in zip(aux_args, aux_indices)]

    @property
    def dimension(self) -> int:
        return len(self.rhs)

    def rhs_function(self, precision: int = 256):
        return self.graph.compile(self.rhs, "mpfr", precision)

    def initial_point(self, base_point: Sequence, precision: int = 256) -> list:
        base = list(base_point)
        if len(base) != self.base_dimension:
            raise ValueError(f"base point needs {self.base_dimension} coordinates")
        with gmpy2.context(gmpy2.get_context(), precision=precision):
            pt = [_to_mpfr(v) for v in base]
            out = pt + [gmpy2.mpfr(0)] * (2 * len(self.aux_args))
            if self.aux_args:
                vals = self.aux_graph.compile(self.aux_args, "mpfr", precision)(pt)
                for val, (_, iu, iv) in zip(vals, self.aux_pairs):
                    out[iu] = gmpy2.cos(val)
                    out[iv] = gmpy2.sin(val)
        return out


def field_graph(fld: PolyVectorField) -> tuple[Graph, list[int]]:
    """Circuit form of an expanded polynomial field."""
    g = Graph(fld.dimension)
    xs = [g.var(i) for i in range(fld.dimension)]
    return g, [g.polynomial(p, xs) for p in fld.components]


def load_ode(obj: dict) -> LoadedODE:
    """Inverse of :meth:`AutonomousPolyODE.to_json_obj`; a bare field JSON is accepted too."""
    if "components" in obj:
        fld = PolyVectorField.from_json_obj(obj)
        g, rhs = field_graph(fld)
        return LoadedODE(g, rhs, {}, fld.dimension, None, [], [])
    if "field" in obj:
        g, rhs = field_graph(PolyVectorField.from_json_obj(obj["field"]))
    else:
        g, rhs = Graph.from_json_obj(obj["circuit"])
    tmpl = obj["initial_template"]
    aux_graph, aux_args = Graph.from_json_obj(tmpl["aux_arguments"])
    return LoadedODE(g, rhs, obj.get("variables", {}), tmpl["base_dimension"], aux_graph, aux_args,
                     [tuple(p) for p in tmpl["aux_indices"]])
