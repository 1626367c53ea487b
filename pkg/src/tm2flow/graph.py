"""Hash-consed expression DAGs: constants, variables, sums, products, sin, cos.

Nodes are small tuples stored in creation order, so children always precede
parents and a node's index is a valid topological rank.  Constants are exact:
a rational times an integer power of pi, or ``cos(q pi)`` for rational ``q``.
Trig nodes never carry a constant phase: ``cos(a + q pi)`` is expanded by the
addition formula, so arguments differing only by such a shift share one
``cos a``/``sin a`` pair.  Structurally equal subexpressions
share a node, which is what lets the PIVP compiler count distinct trig
arguments by node identity.

Graphs are evaluated through generated straight-line Python code, with
``gmpy2.mpfr``, ``float`` or exact ``Fraction`` arithmetic.
"""
from __future__ import annotations

import json
import math
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import gmpy2

from .poly import Polynomial

__all__ = ["Graph", "NonPolynomialError"]


class NonPolynomialError(ValueError):
    """Raised when an exact or polynomial view is requested of a graph with trig nodes or pi."""


Node = tuple


class Graph:
    def __init__(self, nvars: int):
        self.nvars = nvars
        self.nodes: list[Node] = []
        self._index: dict[Node, int] = {}
        self._cache: dict = {}
        self._vars = [self._intern(("var", i)) for i in range(nvars)]

    def __len__(self):
        return len(self.nodes)

    def _intern(self, node: Node) -> int:
        idx = self._index.get(node)
        if idx is None:
            idx = len(self.nodes)
            self.nodes.append(node)
            self._index[node] = idx
        return idx

    # leaves ---------------------------------------------------------------

    def var(self, i: int) -> int:
        return self._vars[i]

    def add_var(self) -> int:
        """Append a fresh input variable and return its node."""
        i = self.nvars
        self.nvars += 1
        node = self._intern(("var", i))
        self._vars.append(node)
        return node

    def const(self, value, pi_power: int = 0) -> int:
        value = Fraction(value)
        if value == 0:
            pi_power = 0
        return self._intern(("const", value, pi_power))

    def pi(self, coeff=1) -> int:
        return self.const(coeff, 1)

    def const_value(self, a: int) -> tuple[Fraction, int] | None:
        node = self.nodes[a]
        if node[0] == "const":
            return node[1], node[2]
        return None

    # arithmetic -------------------------------------------------------------

    def add(self, *args: int) -> int:
        terms: list[int] = []
        consts: dict[int, Fraction] = {}
        for a in args:
            node = self.nodes[a]
            if node[0] == "add":
                stack = list(node[1])
            else:
                stack = [a]
            for b in stack:
                cv = self.const_value(b)
                if cv is not None:
                    consts[cv[1]] = consts.get(cv[1], 0) + cv[0]
                else:
                    terms.append(b)
        for p, v in sorted(consts.items()):
            if v:
                terms.append(self.const(v, p))
        if not terms:
            return self.const(0)
        if len(terms) == 1:
            return terms[0]
        return self._intern(("add", tuple(sorted(terms))))

    def mul(self, a: int, b: int) -> int:
        ca, cb = self.const_value(a), self.const_value(b)
        if ca is not None and cb is not None:
            return self.const(ca[0] * cb[0], ca[1] + cb[1])
        if cb is not None and ca is None:
            a, b, ca, cb = b, a, cb, ca
        if ca is not None:
            if ca[0] == 0:
                return self.const(0)
            if ca == (1, 0):
                return b
            nb = self.nodes[b]
            # fold nested constant factors: c1 * (c2 * x) -> (c1 c2) * x
            if nb[0] == "mul":
                inner = self.const_value(nb[1])
                if inner is not None:
                    return self.mul(self.const(ca[0] * inner[0], ca[1] + inner[1]), nb[2])
        return self._intern(("mul",) + tuple(sorted((a, b))) if ca is None else ("mul", a, b))

    def prod(self, *args: int) -> int:
        out = self.const(1)
        for a in args:
            out = self.mul(out, a)
        return out

    def scale(self, c, a: int, pi_power: int = 0) -> int:
        return self.mul(self.const(c, pi_power), a)

    def neg(self, a: int) -> int:
        return self.scale(-1, a)

    def sub(self, a: int, b: int) -> int:
        return self.add(a, self.neg(b))

    def power(self, a: int, n: int) -> int:
        if n < 0:
            raise ValueError("negative power")
        result = self.const(1)
        base = a
        while n:
            if n & 1:
                result = self.mul(result, base)
            n >>= 1
            if n:
                base = self.mul(base, base)
        return result

    _RATIONAL_COS = {Fraction(0): 1, Fraction(1, 3): Fraction(1, 2), Fraction(1, 2): 0}

    def cospi(self, q) -> int:
        """The constant ``cos(q pi)``; rational values fold to ordinary constants."""
        q = Fraction(q) % 2
        if q > 1:
            q = 2 - q
        sign = 1
        if q > Fraction(1, 2):
            q, sign = 1 - q, -1
        if q in self._RATIONAL_COS:
            return self.const(sign * self._RATIONAL_COS[q])
        node = self._intern(("cospi", q))
        return node if sign == 1 else self.neg(node)

    def sinpi(self, q) -> int:
        return self.cospi(Fraction(1, 2) - Fraction(q))

    def _phase_split(self, a: int) -> tuple[Fraction, int]:
        """Write ``a`` as ``q pi + rest`` with ``q`` the total constant coefficient of pi."""
        consts, rest = self._split(a)
        q = consts.pop(1, Fraction(0))
        if not q:
            return q, a
        extra = [self.const(v, p) for p, v in consts.items() if v]
        return q, self.add(*rest, *extra)

    def _split(self, a: int) -> tuple[dict[int, Fraction], list[int]]:
        node = self.nodes[a]
        if node[0] == "const":
            return {node[2]: node[1]}, []
        if node[0] == "add":
            consts: dict[int, Fraction] = {}
            rest: list[int] = []
            for b in node[1]:
                cb, rb = self._split(b)
                for p, v in cb.items():
                    consts[p] = consts.get(p, 0) + v
                rest.extend(rb)
            return consts, rest
        if node[0] == "mul":
            cv = self.const_value(node[1])
            if cv is not None:
                cb, rb = self._split(node[2])
                consts = {p + cv[1]: v * cv[0] for p, v in cb.items()}
                return consts, [self.mul(node[1], r) for r in rb]
        return {}, [a]

    def sin(self, a: int) -> int:
        q, rest = self._phase_split(a)
        if q:
            # sin(rest + q pi) = sin(rest) cos(q pi) + cos(rest) sin(q pi)
            return self.add(self.mul(self.sin(rest), self.cospi(q)), self.mul(self.cos(rest), self.sinpi(q)))
        cv = self.const_value(a)
        if cv is not None and cv[0] == 0:
            return self.const(0)
        return self._intern(("sin", a))

    def cos(self, a: int) -> int:
        q, rest = self._phase_split(a)
        if q:
            return self.sub(self.mul(self.cos(rest), self.cospi(q)), self.mul(self.sin(rest), self.sinpi(q)))
        cv = self.const_value(a)
        if cv is not None and cv[0] == 0:
            return self.const(1)
        return self._intern(("cos", a))

    def linear(self, coeffs: dict[int, object], constant=0) -> int:
        """``sum c_i * node_i + constant`` with rational coefficients."""
        return self.add(self.const(constant), *(self.scale(c, a) for a, c in coeffs.items()))

    def polynomial(self, p: Polynomial, inputs: Sequence[int]) -> int:
        """Embed an exact polynomial, with ``x_i`` bound to node ``inputs[i]``."""
        if len(inputs) != p.nvars:
            raise ValueError("input count does not match polynomial dimension")
        powers: dict[tuple[int, int], int] = {}

        def pw(i, e):
            if (i, e) not in powers:
                powers[(i, e)] = inputs[i] if e == 1 else self.mul(pw(i, e - 1), inputs[i])
            return powers[(i, e)]

        terms = []
        for m, c in p.sorted_terms():
            t = self.const(c)
            for i, e in enumerate(m):
                if e:
                    t = self.mul(t, pw(i, e))
            terms.append(t)
        return self.add(*terms)

    def substitute(self, src: "Graph", roots: Sequence[int], var_images: Sequence[int]) -> list[int]:
        """Copy ``roots`` of ``src`` into this graph with ``var i`` replaced by ``var_images[i]``."""
        new: dict[int, int] = {}
        for a in src.reachable(roots):
            node = src.nodes[a]
            op = node[0]
            if op == "var":
                new[a] = var_images[node[1]]
            elif op == "const":
                new[a] = self.const(node[1], node[2])
            elif op == "add":
                new[a] = self.add(*(new[c] for c in node[1]))
            elif op == "mul":
                new[a] = self.mul(new[node[1]], new[node[2]])
            elif op == "cospi":
                new[a] = self.cospi(node[1])
            elif op == "sin":
                new[a] = self.sin(new[node[1]])
            else:
                new[a] = self.cos(new[node[1]])
        return [new[a] for a in roots]

    # structure ----------------------------------------------------------------

    def children(self, a: int) -> tuple[int, ...]:
        node = self.nodes[a]
        op = node[0]
        if op == "add":
            return node[1]
        if op == "mul":
            return node[1:]
        if op in ("sin", "cos"):
            return (node[1],)
        return ()

    def reachable(self, roots: Iterable[int]) -> list[int]:
        seen = set()
        stack = list(roots)
        while stack:
            a = stack.pop()
            if a in seen:
                continue
            seen.add(a)
            stack.extend(self.children(a))
        return sorted(seen)

    def trig_nodes(self, roots: Iterable[int]) -> list[int]:
        return [a for a in self.reachable(roots) if self.nodes[a][0] in ("sin", "cos")]

    def trig_arguments(self, roots: Iterable[int]) -> list[int]:
        """Distinct argument nodes of every sin/cos reachable from ``roots``."""
        return sorted({self.nodes[a][1] for a in self.trig_nodes(roots)})

    def depends_on_vars(self, a: int) -> bool:
        key = ("dep", a)
        if key not in self._cache:
            self._cache[key] = any(self.nodes[b][0] == "var" for b in self.reachable([a]))
        return self._cache[key]

    def is_affine(self, a: int) -> bool:
        """True if ``a`` is a constant-coefficient affine combination of variables."""
        node = self.nodes[a]
        op = node[0]
        if op in ("var", "const", "cospi"):
            return True
        if op == "add":
            return all(self.is_affine(b) for b in node[1])
        if op == "mul":
            x, y = node[1], node[2]
            if not self.depends_on_vars(x):
                return self.is_affine(y)
            if not self.depends_on_vars(y):
                return self.is_affine(x)
            return False
        return not self.depends_on_vars(a)

    def degree(self, a: int) -> int:
        """Formal total degree bound of a trig-free node."""
        deg: dict[int, int] = {}
        for b in self.reachable([a]):
            node = self.nodes[b]
            op = node[0]
            if op == "var":
                deg[b] = 1
            elif op == "const":
                deg[b] = 0 if node[1] else -1
            elif op == "cospi":
                deg[b] = 0
            elif op == "add":
                deg[b] = max(deg[c] for c in node[1])
            elif op == "mul":
                deg[b] = deg[node[1]] + deg[node[2]]
            else:
                raise NonPolynomialError("degree of a trigonometric node")
        return deg[a]

    def is_polynomial(self, roots: Iterable[int]) -> bool:
        return not self.trig_nodes(roots)

    # calculus -------------------------------------------------------------------

    def time_derivatives(self, roots: Iterable[int], var_derivs: dict[int, int]) -> dict[int, int]:
        """Forward-mode symbolic d/dt of every node reachable from ``roots``.

        ``var_derivs`` maps a variable index to the node holding its derivative;
        variables absent from the map are treated as constant in time.
        """
        d: dict[int, int] = {}
        zero = self.const(0)
        for a in self.reachable(roots):
            node = self.nodes[a]
            op = node[0]
            if op == "var":
                d[a] = var_derivs.get(node[1], zero)
            elif op in ("const", "cospi"):
                d[a] = zero
            elif op == "add":
                d[a] = self.add(*(d[c] for c in node[1]))
            elif op == "mul":
                x, y = node[1], node[2]
                d[a] = self.add(self.mul(d[x], y), self.mul(x, d[y]))
            elif op == "sin":
                d[a] = self.mul(self.cos(node[1]), d[node[1]])
            elif op == "cos":
                d[a] = self.neg(self.mul(self.sin(node[1]), d[node[1]]))
        return d

    def partial(self, a: int, i: int) -> int:
        """Symbolic partial derivative with respect to variable ``i``."""
        return self.time_derivatives([a], {i: self.const(1)})[a]

    # exact views --------------------------------------------------------------

    def to_polynomial(self, a: int, nvars: int | None = None) -> Polynomial:
        n = self.nvars if nvars is None else nvars
        val: dict[int, Polynomial] = {}
        for b in self.reachable([a]):
            node = self.nodes[b]
            op = node[0]
            if op == "var":
                val[b] = Polynomial.var(node[1], n)
            elif op == "const":
                if node[2]:
                    raise NonPolynomialError("constant involves pi")
                val[b] = Polynomial.constant(node[1], n)
            elif op == "cospi":
                raise NonPolynomialError("irrational constant cos(q pi)")
            elif op == "add":
                acc = Polynomial.zero(n)
                for c in node[1]:
                    acc = acc + val[c]
                val[b] = acc
            elif op == "mul":
                val[b] = val[node[1]] * val[node[2]]
            else:
                raise NonPolynomialError("graph contains sin/cos")
        return val[a]

    # evaluation -----------------------------------------------------------------

    def compile(self, outputs: Sequence[int], backend: str = "mpfr", precision: int = 256) -> Callable:
        """Straight-line evaluator ``f(x) -> list`` for the given output nodes.

        The ``mpfr`` evaluator must be called inside a gmpy2 context of at
        least ``precision`` bits; its constants are rounded at ``precision``.
        """
        outputs = tuple(outputs)
        key = ("fn", outputs, backend, precision)
        fn = self._cache.get(key)
        if fn is not None:
            return fn
        order = self.reachable(outputs)
        consts = []
        lines = ["def _f(x):"]
        if backend == "mpfr":
            with gmpy2.context(gmpy2.get_context(), precision=precision + 16):
                pi = gmpy2.const_pi()
                const_of = lambda q, p: gmpy2.mpfr(gmpy2.mpq(q.numerator, q.denominator)) * pi**p
                cospi_of = lambda q: gmpy2.cos(gmpy2.mpfr(gmpy2.mpq(q.numerator, q.denominator)) * pi)
            sin, cos = "_sin", "_cos"
            env = {"_sin": gmpy2.sin, "_cos": gmpy2.cos}
        elif backend == "float":
            const_of = lambda q, p: float(q) * math.pi**p
            cospi_of = lambda q: math.cos(float(q) * math.pi)
            env = {"_sin": math.sin, "_cos": math.cos}
            sin, cos = "_sin", "_cos"
        elif backend == "exact":
            def const_of(q, p):
                if p:
                    raise NonPolynomialError("constant involves pi")
                return q

            def cospi_of(q):
                raise NonPolynomialError("exact evaluation of cos(q pi)")
            env = {}
            sin = cos = None
        else:
            raise ValueError(f"unknown backend {backend!r}")
        for a in order:
            node = self.nodes[a]
            op = node[0]
            if op == "var":
                lines.append(f" v{a} = x[{node[1]}]")
            elif op == "const":
                if backend == "mpfr":
                    with gmpy2.context(gmpy2.get_context(), precision=precision + 16):
                        c = const_of(node[1], node[2])
                    with gmpy2.context(gmpy2.get_context(), precision=precision):
                        c = gmpy2.mpfr(c)
                else:
                    c = const_of(node[1], node[2])
                consts.append(c)
                lines.append(f" v{a} = _c[{len(consts) - 1}]")
            elif op == "cospi":
                if backend == "mpfr":
                    with gmpy2.context(gmpy2.get_context(), precision=precision + 16):
                        c = cospi_of(node[1])
                    with gmpy2.context(gmpy2.get_context(), precision=precision):
                        c = gmpy2.mpfr(c)
                else:
                    c = cospi_of(node[1])
                consts.append(c)
                lines.append(f" v{a} = _c[{len(consts) - 1}]")
            elif op == "add":
                lines.append(f" v{a} = " + " + ".join(f"v{c}" for c in node[1]))
            elif op == "mul":
                lines.append(f" v{a} = v{node[1]} * v{node[2]}")
            else:
                if sin is None:
                    raise NonPolynomialError("exact evaluation of sin/cos")
                lines.append(f" v{a} = {sin if op == 'sin' else cos}(v{node[1]})")
        lines.append(" return [" + ", ".join(f"v{a}" for a in outputs) + "]")
        env["_c"] = consts
        exec(compile("\n".join(lines), "<graph>", "exec"), env)
        fn = env["_f"]
        self._cache[key] = fn
        return fn

    def evaluate(self, outputs: Sequence[int], point: Sequence, backend: str = "mpfr", precision: int = 256) -> list:
        fn = self.compile(outputs, backend, precision)
        if backend == "mpfr":
            with gmpy2.context(gmpy2.get_context(), precision=precision):
                return fn([gmpy2.mpfr(v) if not isinstance(v, Fraction) else
                           gmpy2.mpfr(gmpy2.mpq(v.numerator, v.denominator)) for v in point])
        if backend == "float":
            return fn([float(v) for v in point])
        return fn([Fraction(v) for v in point])

    # serialization ----------------------------------------------------------------

    def to_json_obj(self, outputs: Sequence[int]) -> dict:
        """Node list restricted to what ``outputs`` reach, renumbered densely."""
        order = self.reachable(outputs)
        renum = {a: i for i, a in enumerate(order)}
        nodes = []
        for a in order:
            node = self.nodes[a]
            op = node[0]
            if op == "var":
                nodes.append({"op": "var", "index": node[1]})
            elif op == "const":
                q = node[1]
                nodes.append({"op": "const", "value": f"{q.numerator}/{q.denominator}", "pi_power": node[2]})
            elif op == "cospi":
                q = node[1]
                nodes.append({"op": "cospi", "value": f"{q.numerator}/{q.denominator}"})
            elif op == "add":
                nodes.append({"op": "add", "args": [renum[c] for c in node[1]]})
            elif op == "mul":
                nodes.append({"op": "mul", "args": [renum[node[1]], renum[node[2]]]})
            else:
                nodes.append({"op": op, "args": [renum[node[1]]]})
        return {"nvars": self.nvars, "nodes": nodes, "outputs": [renum[a] for a in outputs]}

    @classmethod
    def from_json_obj(cls, obj: dict) -> tuple["Graph", list[int]]:
        g = cls(obj["nvars"])
        ids: list[int] = []
        for n in obj["nodes"]:
            op = n["op"]
            if op == "var":
                ids.append(g.var(n["index"]))
            elif op == "const":
                ids.append(g.const(Fraction(n["value"]), n["pi_power"]))
            elif op == "cospi":
                ids.append(g.cospi(Fraction(n["value"])))
            elif op == "add":
                ids.append(g.add(*(ids[c] for c in n["args"])))
            elif op == "mul":
                ids.append(g.mul(ids[n["args"][0]], ids[n["args"][1]]))
            elif op == "sin":
                ids.append(g.sin(ids[n["args"][0]]))
            elif op == "cos":
                ids.append(g.cos(ids[n["args"][0]]))
            else:
                raise ValueError(f"unknown node op {op!r}")
        return g, [ids[i] for i in obj["outputs"]]

    def to_json(self, outputs: Sequence[int]) -> str:
        return json.dumps(self.to_json_obj(outputs), sort_keys=True)
