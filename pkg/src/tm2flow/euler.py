"""Dimension accounting for embedding sphere fields into Euler flows on SO(N) x T^N."""
from __future__ import annotations

import json
from dataclasses import dataclass
from math import comb

__all__ = ["harmonic_capacity", "capacity_terms", "manifold_dimension", "EmbeddingReport", "headline_report"]

HEADLINE_BOUND = 10**35


def capacity_terms(n: int, d: int) -> list[int]:
    """Summands ``C(n-1+j, j) (2j+n-1)/(j+n-1)`` for ``j = 0..d+1``, each checked to be an integer."""
    if n < 2:
        raise ValueError("n must be at least 2")
    if d < 0:
        raise ValueError("d must be non-negative")
    out = []
    for j in range(d + 2):
        num = comb(n - 1 + j, j) * (2 * j + n - 1)
        q, rem = divmod(num, j + n - 1)
        if rem:
            raise ArithmeticError(f"summand j={j} of N({n},{d}) is not an integer")
        out.append(q)
    return out


def harmonic_capacity(n: int, d: int) -> int:
    return sum(capacity_terms(n, d))


def manifold_dimension(N: int) -> int:
    """``dim SO(N) + dim T^N``."""
    if N < 1:
        raise ValueError("N must be positive")
    return N * (N - 1) // 2 + N


def _scientific(v: int, digits: int = 6) -> tuple[str, int]:
    s = str(v)
    exp = len(s) - 1
    mant = s[0] + ("." + s[1:digits] if len(s) > 1 else "")
    return mant, exp


@dataclass(frozen=True)
class EmbeddingReport:
    n: int
    d: int
    N: int
    dim_M: int

    @property
    def headline_check(self) -> bool:
        return self.dim_M <= HEADLINE_BOUND

    def to_json_obj(self) -> dict:
        mant, exp = _scientific(self.dim_M)
        nm, ne = _scientific(self.N)
        return {
            "n": self.n,
            "d": self.d,
            "N": str(self.N),
            "N_scientific": f"{nm}e{ne}",
            "dim_M": str(self.dim_M),
            "dim_M_significand": mant,
            "dim_M_exponent": exp,
            "bound": "1e35",
            "headline_check": self.headline_check,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), indent=1, sort_keys=True)


def headline_report(n: int = 17, d: int = 58) -> EmbeddingReport:
    N = harmonic_capacity(n, d)
    return EmbeddingReport(n, d, N, manifold_dimension(N))
