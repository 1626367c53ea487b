"""Turing machines over the decimal alphabet and their integer encoding.

This is the exact discrete oracle: every analytic or numerical construction
elsewhere in the package is checked against :func:`step`, :func:`run` and
:func:`delta_encoded`.

States are ``1..r`` with ``1`` the initial state and ``r`` the halting state.
The alphabet is ``0..9`` with ``0`` the blank.  Move ``+1`` is a left shift of
the tape (new ``t[i]`` is old ``t[i+1]``), so the head effectively walks right.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping

__all__ = [
    "ALPHABET",
    "MachineSyntaxError",
    "WindowOverflow",
    "TuringMachine",
    "Tape",
    "Configuration",
    "EncodedConfig",
    "RunOutcome",
    "parse_machine",
    "parse_tape",
    "format_tape",
    "step",
    "run",
    "encode",
    "decode",
    "delta_encoded",
    "output_matches",
]

ALPHABET = range(10)
DEFAULT_K0 = 3


class MachineSyntaxError(ValueError):
    """Malformed machine description; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class WindowOverflow(RuntimeError):
    """A non-blank symbol would leave the tape window ``-k0..k0``."""


Rule = tuple[int, int, int]


@dataclass(frozen=True)
class TuringMachine:
    r: int
    delta: Mapping[tuple[int, int], Rule]
    name: str = "machine"

    def __post_init__(self):
        if self.r < 2:
            raise ValueError("a machine needs at least two states")
        table = {}
        for q in range(1, self.r):
            for s in ALPHABET:
                rule = self.delta.get((q, s), (self.r, s, 0))
                q2, w, m = rule
                if not 1 <= q2 <= self.r or w not in ALPHABET or m not in (-1, 0, 1):
                    raise ValueError(f"invalid rule {(q, s)} -> {rule}")
                table[(q, s)] = (q2, w, m)
        # the halting state is never consulted; store the fixpoint rule anyway
        for s in ALPHABET:
            table[(self.r, s)] = (self.r, s, 0)
        object.__setattr__(self, "delta", table)

    @property
    def q_halt(self) -> int:
        return self.r

    def rule(self, q: int, s: int) -> Rule:
        return self.delta[(q, s)]

    def to_text(self) -> str:
        lines = [f"states {self.r}", f"name {self.name}"]
        for q in range(1, self.r):
            for s in ALPHABET:
                q2, w, m = self.delta[(q, s)]
                if (q2, w, m) != (self.r, s, 0):
                    lines.append(f"{q},{s} -> {q2},{w},{m}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Tape:
    """Symbols at positions ``-k0..k0``; everything outside is blank."""

    k0: int
    cells: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if self.k0 < 0:
            raise ValueError("window radius must be nonnegative")
        cells = tuple(self.cells) or (0,) * (2 * self.k0 + 1)
        if len(cells) != 2 * self.k0 + 1:
            raise ValueError(f"expected {2 * self.k0 + 1} cells, got {len(cells)}")
        if any(c not in ALPHABET for c in cells):
            raise ValueError("tape symbols must lie in 0..9")
        object.__setattr__(self, "cells", cells)

    @classmethod
    def blank(cls, k0: int = DEFAULT_K0) -> "Tape":
        return cls(k0)

    @classmethod
    def from_dict(cls, symbols: Mapping[int, int], k0: int = DEFAULT_K0) -> "Tape":
        cells = [0] * (2 * k0 + 1)
        for i, s in symbols.items():
            if abs(i) > k0:
                if s:
                    raise WindowOverflow(f"symbol at {i} outside window {k0}")
                continue
            cells[i + k0] = s
        return cls(k0, tuple(cells))

    def __getitem__(self, i: int) -> int:
        if abs(i) > self.k0:
            return 0
        return self.cells[i + self.k0]

    def window(self, k: int) -> tuple[int, ...]:
        return tuple(self[i] for i in range(-k, k + 1))

    def __str__(self) -> str:
        return format_tape(self)


@dataclass(frozen=True)
class Configuration:
    q: int
    tape: Tape


@dataclass(frozen=True)
class EncodedConfig:
    y1: int
    y2: int
    q: int

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.y1, self.y2, self.q)

    def __str__(self) -> str:
        return f"({self.y1}, {self.y2}, {self.q})"


@dataclass(frozen=True)
class RunOutcome:
    halted: bool
    steps: int
    config: Configuration

    @property
    def tape(self) -> Tape:
        return self.config.tape


_RULE_RE = re.compile(r"^(\d+)\s*,\s*(\d+)\s*->\s*(\d+)\s*,\s*(\d+)\s*,\s*(-?\d+)$")


def parse_machine(text: str) -> TuringMachine:
    """Parse the line-oriented machine format.

    ``states <r>`` is required, ``name <text>`` optional, and each rule line
    reads ``q,s -> q',s',m``.  Omitted entries halt in place.
    """
    r = None
    name = "machine"
    rules: dict[tuple[int, int], Rule] = {}
    pending: list[tuple[int, tuple[int, int], Rule]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("states"):
            parts = line.split()
            if len(parts) != 2 or not parts[1].isdigit():
                raise MachineSyntaxError("expected 'states <r>'", lineno)
            if r is not None:
                raise MachineSyntaxError("duplicate 'states' line", lineno)
            r = int(parts[1])
            if r < 2:
                raise MachineSyntaxError("need at least 2 states", lineno)
            continue
        if line.startswith("name"):
            name = line[4:].strip() or name
            continue
        m = _RULE_RE.match(line)
        if not m:
            raise MachineSyntaxError(f"cannot parse rule {line!r}", lineno)
        q, s, q2, w, mv = map(int, m.groups())
        if mv not in (-1, 0, 1):
            raise MachineSyntaxError(f"move must be -1, 0 or 1, got {mv}", lineno)
        if s > 9 or w > 9:
            raise MachineSyntaxError("symbols must lie in 0..9", lineno)
        if (q, s) in rules:
            raise MachineSyntaxError(f"duplicate rule for ({q},{s})", lineno)
        rules[(q, s)] = (q2, w, mv)
        pending.append((lineno, (q, s), (q2, w, mv)))
    if r is None:
        raise MachineSyntaxError("missing 'states <r>' line")
    for lineno, (q, _), (q2, _, _) in pending:
        if not 1 <= q <= r:
            raise MachineSyntaxError(f"state index {q} out of range 1..{r}", lineno)
        if q == r:
            raise MachineSyntaxError(f"rules for the halting state {r} are not allowed", lineno)
        if not 1 <= q2 <= r:
            raise MachineSyntaxError(f"state index {q2} out of range 1..{r}", lineno)
    return TuringMachine(r, rules, name)


def parse_tape(literal: str, k0: int = DEFAULT_K0) -> Tape:
    """Parse ``left|right``, e.g. ``3|72`` is t[-1]=3, t[0]=7, t[1]=2."""
    if literal.count("|") != 1:
        raise ValueError(f"tape literal needs exactly one '|': {literal!r}")
    left, right = literal.split("|")
    if (left + right) and not (left + right).isdigit():
        raise ValueError(f"tape literal must be digits: {literal!r}")
    symbols = {}
    for i, ch in enumerate(reversed(left), start=1):
        symbols[-i] = int(ch)
    for i, ch in enumerate(right):
        symbols[i] = int(ch)
    return Tape.from_dict(symbols, k0)


def format_tape(tape: Tape) -> str:
    left = "".join(str(tape[i]) for i in range(-tape.k0, 0)).lstrip("0")
    right = "".join(str(tape[i]) for i in range(0, tape.k0 + 1)).rstrip("0")
    return f"{left}|{right}"


def step(machine: TuringMachine, config: Configuration) -> Configuration:
    q, tape = config.q, config.tape
    if q == machine.q_halt:
        return config
    q2, w, mv = machine.rule(q, tape[0])
    k0 = tape.k0
    cells = list(tape.cells)
    cells[k0] = w
    if mv == 1:
        if cells[0]:
            raise WindowOverflow(f"symbol {cells[0]} pushed past position -{k0}")
        cells = cells[1:] + [0]
    elif mv == -1:
        if cells[-1]:
            raise WindowOverflow(f"symbol {cells[-1]} pushed past position {k0}")
        cells = [0] + cells[:-1]
    return Configuration(q2, Tape(k0, tuple(cells)))


def run(machine: TuringMachine, tape: Tape, max_steps: int) -> RunOutcome:
    if max_steps < 0:
        raise ValueError("max_steps must be nonnegative")
    config = Configuration(1, tape)
    for j in range(max_steps + 1):
        if config.q == machine.q_halt:
            return RunOutcome(True, j, config)
        if j == max_steps:
            break
        config = step(machine, config)
    return RunOutcome(False, max_steps, config)


def encode(config: Configuration) -> EncodedConfig:
    tape = config.tape
    y1 = sum(tape[i] * 10**i for i in range(tape.k0 + 1))
    y2 = sum(tape[-i] * 10 ** (i - 1) for i in range(1, tape.k0 + 1))
    return EncodedConfig(y1, y2, config.q)


def decode(enc: EncodedConfig, k0: int = DEFAULT_K0) -> Configuration:
    y1, y2 = enc.y1, enc.y2
    if y1 < 0 or y2 < 0:
        raise ValueError("encodings are nonnegative")
    if y1 >= 10 ** (k0 + 1):
        raise ValueError(f"y1={y1} exceeds the 10^{k0 + 1} bound for k0={k0}")
    if y2 >= 10**k0:
        raise ValueError(f"y2={y2} exceeds the 10^{k0} bound for k0={k0}")
    symbols = {}
    for i in range(k0 + 1):
        y1, symbols[i] = divmod(y1, 10)
    for i in range(1, k0 + 1):
        y2, symbols[-i] = divmod(y2, 10)
    return Configuration(enc.q, Tape.from_dict(symbols, k0))


def delta_encoded(machine: TuringMachine, enc: EncodedConfig) -> EncodedConfig:
    """One machine step carried out on ``(y1, y2, q)`` with integer arithmetic.

    The window radius plays no role here: any nonnegative pair is a tape.
    Points with ``q`` outside ``1..r`` and halting points are fixed.
    """
    y1, y2, q = enc.y1, enc.y2, enc.q
    if not 1 <= q < machine.r or y1 < 0 or y2 < 0:
        return enc
    u1, u2 = y1 % 10, y2 % 10
    q2, w, mv = machine.rule(q, u1)
    if mv == 0:
        return EncodedConfig(y1 - u1 + w, y2, q2)
    if mv == 1:
        return EncodedConfig((y1 - u1) // 10, 10 * y2 + w, q2)
    return EncodedConfig(u2 + 10 * (y1 - u1 + w), (y2 - u2) // 10, q2)


def output_matches(tape: Tape, t_star, k: int) -> bool:
    t_star = tuple(t_star)
    if len(t_star) != 2 * k + 1:
        raise ValueError(f"output window of radius {k} needs {2 * k + 1} symbols")
    return tape.window(k) == t_star
