"""Small reference machines and (input, output-window) cases used in tests and demos."""
from __future__ import annotations

from dataclasses import dataclass

from .machine import TuringMachine, parse_machine, parse_tape, Tape

MACHINE_TEXTS = {
    "INC": """\
states 2
name INC
# write a 1 under the head and halt
1,0 -> 2,1,0
""",
    "SHIFTR": """\
states 2
name SHIFTR
# walk right over non-blank symbols, halt on the first blank
1,0 -> 2,0,0
"""
    + "".join(f"1,{s} -> 1,{s},1\n" for s in range(1, 10)),
    "LOOP": """\
states 2
name LOOP
# never reaches the halting state
"""
    + "".join(f"1,{s} -> 1,{s},0\n" for s in range(10)),
    "COPY": """\
states 4
name COPY
# duplicate a leading 1 one cell to the right, step back, halt
1,1 -> 2,1,1
2,0 -> 3,1,-1
3,1 -> 4,1,0
""",
    "PARITY": """\
states 3
name PARITY
# scan a block of 1s; on the blank write its parity and halt
1,1 -> 2,1,1
2,1 -> 1,1,1
1,0 -> 3,0,0
2,0 -> 3,1,0
""",
}


def machine(name: str) -> TuringMachine:
    return parse_machine(MACHINE_TEXTS[name])


def all_machines() -> dict[str, TuringMachine]:
    return {name: machine(name) for name in MACHINE_TEXTS}


@dataclass(frozen=True)
class HaltCase:
    machine: str
    tape: str
    k0: int
    k: int
    t_star: tuple[int, ...]

    def input_tape(self) -> Tape:
        return parse_tape(self.tape, self.k0)


# every halting case has oracle halting time <= 10; the INC case with t_star=(2)
# halts with a different window, so the orbit must never enter its region
HALT_CASES = (
    HaltCase("INC", "|", 1, 0, (1,)),
    HaltCase("INC", "|", 1, 0, (2,)),
    HaltCase("SHIFTR", "0|70", 2, 0, (0,)),
    HaltCase("SHIFTR", "|12", 2, 1, (2, 0, 0)),
    HaltCase("COPY", "|1", 1, 1, (0, 1, 1)),
    HaltCase("PARITY", "|1", 1, 0, (1,)),
    HaltCase("PARITY", "|11", 2, 0, (0,)),
    HaltCase("LOOP", "|", 1, 0, (0,)),
)
