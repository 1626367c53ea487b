"""A machine, its tape, and the integer encoding the flows work with.

Run: python demos/01_discrete_machine.py
"""
from pathlib import Path

from tm2flow.machine import Configuration, delta_encoded, encode, parse_machine, parse_tape, run

machine = parse_machine((Path(__file__).parent / "parity.tm").read_text())
tape = parse_tape("|11", 4)
print(f"{machine.name}: {machine.r} states, halting state {machine.q_halt}")

# configurations map to triples of naturals (y1, y2, q)
config = Configuration(1, tape)
enc = encode(config)
print("initial encoding", enc.as_tuple())

# one step on the triple agrees with one step on the tape
for _ in range(4):
    enc = delta_encoded(machine, enc)
    print("  ->", enc.as_tuple())

out = run(machine, tape, 20)
print("halted:", out.halted, "after", out.steps, "steps; symbol under the head:", out.config.tape[0])
