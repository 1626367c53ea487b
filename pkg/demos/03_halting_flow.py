"""Compile INC to a polynomial ODE and watch its orbit enter the halting region.

Takes a few seconds.  Run: python demos/03_halting_flow.py
"""
from tm2flow import corpus
from tm2flow.pipeline import HaltCheckConfig, halt_check

machine = corpus.machine("INC")
tape = corpus.HALT_CASES[0].input_tape()
cfg = HaltCheckConfig(precision=128)

for t_star in [(1,), (2,)]:
    report = halt_check(machine, tape, t_star, 0, "chart", cfg)
    print(f"output {t_star}: {report.verdict}, window {report.window}, decoded {report.decoded}, "
          f"consistent with the discrete run: {report.consistent}")
    print(f"  dimension {report.stats['dimension']}, sigma stages {report.stats['stages']}, "
          f"{report.stats.get('steps')} integrator steps")

# the same question through iterates of the time-1/4 map
report = halt_check(machine, tape, (1,), 0, "map", cfg)
print("map path:", report.verdict, "at iterate", report.iterate)
