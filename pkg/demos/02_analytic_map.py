"""The analytic step map, its error-correcting variant and the robustness certificate.

Run: python demos/02_analytic_map.py
"""
from fractions import Fraction

from tm2flow import analytic, corpus
from tm2flow.machine import parse_tape

machine = corpus.machine("SHIFTR")
encs = analytic.reachable_encodings(machine, [parse_tape("|12", 6)], 6)
fmap = analytic.build_analytic_step(machine)

# on exact encodings the map reproduces the discrete step
for e in encs[:3]:
    print(e.as_tuple(), "->", fmap.rounded(e).as_tuple())

# perturbed inputs need the sigma stages; too few of them and the certificate fails
for k in (3, 5):
    cert = analytic.verify_robustness(analytic.robustify(fmap, k), encs, eps_in=Fraction(1, 4), samples=200)
    print(f"k={k}: passed={cert.passed} worst output error {cert.worst_error:.3g}")

print("sigma contraction on |e| <= 1/8:", round(analytic.sigma_contraction_bound(Fraction(1, 8)), 4))
