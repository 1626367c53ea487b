"""Lift a plane field to the 2-sphere and count the embedding dimension.

Run: python demos/04_sphere_and_embedding.py
"""
from fractions import Fraction

from tm2flow import euler, sphere
from tm2flow.poly import Polynomial, PolyVectorField

x, y = Polynomial.variables(2)
P = PolyVectorField([-y + x * x, x])  # degree 2 on R^2

X, report = sphere.lift(P, samples=[(Fraction(1, 2), Fraction(-3, 7)), (Fraction(2), Fraction(5, 3))])
print("lifted degree", report.lifted_degree, "tangent", report.tangent, "zero at pole", report.north_pole_zero)
print("exact pushforward check on samples:", report.consistency_passed)

rep = euler.headline_report(17, 58)
print(f"N(17,58) = {rep.N}")
print(f"dim SO(N) x T^N = {rep.dim_M:.3e} <= 1e35: {rep.headline_check}")
