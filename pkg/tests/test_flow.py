import math
from dataclasses import dataclass
from fractions import Fraction

import gmpy2
import pytest
from hypothesis import given, settings, strategies as st

from tm2flow import flow, sphere
from tm2flow.poly import Polynomial, PolyVectorField

TOL = Fraction(1, 10**12)


def cfg(**kw):
    base = dict(rtol=TOL, atol=TOL, precision=256)
    base.update(kw)
    return flow.IntegratorConfig(**base)


def harmonic():
    u, v = Polynomial.variables(2)
    return PolyVectorField([-v, u])


def test_unit_clock():
    traj = flow.integrate(lambda y: [gmpy2.mpfr(1)], [0], cfg(horizon=100), record="none")
    assert abs(traj.last_state[0] - 100) <= TOL
    assert traj.last_time == 100


def test_harmonic_pair_conservation():
    traj = flow.integrate(harmonic(), [1, 0], cfg(horizon=100))
    drift = max(abs(u * u + v * v - 1) for u, v in traj.states)
    assert drift <= 10 * TOL
    assert all(a < b for a, b in zip(traj.times, traj.times[1:]))
    u, v = traj.last_state
    assert abs(u - math.cos(100)) < 1e-9 and abs(v - math.sin(100)) < 1e-9


def test_dense_output_and_samples():
    times = [Fraction(1, 3), Fraction(5, 7), Fraction(2)]
    traj = flow.integrate(harmonic(), [1, 0], cfg(horizon=2), dense=True, sample_times=times)
    for t in times:
        u, v = traj.samples[t]
        assert abs(u - math.cos(t)) < 1e-10 and abs(v - math.sin(t)) < 1e-10
    u, v = traj.interpolate(gmpy2.mpfr("1.2345"))
    assert abs(u - math.cos(1.2345)) < 1e-10


def test_csv_roundtrip():
    traj = flow.integrate(harmonic(), [1, 0], cfg(horizon=1))
    text = traj.to_csv()
    assert text.splitlines()[0] == "tau,x_0,x_1"
    times, states = flow.Trajectory.from_csv(text)
    assert len(times) == len(traj.times)
    assert max(abs(a - b) for a, b in zip(states[-1], traj.states[-1])) < 1e-70


@dataclass
class Interval:
    lo: Fraction
    hi: Fraction

    def margin(self, y):
        return max(self.lo - y[0], y[0] - self.hi)


def test_event_bracket():
    report, _ = flow.detect_entry(lambda y: [gmpy2.mpfr(1)], [0], Interval(Fraction(2), Fraction(9, 4)),
                                  cfg(horizon=5))
    assert report.halted
    lo, hi = report.bracket
    assert 2 - 1e-6 <= lo <= 2 <= hi < Fraction(9, 4)
    assert hi - lo <= 1e-6
    # the margin changes sign across the bracket
    assert Interval(2, Fraction(9, 4)).margin([lo]) >= 0 > Interval(2, Fraction(9, 4)).margin([hi])


def test_event_unknown_when_missed():
    report, _ = flow.detect_entry(lambda y: [gmpy2.mpfr(-1)], [0], Interval(Fraction(2), Fraction(9, 4)),
                                  cfg(horizon=3))
    assert report.verdict == "UNKNOWN" and report.window is None


@dataclass
class ClockWindows:
    delta_v: Fraction = Fraction(1, 2)

    def clock(self, y):
        return y[0]

    def margin(self, y):
        frac = y[0] - gmpy2.floor(y[0])
        return -1 if y[0] > 3 and 0 < frac < self.delta_v else 1


def test_time_delta_iterates_of_clock():
    seq, report = flow.time_delta_iterate(lambda y: [gmpy2.mpfr(1)], [0], Fraction(1, 4), 20, ClockWindows(),
                                          cfg(), clock=lambda y: y[0])
    for j, y in enumerate(seq):
        assert abs(y[0] - Fraction(j, 4)) <= TOL
    # iterates j/4 land in (3, 3.5) first at 13/4
    assert report.halted and report.iterate == 13 and report.window == 3


def test_time_delta_requires_small_delta():
    with pytest.raises(ValueError):
        flow.time_delta_iterate(lambda y: [gmpy2.mpfr(1)], [0], Fraction(1, 2), 3)


def test_semigroup_property():
    field_ = harmonic()
    c = cfg()
    delta = Fraction(1, 4)
    seq, _ = flow.time_delta_iterate(field_, [1, 0], delta, 12, config=c)
    for j in (3, 7, 11):
        restart = flow.integrate(field_, seq[j], c.replace(horizon=delta), record="none")
        err = max(abs(a - b) for a, b in zip(restart.last_state, seq[j + 1]))
        assert err <= 10 * TOL


small = st.fractions(min_value=-1, max_value=1, max_denominator=4)


@settings(max_examples=12)
@given(st.lists(st.tuples(small, small, small, small, small), min_size=2, max_size=2))
def test_tolerance_convergence(coeffs):
    x, y = Polynomial.variables(2)
    comps = [a + b * x + c * y + d * x * y + e * y * y for a, b, c, d, e in coeffs]
    F = PolyVectorField(comps)
    coarse = Fraction(1, 10**8)
    runs = []
    for tol in (coarse, coarse / 2):
        runs.append(flow.integrate(F, [Fraction(1, 10), Fraction(-1, 5)], cfg(rtol=tol, atol=tol, horizon=1),
                                   record="none").last_state)
    assert max(abs(a - b) for a, b in zip(*runs)) < coarse


def test_step_underflow_is_reported():
    with pytest.raises(flow.IntegrationError):
        flow.integrate(lambda y: [y[0] * y[0]], [1], cfg(horizon=2, min_step=Fraction(1, 10**6)), record="none")


def test_config_validation():
    with pytest.raises(ValueError):
        flow.IntegratorConfig(rtol=0)
    with pytest.raises(ValueError):
        flow.IntegratorConfig(horizon=-1)
    with pytest.raises(ValueError):
        flow.IntegratorConfig(precision=32)


def test_precision_env(monkeypatch):
    monkeypatch.setenv("TM2FLOW_PRECISION_BITS", "384")
    assert flow.default_precision() == 384
    assert flow.IntegratorConfig().precision == 384
    monkeypatch.setenv("TM2FLOW_PRECISION_BITS", "12")
    with pytest.raises(ValueError):
        flow.default_precision()


# sphere runs ---------------------------------------------------------------------


def test_rotation_on_sphere_has_period_two_pi():
    y = Polynomial.variables(3)
    zero = Polynomial.zero(3)
    rot = PolyVectorField([zero, -y[2], y[1]])  # y1 d/dy2 - y2 d/dy1
    start = [Fraction(0), Fraction(3, 5), Fraction(4, 5)]
    with gmpy2.context(gmpy2.get_context(), precision=256):
        two_pi = 2 * gmpy2.const_pi()
    traj = flow.integrate_on_sphere(rot, start, cfg(horizon=7), t_end=two_pi)
    assert max(abs(a - b) for a, b in zip(traj.last_state, start)) < 1e-10
    assert traj.max_norm_drift <= 10 * TOL


def test_chart_and_sphere_flows_are_conjugate():
    x1, x2 = Polynomial.variables(2)
    P = PolyVectorField([x2 + Fraction(1, 3) * x1 * x1, -x1 + Fraction(1, 2)])
    d = P.degree()
    X = sphere.pushforward_closed_form(P, d)
    chart = flow.ReparametrizedField(P, exponent=d, factor="sec4")
    x0 = [Fraction(1, 2), Fraction(-1, 3)]
    times = [Fraction(1, 2), Fraction(3, 2), Fraction(3)]
    c = cfg(horizon=3)
    a = flow.integrate(chart, x0, c, record="none", sample_times=times)
    b = flow.integrate_on_sphere(X, sphere.stereo(x0), c, record="none", sample_times=times)
    for t in a.samples:
        mapped = sphere.stereo_mp(a.samples[t])
        assert max(abs(u - v) for u, v in zip(mapped, b.samples[t])) <= 10 * TOL


def test_pole_proximity_aborts():
    # the radial field x' = x carries every orbit to infinity, i.e. to the north pole
    x1, x2 = Polynomial.variables(2)
    lifted = sphere.NumericSphereLift(PolyVectorField([x1, x2]), exponent=0)
    start = sphere.stereo([Fraction(1, 2), 0])
    with pytest.raises(flow.PoleProximityError):
        flow.integrate_on_sphere(lifted, start, cfg(horizon=20))


def test_sphere_start_must_be_on_sphere():
    with pytest.raises(ValueError):
        flow.integrate_on_sphere(harmonic(), [1, 1], cfg(horizon=1))
