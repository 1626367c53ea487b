"""Arbitrary-precision adaptive integration, region-entry detection and time-delta maps.

The integrator is the Dormand-Prince 5(4) pair with local extrapolation and
Shampine's quartic dense output.  All tableau entries are exact rationals,
converted once per working precision, and states are numpy object arrays of
``gmpy2.mpfr`` so the stage combinations run elementwise in C.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import gmpy2
import numpy as np

__all__ = [
    "IntegratorConfig",
    "IntegrationError",
    "PoleProximityError",
    "Trajectory",
    "EventReport",
    "integrate",
    "detect_entry",
    "time_delta_iterate",
    "integrate_on_sphere",
    "ReparametrizedField",
    "sphere_projector",
    "default_precision",
]

PRECISION_ENV = "TM2FLOW_PRECISION_BITS"


def default_precision() -> int:
    bits = int(os.environ.get(PRECISION_ENV, "256"))
    if bits < 64:
        raise ValueError(f"{PRECISION_ENV} must be at least 64")
    return bits


class IntegrationError(RuntimeError):
    """Step size underflow or non-finite state."""


class PoleProximityError(IntegrationError):
    pass


_C = [Fraction(0), Fraction(1, 5), Fraction(3, 10), Fraction(4, 5), Fraction(8, 9), Fraction(1)]
_A = [
    [],
    [Fraction(1, 5)],
    [Fraction(3, 40), Fraction(9, 40)],
    [Fraction(44, 45), Fraction(-56, 15), Fraction(32, 9)],
    [Fraction(19372, 6561), Fraction(-25360, 2187), Fraction(64448, 6561), Fraction(-212, 729)],
    [Fraction(9017, 3168), Fraction(-355, 33), Fraction(46732, 5247), Fraction(49, 176), Fraction(-5103, 18656)],
]
_B = [Fraction(35, 384), Fraction(0), Fraction(500, 1113), Fraction(125, 192), Fraction(-2187, 6784), Fraction(11, 84)]
_E = [Fraction(-71, 57600), Fraction(0), Fraction(71, 16695), Fraction(-71, 1920),
      Fraction(17253, 339200), Fraction(-22, 525), Fraction(1, 40)]
_P = [
    [Fraction(1), Fraction(-8048581381, 2820520608), Fraction(8663915743, 2820520608),
     Fraction(-12715105075, 11282082432)],
    [Fraction(0)] * 4,
    [Fraction(0), Fraction(131558114200, 32700410799), Fraction(-68118460800, 10900136933),
     Fraction(87487479700, 32700410799)],
    [Fraction(0), Fraction(-1754552775, 470086768), Fraction(14199869525, 1410260304),
     Fraction(-10690763975, 1880347072)],
    [Fraction(0), Fraction(127303824393, 49829197408), Fraction(-318862633887, 49829197408),
     Fraction(701980252875, 199316789632)],
    [Fraction(0), Fraction(-282668133, 205662961), Fraction(2019193451, 616988883),
     Fraction(-1453857185, 822651844)],
    [Fraction(0), Fraction(40617522, 29380423), Fraction(-110615467, 29380423),
     Fraction(69997945, 29380423)],
]


def _mp(x):
    if isinstance(x, Fraction):
        return gmpy2.mpfr(gmpy2.mpq(x.numerator, x.denominator))
    return gmpy2.mpfr(x)


class _Tableau:
    def __init__(self):
        self.c = [_mp(v) for v in _C]
        self.a = [[_mp(v) for v in row] for row in _A]
        self.b = [_mp(v) for v in _B]
        self.e = [_mp(v) for v in _E]
        self.p = [[_mp(v) for v in row] for row in _P]
        self.a_vec = [np.array(row, dtype=object) for row in self.a]
        self.b_vec = np.array(self.b, dtype=object)
        self.e_vec = np.array(self.e, dtype=object)
        self.p_cols = [np.array([self.p[i][j] for i in range(7)], dtype=object) for j in range(4)]


@dataclass
class IntegratorConfig:
    rtol: Fraction = Fraction(1, 10**10)
    atol: Fraction = Fraction(1, 10**10)
    precision: int = field(default_factory=default_precision)
    max_step: Fraction = Fraction(1, 16)
    horizon: Fraction = Fraction(12)
    event_step_cap: Fraction = Fraction(1, 32)
    first_step: Fraction | None = None
    min_step: Fraction = Fraction(1, 10**14)
    max_steps: int = 2_000_000
    per_unit_step: bool = True

    def __post_init__(self):
        for name in ("rtol", "atol", "max_step", "horizon", "event_step_cap", "min_step"):
            setattr(self, name, Fraction(getattr(self, name)))
        if self.first_step is not None:
            self.first_step = Fraction(self.first_step)
        if self.rtol <= 0 or self.atol <= 0:
            raise ValueError("tolerances must be positive")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.precision < 64:
            raise ValueError("precision must be at least 64 bits")

    @property
    def tolerance(self) -> float:
        return float(max(self.rtol, self.atol))

    def replace(self, **changes) -> "IntegratorConfig":
        values = {k: getattr(self, k) for k in self.__dataclass_fields__}
        values.update(changes)
        return IntegratorConfig(**values)

    def to_json_obj(self) -> dict:
        return {k: (str(v) if isinstance(v, Fraction) else v) for k, v in
                ((k, getattr(self, k)) for k in self.__dataclass_fields__)}


@dataclass
class Trajectory:
    """Accepted nodes of an integration run.

    ``states`` holds the coordinates listed in ``indices`` (all of them when
    ``indices`` is None).  ``dense`` holds, per accepted step, ``(t0, h, y0, Q)``
    with ``y(t0 + s h) = y0 + h Q [s, s^2, s^3, s^4]`` when recording was asked for.
    """

    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    indices: list[int] | None = None
    dense: list = field(default_factory=list)
    steps: int = 0
    rejections: int = 0
    evaluations: int = 0
    max_pair_residual: float = 0.0
    max_norm_drift: float = 0.0
    precision: int = 256
    samples: dict = field(default_factory=dict)

    @property
    def final_time(self):
        return self.times[-1]

    @property
    def final_state(self):
        return self.states[-1]

    def interpolate(self, t):
        """Dense-output value at ``t`` (requires ``dense`` recording)."""
        if not self.dense:
            raise ValueError("trajectory was recorded without dense output")
        lo, hi = 0, len(self.dense) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self.dense[mid][0] <= t:
                lo = mid
            else:
                hi = mid - 1
        t0, h, y0, q = self.dense[lo]
        return _dense_eval(y0, q, h, (t - t0) / h)

    def to_csv(self, names: Sequence[str] | None = None) -> str:
        width = len(self.states[0]) if self.states else 0
        if names is None:
            idx = self.indices if self.indices is not None else range(width)
            names = [f"x_{i}" for i in idx]
        digits = max(17, int(self.precision * 0.30103) + 2)
        lines = ["tau," + ",".join(names)]
        for t, y in zip(self.times, self.states):
            lines.append(",".join(_fmt(v, digits) for v in (t, *y)))
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_csv(text: str, precision: int = 256) -> tuple[list, list]:
        rows = text.strip().splitlines()[1:]
        with gmpy2.context(gmpy2.get_context(), precision=precision):
            data = [[gmpy2.mpfr(v) for v in row.split(",")] for row in rows]
        return [r[0] for r in data], [r[1:] for r in data]


def _fmt(v, digits: int) -> str:
    if not isinstance(v, type(gmpy2.mpfr(0))):
        with gmpy2.context(gmpy2.get_context(), precision=int(digits * 3.33) + 8):
            v = gmpy2.mpfr(gmpy2.mpq(v)) if isinstance(v, (int, Fraction)) else gmpy2.mpfr(v)
    return format(v, f".{digits}g")


def _dense_eval(y0, q, h, s):
    powers = [s, s * s, s * s * s, s * s * s * s]
    return y0 + h * sum(q[j] * powers[j] for j in range(4))


def _rhs_callable(field_, precision: int) -> Callable:
    if callable(field_) and not hasattr(field_, "rhs_function"):
        return field_
    return field_.rhs_function(precision)


def _pair_indices(field_) -> list[tuple[int, int]]:
    pairs = getattr(field_, "aux_pairs", None) or []
    return [(iu, iv) for _, iu, iv in pairs]


class _Stepper:
    """Dormand-Prince stepping with error control; yields accepted steps."""

    def __init__(self, f, y0, t0, config: IntegratorConfig, project=None):
        self.f = f
        self.cfg = config
        self.tab = _Tableau()
        self.t = _mp(t0)
        self.y = np.array([_mp(v) for v in y0], dtype=object)
        self.project = project
        self.rtol = _mp(config.rtol)
        self.atol = _mp(config.atol)
        self.max_step = _mp(config.max_step)
        self.min_step = _mp(config.min_step)
        self.fy = self._f(self.y)
        self.nfev = 1
        self.rejections = 0
        self.per_unit_step = config.per_unit_step
        self.expo = _mp("-0.25") if self.per_unit_step else _mp("-0.2")
        self.h = _mp(config.first_step) if config.first_step else self._initial_step()

    def _f(self, y):
        return np.array(self.f(y), dtype=object)

    def _initial_step(self):
        scale = np.array([self.atol + self.rtol * abs(v) for v in self.y], dtype=object)
        d0 = max(abs(v) / s for v, s in zip(self.y, scale))
        d1 = max(abs(v) / s for v, s in zip(self.fy, scale))
        if d0 < _mp("1e-5") or d1 < _mp("1e-5"):
            h0 = _mp("1e-6")
        else:
            h0 = _mp("0.01") * d0 / d1
        return min(h0, self.max_step)

    def step(self, t_stop, cap=None):
        """Take one accepted step not beyond ``t_stop``; returns ``(t0, h, y0, K)``.

        ``K`` is the 7 x n object matrix of stage derivatives (the last row is
        the derivative at the new point).
        """
        tab = self.tab
        n = len(self.y)
        while True:
            h_max = self.max_step if cap is None else min(self.max_step, cap)
            h = min(self.h, h_max, t_stop - self.t)
            clipped = h < min(self.h, h_max)
            if h < self.min_step and t_stop - self.t > self.min_step:
                raise IntegrationError(f"step size underflow at t={float(self.t):.6g} (h={float(h):.3g})")
            y = self.y
            K = np.empty((7, n), dtype=object)
            K[0] = self.fy
            for i in range(1, 6):
                K[i] = self._f(y + h * tab.a_vec[i].dot(K[:i]))
            y_new = y + h * tab.b_vec.dot(K[:6])
            f_new = self._f(y_new)
            K[6] = f_new
            self.nfev += 6
            err = np.abs(h * tab.e_vec.dot(K))
            scale = self.atol + self.rtol * np.maximum(np.abs(y), np.abs(y_new))
            if self.per_unit_step:
                scale = scale * h
            ratio = (err / scale).max()
            if not gmpy2.is_finite(ratio):
                self.h = h / 10
                self.rejections += 1
                continue
            if ratio <= 1:
                factor = 5 if ratio == 0 else min(5, max(_mp("0.2"), _mp("0.9") * ratio ** self.expo))
                t0, y0 = self.t, y
                self.t = self.t + h
                if self.project is not None:
                    y_new = np.array(self.project(y_new), dtype=object)
                    f_new = self._f(y_new)
                    self.nfev += 1
                self.y, self.fy = y_new, f_new
                self.h = max(self.h, h * factor) if clipped else h * factor
                return t0, h, y0, K
            self.h = h * max(_mp("0.2"), _mp("0.9") * ratio ** self.expo)
            self.rejections += 1

    def dense_coefficients(self, K, idx=None):
        """Rows ``Q_j`` of the quartic interpolant, restricted to ``idx`` when given."""
        sub = K if idx is None else K[:, idx]
        return [self.tab.p_cols[j].dot(sub) for j in range(4)]


class _DenseStep:
    """Quartic interpolant of one accepted step, evaluated on a subset of coordinates."""

    def __init__(self, stepper, t0, h, y0, K, idx):
        self.stepper, self.K = stepper, K
        self.t0, self.h, self.idx = t0, h, idx
        self.q = stepper.dense_coefficients(K, idx)
        self.y0_full = y0
        self.y0 = y0 if idx is None else y0[idx]
        self._q_full = None

    def __call__(self, s) -> dict:
        val = _dense_eval(self.y0, self.q, self.h, s)
        keys = range(len(val)) if self.idx is None else self.idx
        return dict(zip(keys, val))

    def full(self, s) -> list:
        if self._q_full is None:
            self._q_full = self.stepper.dense_coefficients(self.K)
        return list(_dense_eval(self.y0_full, self._q_full, self.h, s))


def integrate(
    field_,
    p0: Sequence,
    config: IntegratorConfig | None = None,
    t_end=None,
    t0=0,
    record: str | Sequence[int] = "all",
    dense: bool = False,
    sample_times: Sequence | None = None,
    sample_indices: Sequence[int] | None = None,
    project: Callable | None = None,
    on_step: Callable | None = None,
    step_cap: Callable | None = None,
    watch: Sequence[int] | None = None,
) -> Trajectory:
    """Integrate ``x' = F(x)`` from ``p0`` over ``[t0, t_end]`` (default: the configured horizon).

    ``field_`` is an :class:`~tm2flow.pivp.AutonomousPolyODE`, anything with
    ``rhs_function(precision)``, or a plain callable on a state sequence.
    ``record`` selects the stored coordinates (``"all"``, ``"none"`` or indices);
    ``sample_times`` are evaluated through dense output into ``trajectory.samples``,
    keyed by the given time values.
    ``on_step(t0, h, y0, dense, stepper)`` may return True to stop early; ``dense(s)``
    returns a dict of the ``watch`` coordinates at ``t0 + s h``.
    """
    cfg = config or IntegratorConfig()
    with gmpy2.context(gmpy2.get_context(), precision=cfg.precision):
        f = _rhs_callable(field_, cfg.precision)
        t_end_mp = _mp(t0) + _mp(cfg.horizon) if t_end is None else _mp(t_end)
        stepper = _Stepper(f, p0, t0, cfg, project)
        indices = None if record == "all" else ([] if record == "none" else list(record))
        traj = Trajectory(indices=indices, precision=cfg.precision)

        def keep(y):
            return list(y) if indices is None else [y[i] for i in indices]

        traj.times.append(stepper.t)
        traj.states.append(keep(stepper.y))
        pairs = _pair_indices(field_)
        iu = np.array([p[0] for p in pairs], dtype=int)
        iv = np.array([p[1] for p in pairs], dtype=int)

        def pair_residual(y):
            if not pairs:
                return _mp(0)
            return np.abs(y[iu] * y[iu] + y[iv] * y[iv] - 1).max()

        pending = sorted(((_mp(t), t) for t in (sample_times or ())), key=lambda p: p[0])
        s_idx = list(sample_indices) if sample_indices is not None else None
        watch_idx = None if watch is None else list(watch)
        worst_pair = pair_residual(stepper.y)
        n = 0
        while stepper.t < t_end_mp:
            cap = step_cap(stepper.y) if step_cap is not None else None
            t0_, h, y0, K = stepper.step(t_end_mp, cap)
            n += 1
            if n > cfg.max_steps:
                raise IntegrationError("maximum number of steps exceeded")
            if dense:
                traj.dense.append((t0_, h, y0, stepper.dense_coefficients(K)))
            if pending and pending[0][0] <= stepper.t:
                ds = _DenseStep(stepper, t0_, h, y0, K, s_idx)
                while pending and pending[0][0] <= stepper.t:
                    ts, key = pending.pop(0)
                    if ts >= t0_:
                        val = ds((ts - t0_) / h)
                        traj.samples[key] = [val[i] for i in sorted(val)] if s_idx is None else [val[i] for i in s_idx]
            worst_pair = max(worst_pair, pair_residual(stepper.y))
            if record != "none":
                traj.times.append(stepper.t)
                traj.states.append(keep(stepper.y))
            if on_step is not None:
                ds = _DenseStep(stepper, t0_, h, y0, K, watch_idx)
                if on_step(t0_, h, y0, ds, stepper):
                    break
        if record == "none":
            traj.times.append(stepper.t)
            traj.states.append(list(stepper.y))
        traj.steps = n
        traj.rejections = stepper.rejections
        traj.evaluations = stepper.nfev
        traj.max_pair_residual = float(worst_pair)
        traj.last_state = list(stepper.y)
        traj.last_time = stepper.t
        return traj


# events ---------------------------------------------------------------------------


@dataclass
class EventReport:
    verdict: str  # "HALTED" or "UNKNOWN"
    window: int | None = None
    bracket: tuple | None = None
    decoded: tuple | None = None
    hit_state: list | None = None
    worst_margin: float | None = None
    oracle: dict = field(default_factory=dict)
    consistent: bool | None = None
    horizon: float | None = None
    iterate: int | None = None
    stats: dict = field(default_factory=dict)

    @property
    def halted(self) -> bool:
        return self.verdict == "HALTED"

    def to_json_obj(self) -> dict:
        return {
            "verdict": self.verdict,
            "window": self.window,
            "bracket": None if self.bracket is None else [str(b) for b in self.bracket],
            "decoded_output": None if self.decoded is None else list(self.decoded),
            "worst_margin": self.worst_margin,
            "horizon": self.horizon,
            "iterate": self.iterate,
            "oracle": self.oracle,
            "consistent": self.consistent,
            "stats": self.stats,
        }


def _window_cap(region, cfg: IntegratorConfig):
    clock = getattr(region, "clock", None)
    width = getattr(region, "delta_v", None)
    if clock is None or width is None:
        return None
    reach = _mp(cfg.max_step)
    cap = _mp(cfg.event_step_cap)
    width = _mp(width)

    def step_cap(y):
        w = clock(y)
        frac = w - gmpy2.floor(w)
        return cap if frac > 1 - reach or frac < width + reach else None

    return step_cap


def detect_entry(
    field_,
    p0: Sequence,
    region,
    config: IntegratorConfig | None = None,
    margin: Callable | None = None,
    resolution=Fraction(1, 512),
    event_tol=Fraction(1, 10**6),
    project: Callable | None = None,
    sample_times: Sequence | None = None,
    sample_indices: Sequence[int] | None = None,
) -> tuple[EventReport, Trajectory]:
    """Watch ``margin(state)`` along the dense output and bracket its first sign change.

    ``margin`` defaults to ``region.margin`` and is sampled at least every
    ``resolution`` time units.  Steps are capped at
    ``config.event_step_cap`` whenever the region's clock is inside a window or
    within one maximal step of it.  The bracket is refined by bisection down to
    ``event_tol`` time units.  Exhausting the horizon gives ``UNKNOWN``.
    """
    cfg = config or IntegratorConfig()
    margin = margin or region.margin
    found: dict = {}
    worst = [None]

    with gmpy2.context(gmpy2.get_context(), precision=cfg.precision):
        tol = _mp(event_tol)

        res = _mp(resolution)

        def on_step(t0, h, y0, fn, stepper):
            samples_per_step = max(1, int(gmpy2.ceil(h / res)))
            prev_s = _mp(0)
            m_prev = margin(y0)
            if worst[0] is None or m_prev < worst[0]:
                worst[0] = m_prev
            for i in range(1, samples_per_step + 1):
                s = _mp(i) / samples_per_step
                y = fn(s) if i < samples_per_step else stepper.y
                m = margin(y)
                if m < worst[0]:
                    worst[0] = m
                if m_prev >= 0 > m:
                    lo, hi = prev_s, s
                    while (hi - lo) * h > tol:
                        mid = (lo + hi) / 2
                        if margin(fn(mid)) < 0:
                            hi = mid
                        else:
                            lo = mid
                    found["bracket"] = (t0 + lo * h, t0 + hi * h)
                    found["inside"] = fn.full(hi) if hi < 1 else list(stepper.y)
                    found["outside"] = fn.full(lo) if lo > 0 else list(y0)
                    return True
                m_prev, prev_s = m, s
            return False

        traj = integrate(field_, p0, cfg, record="none", on_step=on_step, project=project,
                         watch=getattr(region, "watch_indices", None),
                         step_cap=_window_cap(region, cfg),
                         sample_times=sample_times, sample_indices=sample_indices)
        stats = {"steps": traj.steps, "rejections": traj.rejections,
                 "max_pair_residual": traj.max_pair_residual}
        if not found:
            return EventReport("UNKNOWN", worst_margin=None if worst[0] is None else float(worst[0]),
                               horizon=float(cfg.horizon), stats=stats), traj
        clock = getattr(region, "clock", None)
        window = int(gmpy2.floor(clock(found["inside"]))) if clock is not None else None
        stats["outside_margin"] = float(margin(found["outside"]))
        stats["inside_margin"] = float(margin(found["inside"]))
        report = EventReport(
            "HALTED",
            window=window,
            bracket=found["bracket"],
            hit_state=found["inside"],
            worst_margin=float(worst[0]),
            horizon=float(cfg.horizon),
            stats=stats,
        )
        report.outside_state = found["outside"]
    return report, traj


def time_delta_iterate(
    field_,
    p0: Sequence,
    delta,
    r_max: int,
    region=None,
    config: IntegratorConfig | None = None,
    keep: Sequence[int] | None = None,
    stop_on_hit: bool = True,
    clock: Callable | None = None,
    clock_horizon=None,
) -> tuple[list, EventReport]:
    """Iterates ``F^j(p0)``, ``j <= r_max``, of the time-``delta`` flow map.

    The flow is autonomous, so the legs are integrated by one continuing
    stepper stopped exactly at the times ``j * delta``.  Membership in
    ``region`` is tested at the iterates only.  With ``clock`` and
    ``clock_horizon`` the iteration also stops (``UNKNOWN``) once the clock
    reaches the horizon.  ``keep`` restricts the stored coordinates.
    """
    delta = Fraction(delta)
    if not 0 < delta < Fraction(1, 2):
        raise ValueError("delta must lie in (0, 1/2)")
    cfg = config or IntegratorConfig()
    with gmpy2.context(gmpy2.get_context(), precision=cfg.precision):
        f = _rhs_callable(field_, cfg.precision)
        stepper = _Stepper(f, p0, 0, cfg)
        y = list(stepper.y)
        out = [y if keep is None else [y[i] for i in keep]]
        pairs = _pair_indices(field_)
        worst = region.margin(y) if region is not None else None
        worst_pair = _mp(0)
        horizon = None if clock_horizon is None else _mp(clock_horizon)
        d_mp = _mp(delta)
        steps = 0
        verdict, hit, j = "UNKNOWN", None, 0
        for j in range(1, r_max + 1):
            t_leg = d_mp * j
            while stepper.t < t_leg:
                stepper.step(t_leg)
                steps += 1
            stepper.t = t_leg  # remove rounding drift of the accumulated time
            y = list(stepper.y)
            for iu, iv in pairs:
                worst_pair = max(worst_pair, abs(y[iu] ** 2 + y[iv] ** 2 - 1))
            out.append(y if keep is None else [y[i] for i in keep])
            if region is not None:
                m = region.margin(y)
                worst = min(worst, m)
                if m < 0:
                    verdict, hit = "HALTED", y
                    if stop_on_hit:
                        break
            if horizon is not None and clock(y) >= horizon:
                break
        report = EventReport(
            verdict,
            iterate=j if verdict == "HALTED" else len(out) - 1,
            hit_state=hit,
            worst_margin=None if worst is None else float(worst),
            horizon=None if clock_horizon is None else float(clock_horizon),
            stats={"steps": steps, "rejections": stepper.rejections, "max_pair_residual": float(worst_pair),
                   "final_state": y},
        )
        if hit is not None and clock is not None:
            report.window = int(gmpy2.floor(clock(hit)))
        return out, report


class ReparametrizedField:
    """``c(x) P(x)`` with ``c = 2^d/(1+|x|^2)^d`` (``"sec4"``) or ``1/(1+|x|^2)^d`` (``"sec6"``).

    The factor is positive, so orbits and their orientation are those of ``P``.
    """

    def __init__(self, field_, exponent: int = 1, factor: str = "sec6"):
        if factor not in ("sec4", "sec6"):
            raise ValueError("factor must be 'sec4' or 'sec6'")
        if exponent < 0:
            raise ValueError("exponent must be non-negative")
        self.base = field_
        self.exponent = exponent
        self.factor = factor
        self.dimension = field_.dimension
        self.aux_pairs = getattr(field_, "aux_pairs", [])

    def rhs_function(self, precision: int = 256):
        f = _rhs_callable(self.base, precision)
        d = self.exponent
        num = 2**d if self.factor == "sec4" else 1

        def rhs(y):
            c = num / (1 + sum(v * v for v in y)) ** d
            return [c * v for v in f(y)]

        return rhs


def sphere_projector(pole_distance=Fraction(1, 10**6), drift: list | None = None) -> Callable:
    """Renormalization hook for sphere runs; aborts near the north pole."""
    pole_tol = _mp(pole_distance)

    def project(y):
        n2 = sum(v * v for v in y)
        if drift is not None:
            drift[0] = max(drift[0], float(abs(n2 - 1)))
        y = y / gmpy2.sqrt(n2)
        if 1 - y[0] < pole_tol:
            raise PoleProximityError(f"trajectory within {float(1 - y[0]):.3g} of the north pole")
        return y

    return project


def integrate_on_sphere(
    sphere_field,
    y0: Sequence,
    config: IntegratorConfig | None = None,
    t_end=None,
    pole_distance=Fraction(1, 10**6),
    **kwargs,
) -> Trajectory:
    """Integrate an ambient field tangent to the unit sphere, renormalizing after each step.

    The largest pre-normalization drift ``| |y|^2 - 1 |`` is recorded in
    ``max_norm_drift``.  Getting within ``pole_distance`` of the north pole
    (``1 - y0 < pole_distance``) aborts with :class:`PoleProximityError`.
    """
    cfg = config or IntegratorConfig()
    drift = [0.0]
    with gmpy2.context(gmpy2.get_context(), precision=cfg.precision):
        norm0 = abs(sum(_mp(v) ** 2 for v in y0) - 1)
        if norm0 > _mp(cfg.atol):
            raise ValueError("initial point is not on the unit sphere")
        traj = integrate(sphere_field, y0, cfg, t_end=t_end,
                         project=sphere_projector(pole_distance, drift), **kwargs)
    traj.max_norm_drift = drift[0]
    return traj
