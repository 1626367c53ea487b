"""End-to-end halting harness: machine and tape in, verdict cross-checked against the discrete run out."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

import gmpy2

from . import analytic, flow, pivp, sphere
from .machine import (
    Configuration,
    EncodedConfig,
    Tape,
    TuringMachine,
    decode,
    encode,
    output_matches,
    run,
)

__all__ = [
    "HaltCheckConfig",
    "Pipeline",
    "certify_stages",
    "build_pipeline",
    "oracle_expectation",
    "halt_check",
    "decode_output",
    "PATHS",
]

PATHS = ("chart", "sphere", "map")
DEFAULT_UNKNOWN_HORIZON = 12


@dataclass(frozen=True)
class HaltCheckConfig:
    """Tunables of the harness.  ``None`` entries are resolved per run.

    ``stages=None`` picks the smallest certified number of sigma stages starting
    at ``min_stages``; ``delta_v=None`` means 1/4 on the chart and sphere paths
    and 1/2 on the map path; ``horizon=None`` means oracle steps + 2 when the
    discrete run halts within ``oracle_budget`` steps, else 12.

    The tolerances bound the local error per unit step; the verdict only needs
    the state inside a tube of radius ``eps``, and the trig-pair invariants
    stay orders of magnitude below the tolerance at this setting.

    ``map_exponent`` is the power ``d`` of the positive factor ``1/(1+|x|^2)^d``
    on the map path.  Any ``d`` gives the same orbits, but the clock then runs
    ``(1+|x|^2)^d`` times slower per iterate, which for tapes with large
    encodings means tens of thousands of iterates per window; ``0`` is the default.
    """

    rtol: Fraction = Fraction(1, 10**6)
    atol: Fraction = Fraction(1, 10**6)
    precision: int = field(default_factory=flow.default_precision)
    max_step: Fraction = Fraction(1, 16)
    event_step_cap: Fraction = Fraction(1, 32)
    horizon: Fraction | None = None
    eps: Fraction = Fraction(1, 8)
    delta_v: Fraction | None = None
    gain: Fraction = pivp.DEFAULT_GAIN
    sharpness: int = pivp.DEFAULT_SHARPNESS
    stages: int | None = None
    min_stages: int = 3
    max_stages: int = 12
    cert_eps: Fraction = Fraction(1, 4)
    cert_samples: int = 1000
    seed: int = 0
    oracle_budget: int = 10
    map_delta: Fraction = Fraction(1, 4)
    map_exponent: int = 0
    map_factor: str = "sec6"
    sphere_exponent: int = 0

    def integrator(self, horizon) -> flow.IntegratorConfig:
        return flow.IntegratorConfig(
            rtol=self.rtol, atol=self.atol, precision=self.precision, max_step=self.max_step,
            horizon=Fraction(horizon), event_step_cap=self.event_step_cap,
        )

    def replace(self, **changes) -> "HaltCheckConfig":
        return replace(self, **changes)


def certify_stages(fmap: analytic.AnalyticMap, encs: Sequence[EncodedConfig], cfg: HaltCheckConfig,
                   corpus_id: str = "") -> tuple[int, analytic.RobustnessCert]:
    """Smallest stage count whose robustified map passes; raises with the last witness otherwise."""
    candidates = [cfg.stages] if cfg.stages is not None else range(cfg.min_stages, cfg.max_stages + 1)
    cert = None
    for k in candidates:
        cert = analytic.verify_robustness(
            analytic.robustify(fmap, k), encs, eps_in=cfg.cert_eps, samples=cfg.cert_samples,
            precision=cfg.precision, seed=cfg.seed, corpus_id=corpus_id,
        )
        if cert.passed:
            return k, cert
    raise pivp.CertificationError(
        f"no certified stage count in {list(candidates)}; last witness {cert.witness if cert else None}"
    )


@dataclass
class Pipeline:
    machine: TuringMachine
    fmap: analytic.AnalyticMap
    stages: int
    cert: analytic.RobustnessCert
    clocked: pivp.ClockedSystem
    ode: pivp.AutonomousPolyODE


_CACHE: dict = {}


def build_pipeline(machine: TuringMachine, encs: Sequence[EncodedConfig], cfg: HaltCheckConfig) -> Pipeline:
    """Build, certify and compile the clocked system for ``machine`` (cached per machine and tunables)."""
    key = (machine.name, machine.to_text(), tuple(sorted(e.as_tuple() for e in encs)), cfg.stages, cfg.min_stages, cfg.max_stages,
           cfg.gain, cfg.sharpness, cfg.cert_eps, cfg.cert_samples, cfg.precision, cfg.seed)
    if key in _CACHE:
        return _CACHE[key]
    fmap = analytic.build_analytic_step(machine)
    k, cert = certify_stages(fmap, encs, cfg, corpus_id=machine.name)
    clocked = pivp.build_clocked_system(fmap, k, gain=cfg.gain, sharpness=cfg.sharpness, cert=cert)
    pipe = Pipeline(machine, fmap, k, cert, clocked, pivp.autonomize(clocked))
    _CACHE[key] = pipe
    return pipe


def _widen(tape: Tape, extra: int) -> Tape:
    cells = {i: tape[i] for i in range(-tape.k0, tape.k0 + 1)}
    return Tape.from_dict(cells, tape.k0 + extra)


def oracle_expectation(machine: TuringMachine, tape: Tape, t_star: Sequence[int], k: int, budget: int) -> dict:
    """Discrete run on a window wide enough that it cannot overflow within ``budget`` steps."""
    out = run(machine, _widen(tape, budget), budget)
    matches = out.halted and output_matches(out.config.tape, t_star, k)
    return {
        "halted": out.halted,
        "steps": out.steps if out.halted else None,
        "output_matches": bool(matches),
        "expected": "HALTED" if matches else "UNKNOWN",
        "final": list(encode(out.config).as_tuple()),
    }


def decode_output(z1: Sequence, k: int, k0: int) -> tuple[int, ...] | None:
    """Round ``z1`` to the nearest encoding and read the output window ``-k..k``."""
    y1, y2, q = (int(gmpy2.rint(v)) if not isinstance(v, (int, Fraction)) else round(v) for v in z1)
    if y1 < 0 or y2 < 0:
        return None
    width = max(k0, len(str(y1)), len(str(y2)) + 1)
    try:
        config = decode(EncodedConfig(y1, y2, q), width)
    except ValueError:
        return None
    return tuple(config.tape[i] for i in range(-k, k + 1))


def halt_check(
    machine: TuringMachine,
    tape: Tape,
    t_star: Sequence[int],
    k: int,
    path: str = "chart",
    config: HaltCheckConfig | None = None,
) -> flow.EventReport:
    """Run the full pipeline and compare the verdict with the discrete run.

    ``report.consistent`` is False when the flow and the oracle disagree; the
    flow never claims non-halting, so an ``UNKNOWN`` verdict is consistent
    with an oracle that does not halt (with the requested output) in budget.
    """
    cfg = config or HaltCheckConfig()
    if path not in PATHS:
        raise ValueError(f"path must be one of {PATHS}")
    t_star = tuple(int(s) for s in t_star)
    if k > tape.k0:
        raise ValueError("output radius exceeds the tape window")
    oracle = oracle_expectation(machine, tape, t_star, k, cfg.oracle_budget)
    if cfg.horizon is not None:
        horizon = Fraction(cfg.horizon)
    elif oracle["halted"]:
        horizon = Fraction(oracle["steps"] + 2)
    else:
        horizon = Fraction(DEFAULT_UNKNOWN_HORIZON)
    steps_needed = int(horizon) + 1
    encs = analytic.reachable_encodings(machine, [_widen(tape, steps_needed)], steps_needed)
    pipe = build_pipeline(machine, encs, cfg)
    ode = pipe.ode
    region_k0 = tape.k0 + steps_needed
    delta_v = cfg.delta_v if cfg.delta_v is not None else (Fraction(1, 2) if path == "map" else Fraction(1, 4))
    region = pivp.build_halting_region(machine, t_star, k, eps=cfg.eps, delta_v=delta_v, k0=region_k0)
    x0 = encode(Configuration(1, tape))
    icfg = cfg.integrator(horizon)
    p0 = pivp.initial_state(ode, x0, cfg.precision)

    if path == "chart":
        report, _ = flow.detect_entry(ode, p0, region, icfg)
        hit_chart = report.hit_state
    elif path == "sphere":
        lifted = sphere.NumericSphereLift(ode, cfg.sphere_exponent)
        with gmpy2.context(gmpy2.get_context(), precision=cfg.precision):
            y0 = sphere.stereo_mp(p0)
        drift = [0.0]
        report, _ = flow.detect_entry(lifted, y0, sphere.lift_region(region), icfg,
                                      project=flow.sphere_projector(drift=drift))
        report.stats["max_norm_drift"] = drift[0]
        hit_chart = None
        if report.hit_state is not None:
            with gmpy2.context(gmpy2.get_context(), precision=cfg.precision):
                hit_chart = sphere.stereo_inv_mp(report.hit_state)
    else:
        field_ = flow.ReparametrizedField(ode, cfg.map_exponent, cfg.map_factor)
        bound = 10**9
        _, report = flow.time_delta_iterate(
            field_, p0, cfg.map_delta, bound, region, icfg, keep=[0, 1, 2, 3],
            clock=region.clock, clock_horizon=horizon,
        )
        hit_chart = report.hit_state
        report.stats.pop("final_state", None)

    if hit_chart is not None:
        report.decoded = decode_output([hit_chart[i] for i in region.z1_index], k, region_k0)
    report.horizon = float(horizon)
    report.stats.update({"path": path, "stages": pipe.stages, "dimension": ode.dimension,
                         "precision": cfg.precision, "tolerance": float(max(cfg.rtol, cfg.atol))})
    report.oracle = oracle
    within = oracle["halted"] and oracle["steps"] <= horizon
    if report.halted:
        report.consistent = (
            oracle["output_matches"]
            and report.window == oracle["steps"]
            and report.decoded == t_star
        )
    else:
        report.consistent = not (within and oracle["output_matches"])
    return report
