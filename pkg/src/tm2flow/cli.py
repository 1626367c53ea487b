"""Command-line interface.

Exit codes: 0 success, 1 usage or parse error, 2 verdict/oracle inconsistency,
3 numerical failure, 4 certification failure.

Settings resolve as command-line flags, then a ``key = value`` config file
(``--config``), then ``TM2FLOW_PRECISION_BITS`` for the precision, then defaults.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import fields
from fractions import Fraction
from pathlib import Path

import gmpy2

from . import analytic, corpus, euler, flow, pipeline, pivp, sphere
from .machine import (
    Configuration,
    MachineSyntaxError,
    encode,
    format_tape,
    parse_machine,
    parse_tape,
    run,
)
from .poly import PolyVectorField

EXIT_OK, EXIT_USAGE, EXIT_INCONSISTENT, EXIT_NUMERIC, EXIT_CERT = 0, 1, 2, 3, 4

# config keys accepted in files and as flags, with their parsers
SETTINGS = {
    "precision": int,
    "rtol": Fraction,
    "atol": Fraction,
    "max_step": Fraction,
    "min_step": Fraction,
    "horizon": Fraction,
    "eps": Fraction,
    "delta_v": Fraction,
    "gain": Fraction,
    "sharpness": int,
    "stages": int,
    "cert_samples": int,
    "seed": int,
    "path": str,
    "map_delta": Fraction,
    "map_exponent": int,
    "map_factor": str,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def read_config(path: str | os.PathLike) -> dict:
    """Parse a ``key = value`` file; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in SETTINGS:
            raise UsageError(f"{path}:{lineno}: unknown setting {key!r}")
        try:
            out[key] = SETTINGS[key](value)
        except (ValueError, ZeroDivisionError) as exc:
            raise UsageError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return out


def resolve_settings(args: argparse.Namespace) -> dict:
    """Flags over config file over environment over defaults."""
    settings: dict = {"precision": flow.default_precision()}
    if getattr(args, "config", None):
        settings.update(read_config(args.config))
    for key in SETTINGS:
        v = getattr(args, key, None)
        if v is not None:
            settings[key] = v
    if settings["precision"] < 64:
        raise UsageError("precision must be at least 64 bits")
    return settings


def halt_config(settings: dict) -> pipeline.HaltCheckConfig:
    names = {f.name for f in fields(pipeline.HaltCheckConfig)}
    return pipeline.HaltCheckConfig(**{k: v for k, v in settings.items() if k in names})


def atomic_write(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def load_machine(spec: str):
    """A ``.tm`` file path or the name of a built-in machine."""
    p = Path(spec)
    if p.exists():
        return parse_machine(p.read_text())
    if spec.upper() in corpus.MACHINE_TEXTS:
        return corpus.machine(spec.upper())
    raise UsageError(f"no machine file or built-in machine named {spec!r}")


def parse_output(text: str, k: int) -> tuple[int, ...]:
    parts = text.split(",") if "," in text else list(text)
    try:
        syms = tuple(int(s) for s in parts)
    except ValueError:
        raise UsageError(f"output window {text!r} must be digits") from None
    if len(syms) != 2 * k + 1:
        raise UsageError(f"output window for k={k} needs {2 * k + 1} symbols, got {len(syms)}")
    return syms


def parse_point(text: str) -> list[Fraction]:
    try:
        return [Fraction(s.strip()) for s in text.split(",") if s.strip()]
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"bad point {text!r}") from None


def _tape_k0(args) -> int:
    if args.k0 is not None:
        return args.k0
    body = args.tape.replace("|", "")
    return max(1, len(body), getattr(args, "k", 0) or 0)


def _emit(args, human: str, obj: dict) -> None:
    print(dumps(obj) if args.json else human, end="" if args.json else "\n")


# subcommands ---------------------------------------------------------------------


def cmd_tm_run(args, settings) -> int:
    m = load_machine(args.machine)
    tape = parse_tape(args.tape, _tape_k0(args) + args.max_steps)
    out = run(m, tape, args.max_steps)
    enc = encode(out.config)
    obj = {"machine": m.name, "halted": out.halted, "steps": out.steps, "state": out.config.q,
           "tape": format_tape(out.config.tape), "encoding": list(enc.as_tuple())}
    human = (f"{'halted' if out.halted else 'running'} after {out.steps} steps; "
             f"state {out.config.q}; tape {obj['tape']}; encoding {enc.as_tuple()}")
    _emit(args, human, obj)
    return EXIT_OK


def cmd_tm_encode(args, settings) -> int:
    tape = parse_tape(args.tape, _tape_k0(args))
    enc = encode(Configuration(args.state, tape))
    _emit(args, str(enc.as_tuple()), {"encoding": list(enc.as_tuple())})
    return EXIT_OK


def _certified(m, args, settings):
    cfg = halt_config(settings)
    tapes = [parse_tape(t, _tape_k0(argparse.Namespace(tape=t, k0=args.k0)) + 12) for t in args.tape]
    encs = analytic.reachable_encodings(m, tapes, 12)
    fmap = analytic.build_analytic_step(m)
    k, cert = pipeline.certify_stages(fmap, encs, cfg, corpus_id=m.name)
    return fmap, k, cert


def cmd_compile_map(args, settings) -> int:
    m = load_machine(args.machine)
    if args.no_certify:
        fmap = analytic.build_analytic_step(m)
        k = settings.get("stages", 0) or 0
        cert = None
    else:
        fmap, k, cert = _certified(m, args, settings)
    robust = analytic.robustify(fmap, k)
    obj = robust.to_json_obj()
    obj["certificate"] = None if cert is None else cert.to_json_obj()
    if args.output:
        atomic_write(args.output, dumps(obj))
    _emit(args, f"{m.name}: analytic step with {k} sigma stages"
          + ("" if cert is None else f", certificate {'PASS' if cert.passed else 'FAIL'}"),
          {"machine": m.name, "sigma_stages": k, "certificate": obj["certificate"], "output": args.output})
    return EXIT_OK


def cmd_compile_ode(args, settings) -> int:
    m = load_machine(args.machine)
    fmap, k, cert = _certified(m, args, settings)
    cfg = halt_config(settings)
    ode = pivp.autonomize(pivp.build_clocked_system(fmap, k, cfg.gain, cfg.sharpness, cert=cert))
    obj = ode.to_json_obj()
    if args.output:
        atomic_write(args.output, dumps(obj))
    summary = {"machine": m.name, "sigma_stages": k, "dimension": ode.dimension,
               "aux_pairs": len(ode.aux_pairs), "output": args.output}
    _emit(args, f"{m.name}: polynomial system of dimension {ode.dimension} ({len(ode.aux_pairs)} auxiliary pairs)",
          summary)
    return EXIT_OK


def cmd_lift(args, settings) -> int:
    P = PolyVectorField.from_json(Path(args.field).read_text())
    d = P.degree() if args.degree is None else args.degree
    import random

    rng = random.Random(settings.get("seed", 0))
    samples = [[Fraction(rng.randint(-20, 20), rng.randint(1, 9)) for _ in range(P.dimension)]
               for _ in range(args.samples)]
    X, report = sphere.lift(P, d, samples, factor=args.factor)
    if args.output:
        atomic_write(args.output, X.field.to_json() + "\n")
    if args.report:
        atomic_write(args.report, report.to_json() + "\n")
    _emit(args, f"lifted degree {report.lifted_degree}; tangent {report.tangent}; "
          f"north pole zero {report.north_pole_zero}; consistency {report.consistency_passed}",
          report.to_json_obj())
    ok = report.tangent and report.north_pole_zero and report.consistency_passed
    return EXIT_OK if ok else EXIT_INCONSISTENT


def cmd_integrate(args, settings) -> int:
    ode = pivp.load_ode(json.loads(Path(args.field).read_text()))
    p = parse_point(args.p0)
    prec = settings["precision"]
    if len(p) == ode.dimension:
        p0 = p
    elif len(p) == ode.base_dimension:
        p0 = ode.initial_point(p, prec)
    else:
        raise UsageError(f"initial point needs {ode.base_dimension} or {ode.dimension} coordinates")
    cfg = flow.IntegratorConfig(
        rtol=settings.get("rtol", Fraction(1, 10**10)), atol=settings.get("atol", Fraction(1, 10**10)),
        precision=prec, max_step=settings.get("max_step", Fraction(1, 16)),
        horizon=settings.get("horizon", Fraction(1)),
        min_step=settings.get("min_step", Fraction(1, 10**14)),
    )
    traj = flow.integrate(ode, p0, cfg)
    csv = traj.to_csv()
    if args.output:
        atomic_write(args.output, csv)
    obj = {"steps": traj.steps, "rejections": traj.rejections, "final_time": str(traj.final_time),
           "max_pair_residual": traj.max_pair_residual, "output": args.output}
    _emit(args, f"{traj.steps} steps ({traj.rejections} rejected) to t={float(traj.final_time):g}", obj)
    return EXIT_OK


def _halt(args, settings, path) -> int:
    m = load_machine(args.machine)
    tape = parse_tape(args.tape, _tape_k0(args))
    t_star = parse_output(args.out, args.k)
    report = pipeline.halt_check(m, tape, t_star, args.k, path, halt_config(settings))
    obj = report.to_json_obj()
    if args.report:
        atomic_write(args.report, dumps(obj))
    where = f" at window {report.window}" if report.window is not None else ""
    human = (f"{report.verdict}{where}; decoded output {report.decoded}; "
             f"oracle {report.oracle['expected']}; {'consistent' if report.consistent else 'INCONSISTENT'}")
    _emit(args, human, obj)
    return EXIT_OK if report.consistent else EXIT_INCONSISTENT


def cmd_halt_check(args, settings) -> int:
    return _halt(args, settings, settings.get("path", "chart"))


def cmd_iterate_map(args, settings) -> int:
    return _halt(args, settings, "map")


def cmd_euler_dim(args, settings) -> int:
    rep = euler.headline_report(args.n, args.d)
    obj = rep.to_json_obj()
    if args.report:
        atomic_write(args.report, rep.to_json() + "\n")
    _emit(args, f"N({args.n},{args.d}) = {rep.N}; dim M = {rep.dim_M} (~{obj['dim_M_significand']}e{obj['dim_M_exponent']}); "
          f"<= 1e35: {rep.headline_check}", obj)
    return EXIT_OK


# parser ----------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.add_argument("--config", help="key = value settings file")
    p.add_argument("--seed", type=int)
    p.add_argument("--precision", type=int, help="working precision in bits")
    p.add_argument("--rtol", type=Fraction)
    p.add_argument("--atol", type=Fraction)
    p.add_argument("--max-step", dest="max_step", type=Fraction)
    p.add_argument("--min-step", dest="min_step", type=Fraction)
    p.add_argument("--horizon", type=Fraction)


def _pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--eps", type=Fraction)
    p.add_argument("--delta-v", dest="delta_v", type=Fraction)
    p.add_argument("--gain", type=Fraction)
    p.add_argument("--sharpness", type=int)
    p.add_argument("--stages", type=int)
    p.add_argument("--cert-samples", dest="cert_samples", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tm2flow", description="Turing machines as polynomial flows")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    tm = sub.add_parser("tm", help="discrete machine utilities")
    tm_sub = tm.add_subparsers(dest="tm_command", required=True, parser_class=_Parser)
    p = tm_sub.add_parser("run", help="run a machine on a tape")
    _common(p)
    p.add_argument("--machine", required=True)
    p.add_argument("--tape", required=True)
    p.add_argument("--k0", type=int)
    p.add_argument("--max-steps", dest="max_steps", type=int, default=100)
    p.set_defaults(func=cmd_tm_run)
    p = tm_sub.add_parser("encode", help="encode a configuration as (y1, y2, q)")
    _common(p)
    p.add_argument("--tape", required=True)
    p.add_argument("--state", type=int, default=1)
    p.add_argument("--k0", type=int)
    p.set_defaults(func=cmd_tm_encode)

    comp = sub.add_parser("compile", help="build the analytic step map or the polynomial ODE")
    comp_sub = comp.add_subparsers(dest="compile_command", required=True, parser_class=_Parser)
    for name, func, text in (("map", cmd_compile_map, "certified analytic step map JSON"),
                             ("ode", cmd_compile_ode, "compiled polynomial ODE JSON")):
        p = comp_sub.add_parser(name, help=text)
        _common(p)
        _pipeline_flags(p)
        p.add_argument("--machine", required=True)
        p.add_argument("--tape", action="append", default=None,
                       help="input tape(s) whose reachable configurations are certified (default: blank)")
        p.add_argument("--k0", type=int)
        p.add_argument("--output", "-o")
        if name == "map":
            p.add_argument("--no-certify", action="store_true")
        p.set_defaults(func=func)

    p = sub.add_parser("lift", help="stereographic lift of a polynomial field JSON")
    _common(p)
    p.add_argument("--field", required=True)
    p.add_argument("--degree", type=int)
    p.add_argument("--factor", choices=sphere.FACTORS, default="sec4")
    p.add_argument("--samples", type=int, default=20)
    p.add_argument("--output", "-o")
    p.add_argument("--report")
    p.set_defaults(func=cmd_lift)

    p = sub.add_parser("integrate", help="integrate a field or compiled ODE JSON to a CSV trajectory")
    _common(p)
    p.add_argument("--field", required=True)
    p.add_argument("--p0", required=True, help="comma-separated rationals (full or base point)")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_integrate)

    for name, func, text in (("halt-check", cmd_halt_check, "detect halting through the flow and check the oracle"),
                             ("iterate-map", cmd_iterate_map, "same question via iterates of the time-delta map")):
        p = sub.add_parser(name, help=text)
        _common(p)
        _pipeline_flags(p)
        p.add_argument("--machine", required=True)
        p.add_argument("--tape", required=True)
        p.add_argument("--out", required=True, help="output window t*, e.g. 1 or 011")
        p.add_argument("--k", type=int, default=0)
        p.add_argument("--k0", type=int)
        p.add_argument("--report")
        if name == "halt-check":
            p.add_argument("--path", choices=pipeline.PATHS)
        else:
            p.add_argument("--delta", dest="map_delta", type=Fraction)
            p.add_argument("--exponent", dest="map_exponent", type=int)
            p.add_argument("--factor", dest="map_factor", choices=sphere.FACTORS)
        p.set_defaults(func=func)

    p = sub.add_parser("euler-dim", help="dimension count for the Euler embedding")
    _common(p)
    p.add_argument("--n", type=int, default=17)
    p.add_argument("--d", type=int, default=58)
    p.add_argument("--report")
    p.set_defaults(func=cmd_euler_dim)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "tape", None) is None and args.command == "compile":
        args.tape = ["|"]
    try:
        settings = resolve_settings(args)
        with gmpy2.context(gmpy2.get_context(), precision=settings["precision"]):
            return args.func(args, settings)
    except (UsageError, MachineSyntaxError, ValueError, FileNotFoundError) as exc:
        print(f"tm2flow: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except pivp.CertificationError as exc:
        print(f"tm2flow: certification failed: {exc}", file=sys.stderr)
        return EXIT_CERT
    except flow.IntegrationError as exc:
        print(f"tm2flow: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
