import json
import subprocess
import sys
from fractions import Fraction

import pytest

from tm2flow import cli, pivp
from tm2flow.flow import Trajectory
from tm2flow.poly import Polynomial, PolyVectorField

jsonschema = pytest.importorskip("jsonschema")

REPORT_SCHEMA = {
    "type": "object",
    "required": ["verdict", "window", "bracket", "decoded_output", "oracle", "consistent", "stats"],
    "properties": {
        "verdict": {"enum": ["HALTED", "UNKNOWN"]},
        "window": {"type": ["integer", "null"]},
        "bracket": {"type": ["array", "null"], "items": {"type": "string"}, "minItems": 2, "maxItems": 2},
        "decoded_output": {"type": ["array", "null"], "items": {"type": "integer", "minimum": 0, "maximum": 9}},
        "consistent": {"type": "boolean"},
        "oracle": {"type": "object", "required": ["halted", "steps", "expected"]},
        "stats": {"type": "object", "required": ["steps", "path", "precision"]},
    },
}


def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_encode(capsys):
    code, out, _ = run_cli(capsys, "tm", "encode", "--tape", "3|72", "--state", "2")
    assert code == 0 and out.strip() == "(27, 3, 2)"
    code, out, _ = run_cli(capsys, "tm", "encode", "--tape", "3|72", "--state", "2", "--json")
    assert json.loads(out) == {"encoding": [27, 3, 2]}


def test_run_builtin_and_file(capsys, tmp_path):
    code, out, _ = run_cli(capsys, "tm", "run", "--machine", "COPY", "--tape", "|1", "--json")
    obj = json.loads(out)
    assert code == 0 and obj["halted"] and obj["steps"] == 3 and obj["tape"] == "|11"
    f = tmp_path / "inc.tm"
    f.write_text("states 2\n1,0 -> 2,7,0\n")
    code, out, _ = run_cli(capsys, "tm", "run", "--machine", str(f), "--tape", "|", "--json")
    assert json.loads(out)["tape"] == "|7"


@pytest.mark.parametrize("argv", [
    ["bogus"],
    ["tm", "encode"],
    ["tm", "encode", "--tape", "x|1"],
    ["tm", "run", "--machine", "NOPE", "--tape", "|"],
    ["halt-check", "--machine", "INC", "--tape", "|", "--out", "12"],
    ["euler-dim", "--n", "1"],
])
def test_usage_errors_exit_one(capsys, argv):
    code = None
    try:
        code = cli.main(argv)
    except SystemExit as exc:
        code = exc.code
    assert code == 1


def test_malformed_machine_file(capsys, tmp_path):
    f = tmp_path / "bad.tm"
    f.write_text("states 2\n1,0 -> 2,0,5\n")
    code, _, err = run_cli(capsys, "tm", "run", "--machine", str(f), "--tape", "|")
    assert code == 1 and "line 2" in err


def test_euler_dim(capsys, tmp_path):
    rep = tmp_path / "e.json"
    code, out, _ = run_cli(capsys, "euler-dim", "--n", "17", "--d", "58", "--json", "--report", str(rep))
    obj = json.loads(out)
    assert code == 0 and obj["N"] == "67897436626471500" and obj["headline_check"]
    assert json.loads(rep.read_text()) == obj


def test_lift(capsys, tmp_path):
    x, y = Polynomial.variables(2)
    src = tmp_path / "p.json"
    src.write_text(PolyVectorField([x * y, y - 1]).to_json())
    out_field = tmp_path / "x.json"
    code, out, _ = run_cli(capsys, "lift", "--field", str(src), "--output", str(out_field), "--json")
    obj = json.loads(out)
    assert code == 0 and obj["lifted_degree"] == 4 and obj["tangency"] and obj["consistency_passed"]
    assert PolyVectorField.from_json(out_field.read_text()).dimension == 3


def test_lift_is_deterministic(capsys, tmp_path):
    x, y = Polynomial.variables(2)
    src = tmp_path / "p.json"
    src.write_text(PolyVectorField([x * x, y]).to_json())
    outs = []
    for name in ("a.json", "b.json"):
        run_cli(capsys, "lift", "--field", str(src), "--seed", "3", "--output", str(tmp_path / name))
        outs.append((tmp_path / name).read_text())
    assert outs[0] == outs[1]


def test_integrate_field_to_csv(capsys, tmp_path):
    u, v = Polynomial.variables(2)
    src = tmp_path / "h.json"
    src.write_text(PolyVectorField([-v, u]).to_json())
    csv = tmp_path / "traj.csv"
    code, _, _ = run_cli(capsys, "integrate", "--field", str(src), "--p0", "1,0", "--horizon", "1",
                         "--output", str(csv))
    assert code == 0
    text = csv.read_text()
    assert text.startswith("tau,x_0,x_1\n")
    times, states = Trajectory.from_csv(text)
    assert times[-1] == 1 and abs(states[-1][0] - 0.5403023058681398) < 1e-9


def test_compile_ode_and_integrate(capsys, tmp_path):
    ode_file = tmp_path / "inc.json"
    code, out, _ = run_cli(capsys, "compile", "ode", "--machine", "INC", "--cert-samples", "32",
                           "--output", str(ode_file), "--json")
    assert code == 0 and json.loads(out)["dimension"] == 63
    loaded = pivp.load_ode(json.loads(ode_file.read_text()))
    assert loaded.dimension == 63 and loaded.base_dimension == 7
    csv = tmp_path / "t.csv"
    code, _, _ = run_cli(capsys, "integrate", "--field", str(ode_file), "--p0", "0,0,0,1,0,0,1",
                         "--horizon", "1/8", "--rtol", "1/100000000", "--atol", "1/100000000",
                         "--output", str(csv))
    assert code == 0
    header = csv.read_text().splitlines()[0].split(",")
    assert len(header) == 64


def test_compile_map_certification_failure(capsys):
    code, _, err = run_cli(capsys, "compile", "map", "--machine", "SHIFTR", "--tape", "|12",
                           "--stages", "1", "--cert-samples", "16")
    assert code == 4 and "certification" in err


def test_halt_check_report(capsys, tmp_path):
    rep = tmp_path / "r.json"
    code, out, _ = run_cli(capsys, "halt-check", "--machine", "INC", "--tape", "|", "--out", "1",
                           "--k", "0", "--path", "chart", "--report", str(rep))
    assert code == 0 and out.startswith("HALTED at window 1")
    obj = json.loads(rep.read_text())
    jsonschema.validate(obj, REPORT_SCHEMA)
    assert obj["decoded_output"] == [1] and obj["consistent"]


def test_config_precedence(capsys, tmp_path, monkeypatch):
    conf = tmp_path / "tm2flow.conf"
    conf.write_text("# settings\nprecision = 192\nrtol = 1/1000\n")
    monkeypatch.setenv("TM2FLOW_PRECISION_BITS", "320")
    args = cli.build_parser().parse_args(["integrate", "--field", "f", "--p0", "0", "--config", str(conf)])
    s = cli.resolve_settings(args)
    assert s["precision"] == 192 and s["rtol"] == Fraction(1, 1000)
    args = cli.build_parser().parse_args(["integrate", "--field", "f", "--p0", "0", "--config", str(conf),
                                          "--precision", "128"])
    assert cli.resolve_settings(args)["precision"] == 128
    args = cli.build_parser().parse_args(["integrate", "--field", "f", "--p0", "0"])
    assert cli.resolve_settings(args)["precision"] == 320


def test_bad_config(tmp_path):
    conf = tmp_path / "c.conf"
    conf.write_text("nonsense = 3\n")
    with pytest.raises(cli.UsageError):
        cli.read_config(conf)


def test_atomic_write_leaves_no_temp_files(tmp_path):
    target = tmp_path / "sub" / "out.txt"
    cli.atomic_write(target, "one")
    cli.atomic_write(target, "two")
    assert target.read_text() == "two"
    assert [p.name for p in target.parent.iterdir()] == ["out.txt"]


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "tm2flow", "tm", "encode", "--tape", "|5"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip() == "(5, 0, 1)"


def test_numerical_failure_exits_three(capsys, tmp_path):
    x = Polynomial.variables(1)[0]
    src = tmp_path / "blowup.json"
    src.write_text(PolyVectorField([x * x]).to_json())
    code, _, err = run_cli(capsys, "integrate", "--field", str(src), "--p0", "1", "--horizon", "2",
                           "--min-step", "1/1000000")
    assert code == 3 and "numerical failure" in err


def test_inconsistency_exits_two(capsys, monkeypatch):
    from tm2flow import pipeline
    from tm2flow.flow import EventReport

    def fake(*args, **kwargs):
        return EventReport("HALTED", window=5, decoded=(0,), oracle={"expected": "UNKNOWN"}, consistent=False)

    monkeypatch.setattr(pipeline, "halt_check", fake)
    code, out, _ = run_cli(capsys, "halt-check", "--machine", "LOOP", "--tape", "|", "--out", "0")
    assert code == 2 and "INCONSISTENT" in out
