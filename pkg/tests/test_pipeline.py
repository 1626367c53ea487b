from fractions import Fraction

import pytest

from tm2flow import corpus, pipeline
from tm2flow.machine import parse_tape

INC = corpus.machine("INC")
LOOP = corpus.machine("LOOP")


def test_oracle_expectation():
    o = pipeline.oracle_expectation(INC, parse_tape("|", 1), (1,), 0, 10)
    assert o == {"halted": True, "steps": 1, "output_matches": True, "expected": "HALTED", "final": [1, 0, 2]}
    o = pipeline.oracle_expectation(LOOP, parse_tape("|", 1), (0,), 0, 10)
    assert not o["halted"] and o["expected"] == "UNKNOWN"


def test_decode_output():
    assert pipeline.decode_output([21.1, 2.9, 2.0], 1, 3) == (3, 1, 2)
    assert pipeline.decode_output([-3, 0, 1], 0, 3) is None


def test_certify_stages_picks_smallest_passing_count():
    from tm2flow import analytic

    cfg = pipeline.HaltCheckConfig(cert_samples=64)
    fmap = analytic.build_analytic_step(INC)
    encs = analytic.reachable_encodings(INC, [parse_tape("|", 2)], 3)
    k, cert = pipeline.certify_stages(fmap, encs, cfg)
    assert k == 3 and cert.passed
    with pytest.raises(pipeline.pivp.CertificationError):
        pipeline.certify_stages(fmap, encs, cfg.replace(stages=0))


def test_invalid_arguments():
    with pytest.raises(ValueError):
        pipeline.halt_check(INC, parse_tape("|", 1), (0, 1, 0), 2)
    with pytest.raises(ValueError):
        pipeline.halt_check(INC, parse_tape("|", 1), (1,), 0, path="torus")


@pytest.mark.slow
@pytest.mark.parametrize("path", ["chart", "sphere", "map"])
def test_inc_halts_on_every_path(path):
    report = pipeline.halt_check(INC, parse_tape("|", 1), (1,), 0, path)
    assert report.verdict == "HALTED" and report.consistent
    assert report.decoded == (1,) and report.window == 1
    assert report.stats["max_pair_residual"] <= 10 * report.stats["tolerance"]


@pytest.mark.slow
def test_inc_wrong_output_is_unknown():
    report = pipeline.halt_check(INC, parse_tape("|", 1), (2,), 0, "chart")
    assert report.verdict == "UNKNOWN" and report.consistent


@pytest.mark.slow
def test_reparametrized_map_path_on_inc():
    cfg = pipeline.HaltCheckConfig(map_exponent=1, map_factor="sec6")
    report = pipeline.halt_check(INC, parse_tape("|", 1), (1,), 0, "map", cfg)
    assert report.verdict == "HALTED" and report.consistent and report.decoded == (1,)


def test_report_json_shape():
    report = pipeline.halt_check(INC, parse_tape("|", 1), (2,), 0, "chart",
                                 pipeline.HaltCheckConfig(horizon=Fraction(1, 2)))
    obj = report.to_json_obj()
    assert obj["verdict"] == "UNKNOWN" and obj["consistent"] is True
    assert obj["oracle"]["steps"] == 1 and obj["stats"]["path"] == "chart"
