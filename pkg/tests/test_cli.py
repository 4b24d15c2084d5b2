"""Command line checks: the map grammar, config merging, JSON and CSV
envelopes, exit codes and thread-count determinism."""

from __future__ import annotations

import contextlib
import io
import json

import pytest

from teichlab import cli
from teichlab.errors import InvalidSpecError, MapGrammarError
from teichlab.holo import AffineShrink, DiskBlaschke, Mobius


def run_cli(args):
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        code = cli.main(args)
    return code, buf.getvalue()


def test_map_grammar_shapes():
    f = cli.parse_map("mobius(2,0,0,1)")
    assert f.parts == (Mobius(2.0, 0.0, 0.0, 1.0),)
    assert f.label == "mobius(2,0,0,1)"
    g = cli.parse_map(" shrink(0.9; 0, 1) ")
    assert g.parts == (AffineShrink(0.9, 1.0j),)
    h = cli.parse_map("blaschke(aut(0.2,0.1,0.9), pow(2))")
    assert h.parts == (DiskBlaschke((("aut", 0.2, 0.1, 0.9), ("pow", 2))),)
    pipe = cli.parse_map("mobius(1,1,0,1) |> shrink(0.5;0,2)")
    assert len(pipe.parts) == 2


def test_map_grammar_errors_carry_offsets():
    for text in ("", "   ", "mobius(2,0,0", "warp(1)", "mobius(1,0,0,1) | shrink(1;0,0)", "mobius(1,0,0,1)$"):
        with pytest.raises(MapGrammarError) as info:
            cli.parse_map(text)
        assert isinstance(info.value.offset, int)
    # a well-formed string for an expanding map fails validation, not parsing
    with pytest.raises(InvalidSpecError):
        cli.parse_map("mobius(1,2,1,2)")


def test_exit_code_two_on_bad_input():
    assert cli.main(["spectral", "--matrix", "2,0,0,2", "--alpha", "0,1"]) == 2
    assert cli.main(["holo", "--map", "mobius(2,0,0"]) == 2
    assert cli.main(["dist", "--x", "0,1", "--y", "0,-1"]) == 2
    assert cli.main(["walk", "--source", "iid", "--generators", "1,1,0,1", "--weights", "0.4,0.6"]) == 2


def test_exit_code_three_on_unconverged():
    code, out = run_cli(
        ["spectral", "--matrix", "1,1,0,1", "--alpha", "0,1", "--n", "40", "--spread-tol", "1e-9"]
    )
    assert code == 3
    assert json.loads(out)["status"] == "unconverged"

    code, out = run_cli(["holo", "--map", "mobius(1,1,0,1)", "--budget", "500"])
    assert code == 3
    assert json.loads(out)["status"] == "inconclusive"

    code, out = run_cli(
        [
            "walk",
            "--source",
            "rotation",
            "--generators",
            "1,2,0,1;1,0,2,1",
            "--breakpoints",
            "0.5",
            "--n",
            "60",
            "--trials",
            "5",
            "--cap",
            "2",
        ]
    )
    assert code == 3
    assert json.loads(out)["payload"]["sandwich"]["status"] == "cap-exceeded"


def test_json_envelope_shape():
    code, out = run_cli(["spectral", "--matrix", "2,1,1,1", "--alpha", "0,1", "--n", "30"])
    assert code == 0
    env = json.loads(out)
    assert list(env) == ["toolVersion", "command", "config", "status", "payload", "diagnostics"]
    assert env["command"] == "spectral"
    assert env["config"]["command"] == "spectral"
    assert "spreadTol" in env["config"]
    assert "threads" not in env["config"]
    assert env["status"] == "ok"
    assert env["payload"]["classification"] == "Anosov"
    assert abs(env["payload"]["curve"]["limit"] - 2.618033988749895) < 1e-6


def test_degenerate_walk_reports_no_lower_bound():
    code, out = run_cli(["walk", "--source", "iid", "--generators", "1,0,0,1", "--n", "40", "--trials", "3"])
    assert code == 0
    env = json.loads(out)
    assert env["payload"]["drift"]["value"] == 0.0
    assert env["payload"]["mu"] is None
    assert env["payload"]["sandwich"]["status"] == "degenerate-sandwich"
    assert "C(mu,x)" in env["payload"]["sandwich"]["cConvention"]


def test_config_file_merge_and_override(tmp_path):
    cfg = tmp_path / "spectral.cfg"
    cfg.write_text("matrix = 2,1,1,1  # golden class\nalpha = 0,1\nn = 40\n")
    code, out = run_cli(["spectral", "--config", str(cfg), "--n", "30"])
    assert code == 0
    env = json.loads(out)
    assert env["config"]["matrix"] == "2,1,1,1"
    assert env["config"]["n"] == 30  # flag wins over file

    bad = tmp_path / "bad.cfg"
    bad.write_text("matrix = 2,1,1,1\nwidth = 7\n")
    assert cli.main(["spectral", "--config", str(bad)]) == 2

    malformed = tmp_path / "malformed.cfg"
    malformed.write_text("matrix 2,1,1,1\n")
    assert cli.main(["spectral", "--config", str(malformed)]) == 2


def test_csv_output_format(tmp_path):
    out_path = tmp_path / "trace.csv"
    code = cli.main(
        [
            "spectral",
            "--matrix",
            "2,1,1,1",
            "--alpha",
            "0,1",
            "--n",
            "20",
            "--format",
            "csv",
            "--out",
            str(out_path),
        ]
    )
    assert code == 0
    raw = out_path.read_bytes()
    assert b"\r" not in raw
    lines = raw.decode("utf-8").splitlines()
    assert lines[0].startswith("# toolVersion=")
    comments = [ln for ln in lines if ln.startswith("#")]
    assert any(ln.startswith("# command=spectral") for ln in comments)
    assert any(ln.startswith("# status=") for ln in comments)
    header_idx = len(comments)
    assert lines[header_idx] == "n,alpha_p,alpha_q,length,nth_root,ratio"
    data = lines[header_idx + 1 :]
    assert len(data) == 20
    first = data[0].split(",")
    assert first[0] == "1"
    float(first[3])  # float cells parse back


def test_walk_runs_are_thread_count_invariant(tmp_path):
    out_path = tmp_path / "walk.json"
    args = [
        "walk",
        "--source",
        "rotation",
        "--generators",
        "1,2,0,1;1,0,2,1",
        "--breakpoints",
        "0.5",
        "--n",
        "80",
        "--trials",
        "8",
        "--seed",
        "11",
        "--out",
        str(out_path),
    ]
    assert cli.main(args + ["--threads", "1"]) == 0
    single = out_path.read_bytes()
    assert cli.main(args + ["--threads", "4"]) == 0
    multi = out_path.read_bytes()
    assert single == multi


def test_horo_vanishes_at_basepoint():
    code, out = run_cli(["horo", "--mu", "1,0", "--x", "0,1", "--x0", "0,1"])
    assert code == 0
    env = json.loads(out)
    assert env["payload"]["value"] == 0.0


def test_dist_torus_matches_closed_form():
    code, out = run_cli(["dist", "--x", "0,1", "--y", "0,2"])
    assert code == 0
    env = json.loads(out)
    assert abs(env["payload"]["forward"]["value"] - 0.5 * 0.6931471805599453) < 1e-9
    assert env["payload"]["symmetric"] is True


def test_selftest_passes(tmp_path):
    out_path = tmp_path / "selftest.txt"
    assert cli.main(["selftest", "--out", str(out_path)]) == 0
    lines = out_path.read_text().splitlines()
    assert lines[-1].endswith("checks passed")
    assert all(ln.startswith("ok ") for ln in lines[:-1])
