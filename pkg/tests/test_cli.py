"""End-to-end tests for the command-line interface."""

import csv
import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from onestep import (
    Sample,
    mm_model,
    one_step_weighted,
    preliminary_mm,
    studentize,
    to_families,
)


def run_cli(*args, env_extra=None, cwd=None):
    env = dict(os.environ)
    if env_extra:
        env.update(env_extra)
    return subprocess.run(
        [sys.executable, "-m", "onestep", *map(str, args)],
        capture_output=True,
        text=True,
        env=env,
        cwd=cwd,
    )


def write_mm_data(path: Path):
    path.write_text("x,a,b\n1.1,2.0,1.0\n0.9,3.0,2.0\n")
    return Sample(x=[1.1, 0.9], a=[2.0, 3.0], b=[1.0, 2.0])


def read_report(path: Path):
    lines = path.read_text().splitlines()
    assert lines[0] == "# onestep/report/v1"
    rows = list(csv.DictReader(lines[1:]))
    assert len(rows) == 1
    return rows[0]


def write_config(path: Path, **overrides):
    pairs = {
        "model": "mm",
        "theta_true": 1.0,
        "sigma": 0.05,
        "n": 30,
        "replications": 40,
        "seed": 9,
    }
    pairs.update(overrides)
    path.write_text("".join(f"{k} = {v}\n" for k, v in pairs.items()))


def test_estimate_round_trip(tmp_path):
    data = tmp_path / "data.csv"
    out = tmp_path / "report.csv"
    s = write_mm_data(data)
    cp = run_cli("estimate", data, "--model", "mm", "--out", out)
    assert cp.returncode == 0, cp.stderr

    # recompute in process; every reported float must round-trip exactly
    model = mm_model(s.a, s.b, sigma=1.0)
    fam, wf = to_families(model)
    ts = preliminary_mm(np.ones(2), s)
    res = one_step_weighted(fam, wf, ts, s)
    d_star, ci = studentize(fam, wf, ts, res.theta_hat, s, 0.05)

    row = read_report(out)
    assert row["theta_star"] == repr(ts)
    assert row["theta_hat"] == repr(res.theta_hat)
    assert row["d_star"] == repr(d_star)
    assert row["ci_lo"] == repr(ci[0])
    assert row["ci_hi"] == repr(ci[1])
    assert row["denominator"] == repr(res.denominator)
    assert row["warnings"] == ""
    assert float(row["theta_star"]) == ts


def test_estimate_theta_start_override(tmp_path):
    data = tmp_path / "data.csv"
    out = tmp_path / "report.csv"
    write_mm_data(data)
    cp = run_cli(
        "estimate", data, "--model", "mm", "--theta-start", "1.0", "--out", out
    )
    assert cp.returncode == 0, cp.stderr
    assert read_report(out)["theta_star"] == "1.0"


def test_estimate_contrast_file(tmp_path):
    data = tmp_path / "data.csv"
    out = tmp_path / "report.csv"
    s = write_mm_data(data)
    cfile = tmp_path / "contrasts.txt"
    cfile.write_text("2.0\n1.0  # trailing comment\n")
    cp = run_cli(
        "estimate", data, "--model", "mm", "--contrasts", cfile, "--out", out
    )
    assert cp.returncode == 0, cp.stderr
    expected = preliminary_mm(np.array([2.0, 1.0]), s)
    assert read_report(out)["theta_star"] == repr(expected)


def test_estimate_pipeline_variants(tmp_path):
    data = tmp_path / "data.csv"
    write_mm_data(data)
    hats = {}
    for pipeline in ("one_step_weighted", "mm_closed_form", "newton_oracle"):
        out = tmp_path / f"{pipeline}.csv"
        cp = run_cli(
            "estimate", data, "--model", "mm", "--pipeline", pipeline, "--out", out
        )
        assert cp.returncode == 0, cp.stderr
        row = read_report(out)
        hats[pipeline] = float(row["theta_hat"])
        if pipeline in ("mm_closed_form", "newton_oracle"):
            # these pipelines have no single Newton denominator to report
            assert row["denominator"] == "nan"
    assert hats["one_step_weighted"] != hats["mm_closed_form"]


def test_estimate_missing_column(tmp_path):
    data = tmp_path / "data.csv"
    data.write_text("x,q\n1.0,2.0\n")
    cp = run_cli("estimate", data, "--model", "mm", "--out", tmp_path / "r.csv")
    assert cp.returncode == 1
    assert "'q'" in cp.stderr


def test_estimate_required_column(tmp_path):
    data = tmp_path / "data.csv"
    data.write_text("a,b\n1.0,2.0\n")
    cp = run_cli("estimate", data, "--model", "mm", "--out", tmp_path / "r.csv")
    assert cp.returncode == 1
    assert "'x'" in cp.stderr


def test_estimate_bad_cell(tmp_path):
    data = tmp_path / "data.csv"
    data.write_text("x,a,b\n1.1,2.0,1.0\n0.9,oops,2.0\n")
    cp = run_cli("estimate", data, "--model", "mm", "--out", tmp_path / "r.csv")
    assert cp.returncode == 1
    assert "row 2" in cp.stderr and "'a'" in cp.stderr and "oops" in cp.stderr


def test_estimate_missing_file(tmp_path):
    cp = run_cli(
        "estimate", tmp_path / "nope.csv", "--model", "mm", "--out", tmp_path / "r.csv"
    )
    assert cp.returncode == 1
    assert "nope.csv" in cp.stderr


def test_estimate_mm_needs_b_column(tmp_path):
    data = tmp_path / "data.csv"
    data.write_text("x,a\n1.1,2.0\n0.9,3.0\n")
    cp = run_cli("estimate", data, "--model", "mm", "--out", tmp_path / "r.csv")
    assert cp.returncode == 1
    assert "b column" in cp.stderr


def test_estimate_degenerate_exit(tmp_path):
    # an exact fit leaves no residual variance: the studentizer cannot be
    # formed, the report is partial, and the exit code distinguishes the case
    data = tmp_path / "data.csv"
    data.write_text("x,a,b\n1.0,2.0,1.0\n2.0,4.0,1.0\n")
    out = tmp_path / "report.csv"
    cp = run_cli("estimate", data, "--model", "mm", "--out", out)
    assert cp.returncode == 2
    row = read_report(out)
    assert row["theta_star"] == "1.0"
    assert row["theta_hat"] == "1.0"
    assert row["d_star"] == ""
    assert "variance sum is zero" in row["warnings"]


def test_simulate_outputs(tmp_path):
    cfgfile = tmp_path / "sim.cfg"
    write_config(cfgfile)
    outdir = tmp_path / "out"
    cp = run_cli("simulate", cfgfile, "--out", outdir)
    assert cp.returncode == 0, cp.stderr

    records = (outdir / "records.csv").read_text().splitlines()
    assert records[0].startswith("# onestep/records/v1 config=")
    digest = records[0].split("config=")[1]
    assert len(digest) == 16
    assert len(records) == 2 + 40  # schema line, header, one row per replication

    summary = (outdir / "summary.csv").read_text().splitlines()
    assert summary[0] == f"# onestep/summary/v1 config={digest}"
    header = summary[1].split(",")
    row = dict(zip(header, summary[2].split(",")))
    assert row["model"] == "mm"
    assert row["n"] == "30"
    assert float(row["ks_z"]) > 0.0
    assert row["degenerate_count"] == "0"

    qq = (outdir / "qq.csv").read_text().splitlines()
    assert qq[0] == f"# onestep/qq/v1 config={digest}"
    assert len(qq) == 2 + 40
    first = qq[2].split(",")
    assert float(first[0]) < -2.0  # leftmost theoretical quantile

    hist = (outdir / "hist.csv").read_text().splitlines()
    assert hist[0] == f"# onestep/hist/v1 config={digest}"
    assert len(hist) == 2 + 40  # fixed 40-bin layout
    counts = [int(line.split(",")[2]) for line in hist[2:]]
    assert sum(counts) <= 40

    manifest = json.loads((outdir / "manifest.json").read_text())
    assert manifest["config_digest"] == digest
    assert manifest["tool_version"]
    assert manifest["config_path"] == str(cfgfile)


def test_simulate_reruns_identically(tmp_path):
    cfgfile = tmp_path / "sim.cfg"
    write_config(cfgfile)
    out1, out2, out3 = tmp_path / "r1", tmp_path / "r2", tmp_path / "r3"
    assert run_cli("simulate", cfgfile, "--out", out1).returncode == 0
    assert run_cli("simulate", cfgfile, "--out", out2).returncode == 0
    assert (
        run_cli(
            "simulate", cfgfile, "--out", out3, env_extra={"ONESTEP_THREADS": "4"}
        ).returncode
        == 0
    )
    for name in ("records.csv", "summary.csv", "qq.csv", "hist.csv"):
        bytes1 = (out1 / name).read_bytes()
        assert bytes1 == (out2 / name).read_bytes()
        assert bytes1 == (out3 / name).read_bytes()


def test_simulate_digest_tracks_config(tmp_path):
    cfg_a = tmp_path / "a.cfg"
    cfg_b = tmp_path / "b.cfg"
    write_config(cfg_a)
    write_config(cfg_b, seed=10)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert run_cli("simulate", cfg_a, "--out", out_a).returncode == 0
    assert run_cli("simulate", cfg_b, "--out", out_b).returncode == 0
    digest_a = (out_a / "records.csv").read_text().splitlines()[0]
    digest_b = (out_b / "records.csv").read_text().splitlines()[0]
    assert digest_a != digest_b


def test_simulate_config_errors(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("model = mm\nwidgets = 3\n")
    cp = run_cli("simulate", bad, "--out", tmp_path / "o")
    assert cp.returncode == 1
    assert "widgets" in cp.stderr

    missing = tmp_path / "missing.cfg"
    missing.write_text("model = mm\ntheta_true = 1.0\n")
    cp = run_cli("simulate", missing, "--out", tmp_path / "o")
    assert cp.returncode == 1
    assert "missing required key" in cp.stderr

    dupe = tmp_path / "dupe.cfg"
    dupe.write_text("model = mm\nmodel = sqrt\n")
    cp = run_cli("simulate", dupe, "--out", tmp_path / "o")
    assert cp.returncode == 1
    assert "duplicate" in cp.stderr

    unparsable = tmp_path / "unparsable.cfg"
    write_config(unparsable, n="many")
    cp = run_cli("simulate", unparsable, "--out", tmp_path / "o")
    assert cp.returncode == 1
    assert "'n'" in cp.stderr and "many" in cp.stderr

    badthreads = tmp_path / "ok.cfg"
    write_config(badthreads)
    cp = run_cli(
        "simulate", badthreads, "--out", tmp_path / "o",
        env_extra={"ONESTEP_THREADS": "zero"},
    )
    assert cp.returncode == 1
    assert "ONESTEP_THREADS" in cp.stderr


def test_report_combines_summaries(tmp_path):
    for seed, name in ((9, "a"), (10, "b")):
        cfgfile = tmp_path / f"{name}.cfg"
        write_config(cfgfile, seed=seed)
        assert run_cli("simulate", cfgfile, "--out", tmp_path / name).returncode == 0
    out = tmp_path / "comparison.csv"
    cp = run_cli(
        "report", tmp_path / "a" / "summary.csv", tmp_path / "b" / "summary.csv",
        "--out", out,
    )
    assert cp.returncode == 0, cp.stderr
    lines = out.read_text().splitlines()
    assert lines[0] == "# onestep/comparison/v1"
    rows = list(csv.DictReader(lines[1:]))
    assert len(rows) == 2
    # cells are copied byte for byte from the source summaries
    src = (tmp_path / "a" / "summary.csv").read_text().splitlines()
    src_row = dict(zip(src[1].split(","), src[2].split(",")))
    assert rows[0]["ks_z"] == src_row["ks_z"]
    assert rows[0]["mse_hat"] == src_row["mse_hat"]


def test_report_rejects_wrong_schema(tmp_path):
    cfgfile = tmp_path / "sim.cfg"
    write_config(cfgfile)
    outdir = tmp_path / "out"
    assert run_cli("simulate", cfgfile, "--out", outdir).returncode == 0
    cp = run_cli(
        "report", outdir / "records.csv", "--out", tmp_path / "comparison.csv"
    )
    assert cp.returncode == 1
    assert "records.csv" in cp.stderr


def test_report_rejects_missing_file(tmp_path):
    cp = run_cli("report", tmp_path / "ghost.csv", "--out", tmp_path / "c.csv")
    assert cp.returncode == 1
    assert "ghost.csv" in cp.stderr
