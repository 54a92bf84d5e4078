import hashlib
import json
import subprocess
import sys

import pytest

from fracinv.cli import EXIT_CONFIG, EXIT_OK, EXIT_STAGE, build_parser, main

FAST = "flow:\n  h: 20.0\ninversion:\n  n_lhs: 3\n  cases: [1, 3]\n"


def digest(d):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(d.iterdir())}


@pytest.fixture(scope="module")
def fast_cfg(tmp_path_factory):
    p = tmp_path_factory.mktemp("cfg") / "fast.yaml"
    p.write_text(FAST)
    return p


@pytest.fixture(scope="module")
def full_run(tmp_path_factory, fast_cfg):
    out = tmp_path_factory.mktemp("run")
    assert main(["all", "--config", str(fast_cfg), "--out-dir", str(out)]) == EXIT_OK
    return out


def test_parser_stages():
    p = build_parser()
    for s in ("synth", "cluster", "orient", "invert", "report", "all"):
        assert p.parse_args([s]).stage == s
    with pytest.raises(SystemExit):
        p.parse_args(["bogus"])
    with pytest.raises(SystemExit):
        p.parse_args(["invert", "--case", "5"])


def test_artifact_inventory(full_run):
    names = {p.name for p in full_run.iterdir()}
    expected = {"catalog.csv", "truth_realization.json", "elbow.csv", "clusters.csv",
                "clusters.json", "hist_focal_strike.csv", "hist_focal_dip.csv",
                "hist_triple_strike.csv", "hist_triple_dip.csv", "constraints.json",
                "observations.csv", "inversion_case1.json", "inversion_case3.json",
                "table_aperture.csv", "table_permeability.csv", "table_pressure.csv",
                "table_axes.csv", "report.json", "truth_solution.csv"}
    assert expected <= names
    assert "inversion_case2.json" not in names
    clusters = json.loads((full_run / "clusters.json").read_text())
    assert clusters["k"] == 3
    report = json.loads((full_run / "report.json").read_text())
    assert [c["case"] for c in report["cases"]] == [1, 3]
    assert report["selected_k"] == 3


def test_rerun_is_byte_identical(tmp_path, fast_cfg, full_run):
    assert main(["all", "--config", str(fast_cfg), "--out-dir", str(tmp_path)]) == EXIT_OK
    assert digest(tmp_path) == digest(full_run)


def test_resume_after_deleting_downstream(tmp_path, fast_cfg, full_run):
    assert main(["all", "--config", str(fast_cfg), "--out-dir", str(tmp_path)]) == EXIT_OK
    for name in ("constraints.json", "inversion_case1.json", "inversion_case3.json", "report.json"):
        (tmp_path / name).unlink()
    assert main(["all", "--config", str(fast_cfg), "--out-dir", str(tmp_path)]) == EXIT_OK
    assert digest(tmp_path) == digest(full_run)


def test_single_case_invert(tmp_path, fast_cfg, full_run):
    for name in ("catalog.csv", "truth_realization.json", "clusters.csv", "clusters.json",
                 "elbow.csv", "constraints.json"):
        (tmp_path / name).write_bytes((full_run / name).read_bytes())
    assert main(["invert", "--config", str(fast_cfg), "--out-dir", str(tmp_path), "--case", "3"]) == EXIT_OK
    assert (tmp_path / "inversion_case3.json").read_bytes() == (full_run / "inversion_case3.json").read_bytes()
    assert not (tmp_path / "inversion_case1.json").exists()


def test_config_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("flow:\n  hh: 3\n")
    assert main(["synth", "--config", str(bad), "--out-dir", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "unknown config key flow.hh" in capsys.readouterr().err
    assert main(["synth", "--config", str(tmp_path / "missing.yaml")]) == EXIT_CONFIG
    assert main(["synth", "--out-dir", str(tmp_path / "o"), "--jobs", "0"]) == EXIT_CONFIG
    bad.write_text("seed: -1\n")
    assert main(["synth", "--config", str(bad)]) == EXIT_CONFIG


def test_synth_without_truth_exits_2(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("truth: null\n")
    assert main(["synth", "--config", str(cfg), "--out-dir", str(tmp_path / "o")]) == EXIT_CONFIG


def test_missing_inputs_exit_3(tmp_path, capsys):
    assert main(["cluster", "--out-dir", str(tmp_path)]) == EXIT_STAGE
    assert "[cluster]" in capsys.readouterr().err


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "fracinv.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "invert" in r.stdout
