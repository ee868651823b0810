import csv
import json
import subprocess
import sys

import pytest

from squeeze_forge.cli import RunConfig, cert_main, main
from squeeze_forge.reports import CheckReport, atomic_write_text, csv_text, merge_all


def diagnostics(capsys):
    err = capsys.readouterr().err
    return [json.loads(line) for line in err.splitlines() if line.strip()]


@pytest.fixture(scope="module")
def built(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["build", "--k0", "10", "--depth", "6", "--seed", "1", "--out", str(d / "s.json")]) == 0
    return d


def tamper(src, dst, index):
    doc = json.loads(src.read_text())
    doc["entries"][index]["epsilon"] *= 2
    dst.write_text(json.dumps(doc))
    return dst


# -- build --------------------------------------------------------------------------------


def test_build_writes_six_entries(built, golden_dir):
    doc = json.loads((built / "s.json").read_text())
    assert doc["depth"] == 6 and len(doc["entries"]) == 6
    assert (built / "s.json").read_text() == (golden_dir / "schedule_k10_d6.json").read_text()


def test_build_is_byte_identical_on_rerun(built, tmp_path):
    assert main(["build", "--k0", "10", "--depth", "6", "--seed", "1", "--out", str(tmp_path / "b.json")]) == 0
    assert (tmp_path / "b.json").read_bytes() == (built / "s.json").read_bytes()


def test_build_with_explicit_margin(tmp_path):
    assert main(["build", "--k0", "10", "--depth", "2", "--m", "3", "--out", str(tmp_path / "m3.json")]) == 0
    assert json.loads((tmp_path / "m3.json").read_text())["m"] == 3


def test_build_below_start_index_is_exhausted(tmp_path, capsys):
    assert main(["build", "--k0", "2", "--depth", "1", "--m", "1", "--out", str(tmp_path / "x.json")]) == 2
    diag = diagnostics(capsys)
    assert diag[0]["error"] == "search-exhausted" and diag[0]["k"] == 2
    assert not (tmp_path / "x.json").exists()


def test_build_into_unwritable_path_is_io_error(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["build", "--depth", "1", "--out", str(blocker / "s.json")]) == 3
    assert diagnostics(capsys)[0]["error"] == "io"


# -- verify -------------------------------------------------------------------------------


def test_verify_certified_schedule(built, capsys):
    out = built / "reports"
    code = main(["verify", "--schedule", str(built / "s.json"), "--out", str(out), "--pairs", "20000",
                 "--samples", "500"])
    assert code == 0, capsys.readouterr().err
    for name in ("pinch.csv", "convexity.csv", "exhaustion.csv", "caps.csv", "curvature_profile.csv",
                 "summary.json", "curvature_profile.png", "convexity.png"):
        assert (out / name).stat().st_size > 0
    rows = list(csv.DictReader((out / "curvature_profile.csv").open()))
    assert set(rows[0]) == {"surface", "radius", "kappa_min", "kappa_max"}
    summary = json.loads((out / "summary.json").read_text())
    assert summary["complex_interpretable"] is True
    assert all(s["ok"] for s in summary["suites"].values())


def test_verify_outputs_are_byte_identical(built, tmp_path):
    args = ["verify", "--schedule", str(built / "s.json"), "--pairs", "5000", "--samples", "200"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    for f in sorted((tmp_path / "a").iterdir()):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes(), f.name


def test_verify_names_the_violating_suites(built, tmp_path, capsys):
    bad = tamper(built / "s.json", tmp_path / "t.json", 0)
    code = main(["verify", "--schedule", str(bad), "--out", str(tmp_path / "r"), "--pairs", "100000",
                 "--samples", "300"])
    assert code == 1
    suites = {d["suite"] for d in diagnostics(capsys)}
    assert {"schedule", "convexity"} <= suites


def test_verify_empty_file_is_parse_error(tmp_path, capsys):
    empty = tmp_path / "e.json"
    empty.write_text("")
    assert main(["verify", "--schedule", str(empty)]) == 3
    assert "empty" in diagnostics(capsys)[0]["message"]


def test_verify_missing_file_is_io_error(tmp_path, capsys):
    assert main(["verify", "--schedule", str(tmp_path / "none.json")]) == 3
    assert diagnostics(capsys)[0]["error"] == "io"


def test_verify_garbage_is_parse_error(tmp_path):
    junk = tmp_path / "j.json"
    junk.write_text("{not json")
    assert main(["verify", "--schedule", str(junk)]) == 3
    junk.write_text('{"k0": 10}')
    assert main(["verify", "--schedule", str(junk)]) == 3


# -- certificate ----------------------------------------------------------------------------


def test_certificate_writes_json_csv_and_figure(built):
    out = built / "cert.json"
    assert main(["certificate", "--schedule", str(built / "s.json"), "--samples", "500",
                 "--out", str(out)]) == 0
    rows = list(csv.DictReader((built / "cert_bounds.csv").open()))
    bounds = [float(r["bound"]) for r in rows]
    assert len(rows) == 6 and all(b > a for a, b in zip(bounds, bounds[1:]))
    assert (built / "cert_bounds.png").stat().st_size > 0
    assert len(json.loads(out.read_text())["shells"]) == 6


def test_squeeze_cert_entry_point_matches(built, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert cert_main(["--schedule", str(built / "s.json"), "--samples", "300", "--out", str(a)]) == 0
    assert main(["certificate", "--schedule", str(built / "s.json"), "--samples", "300",
                 "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "a_bounds.png").read_bytes() == (tmp_path / "b_bounds.png").read_bytes()


def test_certificate_depth_one(tmp_path, golden_dir):
    out = tmp_path / "c1.json"
    assert cert_main(["--schedule", str(golden_dir / "schedule_k10_d1.json"), "--samples", "300",
                      "--out", str(out)]) == 0
    assert len((tmp_path / "c1_bounds.csv").read_text().splitlines()) == 2


def test_certificate_refuses_tampered_schedule(built, tmp_path, capsys):
    bad = tamper(built / "s.json", tmp_path / "t.json", 2)
    assert cert_main(["--schedule", str(bad), "--samples", "300", "--out", str(tmp_path / "c.json")]) == 1
    checks = {d["check"] for d in diagnostics(capsys)}
    assert "seams" in checks
    assert not (tmp_path / "c.json").exists()


def test_zero_samples_rejected(built, capsys):
    assert cert_main(["--schedule", str(built / "s.json"), "--samples", "0"]) == 3
    assert "cannot be skipped" in diagnostics(capsys)[0]["message"]


# -- configuration -----------------------------------------------------------------------------


def test_run_config_validation():
    assert RunConfig().problems() == []
    assert RunConfig(n=1).problems()
    assert RunConfig(samples=0).problems()
    assert RunConfig(pairs=0).problems()
    assert RunConfig(n=4).complex_interpretable and not RunConfig(n=5).complex_interpretable


def test_odd_dimension_runs(built, tmp_path):
    out = tmp_path / "c3.json"
    assert cert_main(["--schedule", str(built / "s.json"), "--n", "3", "--samples", "200",
                      "--out", str(out)]) == 0


def test_thread_cap_env(built, tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("SQUEEZE_FORGE_THREADS", "1")
    assert cert_main(["--schedule", str(built / "s.json"), "--samples", "200",
                      "--out", str(tmp_path / "c.json")]) == 0
    monkeypatch.setenv("SQUEEZE_FORGE_THREADS", "many")
    assert cert_main(["--schedule", str(built / "s.json"), "--samples", "200",
                      "--out", str(tmp_path / "c.json")]) == 3
    assert diagnostics(capsys)[0]["error"] == "config"


def test_console_module_runs():
    proc = subprocess.run([sys.executable, "-m", "squeeze_forge.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "build" in proc.stdout


# -- reports -------------------------------------------------------------------------------


def test_reports_merge_as_a_monoid():
    a = CheckReport("x", 3, 1, 0.5, [1])
    b = CheckReport("x", 2, 0, -0.1, [2])
    c = CheckReport("x", 4, 2, 0.2, [3])
    left, right = a.merge(b).merge(c), a.merge(b.merge(c))
    assert left == right and left.samples == 9 and left.min_slack == -0.1
    assert merge_all("y", [a, b, c]).name == "y"
    assert CheckReport("x").merge(a) == a


def test_summary_maps_infinite_slack_to_null():
    assert CheckReport("e").summary()["min_slack"] is None


def test_atomic_write_and_csv(tmp_path):
    path = tmp_path / "sub" / "f.csv"
    atomic_write_text(path, csv_text(["a", "b"], [(1, 0.1), ("z", 1e-300)]))
    assert path.read_text() == "a,b\n1,0.1\nz,1e-300\n"
    assert [p.name for p in path.parent.iterdir()] == ["f.csv"]
