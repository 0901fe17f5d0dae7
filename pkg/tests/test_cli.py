from __future__ import annotations

import json
import os
import subprocess
import sys
import time

import pytest

from maxstab.cli import main

TINY_CLT = """
[experiment]
command = clt
[model]
kind = smith
sigma = 1 0; 0 1
[grid]
spacing = 0.25
[control]
seed = 17
replicates = 50
[clt]
sides = 4
u = e
sigma2_replicates = 500
"""

SIMULATE = """
[experiment]
command = simulate
[model]
kind = smith
sigma = 1 0; 0 1
[grid]
spacing = 0.5
extent = 4
[control]
seed = 2
replicates = 120
[simulate]
save = 2
"""


def _write(tmp_path, text, name="exp.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def _strip_timestamp(path):
    d = json.loads(path.read_text())
    d.pop("generated_at")
    return d


def test_tiny_clt_run_within_budget(tmp_path):
    cfg = _write(tmp_path, TINY_CLT)
    t0 = time.perf_counter()
    assert main(["clt", "--config", str(cfg), "--out", str(tmp_path / "a"), "--quiet"]) == 0
    assert time.perf_counter() - t0 < 60
    out = tmp_path / "a"
    report = json.loads((out / "report.json").read_text())
    assert report["schema_version"] == 1 and report["report"] == "clt"
    assert report["sigma2_estimate"]["method"] == "integral"
    assert report["flags"] and "generated_at" in report
    assert (out / "qq.csv").read_text().startswith("region,side,theoretical,empirical\n")
    manifest = json.loads((out / "manifest.json").read_text())
    listed = {f["path"] for f in manifest["files"]}
    on_disk = {p.relative_to(out).as_posix() for p in out.rglob("*") if p.is_file()} - {"manifest.json"}
    assert listed == on_disk


def test_reproducible_rerun_is_byte_identical(tmp_path):
    cfg = _write(tmp_path, TINY_CLT.replace("sigma2_replicates = 500", "sigma2 = 11.0"))
    for name, threads in (("a", "1"), ("b", "4")):
        assert main(["clt", "--config", str(cfg), "--out", str(tmp_path / name), "--reproducible",
                     "--threads", threads, "--quiet"]) == 0
    a, b = tmp_path / "a", tmp_path / "b"
    assert _strip_timestamp(a / "report.json") == _strip_timestamp(b / "report.json")
    assert (a / "manifest.json").read_bytes() == (b / "manifest.json").read_bytes()
    for name in ("qq.csv", "replicates.csv", "summary.txt", "config.ini"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_simulate_writes_fields_and_margins(tmp_path):
    cfg = _write(tmp_path, SIMULATE)
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "s"), "--quiet"]) == 0
    out = tmp_path / "s"
    assert sorted(p.name for p in (out / "fields").iterdir()) == ["field_00000.bin", "field_00001.bin"]
    report = json.loads((out / "report.json").read_text())
    assert len(report["margins"]) == 5 and report["grid"]["counts"] == [8, 8]


def test_config_error_exit_status(tmp_path):
    cfg = _write(tmp_path, TINY_CLT.replace("sides = 4", "sides = 4 2"))
    assert main(["clt", "--config", str(cfg), "--out", str(tmp_path / "e"), "--quiet"]) == 2
    err = json.loads((tmp_path / "e" / "error.json").read_text())
    assert err["exit_code"] == 2 and err["errors"][0]["key"] == "sides"
    assert (tmp_path / "e" / "manifest.json").exists()


def test_numerical_error_exit_status(tmp_path):
    cfg = _write(tmp_path, SIMULATE.replace("replicates = 120", "replicates = 3\nmax_spectral_draws = 1"))
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "n"), "--quiet"]) == 3
    err = json.loads((tmp_path / "n" / "error.json").read_text())
    assert err["error_type"] == "SimulationError" and err["diagnostics"]["cap"] == 1


def test_unwritable_output_exit_status(tmp_path):
    cfg = _write(tmp_path, TINY_CLT)
    blocker = tmp_path / "file"
    blocker.write_text("not a directory")
    assert main(["clt", "--config", str(cfg), "--out", str(blocker / "out"), "--quiet"]) == 4


def test_missing_config_is_io_error(tmp_path):
    assert main(["clt", "--config", str(tmp_path / "none.ini"), "--out", str(tmp_path / "o"), "--quiet"]) == 4


def test_environment_thread_override(tmp_path, monkeypatch, caplog):
    cfg = _write(tmp_path, SIMULATE.replace("replicates = 120", "replicates = 2"))
    monkeypatch.setenv("MAXSTAB_THREADS", "3")
    with caplog.at_level("INFO", logger="maxstab"):
        assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "t")]) == 0
    assert "3 worker thread(s)" in caplog.text


def test_console_entry_point(tmp_path):
    cfg = _write(tmp_path, SIMULATE.replace("replicates = 120", "replicates = 2"))
    res = subprocess.run([sys.executable, "-m", "maxstab.cli", "simulate", "--config", str(cfg),
                          "--out", str(tmp_path / "c"), "--quiet"], capture_output=True, text=True,
                         env={**os.environ, "MAXSTAB_THREADS": "1"})
    assert res.returncode == 0, res.stderr


def test_bad_arguments_exit_nonzero():
    with pytest.raises(SystemExit) as exc:
        main(["unknown-command", "--config", "x", "--out", "y"])
    assert exc.value.code == 2
