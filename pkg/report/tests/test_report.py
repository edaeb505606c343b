import json
import subprocess
import sys

import numpy as np
import pytest

from homogmc_report.cli import main
from homogmc_report.report import SchemaError, compute_badges, load_sweep, make_report

HEADER = "eps,mean_u,var_u,ci_halfwidth,ks_distance,ks_pvalue,exp_moment_diag,runtime_s"


def write_run(tmp_path, name, rows, manifest=None, samples=None):
    csv = tmp_path / f"{name}.csv"
    csv.write_text(HEADER + "\n" + "".join(r + "\n" for r in rows), encoding="utf-8")
    if manifest is not None:
        (tmp_path / f"{name}.manifest.json").write_text(
            json.dumps(manifest) + "\n", encoding="utf-8")
    if samples is not None:
        (tmp_path / f"{name}_samples.csv").write_text(
            "eps,kind,value\n" + "".join(s + "\n" for s in samples), encoding="utf-8")
    return str(csv)


DET_ROWS = [
    "0.4,1.08,0.035,0.02,nan,nan,1.9,nan",
    "0.2,1.10,0.020,0.015,nan,nan,2.0,nan",
    "0.1,1.105,0.009,0.01,nan,nan,2.0,nan",
]
DET_MANIFEST = {"schema": "homogmc-sweep-manifest/1",
                "config": {"n_fields": 200, "n_paths": 2000},
                "targets": {"limit_one_sided": 1.104, "limit_two_sided": 1.21}}


def test_load_and_badges_deterministic(tmp_path):
    path = write_run(tmp_path, "det", DET_ROWS, DET_MANIFEST)
    data = load_sweep(path)
    assert data.n_rows == 3
    badges = compute_badges(data)
    assert badges["variance collapse"] == "PASS"
    assert badges["ks trend"] == "n/a"
    assert badges["limit match"].startswith("PASS (best one-sided")


def test_badges_fail_when_not_monotone(tmp_path):
    rows = list(DET_ROWS)
    rows[1] = "0.2,1.10,0.040,0.015,nan,nan,2.0,nan"  # variance bump
    data = load_sweep(write_run(tmp_path, "bad", rows, DET_MANIFEST))
    assert compute_badges(data)["variance collapse"] == "FAIL"


def test_schema_mismatch_aborts(tmp_path):
    p = tmp_path / "wrong.csv"
    p.write_text("eps,mean\n0.4,1.0\n", encoding="utf-8")
    with pytest.raises(SchemaError):
        load_sweep(str(p))
    code = main(["--in", str(tmp_path), "--out", str(tmp_path / "out")])
    assert code == 2


def test_empty_rows_warn_and_exit_zero(tmp_path, capsys):
    write_run(tmp_path, "empty", [])
    code = main(["--in", str(tmp_path), "--out", str(tmp_path / "out")])
    assert code == 0
    assert "no rows" in capsys.readouterr().err
    index = (tmp_path / "out" / "index.html").read_text(encoding="utf-8")
    assert "No sweeps" in index


def test_single_row_figure_without_trend(tmp_path):
    path = write_run(tmp_path, "single", [DET_ROWS[0]], DET_MANIFEST)
    summary = make_report([path], str(tmp_path / "out"))
    run = summary["runs"][0]
    assert run["badges"]["variance collapse"].startswith("n/a")
    assert "single_mean.png" in run["figures"]
    assert "single_variance.png" in run["figures"]


def test_spde_run_with_samples_and_ks(tmp_path):
    rows = [
        "0.8,1.05,0.09,0.03,0.14,0.0001,2.4,nan",
        "0.4,1.08,0.11,0.03,0.08,0.1,2.5,nan",
        "0.2,1.09,0.14,0.03,0.07,0.2,2.5,nan",
    ]
    manifest = {"schema": "homogmc-sweep-manifest/1", "config": {"n_fields": 500}}
    rng = np.random.default_rng(0)
    samples = [f"0.2,sim,{v}" for v in rng.normal(1.09, 0.3, 60)]
    samples += [f"0.2,limit,{v}" for v in rng.normal(1.1, 0.3, 60)]
    path = write_run(tmp_path, "spde", rows, manifest, samples)
    summary = make_report([path], str(tmp_path / "out"))
    run = summary["runs"][0]
    assert run["badges"]["ks trend"].startswith("PASS")
    assert "spde_ks.png" in run["figures"]
    assert "spde_hist_eps0.2.png" in run["figures"]
    index = (tmp_path / "out" / "index.html").read_text(encoding="utf-8")
    assert "spde_ks.png" in index and "ks trend" in index


def test_report_is_pure_function_of_csv_bytes(tmp_path):
    path = write_run(tmp_path, "det", DET_ROWS, DET_MANIFEST)
    s1 = make_report([path], str(tmp_path / "o1"))
    s2 = make_report([path], str(tmp_path / "o2"))
    assert s1 == s2
    for run in s1["runs"]:
        for f in run["figures"]:
            b1 = (tmp_path / "o1" / f).read_bytes()
            b2 = (tmp_path / "o2" / f).read_bytes()
            assert b1 == b2
    i1 = (tmp_path / "o1" / "index.html").read_bytes()
    i2 = (tmp_path / "o2" / "index.html").read_bytes()
    assert i1 == i2


def test_end_to_end_from_real_sweeps(tmp_path):
    """Drive the primary tool through its CLI, then report on its outputs;
    badges must agree with trend tests recomputed here from the CSV."""
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "alpha = 2\nbeta = 1\neps = 0.4, 0.2, 0.1\nt = 0.5\ng = one\n"
        "n_paths = 400\nn_fields = 60\nseed = 404\nkernel = square\nw_t = 0.5\n"
        "name = e2e_det\n",
        encoding="utf-8",
    )
    data_dir = tmp_path / "data"
    proc = subprocess.run([sys.executable, "-m", "homogmc.cli", "sweep",
                           "--config", str(cfg), "--out", str(data_dir)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    cfg2 = tmp_path / "run2.cfg"
    cfg2.write_text(
        "alpha = 1\nbeta = 0\neps = 0.8, 0.4, 0.2\nt = 1.0\ng = one\n"
        "n_paths = 200\nn_fields = 120\nseed = 7\nkernel = holder\ntheta = 1.0\n"
        "name = e2e_spde\n",
        encoding="utf-8",
    )
    proc = subprocess.run([sys.executable, "-m", "homogmc.cli", "sweep",
                           "--config", str(cfg2), "--out", str(data_dir)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    out_dir = tmp_path / "figs"
    assert main(["--in", str(data_dir), "--out", str(out_dir)]) == 0
    assert (out_dir / "index.html").exists()
    det = load_sweep(str(data_dir / "e2e_det.csv"))
    var = det.columns["var_u"]
    expected = "PASS" if np.all(np.diff(var) < 0) else "FAIL"
    assert compute_badges(det)["variance collapse"] == expected
    spde = load_sweep(str(data_dir / "e2e_spde.csv"))
    figs = {p.name for p in out_dir.iterdir()}
    assert "e2e_det_mean.png" in figs and "e2e_spde_ks.png" in figs
    assert any(name.startswith("e2e_spde_hist_eps") for name in figs)
