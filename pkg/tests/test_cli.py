"""End-to-end CLI behavior: subcommands, exit codes, file outputs."""

import contextlib
import csv
import io

import numpy as np
import pytest

from gammact.cli import main
from gammact.formats import parse_image, parse_open_beam, parse_phantom, \
    parse_sinogram


def run(*args):
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = main(list(args))
    return code, out.getvalue(), err.getvalue()


def test_phantom_default_outputs(tmp_path):
    code, _, _ = run("phantom", "--out", str(tmp_path))
    assert code == 0
    truth = parse_image((tmp_path / "truth.dimg").read_text())
    assert truth.values.shape == (128, 128)
    assert float(truth.values.max()) == 0.544  # iron is the densest region
    assert (tmp_path / "truth.pgm").read_text().startswith("P2\n")
    ph = parse_phantom((tmp_path / "phantom.spec").read_text())
    assert ph.background.radius == 6.0


def test_phantom_bad_radius_exits_2(tmp_path):
    spec = tmp_path / "bad.spec"
    spec.write_text("[background]\ncx=0\ncy=0\nr=-1\nmu=0.096\n")
    code, _, err = run("phantom", "--out", str(tmp_path / "out"),
                       "--set", f"phantom.file={spec}")
    assert code == 2
    assert "radius" in err


def test_scan_outputs_and_determinism(tmp_path):
    args = ("scan", "--seed", "5", "--set", "repeats=20")
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(*args, "--out", str(a))[0] == 0
    assert run(*args, "--out", str(b))[0] == 0
    counts = parse_sinogram((a / "counts.dsino").read_text())
    assert counts.values.shape == (36, 5)
    assert counts.seed == 5
    _, samples, _ = parse_open_beam((a / "open_beam.txt").read_text())
    assert samples.shape == (20, 5)
    # identical (config, seed) -> byte-identical outputs
    assert (a / "counts.dsino").read_bytes() == (b / "counts.dsino").read_bytes()
    assert (a / "open_beam.txt").read_bytes() == (b / "open_beam.txt").read_bytes()


def test_scan_requires_seed(tmp_path):
    code, _, err = run("scan", "--out", str(tmp_path))
    assert code == 2
    assert "seed" in err


@pytest.fixture()
def pipeline_dir(tmp_path):
    out = str(tmp_path / "run")
    small = ("--set", "recon.n_pixels=64", "--set", "recon.s_max=3.0")
    assert run("phantom", "--out", out, *small)[0] == 0
    assert run("scan", "--seed", "11", "--set", "repeats=50", "--out", out)[0] == 0
    assert run("reconstruct", "--out", out, *small)[0] == 0
    return out


def test_reconstruct_writes_five_images(pipeline_dir, tmp_path):
    out = tmp_path / "run"
    for code in ("h99", "h91", "h75", "h54", "h50"):
        img = parse_image((out / f"recon_{code}.dimg").read_text())
        assert img.values.shape == (64, 64)
        assert img.filter.code == code
    par = parse_sinogram((out / "parallel.dsino").read_text())
    assert par.values.shape == (36, 64)


def test_reconstruct_single_filter(tmp_path):
    out = str(tmp_path)
    assert run("scan", "--seed", "2", "--set", "repeats=10", "--out", out)[0] == 0
    code, _, _ = run("reconstruct", "--out", out, "--set", "recon.filters=h50",
                     "--set", "recon.n_pixels=32", "--set", "recon.s_max=3.0")
    assert code == 0
    assert (tmp_path / "recon_h50.dimg").exists()
    assert not (tmp_path / "recon_h99.dimg").exists()


def test_reconstruct_without_scan_exits_2(tmp_path):
    code, _, err = run("reconstruct", "--out", str(tmp_path))
    assert code == 2
    assert "scan" in err


def test_reconstruct_corrupted_header_names_missing_key(tmp_path):
    out = str(tmp_path)
    assert run("scan", "--seed", "2", "--set", "repeats=10", "--out", out)[0] == 0
    sino = tmp_path / "counts.dsino"
    text = "\n".join(ln for ln in sino.read_text().splitlines()
                     if not ln.startswith("n_detectors="))
    sino.write_text(text + "\n")
    code, _, err = run("reconstruct", "--out", out)
    assert code == 2
    assert "n_detectors" in err


def test_analyze_outputs(pipeline_dir, tmp_path):
    out = tmp_path / "run"
    code, _, _ = run("analyze", "--out", str(out))
    assert code == 0
    with open(out / "kt1_signature.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 5
    assert {float(r["w2_0"]) for r in rows} == {0.001, 0.083, 0.250, 0.460, 0.500}
    assert all(float(r["nmax"]) > 0 for r in rows)
    summary = (out / "fit_summary.txt").read_text()
    assert "rmse_kt1=" in summary
    with open(out / "rmse_table.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 5


def test_analyze_needs_three_filters(tmp_path):
    code, _, err = run("analyze", "--out", str(tmp_path))
    assert code == 2
    assert "3" in err


def test_analyze_collinear_images_give_zero_residual(tmp_path):
    from gammact import GridSpec, ReconImage, get_filter
    from gammact.formats import format_image

    out = tmp_path
    grid = GridSpec(8, 14.0)
    for code in ("h99", "h91", "h75"):
        filt = get_filter(code)
        vals = np.zeros((8, 8))
        vals[4, 4] = 1.0 / (2.0 * filt.w2_0 + 1.0)  # 1/N_max = 2*w2_0 + 1
        (out / f"recon_{code}.dimg").write_text(
            format_image(ReconImage(grid, vals, filt))
        )
    code, _, _ = run("analyze", "--out", str(out))
    assert code == 0
    summary = dict(
        ln.split("=", 1) for ln in (out / "fit_summary.txt").read_text().split()
    )
    assert abs(float(summary["rmse_kt1"])) < 1e-12


def test_sweep_single_setting(tmp_path):
    out = str(tmp_path)
    code, _, _ = run(
        "sweep", "--seed", "3", "--out", out,
        "--set", "sweep.hv=750", "--set", "sweep.gain=1.0",
        "--set", "sweep.lld=1.0", "--set", "sweep.tau=1.0",
        "--set", "sweep.repeats=50",
        "--set", "recon.n_pixels=32", "--set", "recon.n_sbins=32",
        "--set", "recon.s_max=3.0",
    )
    assert code == 0
    with open(tmp_path / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1
    assert float(rows[0]["hv"]) == 750.0
    for criterion in ("rmse_kt1", "rmse_ct", "normality"):
        with open(tmp_path / f"rank_{criterion}.csv") as fh:
            ranked = list(csv.DictReader(fh))
        assert len(ranked) == 1
        assert ranked[0] == rows[0]


def test_sweep_grid_file_27_rows(tmp_path):
    grid_file = tmp_path / "grid.txt"
    grid_file.write_text(
        "hv=700 750 800\ngain=0.7 1.0 1.4\nlld=0.5 1.0 1.5\ntau=1.0\n"
    )
    out = str(tmp_path / "out")
    code, _, _ = run(
        "sweep", "--seed", "1", "--out", out,
        "--set", f"sweep.grid_file={grid_file}",
        "--set", "sweep.repeats=50",
        "--set", "recon.n_pixels=32", "--set", "recon.n_sbins=32",
        "--set", "recon.s_max=3.0",
    )
    assert code == 0
    with open(tmp_path / "out" / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 27
    with open(tmp_path / "out" / "rank_normality.csv") as fh:
        ranked = list(csv.DictReader(fh))
    scores = [float(r["normality"]) for r in ranked]
    assert scores == sorted(scores)


def test_verify_passes_and_negative_control(tmp_path):
    code, out, _ = run("verify", "--out", str(tmp_path / "a"))
    assert code == 0
    assert "[FAIL]" not in out
    code, out, _ = run("verify", "--out", str(tmp_path / "b"),
                       "--set", "verify.break_filter_table=true")
    assert code == 1
    assert "[FAIL] filter_table" in out


def test_output_directory_lock(tmp_path):
    (tmp_path / ".lock").touch()
    code, _, err = run("phantom", "--out", str(tmp_path))
    assert code == 2
    assert "locked" in err
    (tmp_path / ".lock").unlink()
    assert run("phantom", "--out", str(tmp_path))[0] == 0
    assert not (tmp_path / ".lock").exists()  # released on success


def test_unknown_config_key_exits_2(tmp_path):
    code, _, err = run("phantom", "--out", str(tmp_path), "--set", "nope=1")
    assert code == 2
    assert "unknown config key" in err
    code, _, err = run("phantom", "--out", str(tmp_path), "--set", "oops")
    assert code == 2
    assert "KEY=VALUE" in err
