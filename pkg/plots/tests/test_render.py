import pathlib
import subprocess
import sys

import pytest

from membrane_plots import EmptyInput, FigureJob, MissingColumn, render

DATA = pathlib.Path(__file__).parent / "data"

JOBS = {
    "branch": ("branch/branch.csv", "branch/envelope.json"),
    "profile": ("eigen/eigenfunction.csv", "eigen/envelope.json"),
    "alpha": ("alpha/alpha_sweep.csv", "alpha/envelope.json"),
    "blowup": ("blowup/blowup.csv", "blowup/envelope.json"),
}


@pytest.mark.parametrize("kind", sorted(JOBS))
def test_kind_renders_and_is_deterministic(kind, tmp_path):
    csv_rel, env_rel = JOBS[kind]
    first = tmp_path / f"{kind}_a.png"
    second = tmp_path / f"{kind}_b.png"
    for out in (first, second):
        render(FigureJob(kind=kind, input_csv=str(DATA / csv_rel),
                         out_path=str(out), envelope=str(DATA / env_rel)))
    a, b = first.read_bytes(), second.read_bytes()
    assert len(a) > 2000
    assert a == b


def test_render_without_envelope(tmp_path):
    out = tmp_path / "branch.png"
    render(FigureJob(kind="branch",
                     input_csv=str(DATA / "branch/branch.csv"),
                     out_path=str(out)))
    assert out.exists()


def test_missing_column(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("lambda,other\n1.0,2.0\n")
    with pytest.raises(MissingColumn, match="sup_norm"):
        render(FigureJob(kind="branch", input_csv=str(bad),
                         out_path=str(tmp_path / "x.png")))


def test_empty_input(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("lambda,sup_norm,mass_norm,newton_iters,residual\n")
    with pytest.raises(EmptyInput):
        render(FigureJob(kind="branch", input_csv=str(empty),
                         out_path=str(tmp_path / "x.png")))


def test_unknown_kind():
    with pytest.raises(ValueError):
        FigureJob(kind="waterfall", input_csv="x.csv", out_path="y.png")


def test_cli_end_to_end(tmp_path):
    out = tmp_path / "alpha.png"
    proc = subprocess.run(
        [sys.executable, "-m", "membrane_plots.cli", "alpha",
         "--input", str(DATA / "alpha/alpha_sweep.csv"),
         "--envelope", str(DATA / "alpha/envelope.json"),
         "--out", str(out)],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert out.exists()


def test_cli_reports_failure(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "membrane_plots.cli", "branch",
         "--input", str(tmp_path / "nope.csv"),
         "--out", str(tmp_path / "x.png")],
        capture_output=True, text=True)
    assert proc.returncode == 1
    assert "plot failed" in proc.stderr
