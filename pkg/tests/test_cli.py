import json
import subprocess
import sys
from pathlib import Path

import pytest

from pseudotile import io
from pseudotile.cli import main
from pseudotile.selfaffinize import collar_recode

SPECS = Path(__file__).resolve().parent.parent / "specs"


@pytest.fixture(scope="module")
def windows(tmp_path_factory, fib_small):
    d = tmp_path_factory.mktemp("win")
    io.write_window(fib_small, d / "fib.txt")
    io.write_window(collar_recode(fib_small, 2.0), d / "rec.txt")
    return d


def test_selfaffinize_fibonacci_deterministic(tmp_path, capsys):
    assert main(["selfaffinize", str(SPECS / "fibonacci.spec"), "--out", str(tmp_path / "a")]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["status"] == "pass" and out["substitution_matrix"] == [[1, 1], [1, 0]]
    assert main(["selfaffinize", str(SPECS / "fibonacci.spec"), "--out", str(tmp_path / "b")]) == 0
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    assert Path("summary.json") in files and Path("solution/solution.json") in files
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    for rep in (tmp_path / "a" / "reports").glob("*.json"):
        assert json.loads(rep.read_text())["anchor"]


def test_verify_ld_pass_and_fail(windows, tmp_path):
    a, b = str(windows / "fib.txt"), str(windows / "rec.txt")
    assert main(["verify-ld", a, b, "--radius", "3.7", "--spacing", "0.01"]) == 0
    rep = tmp_path / "r.json"
    assert main(["verify-ld", a, b, "--radius", "0", "--spacing", "0.01", "--report", str(rep)]) == 1
    assert json.loads(rep.read_text())["witness"] is not None


def test_voronoi_probe(tmp_path):
    assert main(["voronoi", str(SPECS / "fibonacci_two_sided.spec"), "--r", "1.3", "--probe", "tau",
                 "--out", str(tmp_path / "v.txt")]) == 0
    assert io.read_window(tmp_path / "v.txt").m >= 2
    assert main(["voronoi", str(SPECS / "random.spec"), "--r", "1.3", "--probe", "tau"]) == 1


def test_solve_gifs(tmp_path, capsys):
    assert main(["solve-gifs", str(SPECS / "base3.digits"), "--tol", "1e-6", "--out", str(tmp_path)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["hausdorff_error"] <= 1e-6
    assert (tmp_path / "solution.json").exists()


def test_render(windows, tmp_path):
    svg = tmp_path / "w.svg"
    assert main(["render", str(windows / "fib.txt"), "--out", str(svg)]) == 0
    assert svg.read_text().startswith("<svg")
    assert main(["render", str(SPECS / "base3.digits"), "--out", str(svg)]) == 2


@pytest.mark.parametrize("argv", [
    ["solve-gifs", "/nonexistent/x.digits"],
    ["selfaffinize", "/nonexistent.spec", "--out", "/tmp/x"],
])
def test_usage_errors_exit_2(argv):
    assert main(argv) == 2


def test_parse_error_exit_2(tmp_path):
    p = tmp_path / "bad.spec"
    p.write_text("dimension 1\nprototile a 0 1\nplace a oops\n")
    assert main(["voronoi", str(p), "--r", "1"]) == 2


def test_argparse_errors_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["selfaffinize", "x", "--out", "y", "--k", "zero"])
    assert exc.value.code == 2


def test_stage_error_exit_3(tmp_path):
    p = tmp_path / "tiny.spec"
    p.write_text("dimension 1\nexpansion tau\nbuiltin fibonacci 3\nk 1\nL 50\n")
    assert main(["selfaffinize", str(p), "--out", str(tmp_path / "o")]) == 3


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "pseudotile.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    assert "solve-gifs" in out.stdout


def test_render_accepts_solution_directory(tmp_path):
    sol = tmp_path / "sol"
    assert main(["solve-gifs", str(SPECS / "base3.digits"), "--out", str(sol)]) == 0
    assert main(["render", str(sol), "--out", str(tmp_path / "s.svg")]) == 0
    assert (tmp_path / "s.svg").read_text().startswith("<svg")
