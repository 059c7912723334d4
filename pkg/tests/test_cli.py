"""Command line runs, result files and plot data."""

import csv
import math
from pathlib import Path

import pytest

from rotnsk.cli import EXIT_CONFIG, EXIT_OK, main
from rotnsk.experiments import PlotData, emit_plotdata
from rotnsk.io import read_manifest

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

SMALL_PHASE = """
[experiment]
kind = phase_diagram
seed = 2

[grid]
L = 2*pi
N = 16

[solver]
h = 0.05
T = 0.2

[data]
kind = random
kmax = 3
amp_a = 0.2
amp_m = 0.2

[sweep]
rotation = 0, 8
mach = 1, 0.25
"""

SMALL_STRICHARTZ = """
[experiment]
kind = strichartz

[grid]
L = 2*pi
N = 16

[params]
mach = 2**-8

[data]
block = 1
T = 1
n_times = 12

[sweep]
exponents = 2 6 3
rotation = 4, 8, 16
"""


def write(tmp_path, text, name="cfg.ini"):
    path = tmp_path / name
    path.write_text(text)
    return path


def rows_without_wall_time(path):
    with open(path, newline="") as fh:
        return [{k: v for k, v in r.items() if k != "wall_time"} for r in csv.DictReader(fh)]


def plot_columns(path):
    lines = Path(path).read_text().splitlines()
    header = [ln for ln in lines if ln.startswith("#")]
    body = [ln.split() for ln in lines if not ln.startswith("#")]
    return header, body


class TestValidate:
    def test_ok(self, capsys):
        assert main(["validate", "--config", str(CONFIGS / "linear_decay.ini")]) == EXIT_OK
        assert capsys.readouterr().out.startswith("ok: linear_decay ")

    def test_missing_rotation_axis(self, tmp_path, capsys):
        path = write(tmp_path, SMALL_PHASE.replace("rotation = 0, 8\n", ""))
        assert main(["validate", "--config", str(path)]) == EXIT_CONFIG
        assert "rotation is required" in capsys.readouterr().err

    def test_kind_mismatch(self, capsys):
        assert main(["picard", "--config", str(CONFIGS / "linear_decay.ini")]) == EXIT_CONFIG
        assert "subcommand" in capsys.readouterr().err

    def test_bad_workers(self, tmp_path, capsys):
        code = main(["linear_decay", "--config", str(CONFIGS / "linear_decay.ini"), "--out", str(tmp_path), "--workers", "0"])
        assert code == EXIT_CONFIG


class TestLinearDecayRun:
    """The decay sweep at its shipped settings."""

    def run(self, out, *extra):
        return main(["linear_decay", "--config", str(CONFIGS / "linear_decay.ini"), "--out", str(out), *extra])

    def test_margins_and_files(self, tmp_path, capsys):
        assert self.run(tmp_path) == EXIT_OK
        out = capsys.readouterr().out
        assert "overall = pass" in out
        (d,) = list(tmp_path.iterdir())
        assert {p.name for p in d.iterdir()} >= {"results.csv", "summary.txt", "plot.dat", "manifest.ini", "config.ini"}
        rows = rows_without_wall_time(d / "results.csv")
        assert len(rows) > 0
        assert all(float(r["margin"]) >= 0 for r in rows)
        assert {r["config_hash"] for r in rows} == {d.name.split("-")[-1]}
        man = read_manifest(d / "manifest.ini")
        assert man["run"]["config_hash"] == d.name.split("-")[-1]
        header, body = plot_columns(d / "plot.dat")
        assert "# log2_xi log_rate series" in header
        assert any(h.startswith("# fit[") for h in header)
        assert all(len(r) == 3 for r in body)

    def test_deterministic(self, tmp_path):
        self.run(tmp_path / "a")
        self.run(tmp_path / "b")
        (da,), (db,) = list((tmp_path / "a").iterdir()), list((tmp_path / "b").iterdir())
        assert da.name == db.name
        assert rows_without_wall_time(da / "results.csv") == rows_without_wall_time(db / "results.csv")
        assert (da / "plot.dat").read_bytes() == (db / "plot.dat").read_bytes()

    def test_changed_config_does_not_overwrite(self, tmp_path):
        self.run(tmp_path)
        self.run(tmp_path, "--seed", "5")
        dirs = sorted(p.name for p in tmp_path.iterdir())
        assert len(dirs) == 2

    def test_report(self, tmp_path, capsys):
        self.run(tmp_path)
        (d,) = list(tmp_path.iterdir())
        capsys.readouterr()
        assert main(["report", str(d)]) == EXIT_OK
        out = capsys.readouterr().out
        assert "kind = linear_decay" in out and "check.margin_nonnegative = pass" in out

    def test_report_missing(self, tmp_path):
        assert main(["report", str(tmp_path)]) == EXIT_CONFIG


class TestSmallRuns:
    """Plot layouts of the other experiment kinds on small grids."""

    def test_phase_diagram(self, tmp_path, capsys):
        path = write(tmp_path, SMALL_PHASE)
        assert main(["phase_diagram", "--config", str(path), "--out", str(tmp_path / "o")]) == EXIT_OK
        (d,) = list((tmp_path / "o").iterdir())
        header, body = plot_columns(d / "plot.dat")
        assert "# rotation mach status_code" in header
        assert any("status_codes" in h for h in header)
        assert len(body) == 4
        assert all(r[2] == "0" for r in body)  # every small run stays bounded

    def test_strichartz(self, tmp_path, capsys):
        path = write(tmp_path, SMALL_STRICHARTZ)
        assert main(["strichartz", "--config", str(path), "--out", str(tmp_path / "o")]) == EXIT_OK
        summary = capsys.readouterr().out
        assert "slope[p=2;q=6;r=3]" in summary
        assert "target[p=2;q=6;r=3] = -0.3333333333333333" in summary
        (d,) = list((tmp_path / "o").iterdir())
        header, body = plot_columns(d / "plot.dat")
        assert "# log2_rotation log_norm fit_residual series" in header
        assert [float(r[0]) for r in body] == [2.0, 3.0, 4.0]

    def test_single_run_outputs(self, tmp_path):
        text = (CONFIGS / "single_run.ini").read_text()
        text = text.replace("N = 32", "N = 16").replace("T = 2", "T = 0.1").replace("snapshot_every = 50", "snapshot_every = 2")
        path = write(tmp_path, text)
        assert main(["single_run", "--config", str(path), "--out", str(tmp_path / "o")]) == EXIT_OK
        (d,) = list((tmp_path / "o").iterdir())
        names = {p.name for p in d.iterdir()}
        assert {"tracker.csv", "final.bin", "snapshot_0000.bin"} <= names


class TestPlotData:
    def test_empty_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="empty"):
            emit_plotdata(PlotData(("x", "y"), []), tmp_path / "p.dat")

    def test_layout(self, tmp_path):
        path = emit_plotdata(PlotData(("x", "y"), [(1.0, 2.5)], {"fit": "slope=1"}), tmp_path / "p.dat")
        assert path.read_text() == "# fit = slope=1\n# x y\n1.0 2.5\n"
