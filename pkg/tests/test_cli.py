import csv
import json

import pytest

from qsdw.cli import main, write_csv
from qsdw.experiments import SERIES_COLUMNS, Table

SMALL = """
experiment = "{experiment}"

[equation]
p = 3.0
q = 2.0
{equation}

[grid]
N = 16
{grid}

[time]
dt = 1e-2
T = {T}
cadence = 5

[initial]
preset = "{preset}"
{initial}
{options}
"""


def write_config(tmp_path, name="run.toml", experiment="strong_norm", equation="", grid="",
                 T=4.0, preset="smooth", initial="", options=""):
    path = tmp_path / name
    path.write_text(SMALL.format(experiment=experiment, equation=equation, grid=grid, T=T,
                                 preset=preset, initial=initial, options=options))
    return path


def run(path, out, *extra):
    return main(["run", str(path), "--output-dir", str(out), "--quiet", *extra])


class TestOutputs:
    def test_timeseries_header(self, tmp_path):
        out = tmp_path / "out"
        assert run(write_config(tmp_path), out) == 0
        with open(out / "timeseries.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert tuple(rows[0]) == SERIES_COLUMNS
        assert len(rows) == 1 + 81
        assert float(rows[-1][0]) == 4.0

    def test_summary_pass(self, tmp_path):
        out = tmp_path / "out"
        assert run(write_config(tmp_path), out) == 0
        summary = json.loads((out / "summary.json").read_text())
        assert summary["failed"] == [] and summary["exit_code"] == 0
        assert summary["experiment"] == "strong_norm"
        assert set(summary["provenance"]) >= {"config_hash", "seed", "scheme", "dt", "N"}

    def test_byte_identical_rerun(self, tmp_path):
        cfg = write_config(tmp_path, preset="random_spectral", initial="seed = 5")
        a, b = tmp_path / "a", tmp_path / "b"
        assert run(cfg, a) == run(cfg, b) == 0
        for name in ("timeseries.csv", "strong.csv", "resolved_config.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_resolved_config_replays(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run(write_config(tmp_path), a) == 0
        assert run(a / "resolved_config.json", b) == 0
        assert (a / "timeseries.csv").read_bytes() == (b / "timeseries.csv").read_bytes()

    def test_seed_override(self, tmp_path):
        cfg = write_config(tmp_path, preset="random_spectral", initial="seed = 5")
        a, b = tmp_path / "a", tmp_path / "b"
        assert run(cfg, a, "--seed", "6") == 0
        assert run(cfg, b) == 0
        assert json.loads((a / "resolved_config.json").read_text())["initial"]["seed"] == 6
        assert (a / "timeseries.csv").read_bytes() != (b / "timeseries.csv").read_bytes()

    def test_empty_table_header_only(self, tmp_path):
        path = tmp_path / "empty.csv"
        write_csv(Table(("t", "x"), []), path)
        assert path.read_text() == "t,x\n"

    def test_seventeen_digits(self, tmp_path):
        path = tmp_path / "t.csv"
        write_csv(Table(("x",), [[0.1]]), path)
        assert path.read_text().splitlines()[1] == "0.10000000000000001"


class TestExitCodes:
    def test_dealiasing_capacity(self, tmp_path, capsys):
        cfg = write_config(tmp_path, grid="M = 20")
        assert run(cfg, tmp_path / "out") == 1
        assert "build_basis: M=20 < ceil(3N/2)=24" in capsys.readouterr().err

    def test_unknown_key(self, tmp_path, capsys):
        cfg = write_config(tmp_path, equation="gamma_typo = 1.0")
        assert run(cfg, tmp_path / "out") == 1
        assert "gamma_typo" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert run(tmp_path / "nope.toml", tmp_path / "out") == 1

    def test_stray_options_table(self, tmp_path):
        cfg = write_config(tmp_path, options="[lipschitz]\neps = [1e-3]")
        assert run(cfg, tmp_path / "out") == 1

    def test_bad_thread_count(self, tmp_path, monkeypatch):
        monkeypatch.setenv("QSDW_THREADS", "x")
        assert run(write_config(tmp_path), tmp_path / "out") == 1

    def test_numerical_invariant(self, tmp_path, capsys):
        cfg = write_config(tmp_path, experiment="splitting",
                           options="[splitting]\nconsistency_tol = 1e-30")
        out = tmp_path / "out"
        assert run(cfg, out) == 3
        assert "splitting consistency" in capsys.readouterr().err
        assert "splitting consistency" in json.loads((out / "summary.json").read_text())["failed"]

    def test_physics_invariant(self, tmp_path, capsys):
        cfg = write_config(tmp_path, experiment="lipschitz", T=1.0,
                           options="[lipschitz]\nspread_factor = 1.0")
        assert run(cfg, tmp_path / "out") == 2
        assert "lipschitz_ratio_spread" in capsys.readouterr().err

    def test_diverging_fixed_point(self, tmp_path):
        cfg = tmp_path / "div.toml"
        cfg.write_text(SMALL.format(experiment="strong_norm", equation="", grid="", T=1.0,
                                    preset="smooth", initial="u_amplitudes = [30.0]",
                                    options="").replace("dt = 1e-2", "dt = 0.5")
                       .replace("cadence = 5", "cadence = 1"))
        assert run(cfg, tmp_path / "out") == 3


@pytest.mark.parametrize("argv", [[], ["run"], ["bogus"]])
def test_usage_errors(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code != 0
