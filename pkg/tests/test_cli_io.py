import json
import subprocess
import sys

import numpy as np
import pytest

from wavelab.cli_io import (
    RunConfig,
    apply_overrides,
    dispatch,
    dump_config,
    load_checkpoint,
    load_config,
    main,
    read_series,
    save_checkpoint,
    write_series,
)
from wavelab.errors import CheckpointError, ParseError, RangeError, SchemaError
from wavelab.spectral_core import PeriodicGrid
from wavelab.timestepper import DIAG_COLUMNS, DiagnosticsRecord, StepperConfig, dt_ceiling, run
from wavelab.waterwave_core import PhysParams, random_smooth


def write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return p


class TestConfig:
    def test_defaults_filled(self, tmp_path):
        cfg = load_config(write(tmp_path, {}))
        assert cfg.stepper["dealias"] == pytest.approx(2 / 3)
        ceil = dt_ceiling(cfg.make_grid(), cfg.make_params(), cfg.stepper["scheme"], cfg.stepper["dealias"])
        dt, t_end = cfg.stepper["dt"], cfg.stepper["t_end"]
        assert dt <= 0.5 * ceil
        assert t_end / dt == pytest.approx(round(t_end / dt), abs=1e-9)

    def test_sigma_zero(self, tmp_path):
        with pytest.raises(RangeError) as exc:
            load_config(write(tmp_path, {"params": {"sigma": 0}}))
        assert exc.value.key == "sigma"

    def test_unknown_key(self, tmp_path):
        with pytest.raises(SchemaError) as exc:
            load_config(write(tmp_path, {"stepper": {"dtt": 0.1}}))
        assert exc.value.key == "stepper.dtt"
        with pytest.raises(SchemaError):
            RunConfig.from_dict({"plots": {}})

    def test_wrong_type(self):
        with pytest.raises(SchemaError) as exc:
            RunConfig.from_dict({"grid": {"n_points": "big"}})
        assert exc.value.key == "grid.n_points"

    def test_parse_errors(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(ParseError):
            load_config(bad)
        with pytest.raises(ParseError):
            load_config(tmp_path / "missing.json")

    def test_roundtrip_idempotent(self, tmp_path):
        raw = {"grid": {"n_points": 64}, "params": {"gamma": 1.5},
               "initial": {"preset": "random_smooth", "seed": 4}}
        a = RunConfig.from_dict(raw)
        dump_config(a, tmp_path / "a.json")
        b = load_config(tmp_path / "a.json")
        assert a.to_dict() == b.to_dict()
        dump_config(b, tmp_path / "b.json")
        assert (tmp_path / "a.json").read_text() == (tmp_path / "b.json").read_text()

    def test_overrides(self):
        raw = apply_overrides({"grid": {"n_points": 64}}, ["params.gamma=2.5", "stepper.scheme=rk4",
                                                           "experiment.modes=[1,2]"])
        cfg = RunConfig.from_dict(raw)
        assert cfg.params["gamma"] == 2.5 and cfg.stepper["scheme"] == "rk4"
        assert cfg.experiment["modes"] == [1, 2]
        with pytest.raises(ParseError):
            apply_overrides({}, ["novalue"])

    def test_presets_reproducible(self):
        raw = {"grid": {"n_points": 64}, "initial": {"preset": "random_smooth", "seed": 12}}
        a, b = RunConfig.from_dict(raw).make_initial(), RunConfig.from_dict(raw).make_initial()
        assert np.array_equal(a.W, b.W)
        with pytest.raises(SchemaError):
            RunConfig.from_dict({"initial": {"preset": "tsunami"}})


def record(t):
    return DiagnosticsRecord(t, 0.1 + t, -1 / 3, 2.0**0.5, 1e-300, 7.0, 8.5, 0.0)


class TestSeries:
    def test_header_only(self, tmp_path):
        p = tmp_path / "s.csv"
        write_series([], p)
        assert p.read_text().strip() == ",".join(DIAG_COLUMNS)
        assert read_series(p) == []

    def test_csv_roundtrip(self, tmp_path):
        p = tmp_path / "s.csv"
        recs = [record(0.1)]
        write_series(recs, p)
        assert read_series(p) == [recs[0].as_dict()]

    def test_json_matches_csv(self, tmp_path):
        recs = [record(0.1), record(0.7)]
        write_series(recs, tmp_path / "s.csv")
        write_series(recs, tmp_path / "s.json", "json")
        assert read_series(tmp_path / "s.csv") == read_series(tmp_path / "s.json")

    def test_bad_format(self, tmp_path):
        with pytest.raises(ValueError):
            write_series([], tmp_path / "s.xml", "xml")


class TestCheckpoint:
    def test_roundtrip(self, tmp_path):
        s = random_smooth(PeriodicGrid(32, 3.0), PhysParams(0.5, 2.0, -1.0), seed=1)
        p = tmp_path / "c.wvl"
        save_checkpoint(s, p)
        back = load_checkpoint(p)
        assert p.read_bytes()[:4] == b"WVL1"
        assert back.grid == s.grid and back.params == s.params and back.t == s.t
        assert np.array_equal(back.coeffs[0], s.grid.fft(s.W))

    def test_restart_through_file(self, tmp_path):
        s = random_smooth(PeriodicGrid(64), PhysParams(1, 1, 1), seed=2, eps=5e-2)
        cfg = StepperConfig(dt=0.01, t_end=0.2, checkpoint_stride=10)
        saved = []
        full = run(s, cfg, on_checkpoint=lambda st: saved.append(st)).final
        save_checkpoint(saved[0], tmp_path / "mid.wvl")
        resumed = run(load_checkpoint(tmp_path / "mid.wvl"), cfg).final
        assert np.array_equal(resumed.W, full.W) and np.array_equal(resumed.Q, full.Q)

    def test_corrupt(self, tmp_path):
        p = tmp_path / "c.wvl"
        p.write_bytes(b"NOPE" + bytes(60))
        with pytest.raises(CheckpointError):
            load_checkpoint(p)
        save_checkpoint(random_smooth(PeriodicGrid(16), PhysParams(), seed=0), p)
        p.write_bytes(p.read_bytes()[:-5])
        with pytest.raises(CheckpointError):
            load_checkpoint(p)
        with pytest.raises(CheckpointError):
            load_checkpoint(tmp_path / "absent.wvl")


class TestCommands:
    def test_dispersion_exit_zero(self, tmp_path, capsys):
        code = main(["dispersion", "--out", str(tmp_path), "--override", "grid.n_points=64",
                     "--override", "experiment.param_sets=[[1,1,0]]"])
        report = json.loads((tmp_path / "report.json").read_text())
        assert code == 0 and report["ok"]
        rows = report["tables"]["dispersion"]
        assert [r["k"] for r in rows] == list(range(1, 9))
        assert max(r["rel_err"] for r in rows) <= 1e-3
        assert "PASS" in capsys.readouterr().out

    def test_symbol_check_flat(self, tmp_path):
        code = main(["symbol-check", "--quiet", "--out", str(tmp_path), "--override", "experiment.symbol_n=512",
                     "--override", "experiment.k_range=[4,5,6,7]"])
        assert code == 0

    def test_simulate_writes_artifacts(self, tmp_path):
        cfg = {"grid": {"n_points": 32}, "initial": {"preset": "random_smooth", "seed": 1},
               "stepper": {"dt": 0.01, "t_end": 0.1, "diagnostics_stride": 5, "checkpoint_stride": 5},
               "output": {"series_format": "json"}}
        code = main(["simulate", "--quiet", "--config", str(write(tmp_path, cfg)), "--out", str(tmp_path / "o")])
        assert code == 0
        rows = read_series(tmp_path / "o" / "series.json")
        assert [round(r["t"], 9) for r in rows] == [0.0, 0.05, 0.1]
        assert len(list((tmp_path / "o" / "checkpoints").glob("*.wvl"))) == 2
        assert load_checkpoint(tmp_path / "o" / "final.wvl").t == pytest.approx(0.1)

    def test_failing_criterion_sets_exit(self, tmp_path):
        cfg = RunConfig.from_dict({"grid": {"n_points": 16}, "initial": {"preset": "single_mode", "k": 1, "eps": 0.95},
                                   "stepper": {"dt": 1e-3, "t_end": 0.01}})
        assert dispatch("simulate", cfg, tmp_path, quiet=True) == 1

    def test_config_error_exit_code(self, capsys):
        assert main(["simulate", "--override", "params.sigma=0"]) == 2
        assert "sigma" in capsys.readouterr().err

    def test_module_entry_point(self):
        out = subprocess.run([sys.executable, "-m", "wavelab", "--help"], capture_output=True, text=True)
        assert out.returncode == 0 and "symbol-check" in out.stdout
