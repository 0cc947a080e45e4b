import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest

from varint.cli import RUN_COLUMNS, fmt, main

GOLDEN = Path(__file__).parent / "golden"


def write_config(tmp_path, name="config.json", **sections):
    cfg = {
        "system": {"name": "double-well", "m": 1.0},
        "ic": {"q0": 0.74, "v0": 0.0},
        "integrator": {"mode": "fixed", "h0": 0.01, "max_steps": 10},
    }
    cfg.update(sections)
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def col(rs, name):
    return np.array([float(r[name]) if r[name] != "" else math.nan for r in rs])


class TestRun:
    def test_row_count_and_header(self, tmp_path):
        out = tmp_path / "out.csv"
        assert main(["run", str(write_config(tmp_path)), "--output", str(out), "--quiet"]) == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 12
        assert lines[0].split(",") == list(RUN_COLUMNS)

    def test_sidecar(self, tmp_path):
        out = tmp_path / "out.csv"
        main(["run", str(write_config(tmp_path)), "-o", str(out), "-q"])
        meta = json.loads(Path(str(out) + ".meta.json").read_text())
        assert meta["status"] == "ok"
        assert meta["config"]["integrator"]["h0"] == 0.01
        assert meta["run"]["oracle"] == {"method": "DOP853", "rtol": 1e-12, "atol": 1e-12}

    def test_golden(self, tmp_path):
        out = tmp_path / "golden.csv"
        assert main(["run", str(GOLDEN / "oscillator_fixed.json"), "-o", str(out), "-q"]) == 0
        assert out.read_bytes() == (GOLDEN / "oscillator_fixed.csv").read_bytes()

    def test_deterministic(self, tmp_path):
        cfg = write_config(tmp_path, integrator={"mode": "adaptive", "h0": 0.01, "t_end": 2.0})
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["run", str(cfg), "-o", str(a), "-q"])
        main(["run", str(cfg), "-o", str(b), "-q"])
        assert a.read_bytes() == b.read_bytes()
        assert Path(str(a) + ".meta.json").read_bytes() == Path(str(b) + ".meta.json").read_bytes()

    def test_round_trip_floats(self, tmp_path):
        out = tmp_path / "out.csv"
        main(["run", str(write_config(tmp_path)), "-o", str(out), "-q"])
        for r in rows(out):
            for name in ("t", "q", "p", "E_discrete"):
                assert fmt(float(r[name])) == r[name]

    def test_step_growth(self, tmp_path):
        cfg = write_config(tmp_path, ic={"q0": 0.995, "v0": 0.0},
                           integrator={"mode": "adaptive", "h0": 0.01, "t_end": 50.0})
        out = tmp_path / "out.csv"
        assert main(["run", str(cfg), "-o", str(out), "-q"]) == 0
        assert np.nanmax(col(rows(out), "h")) == pytest.approx(0.04, rel=0.25)

    def test_output_from_config(self, tmp_path):
        out = tmp_path / "from_config.csv"
        cfg = write_config(tmp_path, output={"path": str(out)})
        assert main(["run", str(cfg), "-q"]) == 0 and out.exists()

    def test_guard_abort(self, tmp_path):
        cfg = write_config(tmp_path, ic={"q0": 0.995, "v0": 0.0},
                           integrator={"mode": "adaptive", "h0": 0.01, "t_end": 50.0, "h_max_factor": 2.0})
        out = tmp_path / "out.csv"
        assert main(["run", str(cfg), "-o", str(out), "-q"]) == 4
        rs = rows(out)
        assert rs[-1]["k"] == "abort" and float(rs[-1]["h"]) > 0.02
        assert all(r["k"].isdigit() for r in rs[:-1]) and len(rs) > 3
        meta = json.loads(Path(str(out) + ".meta.json").read_text())
        assert meta["status"] == "guard_abort" and meta["abort"]["h"] > 0.02


class TestErrors:
    @pytest.mark.parametrize("sections", [
        {"system": {"name": "double-well", "bogus": 1}},
        {"system": {"name": "pendulum"}},
        {"ic": {"q0": 0.5}},
        {"integrator": {"mode": "fixed", "h0": 0.01, "max_steps": 1, "extra": True}},
        {"integrator": {"mode": "fixed", "h0": -0.01, "max_steps": 1}},
        {"integrator": {"mode": "fixed", "h0": 0.01}},
        {"system": {"name": "double-well", "k": 3.0}},
        {"system": {"name": "oscillator", "m": -1.0}},
        {"integrator": {"mode": "fixed", "h0": 0.01, "max_steps": 1, "forced": True}},
    ])
    def test_config_errors(self, tmp_path, sections):
        cfg = write_config(tmp_path, **sections)
        assert main(["run", str(cfg), "-o", str(tmp_path / "x.csv"), "-q"]) == 2

    def test_unknown_top_level(self, tmp_path):
        cfg = write_config(tmp_path, plot={"show": True})
        assert main(["run", str(cfg), "-o", str(tmp_path / "x.csv"), "-q"]) == 2

    def test_missing_file(self, tmp_path):
        assert main(["run", str(tmp_path / "nope.json"), "-o", str(tmp_path / "x.csv")]) == 2

    def test_not_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{system:")
        assert main(["run", str(p), "-o", str(tmp_path / "x.csv")]) == 2

    def test_no_output_path(self, tmp_path):
        assert main(["run", str(write_config(tmp_path)), "-q"]) == 2

    def test_solver_failure(self, tmp_path, capsys):
        cfg = write_config(tmp_path, ic={"q0": 1 / math.sqrt(2), "v0": 0.0},
                           integrator={"mode": "adaptive", "h0": 0.01, "max_steps": 3})
        assert main(["run", str(cfg), "-o", str(tmp_path / "x.csv"), "-q"]) == 3
        assert "solver failure" in capsys.readouterr().err


class TestCompare:
    def test_double_well_gap(self, tmp_path):
        cfg = write_config(tmp_path, integrator={"h0": 0.01, "t_end": 50.0})
        out = tmp_path / "cmp.csv"
        assert main(["compare", str(cfg), "-o", str(out), "-q"]) == 0
        rs = rows(out)
        fixed = col(rs, "discrete_energy_error_fixed")
        adaptive = col(rs, "discrete_energy_error_adaptive")
        assert np.nanmax(adaptive) * 1e4 <= np.nanmax(fixed)

    def test_oscillator_envelope(self, tmp_path):
        cfg = write_config(tmp_path, system={"name": "oscillator", "k": 4.0, "c": 0.02},
                           ic={"q0": 1.0, "v0": 0.0}, integrator={"h0": 0.01, "t_end": 20.0})
        out = tmp_path / "cmp.csv"
        main(["compare", str(cfg), "-o", str(out), "-q"])
        rs = rows(out)

        def tail_envelope(suffix):
            t, e = col(rs, "t_" + suffix), col(rs, "discretization_error_" + suffix)
            return np.nanmax(e[t >= 18.0])

        assert tail_envelope("fixed") < tail_envelope("adaptive")

    def test_matches_run(self, tmp_path):
        cfg = write_config(tmp_path, integrator={"h0": 0.01, "t_end": 1.0})
        cmp_out, run_out = tmp_path / "cmp.csv", tmp_path / "run.csv"
        main(["compare", str(cfg), "-o", str(cmp_out), "-q"])
        fixed_cfg = write_config(tmp_path, "fixed.json", integrator={"mode": "fixed", "h0": 0.01, "t_end": 1.0})
        main(["run", str(fixed_cfg), "-o", str(run_out), "-q"])
        c, r = rows(cmp_out), rows(run_out)
        assert [x["t_fixed"] for x in c] == [x["t"] for x in r]
        assert [x["discrete_energy_error_fixed"] for x in c] == [x["discrete_energy_error"] for x in r]


class TestSweep:
    def test_trend(self, tmp_path):
        cfg = write_config(tmp_path, integrator={"h0_list": [0.1, 0.01], "t_end": 50.0})
        out = tmp_path / "sweep.csv"
        assert main(["sweep-h0", str(cfg), "-o", str(out), "-q"]) == 0
        rs = rows(out)
        assert [r["status"] for r in rs] == ["ok", "ok"]
        cond, err = col(rs, "max_condition"), col(rs, "max_discrete_energy_error")
        assert cond[1] > cond[0]
        assert err[0] < err[1]

    def test_singleton(self, tmp_path):
        cfg = write_config(tmp_path, integrator={"h0_list": [0.05], "t_end": 2.0})
        out = tmp_path / "sweep.csv"
        main(["sweep-h0", str(cfg), "-o", str(out), "-q"])
        assert len(rows(out)) == 1

    def test_failure_rows(self, tmp_path):
        cfg = write_config(tmp_path, ic={"q0": 0.995, "v0": 0.0},
                           integrator={"h0_list": [0.01, 0.1], "t_end": 50.0, "h_max_factor": 2.0})
        out = tmp_path / "sweep.csv"
        assert main(["sweep-h0", str(cfg), "-o", str(out), "-q"]) == 0
        rs = rows(out)
        assert rs[0]["status"].startswith("failed: GuardError") and rs[0]["max_condition"] == "nan"

    def test_needs_list(self, tmp_path):
        cfg = write_config(tmp_path, integrator={"h0": 0.1, "t_end": 2.0})
        assert main(["sweep-h0", str(cfg), "-o", str(tmp_path / "s.csv"), "-q"]) == 2

    def test_rejects_fixed(self, tmp_path):
        cfg = write_config(tmp_path, integrator={"mode": "fixed", "h0_list": [0.1], "t_end": 2.0})
        assert main(["sweep-h0", str(cfg), "-o", str(tmp_path / "s.csv"), "-q"]) == 2


def test_fmt():
    assert fmt(0.1) == "0.1" and fmt(np.array([0.1])) == "0.1"
    assert fmt(np.array([1.0, 2.5])) == "1.0 2.5"
    assert fmt(True) == "true" and fmt(3) == "3" and fmt(None) == ""
    assert fmt(1 / 3) == repr(1 / 3) and fmt(math.nan) == "nan"


def test_module_entry_point(tmp_path):
    import subprocess
    import sys
    out = tmp_path / "m.csv"
    res = subprocess.run([sys.executable, "-m", "varint", "run", str(write_config(tmp_path)), "-o", str(out)],
                         capture_output=True, text=True)
    assert res.returncode == 0 and out.exists() and "nodes" in res.stdout
