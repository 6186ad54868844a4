import json

import numpy as np
import pytest

from etchprobe import cli, pipeline
from etchprobe.calibration import CalibrationRecord, format_calibration_csv
from etchprobe.curves import read_curve
from etchprobe.solver import SolverError


def run(*argv):
    return cli.main([str(a) for a in argv])


def write_config(path, doc):
    path.write_text(json.dumps(doc))
    return path


@pytest.fixture(scope="module")
def sims(tmp_path_factory):
    """Simulation output folders shared by several tests."""
    root = tmp_path_factory.mktemp("sims")
    out = {}
    for name, args in {"f0": ["--etch-fraction", 0], "f01": ["--etch-fraction", 0.1],
                       "f0_lower": ["--etch-fraction", 0, "--drive", "lower"],
                       "f1": ["--etch-fraction", 1]}.items():
        assert run("simulate", "--out", root / name, *args) == 0
        out[name] = root / name
    return out


def summary(folder):
    return json.loads((folder / "field_summary.json").read_text())


def test_simulate_writes_curves_summary_and_plots(sims):
    folder = sims["f0"]
    s = summary(folder)
    for key in ("peak_dT_K", "hotspot_position_m", "driving_point_Rth_K_per_W"):
        assert key in s
    for beam in ("upper", "lower"):
        c = read_curve(folder / f"temperature_{beam}.csv")
        assert c.kind == "temperature"
    manifest = json.loads((folder / "temperatures_plot.json").read_text())
    assert manifest["figure"] == "temperatures.png"
    for series in manifest["series"]:
        assert (folder / series["file"]).exists()
    assert (folder / "temperatures.png").read_bytes()[:4] == b"\x89PNG"
    assert (folder / "field_map.png").exists()


def test_upper_drive_runs_hotter_than_lower(sims):
    assert summary(sims["f0"])["peak_dT_K"] > summary(sims["f0_lower"])["peak_dT_K"]


def test_unreleased_device_runs_much_cooler(sims):
    assert summary(sims["f1"])["peak_dT_K"] < 0.2 * summary(sims["f0"])["peak_dT_K"]


def test_same_seed_gives_identical_files(tmp_path):
    for name in ("a", "b"):
        assert run("measure", "--out", tmp_path / name, "--seed", 11) == 0
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert "voltages.png" in files
    for name in files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_unsensed_beam_shows_only_noise(tmp_path):
    cfg = write_config(tmp_path / "c.json", {"measurement": {"I_sense": {"upper": 0.025, "lower": 0.0}}})
    assert run("measure", "--config", cfg, "--out", tmp_path / "m", "--no-figures") == 0
    lower = read_curve(tmp_path / "m" / "voltage_lower.csv")
    late = lower.t >= 5 * 2e-6
    assert np.all(np.abs(lower.values[late]) <= 5 * 2e-4)
    assert lower.t[-1] / lower.t[0] >= 1e5
    assert not (tmp_path / "m" / "voltages.png").exists()
    assert json.loads((tmp_path / "m" / "voltages_plot.json").read_text())["figure"] is None


def test_quiet_measurement_is_sensitivity_times_temperature(tmp_path, sims):
    cfg = write_config(tmp_path / "c.json", {"measurement": {"noise_rms": 0.0, "parasitic_amplitude": 0.0}})
    assert run("measure", "--config", cfg, "--out", tmp_path / "m", "--etch-fraction", 0,
               "--no-figures") == 0
    v = read_curve(tmp_path / "m" / "voltage_upper.csv")
    temp = read_curve(sims["f0"] / "temperature_upper.csv")
    np.testing.assert_allclose(v.values, 25e-3 * 100.0 * 1e-3 * temp.values, rtol=1e-12)


def test_calibrate_two_points(tmp_path, capsys):
    src = tmp_path / "pairs.csv"
    src.write_text(format_calibration_csv([CalibrationRecord(293.15, 2.5, 0.025),
                                           CalibrationRecord(353.15, 2.56, 0.025)]))
    assert run("calibrate", "--input", src, "--out", tmp_path / "cal.json") == 0
    res = json.loads((tmp_path / "cal.json").read_text())
    assert res["rms_residual"] == pytest.approx(0.0, abs=1e-12)
    assert res["alpha"] == pytest.approx(4e-4, rel=1e-9)


def test_calibrate_noisy_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    recs = [CalibrationRecord(T, 2.5 * (1 + 1e-3 * (T - 280)) * (1 + 1e-3 * rng.standard_normal()), 0.025)
            for T in np.linspace(280, 380, 21)]
    src = tmp_path / "pairs.csv"
    src.write_text(format_calibration_csv(recs))
    assert run("calibrate", "--input", src, "--out", tmp_path / "cal.json") == 0
    assert json.loads((tmp_path / "cal.json").read_text())["alpha"] == pytest.approx(1e-3, rel=0.01)


def test_calibrate_single_temperature_is_a_usage_error(tmp_path, capsys):
    src = tmp_path / "pairs.csv"
    src.write_text("# current_A=0.025\ntemperature_K,voltage_V\n300,2.5\n300,2.6\n")
    assert run("calibrate", "--input", src, "--out", tmp_path / "cal.json") == 2
    assert "temperatures are equal" in capsys.readouterr().err


def test_compare_identical_files(tmp_path, sims):
    curve = sims["f0"] / "temperature_upper.csv"
    assert run("compare", "--ref", curve, "--cand", curve, "--out", tmp_path / "r.json",
               "--no-figures") == 0
    assert json.loads((tmp_path / "r.json").read_text())["verdict"] == "CONSISTENT"


def test_compare_partial_etch(tmp_path, sims):
    out = tmp_path / "cmp" / "report.json"
    assert run("compare", "--ref", sims["f0"] / "temperature_upper.csv",
               "--cand", sims["f01"] / "temperature_upper.csv", "--out", out) == 0
    report = json.loads(out.read_text())
    assert report["verdict"] == "UNDER_ETCHED"
    manifest = json.loads((out.parent / "report_plot.json").read_text())
    assert manifest["figure"] == "report.png"
    assert all((out.parent / s["file"]).exists() for s in manifest["series"])


def test_compare_voltage_needs_calibration(tmp_path, sims):
    assert run("measure", "--out", tmp_path / "m", "--etch-fraction", 0, "--no-figures") == 0
    volts = tmp_path / "m" / "voltage_upper.csv"
    temps = sims["f01"] / "temperature_upper.csv"
    assert run("compare", "--ref", volts, "--cand", temps, "--out", tmp_path / "r.json") == 2
    cal = {"alpha": 1e-3, "R_el0": 100.0, "T0": 300.0, "sensitivity": 2.5e-3,
           "rms_residual": 0.0, "n_samples": 2, "current": 0.025}
    (tmp_path / "cal.json").write_text(json.dumps(cal))
    assert run("compare", "--ref", volts, "--cand", temps, "--calib", tmp_path / "cal.json",
               "--out", tmp_path / "r.json", "--no-figures") == 0
    assert json.loads((tmp_path / "r.json").read_text())["verdict"] == "UNDER_ETCHED"


def test_analyze_writes_spectrum(tmp_path, sims):
    out = tmp_path / "a"
    assert run("analyze", "--input", sims["f0"] / "temperature_upper.csv", "--out", out,
               "--samples-per-octave", 100) == 0
    info = json.loads((out / "analysis.json").read_text())
    assert info["reconvolution_rms"] <= 0.02
    rows = (out / "spectrum.csv").read_text().splitlines()
    assert rows[0].startswith("tau_s,")
    assert len(rows) == info["samples"] + 1
    assert (out / "spectrum.png").exists()
    assert read_curve(out / "conditioned.csv").metadata["samples_per_octave"] == "100"


def test_mesh_info(capsys):
    assert run("mesh-info") == 0
    info = json.loads(capsys.readouterr().out)
    assert info["nodes"] > 0 and info["edges"] > info["nodes"]
    assert info["total_capacitance_J_per_K"] > 0


def test_config_errors_exit_2(tmp_path, capsys):
    bad = write_config(tmp_path / "c.json", {"geometry": {"gap3": 1}})
    assert run("mesh-info", "--config", bad) == 2
    assert "geometry.gap3: unknown key" in capsys.readouterr().err
    (tmp_path / "broken.json").write_text("{")
    assert run("simulate", "--config", tmp_path / "broken.json", "--out", tmp_path) == 2
    assert run("simulate", "--etch-fraction", 2, "--out", tmp_path) == 2
    assert run("frobnicate") == 2
    assert run("simulate", "--drive", "middle") == 2


def test_numeric_failure_exits_3(tmp_path, monkeypatch, capsys):
    def boom(*a, **k):
        raise SolverError("matrix is singular")
    monkeypatch.setattr(pipeline, "simulate", boom)
    assert run("simulate", "--out", tmp_path) == 3
    assert "numeric failure" in capsys.readouterr().err


def test_module_entry_point():
    import subprocess
    import sys
    res = subprocess.run([sys.executable, "-m", "etchprobe", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for sub in ("simulate", "measure", "calibrate", "analyze", "compare", "mesh-info"):
        assert sub in res.stdout
