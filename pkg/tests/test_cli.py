"""Command-line interface: summaries, artifacts, determinism, exit codes."""

import json

import numpy as np
import pytest

from paramres.cli import main
from paramres.device import bundled_path, load_device
from paramres.tomography import load_ptm


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def summary_values(stdout: str) -> dict:
    line = stdout.strip().splitlines()[-1]
    out = {}
    for token in line.split():
        key, _, val = token.partition("=")
        try:
            out[key] = float(val)
        except ValueError:
            out[key] = val
    return out


def stable_lines(path) -> list:
    """File content with the self-declared generation timestamps removed."""
    lines = []
    for ln in path.read_text().splitlines():
        stripped = ln.strip()
        if stripped.startswith("# generated") or stripped.startswith('"generated"'):
            continue
        lines.append(ln)
    return lines


def test_device_show_prints_derived_parameters(capsys):
    code, out, err = run(capsys, "device", "show")
    assert code == 0 and err == ""
    assert "qubit1 : f01 = 3.8030 GHz" in out
    assert "qubit2 : f01 = 3.8620 GHz" in out
    assert "coupler: f01 = 5.9150 GHz" in out
    assert "sqrt(g1c*g2c) = 92.3 MHz" in out


def test_device_show_ini_round_trips(capsys, tmp_path):
    code, out, _ = run(capsys, "device", "show", "--format", "ini")
    assert code == 0
    echoed = tmp_path / "echo.ini"
    echoed.write_text(out)
    assert load_device(echoed) == load_device(bundled_path("device.ini"))


def test_sweep_coupling_finds_zero_crossing(capsys, tmp_path):
    code, out, _ = run(capsys, "sweep", "coupling", "--out-dir", str(tmp_path))
    assert code == 0
    vals = summary_values(out)
    assert vals["points"] == 65
    assert vals["g01_dc_mhz"] == pytest.approx(0.250, abs=0.002)
    assert vals["zero_crossing_phi0"] == pytest.approx(0.1105, abs=0.002)
    assert (tmp_path / "sweep_coupling.csv").exists()


def test_sweep_coupling_is_deterministic(capsys, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(capsys, "sweep", "coupling", "--out-dir", str(a))[0] == 0
    assert run(capsys, "sweep", "coupling", "--out-dir", str(b))[0] == 0
    assert stable_lines(a / "sweep_coupling.csv") == stable_lines(
        b / "sweep_coupling.csv")


def test_sweep_coupling_json_format(capsys, tmp_path):
    code, _, _ = run(capsys, "sweep", "coupling", "--out-dir", str(tmp_path),
                     "--format", "json")
    assert code == 0
    doc = json.loads((tmp_path / "sweep_coupling.json").read_text())
    assert "config_hash" in doc["meta"]
    cols = doc["columns"]
    assert len(cols["phic_phi0"]) == 65
    g01 = np.asarray(cols["g01_ghz"])
    assert g01[0] > 0 > g01[-1]  # sign change across the sweep


def test_out_dir_environment_variable(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("PARAMRES_OUT_DIR", str(tmp_path))
    code, _, _ = run(capsys, "sweep", "coupling")
    assert code == 0
    assert (tmp_path / "sweep_coupling.csv").exists()


def test_flux_invert_default_target(capsys, tmp_path):
    code, out, _ = run(capsys, "flux", "invert", "--out-dir", str(tmp_path))
    assert code == 0
    vals = summary_values(out)
    assert vals["q1_phi0"] == pytest.approx(0.096787, abs=1e-4)
    assert vals["coupler_phi0"] == pytest.approx(0.291088, abs=1e-4)
    assert vals["q2_phi0"] == pytest.approx(0.102846, abs=1e-4)
    assert vals["max_residual_phi0"] < 1e-10
    assert vals["cond"] == pytest.approx(2.915, abs=0.01)
    assert (tmp_path / "compensation.csv").exists()


def test_flux_invert_config_errors(capsys, tmp_path):
    bad_list = tmp_path / "bad.ini"
    bad_list.write_text("[flux]\ntarget_phi0 = 0.1, oops, 0.2\n")
    code, _, err = run(capsys, "flux", "invert", "--config", str(bad_list),
                       "--out-dir", str(tmp_path))
    assert code == 1
    assert "not a comma-separated number list" in err

    short = tmp_path / "short.ini"
    short.write_text("[flux]\ntarget_phi0 = 0.1, 0.2\n")
    code, _, err = run(capsys, "flux", "invert", "--config", str(short),
                       "--out-dir", str(tmp_path))
    assert code == 1
    assert "need 3 entries" in err


def test_transfer_apply_defaults(capsys, tmp_path):
    code, out, _ = run(capsys, "transfer", "apply", "--out-dir", str(tmp_path))
    assert code == 0
    vals = summary_values(out)
    assert vals["ratio"] == pytest.approx(0.9059, abs=1e-3)
    assert vals["achieved_amp_phi0"] == pytest.approx(0.155 * vals["ratio"], rel=1e-6)
    assert vals["compensated_request_phi0"] == pytest.approx(
        0.155 / vals["ratio"], rel=1e-6)
    doc = json.loads((tmp_path / "transfer_apply.json").read_text())
    assert doc["mod_freq_ghz"] == 0.28


def test_transfer_apply_out_of_range(capsys, tmp_path):
    cfgf = tmp_path / "t.ini"
    cfgf.write_text("[transfer]\nmod_freq_ghz = 0.01\n")
    code, _, err = run(capsys, "transfer", "apply", "--config", str(cfgf),
                       "--out-dir", str(tmp_path))
    assert code == 1
    assert "outside transfer table range" in err


def test_missing_config_file(capsys, tmp_path):
    code, _, err = run(capsys, "sweep", "coupling",
                       "--config", str(tmp_path / "absent.ini"))
    assert code == 1
    assert "config file not found" in err


def test_malformed_config_value(capsys, tmp_path):
    cfgf = tmp_path / "c.ini"
    cfgf.write_text("[sweep]\npoints = many\n")
    code, _, err = run(capsys, "sweep", "coupling", "--config", str(cfgf),
                       "--out-dir", str(tmp_path))
    assert code == 1
    assert "config [sweep] points: not an integer" in err


def test_tomo_requires_gatespec(capsys, tmp_path):
    code, _, err = run(capsys, "tomo", "--out-dir", str(tmp_path))
    assert code == 1
    assert "config [tomo] gatespec_file is required" in err


def test_calibrate_cz02_fails_with_stage(capsys, tmp_path):
    code, _, err = run(capsys, "calibrate", "cz02", "--out-dir", str(tmp_path))
    assert code == 1
    assert "calibration failed at stage resonance:" in err
    assert "resonance unreachable" in err


def test_usage_errors_exit_2(capsys):
    assert run(capsys, )[0] == 2
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys, "device")[0] == 2
    assert run(capsys, "calibrate")[0] == 2


def test_calibrate_and_tomo_chain(capsys, tmp_path):
    cfgf = tmp_path / "run.ini"
    cfgf.write_text(
        "[coherence]\n"
        "t1_q1_us = 70\nt1_q2_us = 56\n"
        "t2star_q1_us = 14\nt2star_q2_us = 10\n"
        "[tomo]\n"
        f"gatespec_file = {tmp_path / 'gatespec_iswap.json'}\n"
    )
    code, out, err = run(capsys, "calibrate", "iswap", "--config", str(cfgf),
                         "--out-dir", str(tmp_path))
    assert code == 0, err
    vals = summary_values(out)
    assert vals["F_avg"] > 0.999
    assert abs(vals["theta"] + np.pi / 2) < 0.01
    report = json.loads((tmp_path / "report_iswap.json").read_text())
    from paramres.tomography import CoherenceTimes, coherence_fidelity_iswap

    ct = CoherenceTimes(t1_q1=70, t1_q2=56, t2s_q1=14, t2s_q2=10)
    assert report["coherence"]["f_avg_limit"] == pytest.approx(
        coherence_fidelity_iswap(ct, vals["duration_ns"]), abs=1e-9)

    code, out, err = run(capsys, "tomo", "--config", str(cfgf),
                         "--out-dir", str(tmp_path))
    assert code == 0, err
    vals = summary_values(out)
    assert vals["F_avg"] > 0.999
    assert vals["leakage"] < 1e-3
    pt, header = load_ptm(tmp_path / "ptm_iswap.csv")
    assert header["kind"] == "iswap"
    assert pt.leakage < 1e-3
    assert (tmp_path / "tomo_report_iswap.json").exists()


def test_tomo_shot_noise_reproducible_by_seed(capsys, tmp_path):
    cfgf = tmp_path / "run.ini"
    cfgf.write_text(
        "[tomo]\n"
        f"gatespec_file = {tmp_path / 'gatespec_iswap.json'}\n"
        "shots = 300\n"
        "readout_f0_q1 = 0.97\nreadout_f1_q1 = 0.94\n"
        "readout_f0_q2 = 0.96\nreadout_f1_q2 = 0.95\n"
    )
    assert run(capsys, "calibrate", "iswap", "--out-dir", str(tmp_path))[0] == 0

    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    for out_dir, seed in ((a, "7"), (b, "7"), (c, "8")):
        code, _, err = run(capsys, "tomo", "--config", str(cfgf),
                           "--seed", seed, "--out-dir", str(out_dir))
        assert code == 0, err
    assert stable_lines(a / "ptm_iswap.csv") == stable_lines(b / "ptm_iswap.csv")
    assert stable_lines(a / "ptm_iswap.csv") != stable_lines(c / "ptm_iswap.csv")
