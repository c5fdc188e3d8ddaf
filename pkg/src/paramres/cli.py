"""Command-line entry point for reproducible simulation and calibration runs.

Every command reads one INI run configuration (--config; keys carry unit
suffixes), writes its artifacts into an output directory, and prints a
one-line key=value summary.  Output files start with a metadata header
(tool version, hash of the effective settings, timestamp); rerunning with
the same configuration and seed reproduces every byte except the
timestamp.  Exit codes: 0 success, 1 labeled failure, 2 usage.
"""

import argparse
import configparser
import hashlib
import json
import math
import os
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .calibration import (DEFAULT_COUPLER_BIAS, DEFAULT_MOD_FREQ,
                          CalibrationError, calibrate_gate,
                          effective_coupling, find_resonance_amplitude,
                          gate_unitary, load_gatespec, save_gatespec,
                          set_duration)
from .device import (bundled_path, device_params, load_bundled_device,
                     load_device, save_device)
from .dynamics import chevron
from .effective import static_couplings
from .fluxcontrol import (FluxPulse, apply_transfer, compensate_crosstalk,
                          load_crosstalk_csv, load_transfer_csv)
from .tomography import (CZ, ISWAP, CoherenceTimes, average_fidelity,
                         coherence_fidelity_cz, coherence_fidelity_iswap,
                         confusion_matrix, dressed_computational_basis,
                         fit_fsim, phase_error, ptm_of_unitary, save_ptm,
                         simulate_qpt, virtual_z_correct)

OUT_DIR_ENV = "PARAMRES_OUT_DIR"

# CLI gate tokens -> calibration kinds ("cz" is the CZ20 gate)
_KIND_ALIAS = {"iswap": "iswap", "cz": "cz20", "cz20": "cz20", "cz02": "cz02"}
_TARGET_PHI = {"iswap": 0.0, "cz20": math.pi}


def _utc_now() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _wrap_angle(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    return x


def _file_fingerprint(path) -> str:
    """Content hash of an input file, 12 hex characters.

    Generation timestamps written by this tool's own output routines are
    ignored, so feeding a re-produced but otherwise identical file into a
    later command yields the same config hash.
    """
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ValueError(f"cannot read {path}: {exc}") from None
    try:
        doc = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, ValueError):
        lines = [ln for ln in raw.splitlines()
                 if not ln.lstrip().startswith(b"# generated")]
        return hashlib.sha256(b"\n".join(lines)).hexdigest()[:12]
    if isinstance(doc, dict):
        doc.pop("generated", None)
        if isinstance(doc.get("meta"), dict):
            doc["meta"].pop("generated", None)
    blob = json.dumps(doc, sort_keys=True)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


def _config_hash(settings: dict) -> str:
    blob = json.dumps(_jsonable(settings), sort_keys=True)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


def _meta(settings: dict) -> dict:
    return {
        "tool": f"paramres {__version__}",
        "config_hash": _config_hash(settings),
        "generated": _utc_now(),
    }


def _meta_lines(meta: dict):
    return (meta["tool"],
            f"config_hash: {meta['config_hash']}",
            f"generated: {meta['generated']}")


def _fmt_cell(v) -> str:
    return v if isinstance(v, str) else f"{float(v):.10g}"


def _write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path, meta: dict, columns: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in _meta_lines(meta):
            fh.write(f"# {line}\n")
        fh.write(",".join(columns) + "\n")
        for row in zip(*columns.values()):
            fh.write(",".join(_fmt_cell(v) for v in row) + "\n")


def _summary(**kv) -> int:
    parts = []
    for key, val in kv.items():
        parts.append(f"{key}={val:.6g}" if isinstance(val, float) else f"{key}={val}")
    print(" ".join(parts))
    return 0


class RunConfig:
    """Effective run settings: INI values overridden by flags and environment."""

    def __init__(self, args):
        self.cp = configparser.ConfigParser()
        path = getattr(args, "config", None)
        if path is not None:
            try:
                if not self.cp.read(path):
                    raise ValueError(f"config file not found: {path}")
            except configparser.Error as exc:
                raise ValueError(f"config parse error: {exc}") from None
        self.out_dir = (getattr(args, "out_dir", None)
                        or os.environ.get(OUT_DIR_ENV)
                        or self.get("run", "out_dir", "."))
        self.format = getattr(args, "format", None) or self.get("run", "format", "csv")
        seed = getattr(args, "seed", None)
        self.seed = self.getint("run", "seed", 0) if seed is None else seed
        self.device_file = self.get("device", "file", None)

    def get(self, section, key, fallback=None):
        return self.cp.get(section, key, fallback=fallback)

    def getfloat(self, section, key, fallback=None):
        try:
            return self.cp.getfloat(section, key, fallback=fallback)
        except ValueError:
            raise ValueError(
                f"config [{section}] {key}: not a number: "
                f"{self.cp.get(section, key)!r}") from None

    def getint(self, section, key, fallback=None):
        try:
            return self.cp.getint(section, key, fallback=fallback)
        except ValueError:
            raise ValueError(
                f"config [{section}] {key}: not an integer: "
                f"{self.cp.get(section, key)!r}") from None

    def getbool(self, section, key, fallback=None):
        try:
            return self.cp.getboolean(section, key, fallback=fallback)
        except ValueError:
            raise ValueError(
                f"config [{section}] {key}: not a boolean: "
                f"{self.cp.get(section, key)!r}") from None

    def load_device(self):
        if self.device_file is None:
            return load_bundled_device()
        return load_device(self.device_file)

    def common_settings(self) -> dict:
        device = (_file_fingerprint(self.device_file)
                  if self.device_file else "bundled")
        return {"device": device, "format": self.format, "seed": self.seed}

    def outpath(self, name: str) -> str:
        os.makedirs(self.out_dir, exist_ok=True)
        return os.path.join(self.out_dir, name)

    def table_path(self, stem: str, meta: dict, columns: dict) -> str:
        if self.format == "json":
            path = self.outpath(stem + ".json")
            _write_json(path, {"meta": meta, "columns": columns})
        else:
            path = self.outpath(stem + ".csv")
            _write_csv(path, meta, columns)
        return path


def cmd_device_show(cfg: RunConfig, args) -> int:
    device = cfg.load_device()
    if cfg.format == "ini":
        save_device(sys.stdout, device)
        return 0
    p = device_params(device)
    print(f"qubit1 : f01 = {p.f1:.4f} GHz  eta = {p.eta1 * 1e3:.1f} MHz")
    print(f"qubit2 : f01 = {p.f2:.4f} GHz  eta = {p.eta2 * 1e3:.1f} MHz")
    print(f"coupler: f01 = {p.fc:.4f} GHz  eta = {p.etac * 1e3:.1f} MHz")
    print(f"g1c = {p.g1c * 1e3:.1f} MHz  g2c = {p.g2c * 1e3:.1f} MHz  "
          f"g12 = {p.g12 * 1e3:.1f} MHz")
    print(f"sqrt(g1c*g2c) = {math.sqrt(p.g1c * p.g2c) * 1e3:.1f} MHz")
    print(f"g1c/(fc-f1) = {p.g1c / (p.fc - p.f1):.4f}  "
          f"g2c/(fc-f2) = {p.g2c / (p.fc - p.f2):.4f}")
    return 0


def cmd_sweep_coupling(cfg: RunConfig, args) -> int:
    device = cfg.load_device()
    start = cfg.getfloat("sweep", "phic_start_phi0", 0.0)
    stop = cfg.getfloat("sweep", "phic_stop_phi0", 0.32)
    points = cfg.getint("sweep", "points", 65)
    phi1 = cfg.getfloat("sweep", "phi1_phi0", 0.0)
    phi2 = cfg.getfloat("sweep", "phi2_phi0", 0.0)
    if points < 2:
        raise ValueError("config [sweep] points: need at least 2")
    settings = {**cfg.common_settings(), "cmd": "sweep coupling",
                "phic_start_phi0": start, "phic_stop_phi0": stop,
                "points": points, "phi1_phi0": phi1, "phi2_phi0": phi2}
    meta = _meta(settings)

    phics = np.linspace(start, stop, points)
    fcs, effs = [], []
    for phic in phics:
        p = device_params(device, phi1=phi1, phic=float(phic), phi2=phi2)
        fcs.append(p.fc)
        effs.append(static_couplings(p))
    columns = {
        "phic_phi0": phics,
        "fc_ghz": fcs,
        "f01_1_ghz": [e.f01_1 for e in effs],
        "f01_2_ghz": [e.f01_2 for e in effs],
        "g01_ghz": [e.g01 for e in effs],
        "g02_ghz": [e.g02 for e in effs],
        "g20_ghz": [e.g20 for e in effs],
        "delta1_ghz": [e.delta1 for e in effs],
        "delta2_ghz": [e.delta2 for e in effs],
    }
    path = cfg.table_path("sweep_coupling", meta, columns)

    g01 = np.array(columns["g01_ghz"])
    flips = np.flatnonzero(np.sign(g01[:-1]) != np.sign(g01[1:]))
    if flips.size:
        i = int(flips[0])
        crossing = float(phics[i] - g01[i] * (phics[i + 1] - phics[i])
                         / (g01[i + 1] - g01[i]))
    else:
        crossing = float("nan")
    return _summary(points=points, g01_dc_mhz=float(g01[0] * 1e3),
                    zero_crossing_phi0=crossing, file=path)


def cmd_chevron(cfg: RunConfig, args) -> int:
    device = cfg.load_device()
    gate = cfg.get("chevron", "gate", "iswap")
    if gate not in ("iswap", "cz", "cz20"):
        raise ValueError(f"config [chevron] gate: must be iswap or cz, got {gate!r}")
    kind = _KIND_ALIAS[gate]
    coupler_bias = cfg.getfloat("chevron", "coupler_bias_phi0",
                                DEFAULT_COUPLER_BIAS[kind])
    mod_freq = cfg.getfloat("chevron", "mod_freq_ghz", DEFAULT_MOD_FREQ[kind])
    basis_kind = cfg.get("chevron", "basis", "dressed")
    if basis_kind not in ("dressed", "bare"):
        raise ValueError(
            f"config [chevron] basis: must be dressed or bare, got {basis_kind!r}")
    initial = cfg.get("chevron", "initial", "10" if kind == "iswap" else "11")

    p = device_params(device, phic=coupler_bias)
    a0 = find_resonance_amplitude(kind, device.q2, p, mod_freq)
    tau0 = set_duration(kind, abs(effective_coupling(
        device, kind, a0, mod_freq, coupler_bias)))
    amps = np.linspace(cfg.getfloat("chevron", "amp_start_phi0", a0 - 0.006),
                       cfg.getfloat("chevron", "amp_stop_phi0", a0 + 0.006),
                       cfg.getint("chevron", "amp_points", 9))
    durs = np.linspace(cfg.getfloat("chevron", "dur_start_ns", 0.25 * tau0),
                       cfg.getfloat("chevron", "dur_stop_ns", 1.75 * tau0),
                       cfg.getint("chevron", "dur_points", 49))
    settings = {**cfg.common_settings(), "cmd": "chevron", "gate": gate,
                "coupler_bias_phi0": coupler_bias, "mod_freq_ghz": mod_freq,
                "basis": basis_kind, "initial": initial,
                "amplitudes_phi0": amps, "durations_ns": durs}
    meta = _meta(settings)

    basis = dressed_computational_basis(p) if basis_kind == "dressed" else None
    template = FluxPulse(phi_dc=0.0, amplitude=a0, mod_freq=mod_freq,
                         duration=float(durs[-1]), ramp=0.0)
    chev = chevron(p, (device.q2, device.coupler), template, None,
                   amps, durs, initial=initial, basis=basis)

    path = cfg.outpath("chevron.csv")
    with open(path, "w", encoding="utf-8") as fh:
        for line in _meta_lines(meta):
            fh.write(f"# {line}\n")
        fh.write("# rows: amplitudes_phi0; columns: durations_ns (see sidecar)\n")
        for row in chev.populations:
            fh.write(",".join(f"{v:.8g}" for v in row) + "\n")
    sidecar = cfg.outpath("chevron_grid.json")
    _write_json(sidecar, {
        "meta": meta,
        "amplitudes_phi0": chev.amplitudes,
        "durations_ns": chev.durations,
        "initial": chev.initial,
        "target": chev.target,
        "basis": basis_kind,
        "operating_point": {
            "coupler_bias_phi0": coupler_bias, "mod_freq_ghz": mod_freq,
            "f1_ghz": p.f1, "f2_ghz": p.f2, "fc_ghz": p.fc,
            "analytic_amplitude_phi0": a0, "analytic_duration_ns": tau0,
        },
    })
    i, j = np.unravel_index(int(np.argmax(chev.populations)),
                            chev.populations.shape)
    return _summary(max_population=float(chev.populations[i, j]),
                    amplitude_phi0=float(chev.amplitudes[i]),
                    duration_ns=float(chev.durations[j]), file=path)


def cmd_calibrate(cfg: RunConfig, args) -> int:
    kind = _KIND_ALIAS[args.kind]
    section = "gate.iswap" if kind == "iswap" else "gate.cz"
    coupler_bias = cfg.getfloat(section, "coupler_bias_phi0", None)
    mod_freq = cfg.getfloat(section, "mod_freq_ghz", None)
    guard_band = cfg.getfloat(section, "guard_band_ghz", 0.020)
    refine = cfg.getbool(section, "refine", True)
    settings = {**cfg.common_settings(), "cmd": "calibrate", "kind": kind,
                "coupler_bias_phi0": coupler_bias, "mod_freq_ghz": mod_freq,
                "guard_band_ghz": guard_band, "refine": refine}
    meta = _meta(settings)

    device = cfg.load_device()
    spec, report = calibrate_gate(device, kind, coupler_bias=coupler_bias,
                                  mod_freq=mod_freq, guard_band=guard_band,
                                  refine=refine)
    if cfg.cp.has_section("coherence"):
        times = {}
        for key in ("t1_q1_us", "t1_q2_us", "t2star_q1_us", "t2star_q2_us"):
            value = cfg.getfloat("coherence", key, None)
            if value is None:
                raise ValueError(f"config [coherence] {key} is required")
            times[key] = value
        ct = CoherenceTimes(
            t1_q1=times["t1_q1_us"], t1_q2=times["t1_q2_us"],
            t2s_q1=times["t2star_q1_us"], t2s_q2=times["t2star_q2_us"],
        )
        limit = (coherence_fidelity_iswap if kind == "iswap"
                 else coherence_fidelity_cz)(ct, spec.duration)
        report["coherence"] = {"f_avg_limit": float(limit)}
        if kind == "cz20":
            report["coherence"]["note"] = (
                "coherence times are those measured at the iSWAP coupler "
                "bias; the CZ operating point can differ")

    spec_path = cfg.outpath(f"gatespec_{kind}.json")
    save_gatespec(spec_path, spec, metadata=meta)
    report_path = cfg.outpath(f"report_{kind}.json")
    _write_json(report_path, {"meta": meta, **report})
    tomo = report["tomography"]
    return _summary(F_avg=tomo["f_avg"], theta=tomo["theta_rad"],
                    phi=tomo["phi_rad"], leakage=tomo["leakage"],
                    duration_ns=spec.duration, amplitude_phi0=spec.amplitude,
                    file=spec_path)


def cmd_tomo(cfg: RunConfig, args) -> int:
    spec_file = cfg.get("tomo", "gatespec_file", None)
    if spec_file is None:
        raise ValueError("config [tomo] gatespec_file is required")
    shots = cfg.getint("tomo", "shots", 0)
    fids = {key: cfg.getfloat("tomo", f"readout_{key}", 1.0)
            for key in ("f0_q1", "f1_q1", "f0_q2", "f1_q2")}
    settings = {**cfg.common_settings(), "cmd": "tomo",
                "gatespec": _file_fingerprint(spec_file), "shots": shots,
                **{f"readout_{k}": v for k, v in fids.items()}}
    meta = _meta(settings)

    spec = load_gatespec(spec_file)
    device = cfg.load_device()
    p, u = gate_unitary(device, spec)
    basis = dressed_computational_basis(p)
    confusions = None
    if any(v < 1.0 for v in fids.values()):
        confusions = (confusion_matrix(fids["f0_q1"], fids["f1_q1"]),
                      confusion_matrix(fids["f0_q2"], fids["f1_q2"]))
    pt = simulate_qpt(u, shots=shots, confusions=confusions, seed=cfg.seed,
                      basis=basis)
    corrected = virtual_z_correct(pt, *spec.virtual_z)
    fit = fit_fsim(corrected)
    target = ISWAP if spec.kind == "iswap" else CZ
    f_avg = average_fidelity(corrected, ptm_of_unitary(target))
    phase_err = phase_error(_wrap_angle(fit.phi - _TARGET_PHI[spec.kind]))

    ptm_path = cfg.outpath(f"ptm_{spec.kind}.csv")
    save_ptm(ptm_path, corrected, metadata={
        **meta, "kind": spec.kind, "shots": shots,
        "virtual_z_rad": list(spec.virtual_z)})
    report = {
        "meta": meta, "kind": spec.kind, "shots": shots,
        "f_avg": float(f_avg), "theta_rad": fit.theta, "phi_rad": fit.phi,
        "leakage": pt.leakage, "phase_error": float(phase_err),
        "fit_fidelity": fit.fidelity_to_fit,
        "virtual_z_rad": list(spec.virtual_z),
    }
    _write_json(cfg.outpath(f"tomo_report_{spec.kind}.json"), report)
    return _summary(F_avg=float(f_avg), theta=fit.theta, phi=fit.phi,
                    leakage=pt.leakage, phase_error=float(phase_err),
                    file=ptm_path)


def cmd_flux_invert(cfg: RunConfig, args) -> int:
    path = cfg.get("flux", "crosstalk_file", None)
    ct = load_crosstalk_csv(path if path else str(bundled_path("crosstalk.csv")))
    raw = cfg.get("flux", "target_phi0", "0, 0.29472, 0")
    try:
        target = [float(tok) for tok in raw.split(",")]
    except ValueError:
        raise ValueError(
            f"config [flux] target_phi0: not a comma-separated number list: "
            f"{raw!r}") from None
    if len(target) != ct.matrix.shape[0]:
        raise ValueError(
            f"config [flux] target_phi0: need {ct.matrix.shape[0]} entries "
            f"(one per line {ct.labels}), got {len(target)}")
    settings = {**cfg.common_settings(), "cmd": "flux invert",
                "crosstalk": (_file_fingerprint(path) if path else "bundled"),
                "target_phi0": target}
    meta = _meta(settings)

    setting = compensate_crosstalk(ct, target)
    residual = float(np.max(np.abs(ct.matrix @ setting - np.asarray(target))))
    out = cfg.table_path("compensation", meta, {
        "line": list(ct.labels),
        "target_phi0": target,
        "setting_phi0": setting,
    })
    kv = {f"{label}_phi0": float(s) for label, s in zip(ct.labels, setting)}
    return _summary(**kv, max_residual_phi0=residual,
                    cond=float(ct.condition_number), file=out)


def cmd_transfer_apply(cfg: RunConfig, args) -> int:
    path = cfg.get("transfer", "file", None)
    table = load_transfer_csv(path if path else str(bundled_path("transfer.csv")))
    requested = cfg.getfloat("transfer", "requested_amp_phi0", 0.155)
    mod_freq = cfg.getfloat("transfer", "mod_freq_ghz", 0.28)
    settings = {**cfg.common_settings(), "cmd": "transfer apply",
                "transfer": (_file_fingerprint(path) if path else "bundled"),
                "requested_amp_phi0": requested, "mod_freq_ghz": mod_freq}
    meta = _meta(settings)

    ratio = apply_transfer(table, 1.0, mod_freq)
    result = {
        "meta": meta,
        "requested_amp_phi0": requested,
        "mod_freq_ghz": mod_freq,
        "amplitude_ratio": ratio,
        "achieved_amp_phi0": requested * ratio,
        "compensated_request_phi0": requested / ratio,
    }
    out = cfg.outpath("transfer_apply.json")
    _write_json(out, result)
    return _summary(ratio=ratio, achieved_amp_phi0=requested * ratio,
                    compensated_request_phi0=requested / ratio, file=out)


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE",
                        help="run configuration INI file")
    common.add_argument("--out-dir", dest="out_dir", metavar="DIR",
                        help=f"output directory (overrides ${OUT_DIR_ENV} "
                             "and [run] out_dir)")
    common.add_argument("--seed", type=int,
                        help="random seed for shot sampling (overrides [run] seed)")
    common.add_argument("--format", choices=("csv", "json", "ini"),
                        help="table format; 'ini' echoes the device file "
                             "(device show only)")

    parser = argparse.ArgumentParser(
        prog="paramres",
        description="simulate and calibrate parametric-resonance two-qubit "
                    "gates on a tunable-coupler transmon pair")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    device = sub.add_parser("device", help="device file utilities")
    device_sub = device.add_subparsers(dest="action", required=True,
                                       metavar="action")
    show = device_sub.add_parser("show", parents=[common],
                                 help="print derived device parameters")
    show.set_defaults(func=cmd_device_show)

    sweep = sub.add_parser("sweep", help="parameter sweeps")
    sweep_sub = sweep.add_subparsers(dest="action", required=True,
                                     metavar="action")
    coupling = sweep_sub.add_parser(
        "coupling", parents=[common],
        help="static effective couplings versus coupler flux")
    coupling.set_defaults(func=cmd_sweep_coupling)

    chev = sub.add_parser("chevron", parents=[common],
                          help="population map versus amplitude and duration")
    chev.set_defaults(func=cmd_chevron)

    cal = sub.add_parser("calibrate", parents=[common],
                         help="run the full gate calibration pipeline")
    cal.add_argument("kind", choices=("iswap", "cz", "cz20", "cz02"),
                     help="gate to calibrate (cz is the |11>-|20> phase gate)")
    cal.set_defaults(func=cmd_calibrate)

    tomo = sub.add_parser("tomo", parents=[common],
                          help="process tomography of a calibrated gate")
    tomo.set_defaults(func=cmd_tomo)

    flux = sub.add_parser("flux", help="flux crosstalk utilities")
    flux_sub = flux.add_subparsers(dest="action", required=True,
                                   metavar="action")
    invert = flux_sub.add_parser(
        "invert", parents=[common],
        help="bias settings compensating crosstalk for a target flux vector")
    invert.set_defaults(func=cmd_flux_invert)

    transfer = sub.add_parser("transfer", help="flux-line transfer utilities")
    transfer_sub = transfer.add_subparsers(dest="action", required=True,
                                           metavar="action")
    apply_p = transfer_sub.add_parser(
        "apply", parents=[common],
        help="scale a requested amplitude by the line transfer function")
    apply_p.set_defaults(func=cmd_transfer_apply)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        cfg = RunConfig(args)
        return args.func(cfg, args)
    except CalibrationError as exc:
        print(f"error: calibration failed at stage {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
