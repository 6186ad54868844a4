"""Command-line entry point.

Exit codes: 0 success, 2 usage/config/input-format errors, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import pipeline, plotting
from .calibration import (fit_sensitivity, read_calibration, read_calibration_csv,
                          voltage_to_temperature, write_calibration)
from .config import ConfigError, RunConfig, load_config
from .curves import TransientCurve, read_curve, write_curve
from .mesh import mesh_info
from .solver import SolverError

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3


class UsageError(Exception):
    pass


def _dump_json(obj, path: Path | None = None) -> str:
    text = json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"
    if path is not None:
        path.write_text(text, encoding="utf-8")
    return text


def _config(args) -> RunConfig:
    cfg = load_config(args.config)
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "etch_fraction", None) is not None:
        changes["etch_fraction"] = args.etch_fraction
    analysis = cfg.analysis
    if getattr(args, "t_cut", None) is not None:
        analysis = dataclasses.replace(analysis, t_cut=args.t_cut)
    if getattr(args, "samples_per_octave", None) is not None:
        analysis = dataclasses.replace(analysis, samples_per_octave=args.samples_per_octave)
        changes["transient"] = dataclasses.replace(
            cfg.transient, samples_per_octave=args.samples_per_octave)
    changes["analysis"] = analysis
    cfg = cfg.with_overrides(**changes)
    cfg.validate()
    return cfg


def _out_dir(args, cfg: RunConfig) -> Path:
    out = Path(args.out or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _sensed(args) -> tuple[str, ...]:
    beams = tuple(dict.fromkeys(args.sense or ("upper", "lower")))
    return beams


def _plot_manifest(out: Path, name: str, figure: str | None, series: list[dict]) -> None:
    """Plot data as CSV series plus a JSON manifest describing them."""
    _dump_json({"figure": figure, "series": series}, out / f"{name}_plot.json")


def _curve_series(out: Path, stem: str, label: str, curve: TransientCurve,
                  y_label: str | None = None) -> dict:
    fname = f"{stem}.csv"
    write_curve(curve, out / fname)
    return {"label": label, "file": fname, "x": "time_s", "y": y_label or curve.unit,
            "x_scale": "log"}


def _temperature_input(path: str, calib_path: str | None) -> TransientCurve:
    curve = read_curve(path)
    if curve.kind == "voltage":
        if calib_path is None:
            raise UsageError(f"{path}: voltage curve needs --calib to convert to temperature")
        curve = voltage_to_temperature(curve, read_calibration(calib_path))
    return curve


def cmd_simulate(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    sim = pipeline.simulate(cfg, drive=args.drive, sensed=_sensed(args))
    series = []
    for beam, curve in sim.temperatures.items():
        series.append(_curve_series(out, f"temperature_{beam}", beam, curve))
    _dump_json(sim.summary, out / "field_summary.json")
    figure = None
    if not args.no_figures:
        figure = "temperatures.png"
        plotting.plot_transients(sim.temperatures, out / figure,
                                 title=f"drive {args.drive}, f = {sim.summary['etch_fraction']:g}")
        plotting.plot_field_map(sim.network, sim.field, out / "field_map.png",
                                tag=f"{args.drive}_beam")
    _plot_manifest(out, "temperatures", figure, series)
    sys.stdout.write(_dump_json(sim.summary))
    return EXIT_OK


def cmd_measure(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg)
    volts = pipeline.measure(cfg, drive=args.drive, sensed=_sensed(args))
    series = [_curve_series(out, f"voltage_{beam}", beam, c) for beam, c in volts.items()]
    figure = None
    if not args.no_figures:
        figure = "voltages.png"
        plotting.plot_transients(volts, out / figure, title=f"drive {args.drive}")
    _plot_manifest(out, "voltages", figure, series)
    sys.stdout.write(_dump_json({"files": [s["file"] for s in series]}))
    return EXIT_OK


def cmd_calibrate(args) -> int:
    if not args.input:
        raise UsageError("calibrate needs --input")
    result = fit_sensitivity(read_calibration_csv(args.input))
    out = Path(args.out or "calibration.json")
    out.parent.mkdir(parents=True, exist_ok=True)
    write_calibration(result, out)
    sys.stdout.write(_dump_json(result.to_dict()))
    return EXIT_OK


def cmd_analyze(args) -> int:
    if not args.input:
        raise UsageError("analyze needs --input")
    cfg = _config(args)
    out = _out_dir(args, cfg)
    curve = _temperature_input(args.input, args.calib)
    res = pipeline.analyze(curve, cfg, power=args.power)
    spec = res.spectrum
    header = f"tau_s,spectrum_{res.summary['spectrum_unit'].replace('/', '_per_')}_per_nat\n"
    rows = "".join(f"{t:.17g},{r:.17g}\n" for t, r in zip(spec.tau, spec.R))
    (out / "spectrum.csv").write_text(header + rows, encoding="utf-8")
    series = [
        _curve_series(out, "conditioned", "conditioned", res.curve),
        _curve_series(out, "derivative", "derivative", res.derivative, "d/dlnt"),
        {"label": "spectrum", "file": "spectrum.csv", "x": "tau_s",
         "y": header.strip().split(",")[1], "x_scale": "log"},
    ]
    _dump_json(res.summary, out / "analysis.json")
    figure = None
    if not args.no_figures:
        figure = "spectrum.png"
        plotting.plot_spectrum(res, out / figure)
    _plot_manifest(out, "analysis", figure, series)
    sys.stdout.write(_dump_json(res.summary))
    return EXIT_OK


def cmd_compare(args) -> int:
    if not (args.ref and args.cand):
        raise UsageError("compare needs --ref and --cand")
    cfg = _config(args)
    ref = _temperature_input(args.ref, args.calib)
    cand = _temperature_input(args.cand, args.calib)
    ref_c = pipeline.condition(ref, cfg.analysis)
    cand_c = pipeline.condition(cand, cfg.analysis)
    report = pipeline.compare_curves(ref_c, cand_c, cfg, conditioned=True)
    out = Path(args.out or Path(cfg.output_dir) / "report.json")
    out.parent.mkdir(parents=True, exist_ok=True)
    _dump_json(report.to_dict(), out)
    stem = out.stem
    folder = out.parent
    series = [_curve_series(folder, f"{stem}_reference", "reference", ref_c),
              _curve_series(folder, f"{stem}_candidate", "candidate", cand_c)]
    figure = None
    if not args.no_figures:
        figure = f"{stem}.png"
        plotting.plot_comparison(ref_c, cand_c, report, folder / figure,
                                 window=cfg.classifier.window)
    _plot_manifest(folder, stem, figure, series)
    sys.stdout.write(_dump_json(report.to_dict()))
    return EXIT_OK


def cmd_mesh_info(args) -> int:
    cfg = _config(args)
    net = pipeline.build_network(cfg)
    info = mesh_info(net)
    info["etch_fraction"] = cfg.etch_fraction
    text = _dump_json(info)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="etchprobe",
        description="Thermal-transient simulation and etch diagnosis of two-beam resonators.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, sim=False):
        p.add_argument("--config", help="JSON run configuration (defaults if omitted)")
        p.add_argument("--out", help="output directory or file")
        p.add_argument("--seed", type=int, help="RNG seed override")
        p.add_argument("--t-cut", type=float, help="discard samples before this time [s]")
        p.add_argument("--samples-per-octave", type=int)
        p.add_argument("--no-figures", action="store_true", help="write plot data only")
        if sim:
            p.add_argument("--etch-fraction", type=float, help="remaining PSG fraction f")
            p.add_argument("--drive", choices=("upper", "lower"), default="upper")
            p.add_argument("--sense", nargs="+", choices=("upper", "lower"),
                           help="sensed beams (default: both)")

    p = sub.add_parser("simulate", help="temperature transients and steady field")
    common(p, sim=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("measure", help="synthetic voltage transients")
    common(p, sim=True)
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("calibrate", help="fit a calibration line from temperature/voltage pairs")
    p.add_argument("--input", help="calibration CSV")
    p.add_argument("--out", help="calibration JSON to write")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("analyze", help="time-constant spectrum of one transient")
    common(p)
    p.add_argument("--input", help="curve CSV")
    p.add_argument("--calib", help="calibration JSON for voltage input")
    p.add_argument("--power", type=float, help="power step [W]; spectrum in K/W")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("compare", help="etch verdict for a candidate against a reference")
    common(p)
    p.add_argument("--ref", help="reference curve CSV")
    p.add_argument("--cand", help="candidate curve CSV")
    p.add_argument("--calib", help="calibration JSON for voltage inputs")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("mesh-info", help="node/edge counts and total capacitance")
    p.add_argument("--config")
    p.add_argument("--etch-fraction", type=float)
    p.add_argument("--out", help="also write the JSON here")
    p.set_defaults(func=cmd_mesh_info)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        with np.errstate(over="raise", invalid="raise", divide="raise"):
            return args.func(args)
    except (SolverError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"etchprobe: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, ConfigError, ValueError, KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"etchprobe: error: {msg}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
