"""End-to-end helpers shared by the command line and the acceptance suite."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .analysis import (TimeConstantSpectrum, amplitude_at, cut_early,
                       deconvolve_spectrum, resample_log, response_derivative)
from .classifier import EtchReport, compare
from .config import AnalysisConfig, RunConfig
from .curves import TransientCurve
from .geometry import DeviceGeometry, build_resonator, quarter_model
from .instrument import experiment_powers, run_virtual_experiment, simulate_temperatures
from .mesh import ThermalNetwork, anchor_nodes, discretize
from .solver import TemperatureField, driving_point_Rth, hotspot_location, steady_state


def build_geometry(cfg: RunConfig, f: float | None = None) -> DeviceGeometry:
    f = cfg.etch_fraction if f is None else f
    geom = build_resonator(cfg.geometry, f, cfg.material_table())
    return quarter_model(geom) if cfg.mesh.quarter else geom


def build_network(cfg: RunConfig, f: float | None = None,
                  geom: DeviceGeometry | None = None) -> ThermalNetwork:
    geom = geom or build_geometry(cfg, f)
    net = discretize(geom, cfg.mesh.resolution,
                     film_coefficient=cfg.mesh.film_coefficient,
                     region_resolution=cfg.mesh.region_resolution)
    net.validate()
    return net


@dataclass(frozen=True, eq=False)
class Simulation:
    network: ThermalNetwork
    field: TemperatureField
    temperatures: dict[str, TransientCurve]
    summary: dict


def field_summary(net: ThermalNetwork, field: TemperatureField, drive: str,
                  rth: float) -> dict:
    idx, pos = hotspot_location(field)
    tag = net.tag_names[net.node_tag[idx]]
    anchors = anchor_nodes(net)
    return {
        "peak_dT_K": field.peak,
        "hotspot_position_m": [float(v) for v in pos],
        "hotspot_region": tag,
        "hotspot_distance_from_centre_m": float(abs(pos[0])),
        "anchor_max_dT_K": float(field.dT[anchors].max()) if len(anchors) else None,
        "driving_point_Rth_K_per_W": rth,
        "drive": drive,
        "power_W": float(field.power.sum() * net.multiplicity),
        "nodes": net.n_nodes,
        "multiplicity": net.multiplicity,
    }


def simulate(cfg: RunConfig, f: float | None = None, drive: str = "upper",
             sensed: Sequence[str] = ("upper", "lower"),
             net: ThermalNetwork | None = None) -> Simulation:
    """Steady field under the drive plus the switch-off temperature transients."""
    net = net or build_network(cfg, f)
    setup = cfg.setup()
    on, _ = experiment_powers(net, setup, drive, sensed)
    field = steady_state(net, on)
    temps = simulate_temperatures(net, setup, drive, sensed, cfg.transient)
    f_val = cfg.etch_fraction if f is None else f
    temps = {b: c.with_values(c.values, etch_fraction=repr(float(f_val))) for b, c in temps.items()}
    summary = field_summary(net, field, drive, driving_point_Rth(net, drive))
    summary["etch_fraction"] = float(f_val)
    return Simulation(net, field, temps, summary)


def measure(cfg: RunConfig, f: float | None = None, drive: str = "upper",
            sensed: Sequence[str] = ("upper", "lower"),
            sim: Simulation | None = None) -> dict[str, TransientCurve]:
    sim = sim or simulate(cfg, f, drive, sensed)
    return run_virtual_experiment(sim.network, cfg.setup(), drive, sensed,
                                  temperatures=sim.temperatures)


def condition(curve: TransientCurve, acfg: AnalysisConfig) -> TransientCurve:
    """Log-resample, then drop the electrical settling window."""
    return cut_early(resample_log(curve, acfg.samples_per_octave), acfg.t_cut)


def compare_curves(ref: TransientCurve, cand: TransientCurve, cfg: RunConfig,
                   conditioned: bool = False) -> EtchReport:
    if not conditioned:
        ref, cand = condition(ref, cfg.analysis), condition(cand, cfg.analysis)
    return compare(ref, cand, cfg.classifier)


@dataclass(frozen=True, eq=False)
class Analysis:
    curve: TransientCurve
    derivative: TransientCurve
    spectrum: TimeConstantSpectrum
    summary: dict


def analyze(curve: TransientCurve, cfg: RunConfig, power: float | None = None) -> Analysis:
    """Condition a temperature transient and extract its time-constant spectrum.

    With ``power`` (W) the spectrum is in K/W, otherwise in K.
    """
    c = condition(curve, cfg.analysis)
    d = response_derivative(c, cfg.analysis.window)
    if power:
        d = d / power
    dcurve = c.with_values(d, derivative="d/dlnt")
    spec = deconvolve_spectrum(dcurve, cfg.analysis.iterations)
    peak = int(np.argmax(spec.R)) if spec.mass > 0 else None
    t_eval = cfg.classifier.t_eval
    amp = amplitude_at(c, t_eval) if c.t[0] <= t_eval <= c.t[-1] else float(c.values[0])
    summary = {
        "samples": len(c),
        "t_first_s": float(c.t[0]),
        "t_last_s": float(c.t[-1]),
        "amplitude_at_t_eval": amp,
        "t_eval_s": t_eval,
        "spectrum_mass": spec.mass,
        "spectrum_unit": "K/W" if power else "K",
        "spectrum_peak_tau_s": float(spec.tau[peak]) if peak is not None else None,
        "spectrum_centroid_log10_tau": spec.centroid_decades(),
        "reconvolution_rms": spec.residual_rms,
        "iterations": spec.iterations,
        "flagged_zero_input": spec.flagged,
    }
    return Analysis(c, dcurve, spec, summary)
