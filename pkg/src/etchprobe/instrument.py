"""Virtual thermal-transient tester.

Turns simulated temperature transients into the voltage transients a
four-wire sensor channel would record after the drive current is switched
off: the resistance change of each sensed beam times its sensor current,
plus a decaying electrical settling term and white noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .curves import TransientCurve
from .mesh import ThermalNetwork
from .solver import TransientGrid, beam_power, transient_switch_off


@dataclass(frozen=True)
class MeasurementSetup:
    """Currents, beam resistances and electrical non-idealities.

    Per-beam quantities are dicts keyed by beam id (``"upper"``, ``"lower"``).
    """

    I_sense: Mapping[str, float] = field(default_factory=lambda: {"upper": 25e-3, "lower": 25e-3})
    I_drive: float = 25e-3
    R_el0: Mapping[str, float] = field(default_factory=lambda: {"upper": 100.0, "lower": 33.0})
    T0: float = 300.0
    alpha: Mapping[str, float] = field(default_factory=lambda: {"upper": 1e-3, "lower": 1e-3})
    parasitic_tau: float = 2e-6
    parasitic_amplitude: float = 5e-3
    noise_rms: float = 2e-4
    seed: int = 0

    def validate(self) -> None:
        for beam, i in self.I_sense.items():
            if not (i >= 0 and math.isfinite(i)):
                raise ValueError(f"I_sense[{beam!r}] must be >= 0")
        if not (self.I_drive >= 0 and math.isfinite(self.I_drive)):
            raise ValueError("I_drive must be >= 0")
        for beam, r in self.R_el0.items():
            if not r > 0:
                raise ValueError(f"R_el0[{beam!r}] must be > 0")
        for beam, a in self.alpha.items():
            if not math.isfinite(a):
                raise ValueError(f"alpha[{beam!r}] must be finite")
        if not self.parasitic_tau > 0:
            raise ValueError("parasitic_tau must be > 0")
        if not self.noise_rms >= 0:
            raise ValueError("noise_rms must be >= 0")

    def sensitivity(self, beam: str, current: float | None = None) -> float:
        """Thermal voltage coefficient ``I * R_el0 * alpha`` in V/K."""
        i = self.I_sense.get(beam, 0.0) if current is None else current
        return i * self.R_el0[beam] * self.alpha[beam]


def joule_power(current: float, resistance: float) -> float:
    """``I**2 * R`` with the resistance held at its reference value."""
    if not (math.isfinite(current) and math.isfinite(resistance)):
        raise ValueError("non-finite current or resistance")
    return current * current * resistance


def synthesize_voltage(temp_curve: TransientCurve, setup: MeasurementSetup,
                       I_after: float, beam: str = "upper",
                       rng: np.random.Generator | None = None) -> TransientCurve:
    """Voltage transient seen on ``beam`` while ``I_after`` flows through it.

    ``V(t) = I_after R_el0 alpha dT(t) + A exp(-t / tau_p) + noise``.
    Without an explicit ``rng`` the noise stream is seeded from
    ``setup.seed``, so repeated calls are bit-identical.
    """
    if temp_curve.kind != "temperature":
        raise ValueError("synthesize_voltage needs a temperature curve")
    t = temp_curve.t
    thermal = I_after * setup.R_el0[beam] * setup.alpha[beam] * temp_curve.values
    v = thermal + setup.parasitic_amplitude * np.exp(-t / setup.parasitic_tau)
    if setup.noise_rms > 0:
        if rng is None:
            rng = np.random.default_rng(setup.seed)
        v = v + rng.normal(0.0, setup.noise_rms, size=len(t))
    md = dict(temp_curve.metadata, beam=beam, I_after=repr(float(I_after)))
    return TransientCurve(t, v, "voltage", md)


def experiment_powers(net: ThermalNetwork, setup: MeasurementSetup, drive_target: str,
                      sensed: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
    """Power maps before and after the drive current is switched off."""
    if drive_target not in net.heaters:
        raise KeyError(f"drive target {drive_target!r} absent from network")
    on = np.zeros(net.n_nodes)
    off = np.zeros(net.n_nodes)
    i_drive_beam = setup.I_sense.get(drive_target, 0.0)
    r = setup.R_el0[drive_target]
    on += beam_power(net, drive_target, joule_power(i_drive_beam + setup.I_drive, r))
    off += beam_power(net, drive_target, joule_power(i_drive_beam, r))
    for beam in sensed:
        if beam == drive_target:
            continue
        p = beam_power(net, beam, joule_power(setup.I_sense.get(beam, 0.0), setup.R_el0[beam]))
        on += p
        off += p
    return on, off


def simulate_temperatures(net: ThermalNetwork, setup: MeasurementSetup,
                          drive_target: str = "upper",
                          sensed: Sequence[str] = ("upper", "lower"),
                          grid: TransientGrid | None = None) -> dict[str, TransientCurve]:
    """Temperature transients of the sensed beams for one switch-off."""
    setup.validate()
    for beam in sensed:
        if beam not in net.sensors:
            raise KeyError(f"sensed beam {beam!r} absent from network")
    on, off = experiment_powers(net, setup, drive_target, sensed)
    sensors = {b: net.sensors[b] for b in sensed}
    curves = transient_switch_off(net, on, off, grid, sensors=sensors)
    return {b: c.with_values(c.values, drive=drive_target) for b, c in curves.items()}


def run_virtual_experiment(net: ThermalNetwork, setup: MeasurementSetup,
                           drive_target: str = "upper",
                           sensed: Sequence[str] = ("upper", "lower"),
                           grid: TransientGrid | None = None,
                           temperatures: Mapping[str, TransientCurve] | None = None,
                           ) -> dict[str, TransientCurve]:
    """Simulate one switch-off and return a voltage curve per sensed beam.

    Each sensed beam reads with its own sensor current, so a beam with zero
    sensor current shows only the electrical settling term and noise.
    Precomputed ``temperatures`` skip the thermal solve.
    """
    if temperatures is None:
        temperatures = simulate_temperatures(net, setup, drive_target, sensed, grid)
    seeds = np.random.SeedSequence(setup.seed).spawn(len(sensed))
    out = {}
    for beam, ss in zip(sensed, seeds):
        out[beam] = synthesize_voltage(temperatures[beam], setup,
                                       setup.I_sense.get(beam, 0.0), beam,
                                       rng=np.random.default_rng(ss))
    return out
