"""Steady-state and switch-off transient solutions of a ThermalNetwork."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla

from .curves import TransientCurve
from .mesh import ThermalNetwork

STEADY_RTOL = 1e-10


class SolverError(RuntimeError):
    """Numerical failure: singular system or residual above tolerance."""


@dataclass(frozen=True, eq=False)
class TemperatureField:
    """Temperature rise above ambient per node and the power map behind it."""

    dT: np.ndarray
    power: np.ndarray
    positions: np.ndarray | None = None

    def __post_init__(self):
        if not np.all(np.isfinite(self.dT)):
            raise SolverError("non-finite temperature field")

    @property
    def peak(self) -> float:
        return float(self.dT.max())

    def mean_over(self, nodes: np.ndarray, weights: np.ndarray | None = None) -> float:
        if weights is None:
            return float(self.dT[nodes].mean())
        return float(np.average(self.dT[nodes], weights=weights[nodes]))


@dataclass(frozen=True)
class TransientGrid:
    """Time axis of a switch-off simulation.

    ``t_max=None`` runs until every node has decayed below ``settle`` times
    its initial excursion, capped at ``t_cap`` seconds, but never stops
    before ``t_min * 10**min_decades``.
    """

    t_min: float = 1e-8
    t_max: float | None = None
    steps_per_decade: int = 50
    samples_per_octave: int = 200
    t_cap: float = 10.0
    settle: float = 1e-4
    min_decades: float = 5.0

    def validate(self) -> None:
        if not (self.t_min > 0 and math.isfinite(self.t_min)):
            raise ValueError("t_min must be > 0")
        if self.t_max is not None and not (self.t_max > self.t_min):
            raise ValueError("t_max must exceed t_min")
        if not self.t_cap > self.t_min:
            raise ValueError("t_cap must exceed t_min")
        if self.steps_per_decade < 20:
            raise ValueError("steps_per_decade must be >= 20")
        if self.samples_per_octave < 1:
            raise ValueError("samples_per_octave must be >= 1")
        if self.min_decades < 0:
            raise ValueError("min_decades must be >= 0")


def power_vector(net: ThermalNetwork, power) -> np.ndarray:
    """Normalise a node->W mapping (or full array) into a dense vector."""
    n = net.n_nodes
    if isinstance(power, Mapping):
        vec = np.zeros(n)
        for node, w in power.items():
            node = int(node)
            if not 0 <= node < n:
                raise KeyError(f"power given for unknown node {node}")
            vec[node] += float(w)
    else:
        vec = np.asarray(power, dtype=float)
        if vec.shape != (n,):
            raise ValueError(f"power vector must have shape ({n},)")
    if not np.all(np.isfinite(vec)):
        raise ValueError("non-finite power")
    return vec


def beam_power(net: ThermalNetwork, beam: str, watts: float) -> np.ndarray:
    """Spread ``watts`` (dissipated by the whole physical beam) uniformly over
    the beam volume. A symmetry-reduced model receives its share only."""
    try:
        nodes = net.heaters[beam]
    except KeyError:
        raise KeyError(f"network has no heater set {beam!r}") from None
    vol = net.volumes[nodes]
    vec = np.zeros(net.n_nodes)
    vec[nodes] = watts * vol / vol.sum() / net.multiplicity
    return vec


def _check_solvable(net: ThermalNetwork) -> None:
    if not net.is_connected:
        raise SolverError("network is not connected to the ambient (singular system)")


def _factor(a: sp.spmatrix):
    return sla.splu(sp.csc_matrix(a), permc_spec="MMD_AT_PLUS_A")


def _solve_checked(lu, a: sp.spmatrix, rhs: np.ndarray) -> np.ndarray:
    """Direct solve plus iterative refinement down to ``STEADY_RTOL``.

    On badly conditioned networks the residual cannot drop below the
    rounding error of evaluating ``a @ x``; a solution whose normwise
    backward error is at that floor is accepted as well.
    """
    x = lu.solve(rhs)
    norm = np.linalg.norm(rhs, np.inf)
    a_norm = sla.norm(a, np.inf)
    for _ in range(4):
        r = rhs - a @ x
        rn = np.linalg.norm(r, np.inf)
        if rn <= STEADY_RTOL * norm:
            return x
        x = x + lu.solve(r)
    floor = 64 * np.finfo(float).eps * (a_norm * np.linalg.norm(x, np.inf) + norm)
    if rn <= floor:
        return x
    raise SolverError(f"residual {rn / norm:.2e} above {STEADY_RTOL:g}")


def steady_state(net: ThermalNetwork, power) -> TemperatureField:
    """Solve ``G dT = P`` for the temperature rise under ``power``."""
    p = power_vector(net, power)
    _check_solvable(net)
    if not np.any(p):
        return TemperatureField(np.zeros(net.n_nodes), p, net.positions)
    g = net.conductance_matrix
    return TemperatureField(_solve_checked(_factor(g), g, p), p, net.positions)


def boundary_flux(net: ThermalNetwork, field: TemperatureField) -> float:
    """Total heat flow into the ambient, W."""
    return float(np.sum(net.ambient_g * field.dT[net.ambient_nodes]))


def driving_point_Rth(net: ThermalNetwork, heater: str = "upper", dP: float = 1.0) -> float:
    """Steady temperature rise averaged over the heater set per watt, K/W."""
    if not dP > 0:
        raise ValueError("dP must be > 0")
    field = steady_state(net, beam_power(net, heater, dP))
    nodes = net.heaters[heater]
    return field.mean_over(nodes, net.volumes) / dP


def hotspot_location(field: TemperatureField) -> tuple[int, np.ndarray | None]:
    """Index and position of the hottest node; ties go to the lowest index."""
    if len(field.dT) == 0:
        raise ValueError("empty temperature field")
    i = int(np.argmax(field.dT))
    pos = None if field.positions is None else field.positions[i]
    return i, pos


def _lattice(t0: float, t1: float, per_octave: int) -> np.ndarray:
    n = int(math.floor(math.log2(t1 / t0) * per_octave + 1e-9)) + 1
    return t0 * np.exp2(np.arange(n) / per_octave)


def transient_switch_off(net: ThermalNetwork, power_on, power_off,
                         grid: TransientGrid | None = None,
                         sensors: Mapping[str, np.ndarray] | None = None,
                         ) -> dict[str, TransientCurve]:
    """Cooling response after the power steps from ``power_on`` to ``power_off``.

    The network starts in the steady state under ``power_on``. The returned
    curves hold the temperature above the ``power_off`` steady state,
    volume-averaged over each sensor node set, on a log-uniform lattice
    starting at ``grid.t_min``.

    Time integration is backward Euler. Steps grow with ``t`` so that no step
    exceeds ``t * (10**(1/steps_per_decade) - 1)``; step sizes are restricted
    to powers of two times a base step so each size is factorised once.
    """
    grid = grid or TransientGrid()
    grid.validate()
    sensors = dict(net.sensors if sensors is None else sensors)
    dp = power_vector(net, power_on) - power_vector(net, power_off)
    _check_solvable(net)

    weights = {k: net.volumes[v] / net.volumes[v].sum() for k, v in sensors.items()}

    def observe(u):
        return [float(w @ u[sensors[k]]) for k, w in weights.items()]

    g = net.conductance_matrix
    if not np.any(dp):
        t_end = grid.t_max or grid.t_cap
        out_t = _lattice(grid.t_min, t_end, grid.samples_per_octave)
        return {k: TransientCurve(out_t, np.zeros_like(out_t), "temperature",
                                  {"sensor": k}) for k in sensors}

    u = _solve_checked(_factor(g), g, dp)
    u_scale = np.abs(u).max()
    ratio = 10.0 ** (1.0 / grid.steps_per_decade) - 1.0
    h0 = grid.t_min * ratio
    cap = np.asarray(net.capacitance)
    factors: dict[int, object] = {}

    times = [0.0]
    obs = [observe(u)]
    t = 0.0
    t_stop = grid.t_max if grid.t_max is not None else grid.t_cap
    t_floor = min(grid.t_min * 10.0 ** grid.min_decades, t_stop)
    while t < t_stop * (1 - 1e-12):
        level = 0 if t <= 0 else max(0, int(math.floor(math.log2(max(ratio * t, h0) / h0) + 1e-9)))
        dt = h0 * 2.0 ** level
        if t + dt > t_stop:
            dt = t_stop - t
            level = -1
        if level not in factors or level == -1:
            lu = _factor(g + sp.diags(cap / dt))
            if level != -1:
                factors[level] = lu
        else:
            lu = factors[level]
        u = lu.solve(cap / dt * u)
        t = t + dt
        times.append(t)
        obs.append(observe(u))
        if not np.all(np.isfinite(u)):
            raise SolverError("transient diverged")
        if grid.t_max is None and t >= t_floor * (1 - 1e-12) and np.abs(u).max() <= grid.settle * u_scale:
            break
    t_end = t

    times = np.asarray(times)
    obs = np.asarray(obs)
    out_t = _lattice(grid.t_min, t_end, grid.samples_per_octave)
    # interpolate in ln t; the t=0 sample is mapped just below the first step
    lt = np.log(np.maximum(times, times[1] * 1e-6))
    curves = {}
    for j, name in enumerate(weights):
        vals = np.interp(np.log(out_t), lt, obs[:, j])
        curves[name] = TransientCurve(out_t, vals, "temperature", {"sensor": name})
    return curves
