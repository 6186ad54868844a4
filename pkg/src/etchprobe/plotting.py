"""Matplotlib figures for simulation, analysis and comparison outputs.

Figures are drawn on an Agg canvas without touching pyplot state, so the
module is safe to use from scripts, tests and the command line alike.
"""

from __future__ import annotations

import os
from typing import Mapping

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .analysis import response_derivative

RC = {
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
}
_PNG_META = {"Software": None}


def _figure(nrows=1, ncols=1, width=6.0, height=4.0):
    fig = Figure(figsize=(width, height), dpi=120)
    FigureCanvasAgg(fig)
    axes = fig.subplots(nrows, ncols, squeeze=False)
    for ax in axes.flat:
        ax.grid(True, alpha=RC["grid.alpha"])
    return fig, axes


def _save(fig, path: str | os.PathLike) -> None:
    fig.tight_layout()
    fig.savefig(path, metadata=_PNG_META)


def plot_transients(curves: Mapping[str, "TransientCurve"], path, title: str = "") -> None:
    fig, axes = _figure()
    ax = axes[0, 0]
    unit = None
    for label, c in curves.items():
        ax.semilogx(c.t, c.values, label=label, lw=1.2)
        unit = c.unit
    ax.set_xlabel("time after switch-off [s]")
    ax.set_ylabel("temperature change [K]" if unit == "K" else "voltage change [V]")
    if title:
        ax.set_title(title)
    ax.legend(loc="best")
    _save(fig, path)


def plot_comparison(ref, cand, report, path, window: int = 21) -> None:
    """Reference vs candidate transient, plus the normalised log-time
    derivatives whose lag gives the shift."""
    fig, axes = _figure(1, 2, width=10.0)
    ax = axes[0, 0]
    ax.semilogx(ref.t, ref.values, label="reference")
    ax.semilogx(cand.t, cand.values, label="candidate")
    ax.semilogx(cand.t, cand.values * report.amplitude_ratio, "--",
                label=f"candidate x {report.amplitude_ratio:.2f}")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("temperature change [K]")
    ax.legend(loc="best")
    ax = axes[0, 1]
    for c, label in ((ref, "reference"), (cand, "candidate")):
        d = response_derivative(c, window)
        ax.semilogx(c.t, d / d.max(), label=label)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("normalised d(response)/d ln t")
    ax.set_title(f"shift {report.shift_decades:+.2f} dec, verdict {report.verdict}")
    ax.legend(loc="best")
    _save(fig, path)


def plot_spectrum(analysis, path) -> None:
    spec = analysis.spectrum
    fig, axes = _figure(1, 2, width=10.0)
    ax = axes[0, 0]
    ax.semilogx(analysis.derivative.t, analysis.derivative.values, label="derivative")
    ax.semilogx(analysis.derivative.t, spec.reconvolve(), "--", label="reconvolved")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("d(response)/d ln t")
    ax.legend(loc="best")
    ax = axes[0, 1]
    ax.semilogx(spec.tau, spec.R)
    ax.set_xlabel("time constant [s]")
    ax.set_ylabel(f"spectrum [{analysis.summary['spectrum_unit']}/nat]")
    _save(fig, path)


def plot_field_map(net, field, path, tag: str = "upper_beam") -> None:
    """Top view of the steady temperature rise of one region (hottest cell
    in each x-y column)."""
    nodes = net.nodes_tagged(tag)
    if len(nodes) == 0:
        raise ValueError(f"no nodes tagged {tag!r}")
    pos = net.positions[nodes]
    dT = field.dT[nodes]
    xs = np.unique(pos[:, 0])
    ys = np.unique(pos[:, 1])
    img = np.full((len(ys), len(xs)), np.nan)
    ix = np.searchsorted(xs, pos[:, 0])
    iy = np.searchsorted(ys, pos[:, 1])
    np.fmax.at(img, (iy, ix), dT)
    fig, axes = _figure(width=8.0, height=3.0)
    ax = axes[0, 0]
    ax.grid(False)
    mesh = ax.pcolormesh(xs * 1e6, ys * 1e6, img, shading="nearest", cmap="inferno")
    fig.colorbar(mesh, ax=ax, label="temperature rise [K]")
    ax.set_xlabel("x [um]")
    ax.set_ylabel("y [um]")
    ax.set_title(f"steady state, {tag}")
    _save(fig, path)
