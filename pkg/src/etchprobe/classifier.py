"""Etch-quality verdict from a reference/candidate pair of temperature transients.

A uniform change of thermal resistance scales the transient amplitude and
moves it along log time by the same factor, since the time constants are
resistance times capacitance. A candidate whose excursion is much smaller
than the reference *and* whose transient is earlier by the matching number
of decades is flagged as under-etched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .analysis import amplitude_at, estimate_shift, lattice_step
from .curves import TransientCurve

CONSISTENT = "CONSISTENT"
UNDER_ETCHED = "UNDER_ETCHED"
INDETERMINATE = "INDETERMINATE"


@dataclass(frozen=True)
class ClassifierConfig:
    ratio_threshold: float = 2.0
    consistency_threshold: float = 0.3
    t_eval: float = 1e-5
    amplitude_mode: str = "t_eval"
    window: int = 21

    def validate(self) -> None:
        if not self.ratio_threshold > 0:
            raise ValueError("ratio_threshold must be > 0")
        if not self.consistency_threshold >= 0:
            raise ValueError("consistency_threshold must be >= 0")
        if self.amplitude_mode not in ("t_eval", "max"):
            raise ValueError("amplitude_mode must be 't_eval' or 'max'")
        if not self.t_eval > 0:
            raise ValueError("t_eval must be > 0")


@dataclass(frozen=True)
class EtchReport:
    amplitude_ratio: float
    shift_decades: float
    tau_consistency: float
    verdict: str
    ratio_threshold: float
    consistency_threshold: float
    amplitude_mode: str
    t_eval: float | None
    reference_amplitude: float
    candidate_amplitude: float
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "amplitude_ratio": self.amplitude_ratio,
            "shift_decades": self.shift_decades,
            "tau_consistency": self.tau_consistency,
            "verdict": self.verdict,
            "thresholds": {
                "ratio_threshold": self.ratio_threshold,
                "consistency_threshold": self.consistency_threshold,
            },
            "amplitude_mode": self.amplitude_mode,
            "t_eval": self.t_eval,
            "reference_amplitude": self.reference_amplitude,
            "candidate_amplitude": self.candidate_amplitude,
            "metadata": self.metadata,
        }


def verdict_for(amplitude_ratio: float, tau_consistency: float, cfg: ClassifierConfig) -> str:
    if amplitude_ratio < cfg.ratio_threshold:
        return CONSISTENT
    if tau_consistency <= cfg.consistency_threshold:
        return UNDER_ETCHED
    return INDETERMINATE


def _check_lattices(a: TransientCurve, b: TransientCurve) -> float:
    da, db = lattice_step(a), lattice_step(b)
    if abs(da - db) > 1e-9 * da:
        raise ValueError("mismatched lattices: different samples per octave")
    phase = (math.log(b.t[0]) - math.log(a.t[0])) / da
    if abs(phase - round(phase)) > 1e-6:
        raise ValueError("mismatched lattices: sample times are not aligned")
    return da


def _amplitude(curve: TransientCurve, t_eval: float, dz: float) -> float:
    # after an early cut the first lattice point may sit up to one step past t_eval
    if t_eval < curve.t[0] and math.log(curve.t[0] / t_eval) <= dz * (1 + 1e-9):
        return float(curve.values[0])
    return amplitude_at(curve, t_eval)


def compare(reference: TransientCurve, candidate: TransientCurve,
            cfg: ClassifierConfig | None = None) -> EtchReport:
    """Compare a candidate against a known-good (fully released) reference.

    Both curves must be temperature curves on the same log-uniform lattice
    (same density, aligned sample times), already early-cut.

    ``amplitude_ratio`` is reference over candidate, read at ``cfg.t_eval``
    (or at the largest excursion when ``amplitude_mode == "max"``). When the
    early cut leaves the first sample less than one lattice step after
    ``t_eval``, the first sample is used.
    """
    cfg = cfg or ClassifierConfig()
    cfg.validate()
    for name, c in (("reference", reference), ("candidate", candidate)):
        if c.kind != "temperature":
            raise ValueError(f"{name} curve is not a temperature curve")
    dz = _check_lattices(reference, candidate)

    if cfg.amplitude_mode == "max":
        a_ref = float(np.max(np.abs(reference.values)))
        a_cand = float(np.max(np.abs(candidate.values)))
        t_eval = None
    else:
        a_ref = _amplitude(reference, cfg.t_eval, dz)
        a_cand = _amplitude(candidate, cfg.t_eval, dz)
        t_eval = cfg.t_eval
    if not (a_ref > 0 and a_cand > 0):
        raise ValueError("amplitudes must be positive to form a ratio")
    ratio = a_ref / a_cand
    shift = estimate_shift(reference, candidate, cfg.window)
    consistency = abs(math.log10(ratio) - shift)
    md = {"reference": dict(reference.metadata), "candidate": dict(candidate.metadata)}
    return EtchReport(
        amplitude_ratio=ratio, shift_decades=shift, tau_consistency=consistency,
        verdict=verdict_for(ratio, consistency, cfg),
        ratio_threshold=cfg.ratio_threshold,
        consistency_threshold=cfg.consistency_threshold,
        amplitude_mode=cfg.amplitude_mode, t_eval=t_eval,
        reference_amplitude=a_ref, candidate_amplitude=a_cand, metadata=md)
