"""Linear electro-thermal calibration of a beam resistance.

Calibration fits ``V = a + b*T`` to cold-plate records taken at a constant
sensor current ``I``; the fitted slope is the channel sensitivity in V/K and
``dR = alpha * R_el0 * dT`` gives the temperature coefficient.
"""

from __future__ import annotations

import io
import json
import math
import os
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .curves import TransientCurve


@dataclass(frozen=True)
class CalibrationRecord:
    T: float
    V: float
    I: float

    def __post_init__(self):
        if not (math.isfinite(self.T) and math.isfinite(self.V) and math.isfinite(self.I)):
            raise ValueError("calibration record has non-finite values")
        if not self.I > 0:
            raise ValueError("sensor current must be > 0")


@dataclass(frozen=True)
class CalibrationResult:
    alpha: float
    R_el0: float
    T0: float
    sensitivity: float
    rms_residual: float
    n_samples: int
    current: float

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "CalibrationResult":
        fields = {"alpha", "R_el0", "T0", "sensitivity", "rms_residual", "n_samples", "current"}
        missing = fields - set(data)
        if missing:
            raise ValueError(f"calibration file missing {sorted(missing)}")
        return cls(**{k: data[k] for k in fields})


def fit_sensitivity(records: Sequence[CalibrationRecord], T0: float | None = None
                    ) -> CalibrationResult:
    """Ordinary least-squares calibration line.

    Parameters
    ----------
    records : sequence of CalibrationRecord
        At least two records with distinct temperatures, one sensor current.
    T0 : float, optional
        Reference temperature for ``R_el0``; defaults to the lowest record
        temperature.
    """
    if len(records) < 2:
        raise ValueError("need at least two calibration records")
    currents = {r.I for r in records}
    if len(currents) != 1:
        raise ValueError("calibration records mix sensor currents")
    current = currents.pop()
    T = np.array([r.T for r in records])
    V = np.array([r.V for r in records])
    if np.ptp(T) == 0:
        raise ValueError("all calibration temperatures are equal; slope undefined")
    Tm, Vm = T.mean(), V.mean()
    b = float(np.sum((T - Tm) * (V - Vm)) / np.sum((T - Tm) ** 2))
    a = float(Vm - b * Tm)
    resid = V - (a + b * T)
    t0 = float(T.min()) if T0 is None else float(T0)
    R0 = (a + b * t0) / current
    if R0 == 0:
        raise ValueError("fitted reference resistance is zero")
    alpha = b / (current * R0)
    return CalibrationResult(alpha=alpha, R_el0=R0, T0=t0, sensitivity=b,
                             rms_residual=float(np.sqrt(np.mean(resid ** 2))),
                             n_samples=len(records), current=current)


def voltage_to_temperature(curve: TransientCurve, calib: CalibrationResult) -> TransientCurve:
    """Convert a voltage-change transient to temperature via ``dT = dV / S``."""
    if curve.kind != "voltage":
        raise ValueError("voltage_to_temperature needs a voltage curve")
    if calib.sensitivity == 0:
        raise ValueError("calibration sensitivity is zero")
    return curve.with_values(curve.values / calib.sensitivity, kind="temperature")


def read_calibration_csv(path: str | os.PathLike) -> list[CalibrationRecord]:
    """Read ``temperature_K,voltage_V`` rows under a ``# current_A=<I>`` line."""
    with open(path, encoding="utf-8") as fh:
        return parse_calibration_csv(fh.read())


def parse_calibration_csv(text: str) -> list[CalibrationRecord]:
    current = None
    header_seen = False
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("current_A="):
                try:
                    current = float(body.split("=", 1)[1])
                except ValueError:
                    raise ValueError(f"line {lineno}: bad current_A value") from None
            continue
        if not header_seen:
            if line.replace(" ", "") != "temperature_K,voltage_V":
                raise ValueError(f"line {lineno}: expected header 'temperature_K,voltage_V'")
            header_seen = True
            continue
        if current is None:
            raise ValueError("missing '# current_A=<value>' header line")
        parts = line.split(",")
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected two columns")
        try:
            out.append(CalibrationRecord(float(parts[0]), float(parts[1]), current))
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    if current is None:
        raise ValueError("missing '# current_A=<value>' header line")
    return out


def format_calibration_csv(records: Sequence[CalibrationRecord]) -> str:
    if not records:
        raise ValueError("no records")
    buf = io.StringIO()
    buf.write(f"# current_A={records[0].I:.17g}\n")
    buf.write("temperature_K,voltage_V\n")
    for r in records:
        buf.write(f"{r.T:.17g},{r.V:.17g}\n")
    return buf.getvalue()


def write_calibration(result: CalibrationResult, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(result.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_calibration(path: str | os.PathLike) -> CalibrationResult:
    with open(path, encoding="utf-8") as fh:
        return CalibrationResult.from_dict(json.load(fh))
