"""Transient curve container and its CSV format."""

from __future__ import annotations

import io
import os
from dataclasses import dataclass, field, replace

import numpy as np

KINDS = {"voltage": "V", "temperature": "K"}
CURVE_MAGIC = "# etchprobe-curve v1"


@dataclass(frozen=True, eq=False)
class TransientCurve:
    """Sampled response ``value(t)`` with ``t`` in seconds.

    ``kind`` is ``"voltage"`` (values in V) or ``"temperature"`` (values in K
    above the final state).
    """

    t: np.ndarray
    values: np.ndarray
    kind: str = "temperature"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if self.kind not in KINDS:
            raise ValueError(f"curve kind must be one of {sorted(KINDS)}, got {self.kind!r}")
        if t.ndim != 1 or t.shape != v.shape:
            raise ValueError("t and values must be 1-D arrays of equal length")
        if len(t) == 0:
            raise ValueError("empty curve")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise ValueError("curve contains non-finite samples")
        if t[0] <= 0:
            raise ValueError("sample times must be > 0")
        if np.any(np.diff(t) <= 0):
            raise ValueError("sample times must be strictly increasing")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "values", v)

    @property
    def unit(self) -> str:
        return KINDS[self.kind]

    @property
    def log_t(self) -> np.ndarray:
        return np.log(self.t)

    def __len__(self) -> int:
        return len(self.t)

    def with_values(self, values, kind: str | None = None, **meta) -> "TransientCurve":
        md = dict(self.metadata)
        md.update(meta)
        return replace(self, values=np.asarray(values, dtype=float),
                       kind=kind or self.kind, metadata=md)

    def scaled(self, c: float) -> "TransientCurve":
        return self.with_values(self.values * c)

    def time_scaled(self, s: float) -> "TransientCurve":
        """Same values sampled at ``s * t``."""
        return replace(self, t=self.t * s)

    def equals(self, other: "TransientCurve") -> bool:
        return (self.kind == other.kind and np.array_equal(self.t, other.t)
                and np.array_equal(self.values, other.values))


def format_curve(curve: TransientCurve) -> str:
    buf = io.StringIO()
    header = f"{CURVE_MAGIC} kind={curve.kind} unit={curve.unit}"
    for key in sorted(curve.metadata):
        val = str(curve.metadata[key]).replace(" ", "_")
        header += f" {key}={val}"
    buf.write(header + "\n")
    buf.write("time_s,value\n")
    for t, v in zip(curve.t, curve.values):
        buf.write(f"{t:.17g},{v:.17g}\n")
    return buf.getvalue()


def write_curve(curve: TransientCurve, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_curve(curve))


def parse_curve(text: str) -> TransientCurve:
    lines = text.splitlines()
    if not lines or not lines[0].startswith(CURVE_MAGIC):
        raise ValueError("not an etchprobe curve file (missing magic line)")
    fields = {}
    for tok in lines[0][len(CURVE_MAGIC):].split():
        if "=" not in tok:
            raise ValueError(f"malformed header token {tok!r}")
        key, val = tok.split("=", 1)
        fields[key] = val
    kind = fields.pop("kind", None)
    unit = fields.pop("unit", None)
    if kind not in KINDS:
        raise ValueError(f"unknown curve kind {kind!r}")
    if unit is not None and unit != KINDS[kind]:
        raise ValueError(f"unit {unit!r} does not match kind {kind!r}")
    if len(lines) < 2 or lines[1].strip() != "time_s,value":
        raise ValueError("line 2: expected header 'time_s,value'")
    ts, vs = [], []
    for lineno, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected two columns")
        try:
            ts.append(float(parts[0]))
            vs.append(float(parts[1]))
        except ValueError:
            raise ValueError(f"line {lineno}: non-numeric value") from None
    return TransientCurve(np.array(ts), np.array(vs), kind=kind, metadata=fields)


def read_curve(path: str | os.PathLike) -> TransientCurve:
    with open(path, encoding="utf-8") as fh:
        return parse_curve(fh.read())
