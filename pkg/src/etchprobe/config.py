"""Run configuration: one JSON document, unknown keys rejected.

All physical quantities are SI (metres, seconds, amperes, ohms, kelvin).
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from typing import Any, Mapping

from .classifier import ClassifierConfig
from .geometry import ResonatorParams
from .instrument import MeasurementSetup
from .materials import MaterialTable
from .solver import TransientGrid


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


@dataclass(frozen=True)
class MeshConfig:
    resolution: tuple[float, float, float] = (2.5e-6, 2.0e-6, 0.5e-6)
    region_resolution: Mapping[str, tuple[float, float, float]] = field(
        default_factory=lambda: {"substrate": (10e-6, 5e-6, 2.5e-6),
                                 "nitride": (10e-6, 5e-6, 0.6e-6)})
    film_coefficient: float = 0.0
    quarter: bool = True

    def refined(self, factor: float) -> "MeshConfig":
        """Every target cell size divided by ``factor``."""
        return dataclasses.replace(
            self,
            resolution=tuple(r / factor for r in self.resolution),
            region_resolution={k: tuple(r / factor for r in v)
                               for k, v in self.region_resolution.items()})


@dataclass(frozen=True)
class AnalysisConfig:
    t_cut: float = 1e-5
    samples_per_octave: int = 200
    window: int = 21
    iterations: int = 500


@dataclass(frozen=True)
class RunConfig:
    geometry: ResonatorParams = field(default_factory=ResonatorParams)
    materials: Mapping[str, Mapping[str, float]] = field(default_factory=dict)
    etch_fraction: float = 0.0
    mesh: MeshConfig = field(default_factory=MeshConfig)
    transient: TransientGrid = field(default_factory=TransientGrid)
    measurement: MeasurementSetup = field(default_factory=MeasurementSetup)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    seed: int = 0
    output_dir: str = "out"

    def material_table(self) -> MaterialTable:
        return MaterialTable.default(self.materials)

    def setup(self) -> MeasurementSetup:
        return dataclasses.replace(self.measurement, seed=self.seed)

    def with_overrides(self, **kw) -> "RunConfig":
        return dataclasses.replace(self, **kw)

    def validate(self) -> None:
        try:
            self.geometry.validate()
            mats = self.material_table()
            for name in ("substrate_material", "nitride_material", "beam_material",
                         "anchor_material", "sacrificial_material", "fill_material"):
                val = getattr(self.geometry, name)
                if val is not None:
                    mats.lookup(val)
            if not 0.0 <= self.etch_fraction <= 1.0:
                raise ValueError("etch_fraction must lie in [0, 1]")
            self.transient.validate()
            self.setup().validate()
            self.classifier.validate()
            if self.analysis.window < 5 or self.analysis.window % 2 == 0:
                raise ValueError("analysis.window must be odd and >= 5")
            if self.analysis.samples_per_octave < 8:
                raise ValueError("analysis.samples_per_octave must be >= 8")
            if self.analysis.iterations < 1:
                raise ValueError("analysis.iterations must be >= 1")
        except (ValueError, KeyError) as exc:
            raise ConfigError(str(exc).strip("'\"")) from None


# Fields excluded from the JSON surface.
_HIDDEN = {MeasurementSetup: {"seed"}}


def _coerce(value: Any, default: Any, path: str) -> Any:
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true/false")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number")
        return float(value)
    if isinstance(default, tuple):
        if not isinstance(value, list) or len(value) != len(default):
            raise ConfigError(f"{path}: expected a list of {len(default)} numbers")
        return tuple(_coerce(v, d, f"{path}[{i}]") for i, (v, d) in enumerate(zip(value, default)))
    if isinstance(default, Mapping):
        if not isinstance(value, dict):
            raise ConfigError(f"{path}: expected an object")
        return value
    return value


def _build(cls, data: Any, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected an object")
    hidden = _HIDDEN.get(cls, set())
    fields = {f.name: f for f in dataclasses.fields(cls) if f.name not in hidden}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        where = f"{path}." if path else ""
        raise ConfigError(f"{where}{unknown[0]}: unknown key")
    defaults = cls()
    kw = {}
    for name, value in data.items():
        sub = f"{path}.{name}" if path else name
        default = getattr(defaults, name)
        if dataclasses.is_dataclass(default):
            kw[name] = _build(type(default), value, sub)
        elif default is None or (name == "fill_material"):
            if value is not None and not isinstance(value, (str, int, float)):
                raise ConfigError(f"{sub}: expected a scalar or null")
            kw[name] = float(value) if isinstance(value, int) and not isinstance(value, bool) else value
        else:
            kw[name] = _coerce(value, default, sub)
    try:
        return cls(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path or 'config'}: {exc}") from None


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number")
    return float(value)


def _normalise_maps(cfg: RunConfig) -> RunConfig:
    """Check the free-form mappings and convert their numbers to floats."""
    m = cfg.measurement
    beams = {}
    for name in ("I_sense", "R_el0", "alpha"):
        out = {}
        for beam, v in getattr(m, name).items():
            if beam not in ("upper", "lower"):
                raise ConfigError(f"measurement.{name}.{beam}: unknown beam")
            out[beam] = _number(v, f"measurement.{name}.{beam}")
        beams[name] = out
    regions = {}
    for tag, res in cfg.mesh.region_resolution.items():
        path = f"mesh.region_resolution.{tag}"
        if not (isinstance(res, (list, tuple)) and len(res) == 3):
            raise ConfigError(f"{path}: expected 3 numbers")
        regions[tag] = tuple(_number(v, f"{path}[{i}]") for i, v in enumerate(res))
    materials = {}
    for mat, props in cfg.materials.items():
        if not isinstance(props, dict):
            raise ConfigError(f"materials.{mat}: expected an object")
        for key in props:
            if key not in ("conductivity", "volumetric_heat_capacity"):
                raise ConfigError(f"materials.{mat}.{key}: unknown key")
        materials[mat] = {k: _number(v, f"materials.{mat}.{k}") for k, v in props.items()}
    return cfg.with_overrides(
        measurement=dataclasses.replace(m, **beams),
        mesh=dataclasses.replace(cfg.mesh, region_resolution=regions),
        materials=materials)


def config_from_dict(data: Mapping[str, Any]) -> RunConfig:
    cfg = _normalise_maps(_build(RunConfig, data, ""))
    cfg.validate()
    return cfg


def load_config(path: str | os.PathLike | None) -> RunConfig:
    """Load a JSON config file; ``None`` gives the defaults."""
    if path is None:
        cfg = RunConfig()
        cfg.validate()
        return cfg
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return config_from_dict(data)


def config_to_dict(cfg: RunConfig) -> dict:
    def conv(obj):
        if dataclasses.is_dataclass(obj):
            hidden = _HIDDEN.get(type(obj), set())
            return {f.name: conv(getattr(obj, f.name)) for f in dataclasses.fields(obj)
                    if f.name not in hidden}
        if isinstance(obj, Mapping):
            return {k: conv(v) for k, v in obj.items()}
        if isinstance(obj, tuple):
            return [conv(v) for v in obj]
        return obj
    return conv(cfg)
