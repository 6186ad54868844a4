"""Thermal material properties used by the resonator model.

Values are room-temperature handbook figures for thin films where the film
value differs noticeably from bulk (polysilicon, LPCVD nitride, PSG). They are
design defaults only and every entry can be overridden from the run config.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping


@dataclass(frozen=True)
class Material:
    """Isotropic, temperature-independent thermal material.

    Attributes
    ----------
    name : str
        Lookup key (lower case).
    conductivity : float
        Thermal conductivity in W/(m K).
    volumetric_heat_capacity : float
        Density times specific heat, J/(m^3 K).
    """

    name: str
    conductivity: float
    volumetric_heat_capacity: float

    def __post_init__(self):
        if not self.conductivity > 0:
            raise ValueError(f"material {self.name!r}: conductivity must be > 0")
        if not self.volumetric_heat_capacity > 0:
            raise ValueError(
                f"material {self.name!r}: volumetric_heat_capacity must be > 0")

    @property
    def diffusivity(self) -> float:
        return self.conductivity / self.volumetric_heat_capacity


# (k [W/m/K], rho [kg/m^3], c_p [J/kg/K])
_HANDBOOK = {
    "silicon": (148.0, 2330.0, 712.0),
    "polysilicon": (30.0, 2330.0, 712.0),
    "psg": (1.2, 2200.0, 730.0),
    "nitride": (3.2, 3100.0, 700.0),
    "gold": (318.0, 19300.0, 129.0),
    "air": (0.026, 1.184, 1007.0),
}


def default_material_table() -> list[Material]:
    """Return the default material list (silicon, polysilicon, PSG, nitride,
    gold, air)."""
    return [Material(name, k, rho * cp) for name, (k, rho, cp) in _HANDBOOK.items()]


class MaterialTable(Mapping[str, Material]):
    """Name -> Material mapping with config-style overrides.

    >>> table = MaterialTable.default()
    >>> table["air"].conductivity
    0.026
    """

    def __init__(self, materials: Iterable[Material]):
        self._by_name = {m.name.lower(): m for m in materials}

    @classmethod
    def default(cls, overrides: Mapping[str, Mapping[str, float]] | None = None
                ) -> "MaterialTable":
        table = cls(default_material_table())
        if overrides:
            table = table.with_overrides(overrides)
        return table

    def with_overrides(self, overrides: Mapping[str, Mapping[str, float]]
                       ) -> "MaterialTable":
        """Return a new table with per-material field overrides applied.

        ``overrides`` maps a material name to a dict holding ``conductivity``
        and/or ``volumetric_heat_capacity``. Unknown names create new
        materials, in which case both fields are required.
        """
        merged = dict(self._by_name)
        allowed = {"conductivity", "volumetric_heat_capacity"}
        for name, fields in overrides.items():
            key = name.lower()
            extra = set(fields) - allowed
            if extra:
                raise KeyError(f"material {name!r}: unknown field(s) {sorted(extra)}")
            if key in merged:
                base = merged[key]
                merged[key] = Material(
                    key,
                    float(fields.get("conductivity", base.conductivity)),
                    float(fields.get("volumetric_heat_capacity",
                                     base.volumetric_heat_capacity)),
                )
            else:
                if set(fields) != allowed:
                    raise KeyError(f"new material {name!r} needs both {sorted(allowed)}")
                merged[key] = Material(key, float(fields["conductivity"]),
                                       float(fields["volumetric_heat_capacity"]))
        return MaterialTable(merged.values())

    def lookup(self, name: str) -> Material:
        try:
            return self._by_name[name.lower()]
        except KeyError:
            raise KeyError(f"unknown material {name!r}") from None

    def __getitem__(self, name: str) -> Material:
        return self.lookup(name)

    def __iter__(self):
        return iter(self._by_name)

    def __len__(self):
        return len(self._by_name)
