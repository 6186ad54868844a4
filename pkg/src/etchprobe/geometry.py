"""Parametric layer-stack model of the two-beam resonator.

The device is described as a list of non-overlapping axis-aligned boxes, each
carrying a material and a region tag. Coordinates are in metres with the
substrate bottom at ``z = 0`` and the device centred on ``x = y = 0`` so that
both vertical mid-planes are mirror planes.

Stack, bottom to top::

    substrate (silicon) | nitride | gap1 | lower beam | gap2 | upper beam

The lower beam is anchored to the nitride at both ends; the upper beam is
longer and its anchor posts land on the nitride beyond the lower beam ends.
Sacrificial material left behind by an incomplete etch sits inside the gaps
over the overlap footprint (the central ``overlap_length`` of the stack).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

from .materials import Material, MaterialTable

AXES = ("x", "y", "z")

# Region tags used by the mesher and the measurement layer.
SUBSTRATE = "substrate"
NITRIDE = "nitride"
LOWER_BEAM = "lower_beam"
UPPER_BEAM = "upper_beam"
LOWER_ANCHOR = "lower_anchor"
UPPER_ANCHOR = "upper_anchor"
PSG_GAP1 = "psg_gap1"
PSG_GAP2 = "psg_gap2"
GAP_FILL = "gap_fill"

BEAMS = {"upper": UPPER_BEAM, "lower": LOWER_BEAM}


@dataclass(frozen=True)
class Box:
    lo: tuple[float, float, float]
    hi: tuple[float, float, float]

    def __post_init__(self):
        if any(not (h > l) for l, h in zip(self.lo, self.hi)):
            raise ValueError(f"degenerate box {self.lo} .. {self.hi}")

    @property
    def volume(self) -> float:
        return math.prod(h - l for l, h in zip(self.lo, self.hi))

    def intersection(self, other: "Box") -> "Box | None":
        lo = tuple(max(a, b) for a, b in zip(self.lo, other.lo))
        hi = tuple(min(a, b) for a, b in zip(self.hi, other.hi))
        if all(h > l for l, h in zip(lo, hi)):
            return Box(lo, hi)
        return None

    def mirrored(self, axis: int, plane: float) -> "Box":
        lo, hi = list(self.lo), list(self.hi)
        lo[axis], hi[axis] = 2 * plane - self.hi[axis], 2 * plane - self.lo[axis]
        return Box(tuple(lo), tuple(hi))

    def clipped(self, axis: int, lower: float) -> "Box | None":
        """Part of the box with coordinate >= ``lower`` along ``axis``."""
        if self.hi[axis] <= lower:
            return None
        lo = list(self.lo)
        lo[axis] = max(lo[axis], lower)
        return Box(tuple(lo), self.hi)


def subtract(box: Box, cutters: Iterable[Box]) -> list[Box]:
    """Split ``box`` minus the union of ``cutters`` into disjoint boxes."""
    pieces = [box]
    for cut in cutters:
        nxt = []
        for piece in pieces:
            inter = piece.intersection(cut)
            if inter is None:
                nxt.append(piece)
                continue
            lo, hi = list(piece.lo), list(piece.hi)
            for ax in range(3):
                if lo[ax] < inter.lo[ax]:
                    h = list(hi)
                    h[ax] = inter.lo[ax]
                    nxt.append(Box(tuple(lo), tuple(h)))
                if inter.hi[ax] < hi[ax]:
                    l = list(lo)
                    l[ax] = inter.hi[ax]
                    nxt.append(Box(tuple(l), tuple(hi)))
                lo[ax], hi[ax] = inter.lo[ax], inter.hi[ax]
        pieces = nxt
    return pieces


@dataclass(frozen=True)
class Region:
    tag: str
    box: Box
    material: Material

    @property
    def volume(self) -> float:
        return self.box.volume


@dataclass(frozen=True)
class ResonatorParams:
    """Dimensions (m) and material assignment of the two-beam resonator.

    ``remnant_layout`` selects how leftover sacrificial material is placed in
    each gap: ``"strip"`` (default) is a full-height strip of width
    ``f * beam width`` along the beam centre line, the shape an undercut
    etch front leaves behind; ``"slab"`` is a layer of thickness ``f * gap``
    lying on the lower face of the gap.

    ``fill_material=None`` leaves etched gaps empty (vacuum); naming a
    material such as ``"air"`` fills them with it.
    """

    substrate_length: float = 340e-6
    substrate_width: float = 80e-6
    substrate_thickness: float = 10e-6
    nitride_thickness: float = 0.6e-6
    lower_length: float = 200e-6
    lower_width: float = 20e-6
    lower_thickness: float = 2.0e-6
    upper_length: float = 300e-6
    upper_width: float = 20e-6
    upper_thickness: float = 1.5e-6
    gap1: float = 2.0e-6
    gap2: float = 0.75e-6
    overlap_length: float = 150e-6
    anchor_length: float = 10e-6
    substrate_material: str = "silicon"
    nitride_material: str = "nitride"
    beam_material: str = "polysilicon"
    anchor_material: str = "polysilicon"
    sacrificial_material: str = "psg"
    fill_material: str | None = None
    remnant_layout: str = "strip"
    ambient_temperature: float = 300.0

    def validate(self) -> None:
        dims = ("substrate_length", "substrate_width", "substrate_thickness",
                "nitride_thickness", "lower_length", "lower_width",
                "lower_thickness", "upper_length", "upper_width",
                "upper_thickness", "gap1", "gap2", "overlap_length",
                "anchor_length")
        for name in dims:
            val = getattr(self, name)
            if not (isinstance(val, (int, float)) and math.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be a positive length, got {val!r}")
        if self.overlap_length > min(self.lower_length, self.upper_length):
            raise ValueError("overlap_length longer than a beam")
        if self.upper_length > self.substrate_length or self.lower_length > self.substrate_length:
            raise ValueError("beam longer than the substrate")
        if max(self.upper_width, self.lower_width) > self.substrate_width:
            raise ValueError("beam wider than the substrate")
        if 2 * self.anchor_length >= self.lower_length:
            raise ValueError("anchors cover the whole lower beam")
        if self.upper_length / 2 - self.anchor_length < self.lower_length / 2:
            raise ValueError("upper-beam anchors collide with the lower beam; "
                             "upper_length must exceed lower_length + 2*anchor_length")
        if self.remnant_layout not in ("strip", "slab"):
            raise ValueError(f"remnant_layout must be 'strip' or 'slab', got {self.remnant_layout!r}")
        if not self.ambient_temperature > 0:
            raise ValueError("ambient_temperature must be > 0 K")


@dataclass(frozen=True)
class DeviceGeometry:
    """Resolved region list plus etch state and symmetry bookkeeping.

    ``mirror_planes`` lists (axis, coordinate) planes the geometry is
    declared symmetric about. ``cut_planes`` lists planes along which the
    model was cut by symmetry reduction; they are adiabatic.
    """

    regions: tuple[Region, ...]
    bbox: Box
    etch_fraction: float
    mirror_planes: tuple[tuple[int, float], ...] = ()
    cut_planes: tuple[tuple[int, float], ...] = ()
    voids: tuple[Box, ...] = ()
    params: ResonatorParams | None = None
    materials: MaterialTable | None = field(default=None, compare=False)

    @property
    def multiplicity(self) -> int:
        """How many copies of this model make up the physical device."""
        return 2 ** len(self.cut_planes)

    def regions_tagged(self, tag: str) -> list[Region]:
        return [r for r in self.regions if r.tag == tag]

    def volume_of(self, tag: str) -> float:
        return sum(r.volume for r in self.regions_tagged(tag))

    @property
    def psg_volume(self) -> float:
        return self.volume_of(PSG_GAP1) + self.volume_of(PSG_GAP2)

    def is_symmetric(self, axis: int, plane: float, rtol: float = 1e-12) -> bool:
        scale = max(abs(c) for c in self.bbox.lo + self.bbox.hi)
        tol = rtol * scale

        def key(tag, mat, box):
            return (tag, mat.name, tuple(round(c / tol) for c in box.lo + box.hi))

        have = {key(r.tag, r.material, r.box) for r in self.regions}
        return all(key(r.tag, r.material, r.box.mirrored(axis, plane)) in have
                   for r in self.regions)


def _z_levels(p: ResonatorParams) -> dict[str, float]:
    z_sub = p.substrate_thickness
    z0 = z_sub + p.nitride_thickness
    z1 = z0 + p.gap1
    z1t = z1 + p.lower_thickness
    z2 = z1t + p.gap2
    z2t = z2 + p.upper_thickness
    return dict(sub=z_sub, z0=z0, z1=z1, z1t=z1t, z2=z2, z2t=z2t)


def build_resonator(params: ResonatorParams, f: float,
                    materials: MaterialTable | None = None) -> DeviceGeometry:
    """Build the full (unreduced) resonator geometry for etch fraction ``f``.

    ``f`` is the fraction of sacrificial material left in each gap over the
    overlap footprint: 0 is fully released, 1 is unreleased.
    """
    if not (isinstance(f, (int, float)) and 0.0 <= f <= 1.0):
        raise ValueError(f"etch fraction must lie in [0, 1], got {f!r}")
    params.validate()
    mats = materials if materials is not None else MaterialTable.default()
    p = params
    z = _z_levels(p)
    m_sub = mats[p.substrate_material]
    m_nit = mats[p.nitride_material]
    m_beam = mats[p.beam_material]
    m_anchor = mats[p.anchor_material]
    m_psg = mats[p.sacrificial_material]
    m_fill = mats[p.fill_material] if p.fill_material else None

    Ls, Ws = p.substrate_length / 2, p.substrate_width / 2
    L1, w1 = p.lower_length / 2, p.lower_width / 2
    L2, w2 = p.upper_length / 2, p.upper_width / 2
    a = p.anchor_length

    regions: list[Region] = [
        Region(SUBSTRATE, Box((-Ls, -Ws, 0.0), (Ls, Ws, z["sub"])), m_sub),
        Region(NITRIDE, Box((-Ls, -Ws, z["sub"]), (Ls, Ws, z["z0"])), m_nit),
        Region(LOWER_BEAM, Box((-L1, -w1, z["z1"]), (L1, w1, z["z1t"])), m_beam),
        Region(UPPER_BEAM, Box((-L2, -w2, z["z2"]), (L2, w2, z["z2t"])), m_beam),
    ]
    lower_anchors = [Box((-L1, -w1, z["z0"]), (-L1 + a, w1, z["z1"])),
                     Box((L1 - a, -w1, z["z0"]), (L1, w1, z["z1"]))]
    upper_anchors = [Box((-L2, -w2, z["z0"]), (-L2 + a, w2, z["z2"])),
                     Box((L2 - a, -w2, z["z0"]), (L2, w2, z["z2"]))]
    regions += [Region(LOWER_ANCHOR, b, m_anchor) for b in lower_anchors]
    regions += [Region(UPPER_ANCHOR, b, m_anchor) for b in upper_anchors]

    # remaining sacrificial material over the overlap footprint
    Lo = p.overlap_length / 2
    wo = min(w1, w2)
    psg: list[Region] = []
    if f > 0:
        if p.remnant_layout == "strip":
            ys = f * wo
            slabs = [(PSG_GAP1, (-Lo, -ys, z["z0"]), (Lo, ys, z["z1"])),
                     (PSG_GAP2, (-Lo, -ys, z["z1t"]), (Lo, ys, z["z2"]))]
        else:
            slabs = [(PSG_GAP1, (-Lo, -wo, z["z0"]), (Lo, wo, z["z0"] + f * p.gap1)),
                     (PSG_GAP2, (-Lo, -wo, z["z1t"]), (Lo, wo, z["z1t"] + f * p.gap2))]
        for tag, lo, hi in slabs:
            # a vanishingly small f can round to an empty remnant
            if all(h > l for l, h in zip(lo, hi)):
                psg += [Region(tag, b, m_psg) for b in subtract(Box(lo, hi), lower_anchors)]
    regions += psg

    # etched gap volume under the beams
    col_up = Box((-L2, -w2, z["z0"]), (L2, w2, z["z2"]))
    col_low = Box((-L1, -w1, z["z0"]), (L1, w1, z["z1"]))
    gap_space = [col_up] + subtract(col_low, [col_up])
    solids = [r.box for r in regions if r.box.hi[2] > z["z0"]]
    fill_boxes = [b for g in gap_space for b in subtract(g, solids)]
    if m_fill is not None:
        regions += [Region(GAP_FILL, b, m_fill) for b in fill_boxes]

    bbox = Box((-Ls, -Ws, 0.0), (Ls, Ws, z["z2t"]))
    geom = DeviceGeometry(
        regions=tuple(regions), bbox=bbox, etch_fraction=float(f),
        mirror_planes=((0, 0.0), (1, 0.0)), params=params, materials=mats)
    return replace(geom, voids=tuple(_voids(geom)))


def _voids(geom: DeviceGeometry) -> list[Box]:
    return subtract(geom.bbox, [r.box for r in geom.regions])


def set_etch_state(geom: DeviceGeometry, f: float) -> DeviceGeometry:
    """Re-derive ``geom`` for a new etch fraction, keeping every other region."""
    if not (isinstance(f, (int, float)) and 0.0 <= f <= 1.0):
        raise ValueError(f"etch fraction must lie in [0, 1], got {f!r}")
    if geom.params is None:
        raise ValueError("geometry was not built from ResonatorParams")
    if f == geom.etch_fraction:
        return geom
    new = build_resonator(geom.params, f, geom.materials)
    if geom.cut_planes:
        new = quarter_model(new, planes=geom.cut_planes)
    return new


def quarter_model(geom: DeviceGeometry,
                  planes: Sequence[tuple[int, float]] | None = None) -> DeviceGeometry:
    """Keep the part of ``geom`` on the positive side of its mirror planes.

    The cut planes become adiabatic boundaries of the reduced model.
    """
    planes = tuple(planes if planes is not None else geom.mirror_planes)
    if not planes:
        raise ValueError("geometry declares no mirror planes")
    for axis, c in planes:
        if not geom.is_symmetric(axis, c):
            raise ValueError(f"geometry is not symmetric about {AXES[axis]} = {c:g}")
    regions = list(geom.regions)
    bbox = geom.bbox
    for axis, c in planes:
        regions = [replace(r, box=b) for r in regions
                   if (b := r.box.clipped(axis, c)) is not None]
        bbox = bbox.clipped(axis, c)
    remaining = tuple(pl for pl in geom.mirror_planes if pl not in planes)
    out = replace(geom, regions=tuple(regions), bbox=bbox, mirror_planes=remaining,
                  cut_planes=geom.cut_planes + planes)
    return replace(out, voids=tuple(_voids(out)))
