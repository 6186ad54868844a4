"""Finite-volume discretisation of a DeviceGeometry into a thermal RC network.

Each cell of a rectilinear grid becomes one node. Grid lines are placed on
every region boundary and each interval between boundaries is split into
equal cells no larger than the requested size, so every cell holds a single
material. Face conductances use the series combination of the two half
cells, which makes layered stacks exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .geometry import (AXES, BEAMS, LOWER_ANCHOR, UPPER_ANCHOR, DeviceGeometry)

AMBIENT = -1

_FACES = {"x-": (0, 0), "x+": (0, 1), "y-": (1, 0), "y+": (1, 1),
          "z-": (2, 0), "z+": (2, 1)}


@dataclass(frozen=True, eq=False)
class ThermalNetwork:
    """Node capacitances, edge conductances and heater/sensor node sets.

    Internal edges are stored as parallel arrays ``edge_a``, ``edge_b``,
    ``edge_g``; edges to the isothermal ambient as ``ambient_nodes`` and
    ``ambient_g``. Temperatures handled by the solver are rises above
    ``ambient_temperature``.
    """

    capacitance: np.ndarray
    positions: np.ndarray
    volumes: np.ndarray
    node_tag: np.ndarray
    tag_names: tuple[str, ...]
    edge_a: np.ndarray
    edge_b: np.ndarray
    edge_g: np.ndarray
    ambient_nodes: np.ndarray
    ambient_g: np.ndarray
    heaters: dict[str, np.ndarray] = field(default_factory=dict)
    sensors: dict[str, np.ndarray] = field(default_factory=dict)
    ambient_temperature: float = 300.0
    multiplicity: int = 1
    cut_planes: tuple[tuple[int, float], ...] = ()
    grid_shape: tuple[int, int, int] | None = None

    @property
    def n_nodes(self) -> int:
        return len(self.capacitance)

    @property
    def n_edges(self) -> int:
        return len(self.edge_g) + len(self.ambient_g)

    @property
    def total_capacitance(self) -> float:
        return float(self.capacitance.sum())

    def edges(self):
        """Iterate ``(a, b, g)`` over all edges, ``b == AMBIENT`` for boundary ones."""
        for a, b, g in zip(self.edge_a, self.edge_b, self.edge_g):
            yield int(a), int(b), float(g)
        for a, g in zip(self.ambient_nodes, self.ambient_g):
            yield int(a), AMBIENT, float(g)

    def nodes_tagged(self, tag: str) -> np.ndarray:
        if tag not in self.tag_names:
            return np.empty(0, dtype=np.int64)
        return np.flatnonzero(self.node_tag == self.tag_names.index(tag))

    @cached_property
    def conductance_matrix(self) -> sp.csc_matrix:
        """Nodal conductance matrix with the ambient folded into the diagonal."""
        n = self.n_nodes
        a, b, g = self.edge_a, self.edge_b, self.edge_g
        diag = np.zeros(n)
        np.add.at(diag, a, g)
        np.add.at(diag, b, g)
        np.add.at(diag, self.ambient_nodes, self.ambient_g)
        rows = np.concatenate([a, b, np.arange(n)])
        cols = np.concatenate([b, a, np.arange(n)])
        vals = np.concatenate([-g, -g, diag])
        return sp.csc_matrix((vals, (rows, cols)), shape=(n, n))

    @cached_property
    def is_connected(self) -> bool:
        """True when every node reaches the ambient through some edge path."""
        n = self.n_nodes
        if n == 0 or len(self.ambient_g) == 0:
            return False
        rows = np.concatenate([self.edge_a, self.ambient_nodes])
        cols = np.concatenate([self.edge_b, np.full(len(self.ambient_nodes), n)])
        graph = sp.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n + 1, n + 1))
        ncomp, _ = connected_components(graph, directed=False)
        return ncomp == 1

    def validate(self) -> None:
        if np.any(self.capacitance <= 0):
            raise ValueError("non-positive node capacitance")
        if np.any(self.edge_g <= 0) or np.any(self.ambient_g <= 0):
            raise ValueError("non-positive edge conductance")
        if not self.is_connected:
            raise ValueError("network is not connected to the ambient")
        for kind, sets in (("heater", self.heaters), ("sensor", self.sensors)):
            for name, nodes in sets.items():
                if len(nodes) == 0:
                    raise ValueError(f"empty {kind} set {name!r}")


def _axis_edges(breaks: np.ndarray, target, min_cell: float) -> np.ndarray:
    edges = [breaks[0]]
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        span = hi - lo
        if span < min_cell:
            raise ValueError(f"feature of size {span:.3e} m is below the minimum "
                             f"cell size {min_cell:.3e} m")
        size = target(lo, hi) if callable(target) else target
        n = max(1, math.ceil(span / size - 1e-9))
        edges.extend(np.linspace(lo, hi, n + 1)[1:])
    return np.asarray(edges)


def _interval_target(geom, ax, res, overrides):
    if not overrides:
        return res[ax]
    spans = [(r.box.lo[ax], r.box.hi[ax], overrides.get(r.tag, res)[ax])
             for r in geom.regions]

    def target(lo, hi):
        mid = 0.5 * (lo + hi)
        sizes = [s for a, b, s in spans if a < mid < b]
        return min(sizes) if sizes else res[ax]
    return target


def _merge_close(values: Sequence[float], tol: float) -> np.ndarray:
    vals = np.sort(np.asarray(values, dtype=float))
    keep = [vals[0]]
    for v in vals[1:]:
        if v - keep[-1] > tol:
            keep.append(v)
    return np.asarray(keep)


def _index_of(edges: np.ndarray, value: float, tol: float) -> int:
    i = int(np.argmin(np.abs(edges - value)))
    if abs(edges[i] - value) > tol:
        raise AssertionError("region boundary missing from grid")
    return i


def discretize(geom: DeviceGeometry,
               resolution: float | Sequence[float] = (2.5e-6, 2.0e-6, 0.5e-6),
               film_coefficient: float = 0.0,
               ambient_faces: Sequence[str] = ("z-",),
               min_feature: float | None = None,
               region_resolution: Mapping[str, float | Sequence[float]] | None = None,
               ) -> ThermalNetwork:
    """Mesh ``geom`` into a ThermalNetwork.

    Parameters
    ----------
    geom : DeviceGeometry
        Geometry to mesh. Cut planes of a reduced model stay adiabatic.
    resolution : float or (dx, dy, dz)
        Target cell size per axis in metres.
    film_coefficient : float
        Uniform heat-transfer coefficient W/(m^2 K) from exposed faces to
        the ambient. Zero (default) makes them adiabatic.
    ambient_faces : sequence of str
        Bounding-box faces held at ambient temperature, e.g. ``"z-"``.
    min_feature : float, optional
        Smallest accepted interval between region boundaries. Defaults to
        1e-3 of the smallest target cell size.
    region_resolution : mapping, optional
        Coarser (or finer) target cell sizes for regions with the given tag.
        Along each axis an interval between grid breakpoints uses the
        smallest target among the regions spanning it, so a coarse
        substrate only coarsens where nothing finer sits above it.
    """
    if not geom.regions:
        raise ValueError("empty geometry")
    res = np.broadcast_to(np.asarray(resolution, dtype=float), (3,))
    if np.any(res <= 0) or not np.all(np.isfinite(res)):
        raise ValueError(f"resolution must be positive, got {resolution!r}")
    if film_coefficient < 0:
        raise ValueError("film_coefficient must be >= 0")
    for face in ambient_faces:
        if face not in _FACES:
            raise ValueError(f"unknown face {face!r}")
    min_cell = float(min_feature) if min_feature is not None else 1e-3 * res.min()
    overrides = {}
    for tag, r in (region_resolution or {}).items():
        r = np.broadcast_to(np.asarray(r, dtype=float), (3,))
        if np.any(r <= 0):
            raise ValueError(f"resolution for {tag!r} must be positive")
        overrides[tag] = r

    scale = max(abs(c) for c in geom.bbox.lo + geom.bbox.hi)
    tol = 1e-12 * scale
    edges = []
    for ax in range(3):
        pts = [geom.bbox.lo[ax], geom.bbox.hi[ax]]
        for r in geom.regions:
            pts += [r.box.lo[ax], r.box.hi[ax]]
        for axis, c in geom.mirror_planes + geom.cut_planes:
            if axis == ax and geom.bbox.lo[ax] < c < geom.bbox.hi[ax]:
                pts.append(c)
        edges.append(_axis_edges(_merge_close(pts, tol),
                                 _interval_target(geom, ax, res, overrides),
                                 min_cell))
    shape = tuple(len(e) - 1 for e in edges)
    widths = [np.diff(e) for e in edges]
    centres = [0.5 * (e[1:] + e[:-1]) for e in edges]

    label = np.full(shape, -1, dtype=np.int64)
    for i, r in enumerate(geom.regions):
        sl = tuple(slice(_index_of(edges[ax], r.box.lo[ax], tol),
                         _index_of(edges[ax], r.box.hi[ax], tol)) for ax in range(3))
        if np.any(label[sl] >= 0):
            raise ValueError(f"region {r.tag!r} overlaps another region")
        label[sl] = i

    active = label >= 0
    n = int(active.sum())
    node_id = np.full(shape, -1, dtype=np.int64)
    node_id[active] = np.arange(n)

    k_reg = np.array([r.material.conductivity for r in geom.regions])
    c_reg = np.array([r.material.volumetric_heat_capacity for r in geom.regions])
    tags = tuple(dict.fromkeys(r.tag for r in geom.regions))
    tag_reg = np.array([tags.index(r.tag) for r in geom.regions])

    lab = label[active]
    hx, hy, hz = np.meshgrid(*widths, indexing="ij")
    vol = (hx * hy * hz)[active]
    kcell = np.zeros(shape)
    kcell[active] = k_reg[lab]
    cx, cy, cz = np.meshgrid(*centres, indexing="ij")
    positions = np.column_stack([cx[active], cy[active], cz[active]])
    h_all = (hx, hy, hz)

    ea, eb, eg = [], [], []
    for ax in range(3):
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[ax] = slice(0, -1)
        hi[ax] = slice(1, None)
        lo, hi = tuple(lo), tuple(hi)
        both = active[lo] & active[hi]
        h = h_all[ax]
        area = (hx * hy * hz / h)
        r1 = h[lo][both] / (2 * kcell[lo][both])
        r2 = h[hi][both] / (2 * kcell[hi][both])
        ea.append(node_id[lo][both])
        eb.append(node_id[hi][both])
        eg.append(area[lo][both] / (r1 + r2))
    edge_a = np.concatenate(ea)
    edge_b = np.concatenate(eb)
    edge_g = np.concatenate(eg)

    cut = {(ax, round(c / tol)) for ax, c in geom.cut_planes}
    an, ag = [], []
    for ax in range(3):
        h = h_all[ax]
        area = hx * hy * hz / h
        for side in (0, 1):
            face = f"{AXES[ax]}{'-+'[side]}"
            sl = [slice(None)] * 3
            sl[ax] = slice(0, 1) if side == 0 else slice(-1, None)
            sl = tuple(sl)
            plane = geom.bbox.lo[ax] if side == 0 else geom.bbox.hi[ax]
            on_cut = (ax, round(plane / tol)) in cut
            # faces on the bounding box
            if face in ambient_faces:
                m = active[sl]
                an.append(node_id[sl][m])
                ag.append(area[sl][m] / (h[sl][m] / (2 * kcell[sl][m])))
            elif film_coefficient > 0 and not on_cut:
                m = active[sl]
                an.append(node_id[sl][m])
                ag.append(_film(area[sl][m], h[sl][m], kcell[sl][m], film_coefficient))
        if film_coefficient > 0:
            # interior faces exposed to voids
            lo = [slice(None)] * 3
            hi = [slice(None)] * 3
            lo[ax] = slice(0, -1)
            hi[ax] = slice(1, None)
            lo, hi = tuple(lo), tuple(hi)
            for src, other in ((lo, hi), (hi, lo)):
                m = active[src] & ~active[other]
                an.append(node_id[src][m])
                ag.append(_film(area[src][m], h[src][m], kcell[src][m], film_coefficient))
    ambient_nodes = np.concatenate(an) if an else np.empty(0, dtype=np.int64)
    ambient_g = np.concatenate(ag) if ag else np.empty(0)

    node_tag = tag_reg[lab]
    net = ThermalNetwork(
        capacitance=c_reg[lab] * vol,
        positions=positions,
        volumes=vol,
        node_tag=node_tag,
        tag_names=tags,
        edge_a=edge_a, edge_b=edge_b, edge_g=edge_g,
        ambient_nodes=ambient_nodes, ambient_g=ambient_g,
        ambient_temperature=(geom.params.ambient_temperature if geom.params else 300.0),
        multiplicity=geom.multiplicity,
        cut_planes=geom.cut_planes,
        grid_shape=shape,
    )
    beams = {}
    for beam, tag in BEAMS.items():
        nodes = net.nodes_tagged(tag)
        if len(nodes):
            beams[beam] = nodes
    net = replace(net, heaters=dict(beams), sensors=dict(beams))
    if len(net.capacitance) and np.any(net.capacitance <= 0):
        raise ValueError("non-positive node capacitance")
    return net


def _film(area, h, k, coeff):
    return 1.0 / (1.0 / (coeff * area) + h / (2 * k * area))


def anchor_nodes(net: ThermalNetwork) -> np.ndarray:
    return np.concatenate([net.nodes_tagged(LOWER_ANCHOR), net.nodes_tagged(UPPER_ANCHOR)])


def scale_conductances(net: ThermalNetwork, k: float) -> ThermalNetwork:
    """Multiply every conductance by ``k``; capacitances are untouched."""
    if not (k > 0 and math.isfinite(k)):
        raise ValueError(f"scale factor must be > 0, got {k!r}")
    return replace(net, edge_g=net.edge_g * k, ambient_g=net.ambient_g * k)


def mesh_info(net: ThermalNetwork) -> dict:
    return {
        "nodes": net.n_nodes,
        "internal_edges": int(len(net.edge_g)),
        "ambient_edges": int(len(net.ambient_g)),
        "edges": net.n_edges,
        "total_capacitance_J_per_K": net.total_capacitance,
        "grid_shape": list(net.grid_shape) if net.grid_shape else None,
        "multiplicity": net.multiplicity,
        "heater_nodes": {k: int(len(v)) for k, v in net.heaters.items()},
        "connected": bool(net.is_connected),
    }


def network_from_edges(capacitance, edges, ambient_edges, sensors=None,
                       ambient_temperature: float = 300.0) -> ThermalNetwork:
    """Build a ThermalNetwork by hand.

    ``edges`` is a sequence of ``(a, b, g)`` and ``ambient_edges`` of
    ``(a, g)``. ``sensors`` maps a set name to node indices and is used for
    both heater and sensor sets.
    """
    cap = np.asarray(capacitance, dtype=float)
    n = len(cap)
    e = np.asarray(list(edges), dtype=float).reshape(-1, 3)
    ae = np.asarray(list(ambient_edges), dtype=float).reshape(-1, 2)
    sets = {k: np.asarray(v, dtype=np.int64) for k, v in (sensors or {}).items()}
    net = ThermalNetwork(
        capacitance=cap,
        positions=np.column_stack([np.arange(n, dtype=float), np.zeros(n), np.zeros(n)]),
        volumes=np.ones(n),
        node_tag=np.zeros(n, dtype=np.int64),
        tag_names=("node",),
        edge_a=e[:, 0].astype(np.int64), edge_b=e[:, 1].astype(np.int64), edge_g=e[:, 2],
        ambient_nodes=ae[:, 0].astype(np.int64), ambient_g=ae[:, 1],
        heaters=dict(sets), sensors=dict(sets),
        ambient_temperature=ambient_temperature,
    )
    net.validate()
    return net
