"""Trip/network/cell parsing, demand aggregation, and instance files.

The pipeline mirrors the usual preparation of zoning inputs: raw
origin-destination trips are geo-fenced to a boundary polygon and stripped
of very short trips (default: under 500 m great-circle), surviving trips
are assigned to the cell with the nearest centroid, and counts accumulate
into a sparse ordered-pair demand matrix.

The instance file is a single versioned JSON document; demand is stored as
(i, j, value) triples and distances as a dense array, so a save/load round
trip is lossless.
"""

from __future__ import annotations

import hashlib
import json
import math
import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from shapely.geometry import mapping
from shapely.geometry.base import BaseGeometry

from .errors import ParseError, ValidationError
from .geo import great_circle_m, great_circle_matrix_m, boundary_from_geojson, point_in_boundary
from .model import Cell, CostParams, DemandMatrix, DistanceMatrix

INSTANCE_FORMAT = "mzp-instance"
INSTANCE_VERSION = 1
DEFAULT_MIN_TRIP_DISTANCE_M = 500.0


@dataclass(frozen=True)
class TripRecord:
    """One origin-destination trip; count defaults to a single trip."""

    origin: Tuple[float, float]
    destination: Tuple[float, float]
    count: float = 1.0

    def __post_init__(self):
        for name, (lat, lon) in (("origin", self.origin), ("destination", self.destination)):
            if not (math.isfinite(lat) and math.isfinite(lon)):
                raise ValidationError(f"trip {name} not finite: ({lat}, {lon})")
        if not (math.isfinite(self.count) and self.count > 0):
            raise ValidationError(f"trip count must be > 0, got {self.count}")


@dataclass
class RoadNetwork:
    """Directed road graph: node id -> (lat, lon), edges (u, v, travel_time_s)."""

    nodes: Dict[int, Tuple[float, float]]
    edges: List[Tuple[int, int, float]]

    def __post_init__(self):
        for nid, (lat, lon) in self.nodes.items():
            if not (math.isfinite(lat) and math.isfinite(lon)):
                raise ValidationError(f"node {nid}: coordinates not finite")
        for u, v, w in self.edges:
            if u not in self.nodes or v not in self.nodes:
                raise ValidationError(f"edge ({u},{v}) references unknown node")
            if not (math.isfinite(w) and w >= 0):
                raise ValidationError(f"edge ({u},{v}) weight {w} must be finite and >= 0")

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)


@dataclass
class Instance:
    """The full problem bundle handed to the optimizer."""

    cells: List[Cell]
    demand: DemandMatrix
    distances: DistanceMatrix
    params: CostParams
    boundary: Optional[BaseGeometry] = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.cells)
        ids = [c.id for c in self.cells]
        if ids != list(range(n)):
            raise ValidationError("cell ids must be contiguous 0..n-1 in order")
        if self.distances.n_cells != n:
            raise ValidationError(
                f"distance matrix is {self.distances.n_cells}x{self.distances.n_cells}"
                f" but instance has {n} cells"
            )
        if self.demand.n_cells != n:
            raise ValidationError(
                f"demand matrix indexed for {self.demand.n_cells} cells, instance has {n}"
            )

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Instance):
            return NotImplemented
        same_boundary = (
            (self.boundary is None and other.boundary is None)
            or (
                self.boundary is not None
                and other.boundary is not None
                and self.boundary.equals(other.boundary)
            )
        )
        return (
            self.cells == other.cells
            and self.demand == other.demand
            and np.array_equal(self.distances.values, other.distances.values)
            and self.distances.normalization_factor == other.distances.normalization_factor
            and self.params == other.params
            and same_boundary
            and self.provenance == other.provenance
        )


def filter_trips(
    trips: List[TripRecord],
    boundary: Optional[BaseGeometry] = None,
    min_distance_m: float = DEFAULT_MIN_TRIP_DISTANCE_M,
) -> List[TripRecord]:
    """Keep trips with both endpoints inside the boundary (when given) and
    an origin-destination great-circle distance of at least min_distance_m."""
    if min_distance_m < 0:
        raise ValidationError(f"min_distance_m must be >= 0, got {min_distance_m}")
    kept = []
    for t in trips:
        if boundary is not None:
            if not point_in_boundary(*t.origin, boundary):
                continue
            if not point_in_boundary(*t.destination, boundary):
                continue
        if great_circle_m(*t.origin, *t.destination) < min_distance_m:
            continue
        kept.append(t)
    return kept


def assign_to_cells(trips: List[TripRecord], cells: List[Cell]) -> DemandMatrix:
    """Accumulate trip counts onto nearest-centroid cells.

    Each endpoint goes to the cell whose centroid minimizes great-circle
    distance, ties broken by the lowest cell id; endpoints mapping to the
    same cell produce (i, i) entries, which the optimizer only uses when
    self pairs are enabled.
    """
    if not cells:
        raise ValidationError("assign_to_cells: no cells")
    entries: Dict[Tuple[int, int], float] = {}
    if not trips:
        return DemandMatrix(n_cells=len(cells), entries=entries)
    clats = np.array([c.centroid[0] for c in cells])
    clons = np.array([c.centroid[1] for c in cells])
    pts = np.array(
        [[t.origin[0], t.origin[1]] for t in trips]
        + [[t.destination[0], t.destination[1]] for t in trips]
    )
    dist = great_circle_matrix_m(pts[:, 0], pts[:, 1], clats, clons)
    nearest = np.argmin(dist, axis=1)  # argmin takes the first (lowest id) on ties
    k = len(trips)
    for t, o_cell, d_cell in zip(trips, nearest[:k], nearest[k:]):
        key = (int(o_cell), int(d_cell))
        entries[key] = entries.get(key, 0.0) + t.count
    return DemandMatrix(n_cells=len(cells), entries=entries)


# ---------------------------------------------------------------------------
# CSV inputs


def load_trips_csv(path) -> List[TripRecord]:
    """Read `origin_lat,origin_lon,dest_lat,dest_lon[,count]`."""
    required = ["origin_lat", "origin_lon", "dest_lat", "dest_lon"]
    trips = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        _check_header(reader.fieldnames, required, path, optional=["count"])
        for lineno, row in enumerate(reader, start=2):
            try:
                trips.append(
                    TripRecord(
                        origin=(float(row["origin_lat"]), float(row["origin_lon"])),
                        destination=(float(row["dest_lat"]), float(row["dest_lon"])),
                        count=float(row["count"]) if row.get("count") not in (None, "") else 1.0,
                    )
                )
            except (TypeError, ValueError, ValidationError) as exc:
                raise ParseError(f"{path}:{lineno}: bad trip record ({exc})") from exc
    return trips


def load_cells_csv(path) -> List[Cell]:
    """Read `id,lat,lon[,tag]`; ids must form 0..n-1."""
    cells = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        _check_header(reader.fieldnames, ["id", "lat", "lon"], path, optional=["tag"])
        for lineno, row in enumerate(reader, start=2):
            try:
                cells.append(
                    Cell(
                        id=int(row["id"]),
                        centroid=(float(row["lat"]), float(row["lon"])),
                        tag=(row.get("tag") or None),
                    )
                )
            except (TypeError, ValueError, ValidationError) as exc:
                raise ParseError(f"{path}:{lineno}: bad cell record ({exc})") from exc
    cells.sort(key=lambda c: c.id)
    if [c.id for c in cells] != list(range(len(cells))):
        raise ParseError(f"{path}: cell ids must form a contiguous range 0..n-1")
    return cells


def load_network_csv(nodes_path, edges_path) -> RoadNetwork:
    """Read `id,lat,lon` and `from,to,travel_time_s`."""
    nodes: Dict[int, Tuple[float, float]] = {}
    with open(nodes_path, newline="") as fh:
        reader = csv.DictReader(fh)
        _check_header(reader.fieldnames, ["id", "lat", "lon"], nodes_path)
        for lineno, row in enumerate(reader, start=2):
            try:
                nodes[int(row["id"])] = (float(row["lat"]), float(row["lon"]))
            except (TypeError, ValueError) as exc:
                raise ParseError(f"{nodes_path}:{lineno}: bad node record ({exc})") from exc
    edges: List[Tuple[int, int, float]] = []
    with open(edges_path, newline="") as fh:
        reader = csv.DictReader(fh)
        _check_header(reader.fieldnames, ["from", "to", "travel_time_s"], edges_path)
        for lineno, row in enumerate(reader, start=2):
            try:
                edges.append((int(row["from"]), int(row["to"]), float(row["travel_time_s"])))
            except (TypeError, ValueError) as exc:
                raise ParseError(f"{edges_path}:{lineno}: bad edge record ({exc})") from exc
    try:
        return RoadNetwork(nodes=nodes, edges=edges)
    except ValidationError as exc:
        raise ParseError(f"{edges_path}: {exc}") from exc


def _check_header(fields, required, path, optional=()):
    if fields is None:
        raise ParseError(f"{path}: empty file, expected header {','.join(required)}")
    missing = [f for f in required if f not in fields]
    if missing:
        raise ParseError(f"{path}: header missing field(s) {', '.join(missing)}")
    unknown = [f for f in fields if f not in required and f not in optional]
    if unknown:
        raise ParseError(f"{path}: unknown header field(s) {', '.join(unknown)}")


# ---------------------------------------------------------------------------
# Instance file


def instance_to_doc(inst: Instance) -> dict:
    return {
        "format": INSTANCE_FORMAT,
        "version": INSTANCE_VERSION,
        "cells": [
            {
                "id": c.id,
                "lat": c.centroid[0],
                "lon": c.centroid[1],
                "node": c.network_node,
                "tag": c.tag,
            }
            for c in inst.cells
        ],
        "demand": [[i, j, v] for (i, j), v in sorted(inst.demand.entries.items())],
        "distances": {
            "normalization_factor": inst.distances.normalization_factor,
            "values": inst.distances.values.tolist(),
        },
        "params": {
            "alpha": inst.params.alpha,
            "beta": inst.params.beta,
            "global_budget": inst.params.global_budget,
            "single_zone_budget": inst.params.single_zone_budget,
            "include_self_pairs": inst.params.include_self_pairs,
        },
        "boundary": mapping(inst.boundary) if inst.boundary is not None else None,
        "provenance": inst.provenance,
    }


def instance_from_doc(doc: dict) -> Instance:
    if not isinstance(doc, dict):
        raise ParseError("instance: top-level JSON must be an object")
    if doc.get("format") != INSTANCE_FORMAT:
        raise ParseError(f"instance: field 'format' must be {INSTANCE_FORMAT!r}")
    if doc.get("version") != INSTANCE_VERSION:
        raise ParseError(f"instance: unsupported 'version' {doc.get('version')!r}")
    for key in ("cells", "demand", "distances", "params"):
        if key not in doc:
            raise ParseError(f"instance: missing field '{key}'")
    try:
        cells = [
            Cell(
                id=int(c["id"]),
                centroid=(float(c["lat"]), float(c["lon"])),
                network_node=int(c.get("node", -1)),
                tag=c.get("tag"),
            )
            for c in doc["cells"]
        ]
    except (KeyError, TypeError, ValueError, ValidationError) as exc:
        raise ParseError(f"instance: field 'cells' invalid ({exc})") from exc
    try:
        entries = {(int(i), int(j)): float(v) for i, j, v in doc["demand"]}
        demand = DemandMatrix(n_cells=len(cells), entries=entries)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"instance: field 'demand' invalid ({exc})") from exc
    except ValidationError as exc:
        raise ValidationError(f"instance: field 'demand': {exc}") from exc
    d = doc["distances"]
    try:
        distances = DistanceMatrix(
            values=np.asarray(d["values"], dtype=float),
            normalization_factor=float(d["normalization_factor"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"instance: field 'distances' invalid ({exc})") from exc
    except ValidationError as exc:
        raise ValidationError(f"instance: field 'distances': {exc}") from exc
    p = doc["params"]
    try:
        params = CostParams(
            alpha=float(p["alpha"]),
            beta=float(p["beta"]),
            global_budget=float(p["global_budget"]),
            single_zone_budget=float(p["single_zone_budget"]),
            include_self_pairs=bool(p.get("include_self_pairs", False)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"instance: field 'params' invalid ({exc})") from exc
    boundary = None
    if doc.get("boundary") is not None:
        boundary = boundary_from_geojson(doc["boundary"])
    return Instance(
        cells=cells,
        demand=demand,
        distances=distances,
        params=params,
        boundary=boundary,
        provenance=doc.get("provenance", {}),
    )


def save_instance(inst: Instance, path) -> None:
    doc = instance_to_doc(inst)
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")


def load_instance(path) -> Instance:
    p = Path(path)
    if not p.exists():
        raise ParseError(f"instance file not found: {path}")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from exc
    return instance_from_doc(doc)


def instance_digest(inst: Instance) -> str:
    """Stable content hash of the serialized instance."""
    blob = json.dumps(instance_to_doc(inst), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()
