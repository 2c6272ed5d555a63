"""Small geographic helpers: great-circle distances and point-in-polygon.

Coordinates are (lat, lon) in degrees everywhere in this package; GeoJSON
files use (lon, lat) order and the converters here take care of the swap.
"""

from __future__ import annotations

import math

import numpy as np
from shapely.geometry import Point, shape
from shapely.geometry.base import BaseGeometry

from .errors import ParseError

EARTH_RADIUS_M = 6_371_000.0


def great_circle_m(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Haversine distance in meters between two (lat, lon) points."""
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    a = math.sin(dp / 2.0) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(a)))


def great_circle_matrix_m(
    lats1: np.ndarray, lons1: np.ndarray, lats2: np.ndarray, lons2: np.ndarray
) -> np.ndarray:
    """Vectorized haversine: rows index the first point set, columns the second."""
    p1 = np.radians(np.asarray(lats1, dtype=float))[:, None]
    l1 = np.radians(np.asarray(lons1, dtype=float))[:, None]
    p2 = np.radians(np.asarray(lats2, dtype=float))[None, :]
    l2 = np.radians(np.asarray(lons2, dtype=float))[None, :]
    a = np.sin((p2 - p1) / 2.0) ** 2 + np.cos(p1) * np.cos(p2) * np.sin((l2 - l1) / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * np.arcsin(np.minimum(1.0, np.sqrt(a)))


def boundary_from_geojson(doc: dict) -> BaseGeometry:
    """Build a shapely geometry from a GeoJSON dict.

    Accepts a bare Polygon/MultiPolygon geometry, a Feature, or a
    FeatureCollection (first feature).  Raises ParseError for anything that
    does not resolve to a polygonal geometry.
    """
    if not isinstance(doc, dict) or "type" not in doc:
        raise ParseError("boundary: not a GeoJSON object (missing 'type')")
    obj = doc
    if obj["type"] == "FeatureCollection":
        feats = obj.get("features") or []
        if not feats:
            raise ParseError("boundary: FeatureCollection has no features")
        obj = feats[0]
    if obj["type"] == "Feature":
        obj = obj.get("geometry") or {}
    try:
        geom = shape(obj)
    except Exception as exc:
        raise ParseError(f"boundary: malformed geometry ({exc})") from exc
    if geom.geom_type not in ("Polygon", "MultiPolygon"):
        raise ParseError(f"boundary: expected Polygon/MultiPolygon, got {geom.geom_type}")
    if geom.is_empty:
        raise ParseError("boundary: empty geometry")
    return geom


def point_in_boundary(lat: float, lon: float, boundary: BaseGeometry) -> bool:
    """True if the point lies inside or on the boundary polygon."""
    # covers() includes the boundary line itself, which keeps the filter
    # deterministic for trips that end exactly on the fence.
    return bool(boundary.covers(Point(lon, lat)))
