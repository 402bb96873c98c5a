"""Geographic mapping: fiber distance → coordinates, and GeoJSON export.

Interpolation is flat linear in latitude/longitude — segments are short
enough in practice that geodesic error is negligible, and exactness on the
waypoints themselves is what the fixtures rely on.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, Sequence

from .fiber import FiberRoute

if TYPE_CHECKING:  # pragma: no cover - import cycle guard, typing only
    from .service.alerts import Alert


class GeoError(ValueError):
    """Location not resolvable on the route."""


@dataclass(frozen=True)
class GeoPoint:
    latitude_deg: float
    longitude_deg: float

    def __post_init__(self) -> None:
        if not (-90.0 <= self.latitude_deg <= 90.0):
            raise GeoError("latitude out of range")
        if not (-180.0 <= self.longitude_deg <= 180.0):
            raise GeoError("longitude out of range")

    def to_json(self) -> dict[str, float]:
        return {"latitude_deg": self.latitude_deg, "longitude_deg": self.longitude_deg}

    @staticmethod
    def from_json(doc: dict[str, Any]) -> "GeoPoint":
        return GeoPoint(float(doc["latitude_deg"]), float(doc["longitude_deg"]))


def locate_on_route(route: FiberRoute, distance_m: float) -> GeoPoint:
    """Linear interpolation along the waypoint polyline by cumulative fiber
    distance; exact waypoint distances return that waypoint verbatim."""
    if not (0.0 <= distance_m <= route.length_m):
        raise GeoError(
            f"distance {distance_m} m outside route 0..{route.length_m} m"
        )
    dists = [w[2] for w in route.waypoints]
    i = bisect_right(dists, distance_m) - 1
    lat_i, lon_i, d_i = route.waypoints[i]
    if distance_m == d_i:
        return GeoPoint(lat_i, lon_i)
    lat_j, lon_j, d_j = route.waypoints[i + 1]
    frac = (distance_m - d_i) / (d_j - d_i)
    return GeoPoint(lat_i + frac * (lat_j - lat_i), lon_i + frac * (lon_j - lon_i))


def route_to_geojson(
    routes: Sequence[FiberRoute], alerts: Sequence["Alert"]
) -> tuple[dict[str, Any], list[str]]:
    """FeatureCollection of route LineStrings plus one Point per unresolved
    (non-resolved) alert; alerts whose location cannot be resolved are
    omitted and reported in the returned warnings list.

    GeoJSON coordinate order is [longitude, latitude].
    """
    by_id = {r.route_id: r for r in routes}
    features: list[dict[str, Any]] = []
    warnings: list[str] = []
    for route in routes:
        features.append(
            {
                "type": "Feature",
                "geometry": {
                    "type": "LineString",
                    "coordinates": [[lon, lat] for lat, lon, _ in route.waypoints],
                },
                "properties": {"route_id": route.route_id, "length_m": route.length_m},
            }
        )
    for alert in alerts:
        if alert.status == "resolved":
            continue
        point = alert.geo
        if point is None and alert.position_m is not None:
            route = by_id.get(alert.route_or_device)
            if route is not None:
                try:
                    point = locate_on_route(route, alert.position_m)
                except GeoError as exc:
                    warnings.append(f"alert {alert.alert_id}: {exc}")
                    continue
        if point is None:
            warnings.append(f"alert {alert.alert_id}: no resolvable location")
            continue
        features.append(
            {
                "type": "Feature",
                "geometry": {
                    "type": "Point",
                    "coordinates": [point.longitude_deg, point.latitude_deg],
                },
                "properties": {
                    "alert_id": alert.alert_id,
                    "severity": alert.severity,
                    "kind": alert.kind,
                    "position_m": alert.position_m,
                },
            }
        )
    return {"type": "FeatureCollection", "features": features}, warnings
