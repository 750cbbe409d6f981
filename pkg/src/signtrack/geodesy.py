"""Coordinate conversions between camera-local metric offsets and WGS-84 GPS.

The detector regresses a horizontal/vertical offset in meters relative to the
camera; these helpers convert such offsets to latitude/longitude and back,
measure great-circle distances, and compute forward bearings.

Two Earth-radius constants coexist on purpose: the offset transform scales by
the equatorial radius (6378137 m) while distances use the mean radius
(6371000 m). Headings are compass degrees, clockwise, 0 = north.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

EQUATORIAL_RADIUS_M = 6378137.0
MEAN_EARTH_RADIUS_M = 6371000.0

# Sanity bound on local offsets; the transform is a tangent-plane approximation
# and loses meaning far from the camera.
MAX_OFFSET_M = 10000.0

# The longitude scale factor divides by cos(latitude); refuse to operate where
# that factor explodes.
MAX_TRANSFORM_LAT_DEG = 89.9

MIN_BEARING_SEPARATION_M = 0.01


@dataclass(frozen=True)
class GeoPoint:
    """A WGS-84 position in decimal degrees."""

    lat_deg: float
    lon_deg: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lat_deg) and math.isfinite(self.lon_deg)):
            raise ValueError("GeoPoint coordinates must be finite")
        if not -90.0 <= self.lat_deg <= 90.0:
            raise ValueError(f"latitude {self.lat_deg} out of [-90, 90]")
        if not -180.0 <= self.lon_deg <= 180.0:
            raise ValueError(f"longitude {self.lon_deg} out of [-180, 180]")


@dataclass(frozen=True)
class CameraPose:
    """Camera position plus compass heading (degrees clockwise from north)."""

    position: GeoPoint
    heading_deg: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.heading_deg):
            raise ValueError("heading must be finite")
        if not 0.0 <= self.heading_deg < 360.0:
            raise ValueError(f"heading {self.heading_deg} out of [0, 360)")


@dataclass(frozen=True)
class LocalOffset:
    """Metric offset in the image-local frame: x horizontal, y vertical."""

    x_m: float
    y_m: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x_m) and math.isfinite(self.y_m)):
            raise ValueError("offsets must be finite")
        if abs(self.x_m) > MAX_OFFSET_M or abs(self.y_m) > MAX_OFFSET_M:
            raise ValueError(f"offset ({self.x_m}, {self.y_m}) exceeds {MAX_OFFSET_M} m bound")


def wrap_heading_deg(heading_deg: float) -> float:
    """Normalize any finite angle into compass range [0, 360)."""
    h = math.fmod(heading_deg, 360.0)
    if h < 0.0:
        h += 360.0
    return 0.0 if h == 360.0 else h


def wrap_relative_deg(angle_deg: float) -> float:
    """Normalize an angular difference into [-180, 180)."""
    a = math.fmod(angle_deg + 180.0, 360.0)
    if a < 0.0:
        a += 360.0
    return a - 180.0


def _rotate(x: float, y: float, heading_rad: float) -> tuple[float, float]:
    # Reflection-style rotation used by the offset transform. The matrix
    # [[cos, sin], [sin, -cos]] has determinant -1 and is its own inverse,
    # which gps_to_offset relies on.
    c = math.cos(heading_rad)
    s = math.sin(heading_rad)
    return x * c + y * s, x * s - y * c


def _check_transform_latitude(lat_deg: float) -> None:
    if abs(lat_deg) >= MAX_TRANSFORM_LAT_DEG:
        raise ValueError(
            f"latitude {lat_deg} too close to the pole for the offset transform "
            f"(|lat| must be < {MAX_TRANSFORM_LAT_DEG})"
        )


def offset_to_gps(camera: CameraPose, offset: LocalOffset) -> GeoPoint:
    """Convert a camera-local metric offset to a GPS position.

    Rotates the image-frame offset onto the lat/lon axes using the camera
    heading, scales meters to radians by the equatorial radius (with the
    longitude axis corrected by cos(latitude)), and adds the result to the
    camera coordinates.
    """
    _check_transform_latitude(camera.position.lat_deg)
    theta = math.radians(camera.heading_deg)
    x_r, y_r = _rotate(offset.x_m, offset.y_m, theta)
    o_lat = x_r / EQUATORIAL_RADIUS_M
    o_lon = y_r / (EQUATORIAL_RADIUS_M * math.cos(math.pi * camera.position.lat_deg / 180.0))
    return GeoPoint(
        lat_deg=camera.position.lat_deg + o_lat * 180.0 / math.pi,
        lon_deg=camera.position.lon_deg + o_lon * 180.0 / math.pi,
    )


def gps_to_offset(camera: CameraPose, target: GeoPoint) -> LocalOffset:
    """Exact algebraic inverse of :func:`offset_to_gps`.

    De-scales the coordinate deltas back to rotated meters, then applies the
    same (self-inverse) rotation to recover the image-frame offset.
    """
    _check_transform_latitude(camera.position.lat_deg)
    theta = math.radians(camera.heading_deg)
    o_lat = math.radians(target.lat_deg - camera.position.lat_deg)
    o_lon = math.radians(target.lon_deg - camera.position.lon_deg)
    x_r = o_lat * EQUATORIAL_RADIUS_M
    y_r = o_lon * EQUATORIAL_RADIUS_M * math.cos(math.pi * camera.position.lat_deg / 180.0)
    x_o, y_o = _rotate(x_r, y_r, theta)
    return LocalOffset(x_m=x_o, y_m=y_o)


def haversine_m(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in meters (mean Earth radius 6371 km)."""
    phi1 = math.radians(a.lat_deg)
    phi2 = math.radians(b.lat_deg)
    dphi = math.radians(b.lat_deg - a.lat_deg)
    dlam = math.radians(b.lon_deg - a.lon_deg)
    h = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2.0) ** 2
    return 2.0 * MEAN_EARTH_RADIUS_M * math.atan2(math.sqrt(h), math.sqrt(1.0 - h))


def bearing_deg(origin: GeoPoint, target: GeoPoint) -> float:
    """Initial great-circle bearing from origin to target, degrees in [0, 360).

    Raises ValueError for (nearly) coincident points, where the bearing is
    undefined.
    """
    if haversine_m(origin, target) < MIN_BEARING_SEPARATION_M:
        raise ValueError("bearing undefined for coincident points")
    phi1 = math.radians(origin.lat_deg)
    phi2 = math.radians(target.lat_deg)
    dlam = math.radians(target.lon_deg - origin.lon_deg)
    y = math.sin(dlam) * math.cos(phi2)
    x = math.cos(phi1) * math.sin(phi2) - math.sin(phi1) * math.cos(phi2) * math.cos(dlam)
    return wrap_heading_deg(math.degrees(math.atan2(y, x)))


def local_east_north_m(origin: GeoPoint, p: GeoPoint) -> tuple[float, float]:
    """Equirectangular east/north offset of ``p`` from ``origin``, in meters.

    A plain tangent-plane approximation (mean Earth radius), adequate for the
    sub-kilometer spans this package works with.
    """
    _check_transform_latitude(origin.lat_deg)
    east = math.radians(p.lon_deg - origin.lon_deg) * MEAN_EARTH_RADIUS_M * math.cos(
        math.radians(origin.lat_deg)
    )
    north = math.radians(p.lat_deg - origin.lat_deg) * MEAN_EARTH_RADIUS_M
    return east, north


def from_local_east_north(origin: GeoPoint, east_m: float, north_m: float) -> GeoPoint:
    """Inverse of :func:`local_east_north_m`."""
    _check_transform_latitude(origin.lat_deg)
    lat = origin.lat_deg + math.degrees(north_m / MEAN_EARTH_RADIUS_M)
    lon = origin.lon_deg + math.degrees(
        east_m / (MEAN_EARTH_RADIUS_M * math.cos(math.radians(origin.lat_deg)))
    )
    return GeoPoint(lat_deg=lat, lon_deg=lon)


def move(origin: GeoPoint, heading_deg: float, distance_m: float) -> GeoPoint:
    """Point reached by travelling ``distance_m`` along a compass heading."""
    h = math.radians(heading_deg)
    return from_local_east_north(origin, distance_m * math.sin(h), distance_m * math.cos(h))
