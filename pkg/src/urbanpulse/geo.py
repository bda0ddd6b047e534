"""Geodesic distances and the city coordinate frame.

All public angles are degrees, all distances metres. Points are stored
(latitude, longitude); helpers exist for sources that serialize the pair
the other way round.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import ConfigError

EARTH_RADIUS_M = 6_371_000.0

# WGS-84 ellipsoid.
WGS84_A = 6_378_137.0
WGS84_F = 1 / 298.257223563
WGS84_B = 6_356_752.314245


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        if not (-90.0 <= self.lat <= 90.0):
            raise ConfigError(f"latitude out of range: {self.lat}")
        if not (-180.0 <= self.lon <= 180.0):
            raise ConfigError(f"longitude out of range: {self.lon}")


def point_from_pair(pair: Sequence[float], order: str = "latlon") -> GeoPoint:
    """Build a GeoPoint from a two-element pair in the given axis order."""
    if len(pair) != 2:
        raise ConfigError(f"coordinate pair must have 2 elements, got {len(pair)}")
    a, b = float(pair[0]), float(pair[1])
    if order == "latlon":
        return GeoPoint(a, b)
    if order == "lonlat":
        return GeoPoint(b, a)
    raise ConfigError(f"unknown coordinate order {order!r}")


@dataclass(frozen=True)
class CityFrame:
    """A city's reference geometry: centre point plus bounding box corners."""

    centre: GeoPoint
    bbox_sw: GeoPoint
    bbox_ne: GeoPoint

    def __post_init__(self):
        if self.bbox_sw.lat >= self.bbox_ne.lat or self.bbox_sw.lon >= self.bbox_ne.lon:
            raise ConfigError("bbox_sw must lie strictly south-west of bbox_ne")
        if not self.contains(self.centre):
            raise ConfigError("city centre must lie inside the bounding box")

    def contains(self, p: GeoPoint) -> bool:
        return (self.bbox_sw.lat <= p.lat <= self.bbox_ne.lat
                and self.bbox_sw.lon <= p.lon <= self.bbox_ne.lon)

    @property
    def diagonal_m(self) -> float:
        return vincenty(self.bbox_sw, self.bbox_ne)


LONDON = CityFrame(
    centre=GeoPoint(51.5077, -0.1280),
    bbox_sw=GeoPoint(51.2868, -0.5103),
    bbox_ne=GeoPoint(51.6923, 0.3340),
)


def haversine(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in metres on a sphere of radius 6371 km."""
    phi1, phi2 = math.radians(a.lat), math.radians(b.lat)
    dphi = phi2 - phi1
    dlam = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(math.sqrt(h))


def vincenty_with_status(a: GeoPoint, b: GeoPoint, tol: float = 1e-12,
                         max_iter: int = 200) -> tuple[float, bool]:
    """Inverse geodesic on WGS-84.

    Returns (distance_m, converged). When the iteration fails to converge
    (nearly antipodal pairs), falls back to the spherical distance and
    reports converged=False.
    """
    if a == b:
        return 0.0, True

    L = math.radians(b.lon - a.lon)
    u1 = math.atan((1 - WGS84_F) * math.tan(math.radians(a.lat)))
    u2 = math.atan((1 - WGS84_F) * math.tan(math.radians(b.lat)))
    sin_u1, cos_u1 = math.sin(u1), math.cos(u1)
    sin_u2, cos_u2 = math.sin(u2), math.cos(u2)

    lam = L
    for _ in range(max_iter):
        sin_lam, cos_lam = math.sin(lam), math.cos(lam)
        sin_sigma = math.sqrt((cos_u2 * sin_lam) ** 2
                              + (cos_u1 * sin_u2 - sin_u1 * cos_u2 * cos_lam) ** 2)
        if sin_sigma == 0.0:
            return 0.0, True  # coincident after flattening
        cos_sigma = sin_u1 * sin_u2 + cos_u1 * cos_u2 * cos_lam
        sigma = math.atan2(sin_sigma, cos_sigma)
        sin_alpha = cos_u1 * cos_u2 * sin_lam / sin_sigma
        cos2_alpha = 1 - sin_alpha ** 2
        if cos2_alpha == 0.0:
            cos_2sm = 0.0  # equatorial line
        else:
            cos_2sm = cos_sigma - 2 * sin_u1 * sin_u2 / cos2_alpha
        c = WGS84_F / 16 * cos2_alpha * (4 + WGS84_F * (4 - 3 * cos2_alpha))
        lam_prev = lam
        lam = L + (1 - c) * WGS84_F * sin_alpha * (
            sigma + c * sin_sigma * (cos_2sm + c * cos_sigma * (-1 + 2 * cos_2sm ** 2)))
        if abs(lam - lam_prev) < tol:
            break
    else:
        return haversine(a, b), False

    u_sq = cos2_alpha * (WGS84_A ** 2 - WGS84_B ** 2) / WGS84_B ** 2
    big_a = 1 + u_sq / 16384 * (4096 + u_sq * (-768 + u_sq * (320 - 175 * u_sq)))
    big_b = u_sq / 1024 * (256 + u_sq * (-128 + u_sq * (74 - 47 * u_sq)))
    delta_sigma = big_b * sin_sigma * (
        cos_2sm + big_b / 4 * (
            cos_sigma * (-1 + 2 * cos_2sm ** 2)
            - big_b / 6 * cos_2sm * (-3 + 4 * sin_sigma ** 2) * (-3 + 4 * cos_2sm ** 2)))
    return WGS84_B * big_a * (sigma - delta_sigma), True


def vincenty(a: GeoPoint, b: GeoPoint, tol: float = 1e-12, max_iter: int = 200) -> float:
    return vincenty_with_status(a, b, tol=tol, max_iter=max_iter)[0]


@dataclass(frozen=True)
class CartesianPoint:
    x: float
    y: float
    z: float

    def distance_to(self, other: "CartesianPoint") -> float:
        return math.sqrt((self.x - other.x) ** 2
                         + (self.y - other.y) ** 2
                         + (self.z - other.z) ** 2)


def to_cartesian(p: GeoPoint, radius: float = EARTH_RADIUS_M) -> CartesianPoint:
    """Spherical-earth conversion to ECEF-style cartesian coordinates."""
    phi = math.radians(p.lat)
    lam = math.radians(p.lon)
    return CartesianPoint(
        radius * math.cos(phi) * math.cos(lam),
        radius * math.cos(phi) * math.sin(lam),
        radius * math.sin(phi),
    )
