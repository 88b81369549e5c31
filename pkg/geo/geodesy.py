"""
Spherical geodesy helpers: points, bounding boxes, haversine distances.
"""
import math
from dataclasses import dataclass

import numpy as np

# Earth's radius in kilometers
EARTH_RADIUS_KM = 6371.0


def normalize_lon(lon):
    """Wrap a longitude into [-180, 180)."""
    wrapped = math.fmod(lon + 180.0, 360.0)
    if wrapped < 0:
        wrapped += 360.0
    return wrapped - 180.0


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        lat, lon = float(self.lat), float(self.lon)
        if not (math.isfinite(lat) and math.isfinite(lon)):
            raise ValueError(f'Coordinates must be finite, got ({lat}, {lon})')
        if not -90.0 <= lat <= 90.0:
            raise ValueError(f'Latitude {lat} outside [-90, 90]')
        object.__setattr__(self, 'lat', lat)
        object.__setattr__(self, 'lon', normalize_lon(lon))


@dataclass(frozen=True)
class BoundingBox:
    min_lat: float
    max_lat: float
    min_lon: float
    max_lon: float

    def __post_init__(self):
        if self.min_lat > self.max_lat or self.min_lon > self.max_lon:
            raise ValueError(f'Bounding box minimum exceeds maximum: {self}')

    @classmethod
    def parse(cls, text):
        """Parse ``'min_lat,max_lat,min_lon,max_lon'``."""
        parts = [part.strip() for part in str(text).split(',')]
        if len(parts) != 4:
            raise ValueError(f'Expected min_lat,max_lat,min_lon,max_lon, got {text!r}')
        return cls(*(float(part) for part in parts))

    def contains(self, point):
        return self.min_lat <= point.lat <= self.max_lat and self.min_lon <= point.lon <= self.max_lon

    def contains_arrays(self, lat, lon):
        lat = np.asarray(lat)
        lon = np.asarray(lon)
        return (lat >= self.min_lat) & (lat <= self.max_lat) & (lon >= self.min_lon) & (lon <= self.max_lon)

    def as_text(self):
        return f'{self.min_lat:g},{self.max_lat:g},{self.min_lon:g},{self.max_lon:g}'


def haversine_km(p, q):
    """Great-circle distance between two GeoPoints in kilometers."""
    lat1, lon1 = math.radians(p.lat), math.radians(p.lon)
    lat2, lon2 = math.radians(q.lat), math.radians(q.lon)

    dlat = lat2 - lat1
    dlon = lon2 - lon1

    a = math.sin(dlat / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2) ** 2
    c = 2 * math.asin(math.sqrt(min(1.0, a)))
    return EARTH_RADIUS_KM * c


def haversine_km_arrays(lat1, lon1, lat2, lon2):
    """Vectorised haversine over broadcastable degree arrays."""
    lat1, lon1, lat2, lon2 = (np.radians(np.asarray(v, dtype=np.float64)) for v in (lat1, lon1, lat2, lon2))
    a = np.sin((lat2 - lat1) / 2) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2) ** 2
    return EARTH_RADIUS_KM * 2 * np.arcsin(np.sqrt(np.minimum(1.0, a)))


def destination_point(origin, bearing_deg, distance_km):
    """Point reached from ``origin`` along ``bearing_deg`` after ``distance_km``."""
    lat1 = math.radians(origin.lat)
    lon1 = math.radians(origin.lon)
    bearing = math.radians(bearing_deg)
    delta = distance_km / EARTH_RADIUS_KM

    lat2 = math.asin(math.sin(lat1) * math.cos(delta) + math.cos(lat1) * math.sin(delta) * math.cos(bearing))
    lon2 = lon1 + math.atan2(
        math.sin(bearing) * math.sin(delta) * math.cos(lat1),
        math.cos(delta) - math.sin(lat1) * math.sin(lat2),
    )
    return GeoPoint(math.degrees(lat2), math.degrees(lon2))


def great_circle_path(p, q, segments=16):
    """Points along the great circle from p to q, both ends included."""
    if segments < 1:
        raise ValueError('segments must be >= 1')
    lat1, lon1 = math.radians(p.lat), math.radians(p.lon)
    lat2, lon2 = math.radians(q.lat), math.radians(q.lon)
    d = haversine_km(p, q) / EARTH_RADIUS_KM
    if d == 0 or math.sin(d) < 1e-12:
        return [p, q]
    points = []
    for step in range(segments + 1):
        f = step / segments
        a = math.sin((1 - f) * d) / math.sin(d)
        b = math.sin(f * d) / math.sin(d)
        x = a * math.cos(lat1) * math.cos(lon1) + b * math.cos(lat2) * math.cos(lon2)
        y = a * math.cos(lat1) * math.sin(lon1) + b * math.cos(lat2) * math.sin(lon2)
        z = a * math.sin(lat1) + b * math.sin(lat2)
        lat = math.atan2(z, math.sqrt(x * x + y * y))
        points.append(GeoPoint(math.degrees(lat), math.degrees(math.atan2(y, x))))
    return points
