"""
Equal-area hexagonal grid.

Points are projected with the Lambert cylindrical equal-area projection
(x = R * lon, y = R * sin(lat)), which preserves area, and the projected
plane is tiled with flat-topped regular hexagons of the requested area.
Hexagons are the Voronoi cells of their centre lattice, so a point belongs
to the nearest centre. Cell shapes distort towards the poles; their area
does not.
"""
import math
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .geodesy import EARTH_RADIUS_KM, GeoPoint

SQRT3 = math.sqrt(3.0)


@dataclass(frozen=True, order=True)
class CellId:
    """Axial hexagon indices: ``col`` runs along x, ``row`` along the slanted axis."""
    row: int
    col: int

    def __str__(self):
        return f'{self.row}:{self.col}'

    @classmethod
    def parse(cls, text):
        row, col = str(text).split(':')
        return cls(int(row), int(col))


class SpatialGrid(Protocol):
    cell_area_km2: float

    def cell_for_point(self, point: GeoPoint) -> CellId: ...

    def cell_polygon(self, cell: CellId) -> list: ...

    def cell_centroid(self, cell: CellId) -> GeoPoint: ...


class HexGrid:
    """Flat-topped hexagons of ``cell_area_km2`` in the cylindrical equal-area plane."""

    def __init__(self, cell_area_km2, radius_km=EARTH_RADIUS_KM):
        cell_area_km2 = float(cell_area_km2)
        if not cell_area_km2 > 0 or not math.isfinite(cell_area_km2):
            raise ValueError(f'Cell area must be a positive number of km², got {cell_area_km2}')
        self.cell_area_km2 = cell_area_km2
        self.radius_km = float(radius_km)
        # area of a regular hexagon = (3 * sqrt(3) / 2) * edge²
        self.edge_km = math.sqrt(2.0 * cell_area_km2 / (3.0 * SQRT3))

    def __repr__(self):
        return f'HexGrid(cell_area_km2={self.cell_area_km2:g})'

    def __eq__(self, other):
        return isinstance(other, HexGrid) and (self.cell_area_km2, self.radius_km) == (other.cell_area_km2, other.radius_km)

    def __hash__(self):
        return hash((self.cell_area_km2, self.radius_km))

    # ---- projection ----
    def project(self, lat, lon):
        lat = np.radians(np.asarray(lat, dtype=np.float64))
        lon = np.radians(np.asarray(lon, dtype=np.float64))
        return self.radius_km * lon, self.radius_km * np.sin(lat)

    def unproject(self, x, y):
        x = np.asarray(x, dtype=np.float64)
        y = np.clip(np.asarray(y, dtype=np.float64) / self.radius_km, -1.0, 1.0)
        return np.degrees(np.arcsin(y)), np.degrees(x / self.radius_km)

    def center_xy(self, row, col):
        s = self.edge_km
        return s * 1.5 * col, s * SQRT3 * (row + col / 2.0)

    # ---- point assignment ----
    def cells_for_xy(self, x, y):
        """Vectorised nearest-centre lookup; returns ``(rows, cols)`` int64 arrays."""
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        y = np.atleast_1d(np.asarray(y, dtype=np.float64))
        s = self.edge_km
        qf = (2.0 / 3.0) * x / s
        rf = (-x / 3.0 + SQRT3 / 3.0 * y) / s
        q0 = np.floor(qf).astype(np.int64)
        r0 = np.floor(rf).astype(np.int64)

        # the point lies in the lattice rhombus spanned by these four centres;
        # listed in (row, col) order so argmin's first hit is the tie-break
        candidates = [(r0, q0), (r0, q0 + 1), (r0 + 1, q0), (r0 + 1, q0 + 1)]
        dist = np.empty((4, len(x)), dtype=np.float64)
        for i, (r, q) in enumerate(candidates):
            cx, cy = self.center_xy(r, q)
            dist[i] = (x - cx) ** 2 + (y - cy) ** 2
        best = np.argmin(dist, axis=0)
        rows = np.choose(best, [c[0] for c in candidates])
        cols = np.choose(best, [c[1] for c in candidates])
        return rows, cols

    def cells_for_arrays(self, lat, lon):
        lon = (np.asarray(lon, dtype=np.float64) + 180.0) % 360.0 - 180.0
        x, y = self.project(lat, lon)
        return self.cells_for_xy(x, y)

    def cell_for_point(self, point):
        rows, cols = self.cells_for_arrays([point.lat], [point.lon])
        return CellId(int(rows[0]), int(cols[0]))

    # ---- geometry ----
    def cell_vertices_xy(self, cell):
        cx, cy = self.center_xy(cell.row, cell.col)
        s = self.edge_km
        angles = np.radians(np.arange(6) * 60.0)
        return cx + s * np.cos(angles), cy + s * np.sin(angles)

    def cell_polygon(self, cell):
        """Closed ring (first vertex repeated) of the six unprojected vertices."""
        xs, ys = self.cell_vertices_xy(cell)
        lats, lons = self.unproject(xs, ys)
        ring = [GeoPoint(float(lat), float(lon)) for lat, lon in zip(lats, lons)]
        ring.append(ring[0])
        return ring

    def cell_centroid(self, cell):
        cx, cy = self.center_xy(cell.row, cell.col)
        lat, lon = self.unproject(cx, cy)
        return GeoPoint(float(lat), float(lon))

    def is_interior(self, cell):
        """True when the whole hexagon lies inside the projected map strip."""
        xs, ys = self.cell_vertices_xy(cell)
        half_width = math.pi * self.radius_km
        return bool(np.all(np.abs(ys) < self.radius_km) and np.all(xs >= -half_width) and np.all(xs < half_width))


def shoelace_area(xs, ys):
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    return 0.5 * abs(float(np.dot(xs, np.roll(ys, -1)) - np.dot(ys, np.roll(xs, -1))))
