"""
Gridded population counts used to reject implausible locations.

File layout::

    # cellsize=0.5
    lat,lon,count
    48.0,16.0,1843210

Each row names the south-west corner of a raster cell of ``cellsize``
degrees. Cells missing from the file, like points outside its coverage,
count as unpopulated.
"""
import csv
import logging
import math
import re

from django.core.exceptions import ValidationError

logger = logging.getLogger(__name__)

CELLSIZE_RE = re.compile(r"^#\s*cellsize\s*=\s*([0-9.eE+-]+)\s*$")


class PopulationRaster:
    def __init__(self, cell_size_deg, counts=None):
        cell_size_deg = float(cell_size_deg)
        if not cell_size_deg > 0:
            raise ValueError(f'Raster cell size must be positive, got {cell_size_deg}')
        self.cell_size_deg = cell_size_deg
        self._counts = {}
        for (lat, lon), count in (counts or {}).items():
            self.set(lat, lon, count)

    def index(self, lat, lon):
        return (
            math.floor((lat + 90.0) / self.cell_size_deg + 1e-9),
            math.floor((lon + 180.0) / self.cell_size_deg + 1e-9),
        )

    def set(self, lat, lon, count):
        if count < 0:
            raise ValueError(f'Population count must be >= 0, got {count}')
        self._counts[self.index(lat, lon)] = count

    def population_at(self, point):
        return self._counts.get(self.index(point.lat, point.lon), 0)

    def is_populated(self, point):
        return self.population_at(point) > 0

    def __len__(self):
        return len(self._counts)

    @classmethod
    def load(cls, path):
        with open(path, newline='', encoding='utf-8') as fin:
            first = fin.readline()
            match = CELLSIZE_RE.match(first.strip())
            if not match:
                raise ValidationError(f"{path}: line 1: expected '# cellsize=<degrees>'", code="bad_header")
            raster = cls(float(match.group(1)))
            reader = csv.reader(fin)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != ['lat', 'lon', 'count']:
                raise ValidationError(f'{path}: line 2: expected header lat,lon,count', code='bad_header')
            for line_no, row in enumerate(reader, start=3):
                if not row:
                    continue
                try:
                    lat, lon, count = float(row[0]), float(row[1]), float(row[2])
                    raster.set(lat, lon, count)
                except (IndexError, ValueError) as exc:
                    raise ValidationError(f'{path}: line {line_no}: malformed raster row {row!r}', code='malformed_row') from exc
        logger.info('Loaded %d populated raster cells from %s', len(raster), path)
        return raster

    def write(self, path):
        with open(path, 'w', newline='', encoding='utf-8') as fout:
            fout.write(f"# cellsize={self.cell_size_deg!r}\n")
            writer = csv.writer(fout, lineterminator="\n")
            writer.writerow(['lat', 'lon', 'count'])
            for (i, j) in sorted(self._counts):
                lat = i * self.cell_size_deg - 90.0
                lon = j * self.cell_size_deg - 180.0
                writer.writerow([repr(lat), repr(lon), repr(self._counts[(i, j)])])
