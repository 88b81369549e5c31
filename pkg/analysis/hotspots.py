"""
Getis-Ord Gi* hot spots over cell centroids.

Each cell's neighbourhood is itself plus its k nearest cells by great-circle
distance, all with weight 1. Cells tied with the k-th nearest distance are
all admitted, so a neighbourhood can exceed k + 1 cells.
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial

import numpy as np
from django.db import models
from esda import G_Local
from libpysal.weights import W

from geo.geodesy import haversine_km_arrays

logger = logging.getLogger(__name__)

ROW_BLOCK = 64

Z_90 = 1.645
Z_95 = 1.960
Z_99 = 2.576


class HotSpotClass(models.TextChoices):
    COLD99 = 'cold99', 'Cold spot, 99% confidence'
    COLD95 = 'cold95', 'Cold spot, 95% confidence'
    COLD90 = 'cold90', 'Cold spot, 90% confidence'
    NONSIG = 'nonsig', 'Not significant'
    HOT90 = 'hot90', 'Hot spot, 90% confidence'
    HOT95 = 'hot95', 'Hot spot, 95% confidence'
    HOT99 = 'hot99', 'Hot spot, 99% confidence'


def classify(z):
    magnitude = abs(z)
    if magnitude >= Z_99:
        level = '99'
    elif magnitude >= Z_95:
        level = '95'
    elif magnitude >= Z_90:
        level = '90'
    else:
        return HotSpotClass.NONSIG
    return HotSpotClass(('hot' if z > 0 else 'cold') + level)


@dataclass
class HotSpotResult:
    z: np.ndarray
    classes: list

    def __len__(self):
        return len(self.classes)

    def counts(self):
        return {choice: sum(1 for c in self.classes if c == choice) for choice in HotSpotClass}


def knn_neighbours(lat, lon, row, k):
    """Indices of the k cells nearest to ``row``, k-th distance ties included."""
    distances = haversine_km_arrays(lat[row], lon[row], lat, lon)
    distances[row] = np.inf
    kth = np.partition(distances, k - 1)[k - 1]
    return np.flatnonzero(distances <= kth)


def _knn_block(lat, lon, k, rows):
    return [knn_neighbours(lat, lon, row, k) for row in rows]


def knn_weights(centroids, k, threads=1):
    """
    Binary kNN weights as a libpysal ``W``. The self-neighbour is left out;
    ``G_Local`` adds it with ``star=True``.
    """
    n = len(centroids)
    lat = np.array([p.lat for p in centroids], dtype=np.float64)
    lon = np.array([p.lon for p in centroids], dtype=np.float64)
    blocks = [range(start, min(start + ROW_BLOCK, n)) for start in range(0, n, ROW_BLOCK)]
    kernel = partial(_knn_block, lat, lon, k)
    if threads <= 1 or len(blocks) <= 1:
        parts = [kernel(block) for block in blocks]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(kernel, blocks))
    neighbours = {}
    for block, rows in zip(blocks, parts):
        for row, cells in zip(block, rows):
            neighbours[row] = cells.tolist()
    return W(neighbours, id_order=list(range(n)), silence_warnings=True)


def getis_ord_gi_star(values, centroids, k, threads=1):
    """
    Gi* z-score per cell against the global mean and population standard
    deviation of ``values``. A constant field yields z = 0 everywhere.
    """
    values = np.asarray(values, dtype=np.float64)
    n = len(values)
    if len(centroids) != n:
        raise ValueError(f'{n} values but {len(centroids)} centroids')
    if k < 1 or k >= n:
        raise ValueError(f'k must satisfy 1 <= k < n, got k={k} for n={n}')
    if not np.all(np.isfinite(values)):
        raise ValueError('Hot spot values must be finite')

    if np.ptp(values) == 0:
        logger.warning('Constant value field; every Gi* z-score is 0')
        return HotSpotResult(np.zeros(n), [HotSpotClass.NONSIG] * n)

    weights = knn_weights(centroids, k, threads=threads)
    # G_Local scales its moments by the mean; z is shift invariant, so lift the field above zero
    lifted = values - values.min() + 1.0
    z = np.asarray(G_Local(lifted, weights, transform='B', permutations=0, star=True).Zs, dtype=np.float64)
    result = HotSpotResult(z, [classify(value) for value in z.tolist()])
    logger.info('Gi* over %d cells with k=%d: %s', n, k, {c.value: v for c, v in result.counts().items() if v})
    return result
