"""Freedman-Diaconis histogram of edge lengths."""
import math
from dataclasses import dataclass

import numpy as np


@dataclass
class Histogram:
    bin_width: float
    edges: np.ndarray
    shares: np.ndarray

    @property
    def peak_center(self):
        """Midpoint of the most populated bin (first one on ties)."""
        i = int(np.argmax(self.shares))
        return float((self.edges[i] + self.edges[i + 1]) / 2.0)


def fd_bin_width(samples):
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size < 2:
        raise ValueError('Freedman-Diaconis needs at least two samples')
    if not np.all(np.isfinite(samples)):
        raise ValueError('Samples must be finite')
    if np.all(samples == samples[0]):
        raise ValueError('All samples are equal; the bin width is undefined')
    q75, q25 = np.percentile(samples, [75, 25])
    iqr = q75 - q25
    if iqr <= 0:
        raise ValueError('Interquartile range is zero; the bin width is undefined')
    return 2.0 * iqr * samples.size ** (-1.0 / 3.0)


def fd_histogram(samples):
    """
    Bin width h = 2 * IQR * n^(-1/3), quartiles by linear interpolation.
    Bins start at the smallest sample; shares sum to 1.
    """
    samples = np.asarray(samples, dtype=np.float64)
    width = fd_bin_width(samples)
    low, high = float(samples.min()), float(samples.max())
    n_bins = max(1, math.ceil((high - low) / width))
    edges = low + width * np.arange(n_bins + 1, dtype=np.float64)
    if edges[-1] < high:
        edges = np.append(edges, edges[-1] + width)
    counts, _ = np.histogram(samples, bins=edges)
    return Histogram(bin_width=width, edges=edges, shares=counts / samples.size)
