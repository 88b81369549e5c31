"""
Three-level classes for two-variable choropleths: zero values are ``low``,
nonzero values split at their median into ``mid`` and ``high``.
"""
import logging
from collections import Counter
from dataclasses import dataclass

import numpy as np
from django.db import models

logger = logging.getLogger(__name__)


class BivariateLevel(models.TextChoices):
    LOW = 'low', 'Zero'
    MID = 'mid', 'Below median'
    HIGH = 'high', 'At or above median'


@dataclass
class BivariateClass:
    class_a: list
    class_b: list

    def __post_init__(self):
        if len(self.class_a) != len(self.class_b):
            raise ValueError('class_a and class_b must be aligned')

    def __len__(self):
        return len(self.class_a)

    def pairs(self):
        return list(zip(self.class_a, self.class_b))

    def counts(self):
        """Cells per (class_a, class_b) combination, all nine present."""
        counter = Counter(self.pairs())
        return {(a, b): counter.get((a, b), 0) for a in BivariateLevel for b in BivariateLevel}


def bivariate_levels(values):
    values = np.asarray(values, dtype=np.float64)
    nonzero = values[values != 0]
    if not len(nonzero):
        return [BivariateLevel.LOW] * len(values)
    median = np.median(nonzero)
    levels = []
    for value in values.tolist():
        if value == 0:
            levels.append(BivariateLevel.LOW)
        elif value >= median:
            levels.append(BivariateLevel.HIGH)
        else:
            levels.append(BivariateLevel.MID)
    return levels


def bivariate_bins(values_a, values_b):
    if len(values_a) != len(values_b):
        raise ValueError(f'Value vectors differ in length ({len(values_a)} vs {len(values_b)})')
    return BivariateClass(bivariate_levels(values_a), bivariate_levels(values_b))
