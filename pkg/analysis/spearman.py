"""Spearman rank correlation with average ranks for ties."""
import logging

import numpy as np
from scipy.stats import rankdata

from graph_core.centrality import COLUMNS

logger = logging.getLogger(__name__)

MIN_ROWS = 3


def _ranks(values, name):
    values = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise ValueError(f"Column '{name}' contains non-finite values")
    if np.all(values == values[0]):
        raise ValueError(f"Column '{name}' is constant; its rank correlation is undefined")
    return rankdata(values, method='average')


def spearman(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) != len(y):
        raise ValueError('x and y must have the same length')
    if len(x) < MIN_ROWS:
        raise ValueError(f'Spearman correlation needs at least {MIN_ROWS} values, got {len(x)}')
    rx, ry = _ranks(x, 'x'), _ranks(y, 'y')
    return float(np.clip(np.corrcoef(rx, ry)[0, 1], -1.0, 1.0))


def spearman_matrix(table, columns=COLUMNS):
    """
    Pairwise Spearman coefficients of the centrality columns: rank each
    column with tied values sharing their average rank, then Pearson.
    """
    if len(table) < MIN_ROWS:
        raise ValueError(f'Spearman matrix needs at least {MIN_ROWS} cells, got {len(table)}')
    ranks = np.vstack([_ranks(table.column(name), name) for name in columns])
    matrix = np.clip(np.corrcoef(ranks), -1.0, 1.0)
    matrix = (matrix + matrix.T) / 2.0
    np.fill_diagonal(matrix, 1.0)
    logger.debug('Spearman matrix over %d cells', len(table))
    return list(columns), matrix
