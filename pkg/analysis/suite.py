import logging

import numpy as np

from graph_core.centrality import (
    CentralityTable, betweenness_centrality, closeness_centrality, degree_vector,
)

logger = logging.getLogger(__name__)


def centrality_suite(cell_net, weighted=False, threads=1):
    """
    In/out degree, closeness and betweenness of a cell network.

    Self-loops (relationships inside one cell) never lie on a shortest path
    and are dropped before any column is computed.
    """
    if cell_net.n_cells == 0:
        raise ValueError('Cannot compute centralities of an empty cell network')
    graph = cell_net.graph.without_self_loops()
    table = CentralityTable(
        keys=list(cell_net.keys),
        in_degree=degree_vector(graph, 'in', weighted),
        out_degree=degree_vector(graph, 'out', weighted),
        closeness=closeness_centrality(graph, threads=threads),
        betweenness=betweenness_centrality(graph, threads=threads),
        metadata={'degree_mode': 'weighted' if weighted else 'unweighted', 'self_loops': 'excluded'},
    )
    logger.info(
        'Centralities for %d cells: %.2f%% zero betweenness, %.2f%% zero out-degree',
        len(table), zero_share(table.betweenness), zero_share(table.out_degree),
    )
    return table


def zero_share(column):
    """Percentage of entries equal to zero."""
    column = np.asarray(column)
    if not len(column):
        return 0.0
    return 100.0 * np.count_nonzero(column == 0) / len(column)


DISTRIBUTION_PERCENTILES = (25, 50, 75, 90, 99)


def value_distribution(column):
    """Quantile summary of one centrality column, percentiles by linear interpolation."""
    column = np.asarray(column, dtype=np.float64)
    if not len(column):
        raise ValueError('Cannot summarise an empty column')
    summary = {'min': float(column.min()), 'mean': float(column.mean())}
    for q, value in zip(DISTRIBUTION_PERCENTILES, np.percentile(column, DISTRIBUTION_PERCENTILES).tolist()):
        summary[f'p{q}'] = float(value)
    summary['max'] = float(column.max())
    summary['zero_share'] = zero_share(column)
    return summary
