"""
Degree, closeness and betweenness centralities for directed graphs.

Shortest paths follow outgoing edges and treat every edge as unit length.
Per-source traversals are independent; they are grouped into fixed blocks
of sources so the float reduction order never depends on how many workers
ran them.
"""
import logging
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .graph import NodeNotFound

logger = logging.getLogger(__name__)

SOURCE_BLOCK = 64

DIRECTIONS = ('in', 'out')
COLUMNS = ('in_degree', 'out_degree', 'closeness', 'betweenness')


@dataclass
class CentralityTable:
    """Per-node centralities, aligned with ``keys``."""
    keys: list
    in_degree: np.ndarray
    out_degree: np.ndarray
    closeness: np.ndarray
    betweenness: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in COLUMNS:
            column = np.asarray(getattr(self, name), dtype=np.float64)
            if len(column) != len(self.keys):
                raise ValueError(f'Column {name} has {len(column)} values for {len(self.keys)} keys')
            setattr(self, name, column)

    def __len__(self):
        return len(self.keys)

    def column(self, name):
        if name not in COLUMNS:
            raise ValueError(f"Unknown centrality column '{name}', expected one of {', '.join(COLUMNS)}")
        return getattr(self, name)

    def columns(self):
        return {name: getattr(self, name) for name in COLUMNS}


def degree(graph, node, direction='out', weighted=False):
    """
    Out-degree counts edges leaving ``node`` (followers receiving its
    information), in-degree counts edges arriving. ``weighted`` sums the
    edge weights instead of counting edges.
    """
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be 'in' or 'out', got {direction!r}")
    if not graph.has_node(node):
        raise NodeNotFound(node)
    if direction == 'out':
        weights = graph.out_weights(node)
    else:
        weights = graph.in_weights(node)
    return int(weights.sum()) if weighted else len(weights)


def degree_vector(graph, direction='out', weighted=False):
    """Degree of every node at once, as float64."""
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be 'in' or 'out', got {direction!r}")
    src, dst, weight = graph.edge_arrays()
    ends = src if direction == 'out' else dst
    if weighted:
        return np.bincount(ends, weights=weight.astype(np.float64), minlength=graph.n_nodes)
    return np.bincount(ends, minlength=graph.n_nodes).astype(np.float64)


def reachable_count(graph, node):
    """Number of nodes reachable from ``node`` along outgoing edges, excluding itself."""
    graph.check_node(node)
    adjacency = graph.out_adjacency()
    seen = {node}
    queue = deque([node])
    while queue:
        v = queue.popleft()
        for w in adjacency[v]:
            if w not in seen:
                seen.add(w)
                queue.append(w)
    return len(seen) - 1


def _source_blocks(n_nodes):
    return [range(start, min(start + SOURCE_BLOCK, n_nodes)) for start in range(0, n_nodes, SOURCE_BLOCK)]


def _run_blocks(kernel, adjacency, threads):
    blocks = _source_blocks(len(adjacency))
    if threads <= 1 or len(blocks) <= 1:
        return [kernel(adjacency, block) for block in blocks]
    logger.debug('Running %d source blocks on %d workers', len(blocks), threads)
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(partial(kernel, adjacency), blocks))


def _closeness_block(adjacency, sources):
    n = len(adjacency)
    values = []
    for s in sources:
        dist = [-1] * n
        dist[s] = 0
        queue = deque([s])
        total = 0
        reached = 0
        while queue:
            v = queue.popleft()
            for w in adjacency[v]:
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    total += dist[w]
                    reached += 1
                    queue.append(w)
        if reached == 0 or n < 2:
            values.append(0.0)
        else:
            # r - 1 == reached, since r counts the source itself
            values.append((reached / (n - 1)) * (reached / total))
    return values


def closeness_centrality(graph, threads=1):
    """
    Reachable-scaled closeness: ((r-1)/(n-1)) * ((r-1)/sum of distances),
    r being the source plus every node it reaches. Nodes that reach
    nothing score 0.
    """
    if graph.n_nodes == 0:
        raise ValueError('Closeness is undefined on an empty graph')
    blocks = _run_blocks(_closeness_block, graph.out_adjacency(), threads)
    return np.asarray([value for block in blocks for value in block], dtype=np.float64)


def _betweenness_block(adjacency, sources):
    n = len(adjacency)
    accumulated = [0.0] * n
    for s in sources:
        stack = []
        predecessors = [[] for _ in range(n)]
        sigma = [0] * n
        sigma[s] = 1
        dist = [-1] * n
        dist[s] = 0
        queue = deque([s])
        while queue:
            v = queue.popleft()
            stack.append(v)
            for w in adjacency[v]:
                if dist[w] < 0:
                    queue.append(w)
                    dist[w] = dist[v] + 1
                if dist[w] == dist[v] + 1:
                    sigma[w] += sigma[v]
                    predecessors[w].append(v)

        # stack holds vertices in order of non-decreasing distance from s
        delta = [0.0] * n
        while stack:
            w = stack.pop()
            for v in predecessors[w]:
                delta[v] += (sigma[v] / sigma[w]) * (1.0 + delta[w])
            if w != s:
                accumulated[w] += delta[w]
    return accumulated


def betweenness_centrality(graph, threads=1):
    """
    Unnormalised directed betweenness: for each node v, the sum over ordered
    pairs (s, t), s != v != t, of the share of shortest s-t paths through v.
    """
    if graph.n_nodes == 0:
        raise ValueError('Betweenness is undefined on an empty graph')
    blocks = _run_blocks(_betweenness_block, graph.out_adjacency(), threads)
    result = np.zeros(graph.n_nodes, dtype=np.float64)
    for block in blocks:
        result += np.asarray(block, dtype=np.float64)
    return result
