"""
Directed weighted graph storage shared by the user network and the
aggregated cell networks.

Nodes are dense integers ``0..n-1``. Each ordered (source, target) pair is
stored once; repeated insertions accumulate into the edge weight. Adjacency
is kept in CSR form in both directions with neighbours sorted by index, so
every traversal visits nodes in the same order.
"""
import logging

import numpy as np

logger = logging.getLogger(__name__)


class NodeNotFound(KeyError):
    """Raised when an operation names a node the graph does not contain."""


class GraphBuilder:
    """Mutable accumulator; ``build()`` freezes it into a DirectedGraph."""

    def __init__(self, n_nodes=0):
        self._node_weights = [1] * n_nodes
        self._edges = {}

    @property
    def n_nodes(self):
        return len(self._node_weights)

    def add_node(self, weight=1):
        self._node_weights.append(int(weight))
        return len(self._node_weights) - 1

    def set_node_weight(self, node, weight):
        self._check(node)
        self._node_weights[node] = int(weight)

    def add_edge(self, source, target, weight=1):
        self._check(source)
        self._check(target)
        weight = int(weight)
        if weight < 1:
            raise ValueError(f'Edge weight must be a positive integer, got {weight}')
        key = (source, target)
        self._edges[key] = self._edges.get(key, 0) + weight

    def _check(self, node):
        if not 0 <= node < len(self._node_weights):
            raise NodeNotFound(node)

    def build(self):
        if self._edges:
            pairs = sorted(self._edges)
            src = np.fromiter((p[0] for p in pairs), dtype=np.int64, count=len(pairs))
            dst = np.fromiter((p[1] for p in pairs), dtype=np.int64, count=len(pairs))
            weight = np.fromiter((self._edges[p] for p in pairs), dtype=np.int64, count=len(pairs))
        else:
            src = dst = weight = np.zeros(0, dtype=np.int64)
        return DirectedGraph(
            len(self._node_weights), src, dst, weight,
            node_weights=np.asarray(self._node_weights, dtype=np.int64),
        )


def _csr(n_nodes, keys, neighbours, weights):
    order = np.lexsort((neighbours, keys))
    counts = np.bincount(keys, minlength=n_nodes)
    ptr = np.zeros(n_nodes + 1, dtype=np.int64)
    np.cumsum(counts, out=ptr[1:])
    return ptr, neighbours[order], weights[order]


class DirectedGraph:
    """Immutable directed graph with positive integer edge weights."""

    def __init__(self, n_nodes, src, dst, weight, node_weights=None):
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        weight = np.asarray(weight, dtype=np.int64)
        if not (len(src) == len(dst) == len(weight)):
            raise ValueError('Edge arrays must have equal length')
        if len(src) and (src.min() < 0 or dst.min() < 0 or src.max() >= n_nodes or dst.max() >= n_nodes):
            raise NodeNotFound('edge endpoint outside the registered nodes')
        if len(weight) and weight.min() < 1:
            raise ValueError('Edge weights must be positive integers')
        if len(src):
            packed = src * max(n_nodes, 1) + dst
            if len(np.unique(packed)) != len(packed):
                raise ValueError('Duplicate (source, target) pair; accumulate multiplicity into the weight')

        self.n_nodes = int(n_nodes)
        if node_weights is None:
            node_weights = np.ones(self.n_nodes, dtype=np.int64)
        self.node_weights = np.asarray(node_weights, dtype=np.int64)
        if len(self.node_weights) != self.n_nodes:
            raise ValueError('node_weights length does not match the node count')

        self.out_ptr, self.out_idx, self.out_weight = _csr(self.n_nodes, src, dst, weight)
        self.in_ptr, self.in_idx, self.in_weight = _csr(self.n_nodes, dst, src, weight)

    @classmethod
    def from_edges(cls, n_nodes, edges, node_weights=None):
        """Build from ``(source, target[, weight])`` tuples, merging repeats."""
        builder = GraphBuilder(n_nodes)
        if node_weights is not None:
            for node, weight in enumerate(node_weights):
                builder.set_node_weight(node, weight)
        for edge in edges:
            builder.add_edge(*edge)
        return builder.build()

    @property
    def n_edges(self):
        return len(self.out_idx)

    @property
    def total_weight(self):
        return int(self.out_weight.sum())

    def has_node(self, node):
        return 0 <= node < self.n_nodes

    def check_node(self, node):
        if not self.has_node(node):
            raise NodeNotFound(node)

    def successors(self, node):
        self.check_node(node)
        return self.out_idx[self.out_ptr[node]:self.out_ptr[node + 1]]

    def predecessors(self, node):
        self.check_node(node)
        return self.in_idx[self.in_ptr[node]:self.in_ptr[node + 1]]

    def out_weights(self, node):
        self.check_node(node)
        return self.out_weight[self.out_ptr[node]:self.out_ptr[node + 1]]

    def in_weights(self, node):
        self.check_node(node)
        return self.in_weight[self.in_ptr[node]:self.in_ptr[node + 1]]

    def edge_arrays(self):
        """Return ``(src, dst, weight)`` sorted by (src, dst)."""
        src = np.repeat(np.arange(self.n_nodes, dtype=np.int64), np.diff(self.out_ptr))
        return src, self.out_idx.copy(), self.out_weight.copy()

    def edges(self):
        src, dst, weight = self.edge_arrays()
        for s, t, w in zip(src.tolist(), dst.tolist(), weight.tolist()):
            yield s, t, w

    def edge_weight(self, source, target):
        targets = self.successors(source)
        pos = np.searchsorted(targets, target)
        if pos < len(targets) and targets[pos] == target:
            return int(self.out_weights(source)[pos])
        return 0

    def out_adjacency(self):
        """Plain-list successor lists, the form the traversal kernels use."""
        return [
            self.out_idx[self.out_ptr[v]:self.out_ptr[v + 1]].tolist()
            for v in range(self.n_nodes)
        ]

    def without_self_loops(self):
        src, dst, weight = self.edge_arrays()
        keep = src != dst
        return DirectedGraph(self.n_nodes, src[keep], dst[keep], weight[keep], self.node_weights.copy())

    def self_loop_weights(self):
        src, dst, weight = self.edge_arrays()
        loops = np.zeros(self.n_nodes, dtype=np.int64)
        mask = src == dst
        np.add.at(loops, src[mask], weight[mask])
        return loops

    def __eq__(self, other):
        if not isinstance(other, DirectedGraph):
            return NotImplemented
        mine, theirs = self.edge_arrays(), other.edge_arrays()
        return (
            self.n_nodes == other.n_nodes
            and np.array_equal(self.node_weights, other.node_weights)
            and all(np.array_equal(a, b) for a, b in zip(mine, theirs))
        )

    __hash__ = None

    def __repr__(self):
        return f'DirectedGraph(n_nodes={self.n_nodes}, n_edges={self.n_edges})'
