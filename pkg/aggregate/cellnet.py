"""
Spatial aggregation of the user network.

Users falling into the same spatial unit collapse into one node whose
weight is the user count; follower relationships between two units add up
to the weight of the directed edge between them. Relationships inside one
unit become a self-loop on that unit.
"""
import logging
from collections import Counter
from dataclasses import dataclass
from typing import Optional

import numpy as np

from geo.hexgrid import CellId
from graph_core.graph import DirectedGraph

from .countries import UNASSIGNED

logger = logging.getLogger(__name__)

HEX = 'hex'
COUNTRY = 'country'


@dataclass
class CellNetwork:
    kind: str
    keys: list
    graph: DirectedGraph
    cell_area_km2: Optional[float] = None

    def __post_init__(self):
        if self.kind not in (HEX, COUNTRY):
            raise ValueError(f"Unknown cell network kind '{self.kind}'")
        if len(self.keys) != self.graph.n_nodes:
            raise ValueError('CellNetwork keys must align with the graph nodes')
        self._index = {key: i for i, key in enumerate(self.keys)}

    @property
    def n_cells(self):
        return self.graph.n_nodes

    def index_of(self, key):
        return self._index[key]

    def __contains__(self, key):
        return key in self._index

    def node_weight(self, key):
        return int(self.graph.node_weights[self._index[key]])

    def edge_weight(self, source, target):
        return self.graph.edge_weight(self._index[source], self._index[target])

    def weighted_edges(self):
        for s, t, w in self.graph.edges():
            yield self.keys[s], self.keys[t], w

    @property
    def total_users(self):
        return int(self.graph.node_weights.sum())

    @property
    def total_edges(self):
        return self.graph.total_weight

    def __eq__(self, other):
        if not isinstance(other, CellNetwork):
            return NotImplemented
        return (self.kind, self.keys, self.cell_area_km2) == (other.kind, other.keys, other.cell_area_km2) and self.graph == other.graph

    __hash__ = None


def _collapse(net, unit_of_user, kind, cell_area_km2=None):
    keys = sorted(set(unit_of_user))
    index = {key: i for i, key in enumerate(keys)}
    unit_index = np.fromiter((index[u] for u in unit_of_user), dtype=np.int64, count=len(unit_of_user))

    node_weights = np.bincount(unit_index, minlength=len(keys)).astype(np.int64)
    src, dst, _ = net.graph.edge_arrays()
    if len(src):
        pairs = unit_index[src] * len(keys) + unit_index[dst]
        packed, counts = np.unique(pairs, return_counts=True)
        cell_src, cell_dst = np.divmod(packed, len(keys))
    else:
        cell_src = cell_dst = counts = np.zeros(0, dtype=np.int64)
    graph = DirectedGraph(len(keys), cell_src, cell_dst, counts, node_weights=node_weights)
    cell_net = CellNetwork(kind=kind, keys=keys, graph=graph, cell_area_km2=cell_area_km2)
    logger.info(
        'Aggregated %d users / %d edges into %d %s units with %d links',
        net.n_users, net.n_edges, cell_net.n_cells, kind, graph.n_edges,
    )
    return cell_net


def cells_of_users(net, grid):
    lat, lon = net.lat_lon_arrays()
    rows, cols = grid.cells_for_arrays(lat, lon)
    return [CellId(int(r), int(c)) for r, c in zip(rows.tolist(), cols.tolist())]


def aggregate_to_grid(net, grid):
    """Collapse users onto hex cells; empty cells are absent."""
    return _collapse(net, cells_of_users(net, grid), HEX, grid.cell_area_km2)


def aggregate_to_countries(net, polygons):
    """
    Collapse users onto countries. Users in no polygon form the
    ``unassigned`` unit, which flow tables leave out.
    """
    lat, lon = net.lat_lon_arrays()
    countries = polygons.assign_arrays(lat, lon)
    missing = sum(1 for c in countries if c == UNASSIGNED)
    if missing:
        logger.warning('%d users fall outside every country polygon', missing)
    return _collapse(net, countries, COUNTRY)


def subnetwork_by_bbox(net, bbox):
    """Users inside ``bbox`` (inclusive) and the edges among them."""
    lat, lon = net.lat_lon_arrays()
    keep = bbox.contains_arrays(lat, lon)
    sub = net.subset(keep)
    logger.info('Bounding box %s keeps %d of %d users', bbox.as_text(), sub.n_users, net.n_users)
    return sub


def dominant_countries(net, grid, polygons):
    """
    Country of each occupied hex cell: the one holding most of the cell's
    users, smallest code on ties, ``unassigned`` when no user is covered.
    """
    cells = cells_of_users(net, grid)
    lat, lon = net.lat_lon_arrays()
    countries = polygons.assign_arrays(lat, lon)
    tallies = {}
    for cell, country in zip(cells, countries):
        tallies.setdefault(cell, Counter())[country] += 1
    result = {}
    for cell, counter in tallies.items():
        assigned = {code: count for code, count in counter.items() if code != UNASSIGNED}
        if not assigned:
            result[cell] = UNASSIGNED
            continue
        result[cell] = min(assigned, key=lambda code: (-assigned[code], code))
    return result
