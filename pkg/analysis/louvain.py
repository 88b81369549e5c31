"""
Louvain community detection on the symmetrised cell network.

Directed weights are folded into an undirected adjacency ``A = W + Wᵀ`` and
the classic modularity

    Q = (1/2m) Σ_ij [A_ij − k_i k_j / 2m] δ(c_i, c_j)

is maximised greedily: nodes move to the neighbouring community with the
best gain until no move gains more than ``MIN_GAIN``, communities are then
collapsed into nodes, and the two phases repeat until a level stops
improving Q.
"""
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

MIN_GAIN = 1e-9


@dataclass
class CommunityAssignment:
    """Community id per key; ids run from 1 (largest community) upwards."""
    keys: list
    labels: np.ndarray

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if len(self.labels) != len(self.keys):
            raise ValueError('labels must align with keys')

    def __len__(self):
        return len(self.keys)

    @property
    def n_communities(self):
        return int(self.labels.max()) if len(self.labels) else 0

    def community_of(self, key):
        return int(self.labels[self.keys.index(key)])

    def as_dict(self):
        return dict(zip(self.keys, self.labels.tolist()))


def modularity(graph, labels):
    """Q of ``labels`` on the symmetrised form of a directed graph."""
    labels = np.asarray(labels)
    if len(labels) != graph.n_nodes:
        raise ValueError('labels must have one entry per node')
    two_m = 2.0 * graph.total_weight
    if two_m == 0:
        return 0.0
    _, community = np.unique(labels, return_inverse=True)
    src, dst, weight = graph.edge_arrays()
    weight = weight.astype(np.float64)
    strength = np.bincount(src, weights=weight, minlength=graph.n_nodes)
    strength += np.bincount(dst, weights=weight, minlength=graph.n_nodes)
    same = community[src] == community[dst]
    inside = 2.0 * weight[same].sum()
    totals = np.bincount(community, weights=strength)
    return float(inside / two_m - np.sum(totals ** 2) / two_m ** 2)


def _symmetrise(graph):
    adjacency = [defaultdict(float) for _ in range(graph.n_nodes)]
    for s, t, w in graph.edges():
        adjacency[s][t] += w
        adjacency[t][s] += w
    return [dict(row) for row in adjacency]


def _move_nodes(adjacency, strength, two_m, rng):
    """Local moving phase; returns a community index per node and whether anything moved."""
    n = len(adjacency)
    community = list(range(n))
    totals = list(strength)
    moved_any = False
    order = rng.permutation(n).tolist()
    while True:
        moved = False
        for node in order:
            own = community[node]
            k_i = strength[node]
            links = defaultdict(float)
            for other, w in adjacency[node].items():
                if other != node:
                    links[community[other]] += w
            totals[own] -= k_i

            best, best_gain = own, links.get(own, 0.0) - totals[own] * k_i / two_m
            for candidate in sorted(links):
                if candidate == own:
                    continue
                gain = links[candidate] - totals[candidate] * k_i / two_m
                if gain > best_gain + MIN_GAIN:
                    best, best_gain = candidate, gain

            totals[best] += k_i
            if best != own:
                community[node] = best
                moved = moved_any = True
        if not moved:
            break
    return community, moved_any


def _aggregate(adjacency, community):
    index = {c: i for i, c in enumerate(sorted(set(community)))}
    collapsed = [defaultdict(float) for _ in index]
    for node, row in enumerate(adjacency):
        ci = index[community[node]]
        for other, w in row.items():
            collapsed[ci][index[community[other]]] += w
    return [dict(row) for row in collapsed], [index[c] for c in community]


def _relabel_by_size(labels):
    """Map raw labels to 1..c by descending size, ties by smallest member index."""
    sizes = Counter(labels)
    first = {}
    for i, label in enumerate(labels):
        first.setdefault(label, i)
    ranked = sorted(sizes, key=lambda label: (-sizes[label], first[label]))
    new_id = {label: i + 1 for i, label in enumerate(ranked)}
    return np.array([new_id[label] for label in labels], dtype=np.int64)


def louvain(cell_net, seed=0):
    """Return ``(CommunityAssignment, modularity)``; fully determined by ``seed``."""
    graph = cell_net.graph
    n = graph.n_nodes
    if n == 0:
        raise ValueError('Cannot detect communities in an empty cell network')
    rng = np.random.default_rng(seed)
    adjacency = _symmetrise(graph)
    two_m = 2.0 * graph.total_weight
    membership = list(range(n))
    if two_m == 0:
        logger.warning('Cell network has no edges; every cell is its own community')
    else:
        quality = modularity(graph, membership)
        level = 0
        while True:
            strength = [sum(row.values()) for row in adjacency]
            community, moved = _move_nodes(adjacency, strength, two_m, rng)
            if not moved:
                break
            adjacency, level_of_node = _aggregate(adjacency, community)
            membership = [level_of_node[m] for m in membership]
            new_quality = modularity(graph, membership)
            level += 1
            logger.debug('Louvain level %d: %d communities, Q=%.6f', level, len(adjacency), new_quality)
            if new_quality - quality <= MIN_GAIN:
                break
            quality = new_quality

    labels = _relabel_by_size(membership)
    assignment = CommunityAssignment(keys=list(cell_net.keys), labels=labels)
    q = modularity(graph, labels)
    logger.info('Louvain found %d communities, Q=%.4f', assignment.n_communities, q)
    return assignment, q


def community_sizes(assignment):
    """``(community id, cell count)`` for every community, largest first."""
    counts = np.bincount(assignment.labels, minlength=assignment.n_communities + 1)
    return [(cid, int(counts[cid])) for cid in range(1, assignment.n_communities + 1)]


def community_country_distribution(assignment, country_of_cell):
    """
    Per community, the percentage of its cells lying in each country.
    ``country_of_cell`` maps each key to a country code.
    """
    grouped = defaultdict(Counter)
    for key, label in zip(assignment.keys, assignment.labels.tolist()):
        grouped[label][country_of_cell[key]] += 1
    distribution = {}
    for cid in sorted(grouped):
        counter = grouped[cid]
        total = sum(counter.values())
        rows = [(country, 100.0 * count / total) for country, count in counter.items()]
        rows.sort(key=lambda row: (-row[1], row[0]))
        distribution[cid] = rows
    return distribution
