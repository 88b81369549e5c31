"""
Flow tables over a country network: heaviest links, per-origin destination
shares (absolute and population-normalised), and chord matrices.
"""
import logging
from dataclasses import dataclass

from django.core.exceptions import ValidationError

from geo.geodesy import great_circle_path

from .countries import UNASSIGNED

logger = logging.getLogger(__name__)

OTHER = 'Other'


@dataclass(frozen=True)
class Flow:
    src: str
    dst: str
    weight: int
    pct: float


def _assigned_edges(country_net):
    for src, dst, weight in country_net.weighted_edges():
        if src != UNASSIGNED and dst != UNASSIGNED:
            yield src, dst, weight


def assigned_edge_total(country_net):
    return sum(weight for _, _, weight in _assigned_edges(country_net))


def top_k_flows(country_net, k):
    """
    The ``k`` heaviest links, within-unit self-loops included, by weight
    descending then (src, dst). Percentages are of all assigned edges.
    """
    if k < 1:
        raise ValueError(f'k must be >= 1, got {k}')
    edges = sorted(_assigned_edges(country_net), key=lambda e: (-e[2], e[0], e[1]))
    total = sum(e[2] for e in edges)
    if not total:
        return []
    return [Flow(src, dst, weight, 100.0 * weight / total) for src, dst, weight in edges[:k]]


def within_share(country_net):
    """Percentage of assigned edges that start and end in the same unit."""
    total = 0
    inside = 0
    for src, dst, weight in _assigned_edges(country_net):
        total += weight
        if src == dst:
            inside += weight
    return 100.0 * inside / total if total else 0.0


def outflow_table(country_net, origin, populations=None, normalized=False):
    """
    Destination shares of the edges leaving ``origin`` (itself included).

    Raw mode: 100 * w(origin→c) / Σ w(origin→c).
    Normalised mode: v_c = w(origin→c) / pop_c, 100 * v_c / Σ v_c.
    """
    if origin not in country_net or origin == UNASSIGNED:
        raise ValidationError(f"Origin country '{origin}' is not in the network", code="unknown_origin")
    outgoing = [(dst, weight) for src, dst, weight in _assigned_edges(country_net) if src == origin]
    if normalized:
        populations = populations or {}
        missing = sorted(dst for dst, _ in outgoing if dst not in populations)
        if missing:
            raise ValidationError(
                f"No population for destination country '{missing[0]}'", code="missing_population",
            )
        values = [(dst, weight / populations[dst]) for dst, weight in outgoing]
    else:
        values = [(dst, float(weight)) for dst, weight in outgoing]
    total = sum(v for _, v in values)
    if not total:
        return []
    rows = [(dst, 100.0 * v / total) for dst, v in values]
    rows.sort(key=lambda row: (-row[1], row[0]))
    return rows


def bucket_other(rows, top_n):
    """Keep the first ``top_n`` rows and fold the rest into one ``Other`` row."""
    if top_n is None or len(rows) <= top_n:
        return list(rows)
    head = list(rows[:top_n])
    head.append((OTHER, sum(pct for _, pct in rows[top_n:])))
    return head


def chord_matrix(flows):
    """Square matrix (row = source, column = destination) over the codes in ``flows``."""
    codes = sorted({f.src for f in flows} | {f.dst for f in flows})
    index = {code: i for i, code in enumerate(codes)}
    matrix = [[0] * len(codes) for _ in codes]
    for flow in flows:
        matrix[index[flow.src]][index[flow.dst]] += flow.weight
    return {'codes': codes, 'matrix': matrix}


def cell_flow_lines(cell_net, grid, top=None, segments=16):
    """
    Great-circle LineString features between cell centroids for the heaviest
    inter-cell links, as a plain flow map export.
    """
    links = [(s, t, w) for s, t, w in cell_net.weighted_edges() if s != t]
    links.sort(key=lambda e: (-e[2], e[0], e[1]))
    if top is not None:
        links = links[:top]
    features = []
    for src, dst, weight in links:
        path = great_circle_path(grid.cell_centroid(src), grid.cell_centroid(dst), segments)
        features.append({
            'type': 'Feature',
            'properties': {'src': str(src), 'dst': str(dst), 'weight': weight},
            'geometry': {'type': 'LineString', 'coordinates': [[p.lon, p.lat] for p in path]},
        })
    return {'type': 'FeatureCollection', 'features': features}
