"""
Location filtering and the user/edge/location accounting.

Users pass four filters in a fixed order: they must state a location,
the location must geocode, the hit must be finer than country level, and
the point must fall in a populated raster cell. An edge survives exactly
when both of its endpoints survive.
"""
import logging
from dataclasses import dataclass, field

from graph_core.graph import GraphBuilder

from .gazetteer import geocode, normalize_location
from .network import UserNetwork

logger = logging.getLogger(__name__)

STAGES = ('total', 'with_location', 'geocoded', 'precise', 'after_filters')


@dataclass
class StatRow:
    """Counts for one entity along the filter chain."""
    counts: dict = field(default_factory=dict)

    @property
    def base(self):
        return self.counts.get('total', 0)

    def percent(self, stage):
        base = self.base
        return 100.0 * self.counts[stage] / base if base else 0.0

    def as_dict(self):
        return {
            stage: {'count': self.counts[stage], 'percent': round(self.percent(stage), 2)}
            for stage in STAGES
        }


@dataclass
class IngestStats:
    users: StatRow
    edges: StatRow
    locations: StatRow

    @property
    def users_after_filters(self):
        return self.users.counts['after_filters']

    @property
    def edges_after_filters(self):
        return self.edges.counts['after_filters']

    def as_dict(self):
        return {
            'users': self.users.as_dict(),
            'edges': self.edges.as_dict(),
            'locations': self.locations.as_dict(),
        }


def _stage_reached(user, gazetteer, population):
    """Index into STAGES of the last filter this user passes."""
    if not user.location:
        return 0, None
    result = geocode(gazetteer, user.location)
    if result is None:
        return 1, None
    if not result.is_precise:
        return 2, result
    if not population.is_populated(result.point):
        return 3, result
    return 4, result


def filter_and_build(users, edges, gazetteer, population):
    """
    Apply the location filters and build the surviving user network.
    Rejections are counted, never raised.
    """
    reached = {}
    results = {}
    location_stage = {}
    for user in users:
        stage, result = _stage_reached(user, gazetteer, population)
        reached[user.user_id] = stage
        results[user.user_id] = result
        if user.location:
            key = normalize_location(user.location)
            location_stage[key] = stage

    user_counts = {name: sum(1 for s in reached.values() if s >= i) for i, name in enumerate(STAGES)}
    location_counts = {
        name: sum(1 for s in location_stage.values() if s >= max(i, 1))
        for i, name in enumerate(STAGES)
    }

    unknown = 0
    edge_counts = dict.fromkeys(STAGES, 0)
    for src, dst in edges:
        if src not in reached or dst not in reached:
            unknown += 1
            edge_counts['total'] += 1
            continue
        both = min(reached[src], reached[dst])
        for i, name in enumerate(STAGES):
            if both >= i:
                edge_counts[name] += 1
    if unknown:
        logger.warning('%d edges reference users missing from the user table; they never survive', unknown)

    survivors = [user for user in users if reached[user.user_id] == len(STAGES) - 1]
    index = {user.user_id: i for i, user in enumerate(survivors)}
    builder = GraphBuilder(len(survivors))
    for src, dst in edges:
        if src in index and dst in index:
            builder.add_edge(index[src], index[dst])
    network = UserNetwork(
        graph=builder.build(),
        user_ids=[user.user_id for user in survivors],
        locations=[user.location for user in survivors],
        points=[results[user.user_id].point for user in survivors],
        precisions=[results[user.user_id].precision for user in survivors],
    )

    stats = IngestStats(StatRow(user_counts), StatRow(edge_counts), StatRow(location_counts))
    logger.info(
        'Ingest kept %d of %d users (%.2f%%) and %d of %d edges (%.2f%%)',
        stats.users_after_filters, user_counts['total'], stats.users.percent('after_filters'),
        stats.edges_after_filters, edge_counts['total'], stats.edges.percent('after_filters'),
    )
    return network, stats
