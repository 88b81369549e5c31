"""The geocoded user network and its on-disk form."""
import csv
import logging
import os
from dataclasses import dataclass

import numpy as np
from django.core.exceptions import ValidationError

from geo.geodesy import GeoPoint, haversine_km_arrays
from graph_core.graph import DirectedGraph, GraphBuilder

from .gazetteer import Precision
from .records import RawUserRecord

logger = logging.getLogger(__name__)

USERS_FILE = 'users_geocoded.csv'
EDGES_FILE = 'edges_geocoded.csv'


@dataclass
class UserNetwork:
    """Directed follower graph of geocoded users; edges point followed → follower."""
    graph: DirectedGraph
    user_ids: list
    locations: list
    points: list
    precisions: list

    def __post_init__(self):
        n = self.graph.n_nodes
        if not (len(self.user_ids) == len(self.locations) == len(self.points) == len(self.precisions) == n):
            raise ValueError('UserNetwork attribute lists must align with the graph nodes')

    @property
    def n_users(self):
        return self.graph.n_nodes

    @property
    def n_edges(self):
        return self.graph.n_edges

    def lat_lon_arrays(self):
        lat = np.fromiter((p.lat for p in self.points), dtype=np.float64, count=len(self.points))
        lon = np.fromiter((p.lon for p in self.points), dtype=np.float64, count=len(self.points))
        return lat, lon

    def edge_id_pairs(self):
        for s, t, _ in self.graph.edges():
            yield self.user_ids[s], self.user_ids[t]

    def edge_lengths_km(self):
        """Great-circle length of every follower relationship."""
        lat, lon = self.lat_lon_arrays()
        src, dst, _ = self.graph.edge_arrays()
        return haversine_km_arrays(lat[src], lon[src], lat[dst], lon[dst])

    def to_records(self):
        """Users and edges that rebuild this network through ingest."""
        users = [RawUserRecord(uid, loc) for uid, loc in zip(self.user_ids, self.locations)]
        return users, list(self.edge_id_pairs())

    def subset(self, keep):
        """Network induced by the users where ``keep`` is true."""
        keep = np.asarray(keep, dtype=bool)
        new_index = np.full(self.n_users, -1, dtype=np.int64)
        kept = np.flatnonzero(keep)
        new_index[kept] = np.arange(len(kept))
        src, dst, weight = self.graph.edge_arrays()
        mask = keep[src] & keep[dst] if len(src) else np.zeros(0, dtype=bool)
        graph = DirectedGraph(len(kept), new_index[src[mask]], new_index[dst[mask]], weight[mask])
        pick = kept.tolist()
        return UserNetwork(
            graph=graph,
            user_ids=[self.user_ids[i] for i in pick],
            locations=[self.locations[i] for i in pick],
            points=[self.points[i] for i in pick],
            precisions=[self.precisions[i] for i in pick],
        )

    @classmethod
    def empty(cls):
        return cls(GraphBuilder().build(), [], [], [], [])


def write_user_network(net, directory):
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, USERS_FILE), 'w', newline='', encoding='utf-8') as fout:
        writer = csv.writer(fout, lineterminator="\n")
        writer.writerow(['user_id', 'location', 'lat', 'lon', 'precision'])
        for uid, loc, point, precision in zip(net.user_ids, net.locations, net.points, net.precisions):
            writer.writerow([uid, loc, repr(point.lat), repr(point.lon), precision.value])
    with open(os.path.join(directory, EDGES_FILE), 'w', newline='', encoding='utf-8') as fout:
        writer = csv.writer(fout, lineterminator="\n")
        writer.writerow(['src', 'dst'])
        writer.writerows(net.edge_id_pairs())


def read_user_network(directory):
    users_path = os.path.join(directory, USERS_FILE)
    edges_path = os.path.join(directory, EDGES_FILE)
    for path in (users_path, edges_path):
        if not os.path.exists(path):
            raise ValidationError(f'Missing {path}; run the ingest stage first', code='missing_artifact')

    user_ids, locations, points, precisions = [], [], [], []
    index = {}
    with open(users_path, newline='', encoding='utf-8') as fin:
        reader = csv.reader(fin)
        next(reader, None)
        for line_no, row in enumerate(reader, start=2):
            try:
                uid, loc, lat, lon, precision = row
                point = GeoPoint(float(lat), float(lon))
                precision = Precision(precision)
            except ValueError as exc:
                raise ValidationError(f'{users_path}: line {line_no}: malformed row {row!r}', code='malformed_row') from exc
            index[uid] = len(user_ids)
            user_ids.append(uid)
            locations.append(loc)
            points.append(point)
            precisions.append(precision)

    builder = GraphBuilder(len(user_ids))
    with open(edges_path, newline='', encoding='utf-8') as fin:
        reader = csv.reader(fin)
        next(reader, None)
        for line_no, row in enumerate(reader, start=2):
            try:
                builder.add_edge(index[row[0]], index[row[1]])
            except (KeyError, IndexError) as exc:
                raise ValidationError(f'{edges_path}: line {line_no}: unknown endpoint in {row!r}', code='malformed_row') from exc
    net = UserNetwork(builder.build(), user_ids, locations, points, precisions)
    logger.info('Read user network with %d users and %d edges from %s', net.n_users, net.n_edges, directory)
    return net
