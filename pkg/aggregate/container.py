"""
GSNA1: the on-disk form of a CellNetwork, so pipeline stages compose
without re-aggregating. Layout is documented in docs/gsna1.md.
"""
import json
import logging
import struct

import numpy as np
from django.core.exceptions import ValidationError

from geo.hexgrid import CellId
from graph_core.graph import DirectedGraph

from .cellnet import COUNTRY, HEX, CellNetwork

logger = logging.getLogger(__name__)

MAGIC = b'GSNA1'
SCHEMA_VERSION = 1
KIND_CODES = {HEX: 0, COUNTRY: 1}
_PREAMBLE = struct.Struct('<5sBI')
_INT = np.dtype('<i8')


def encode_cell_network(cell_net):
    graph = cell_net.graph
    header = {
        'schema': SCHEMA_VERSION,
        'kind': cell_net.kind,
        'cell_area': cell_net.cell_area_km2,
        'n_nodes': graph.n_nodes,
        'n_edges': graph.n_edges,
    }
    if cell_net.kind == COUNTRY:
        header['keys'] = list(cell_net.keys)
    header_bytes = json.dumps(header, sort_keys=True, separators=(',', ':')).encode('utf-8')

    chunks = [_PREAMBLE.pack(MAGIC, KIND_CODES[cell_net.kind], len(header_bytes)), header_bytes]
    if cell_net.kind == HEX:
        keys = np.array([(c.row, c.col) for c in cell_net.keys], dtype=_INT).reshape(-1, 2)
        chunks.append(keys.tobytes())
    chunks.append(graph.node_weights.astype(_INT).tobytes())
    src, dst, weight = graph.edge_arrays()
    chunks.append(np.stack([src, dst, weight], axis=1).astype(_INT).tobytes())
    return b''.join(chunks)


def _take(buffer, offset, count, source):
    size = count * _INT.itemsize
    if offset + size > len(buffer):
        raise ValidationError(f'{source}: truncated GSNA1 container', code='bad_container')
    return np.frombuffer(buffer, dtype=_INT, count=count, offset=offset).astype(np.int64), offset + size


def decode_cell_network(buffer, source='<bytes>'):
    if len(buffer) < _PREAMBLE.size:
        raise ValidationError(f'{source}: truncated GSNA1 container', code='bad_container')
    magic, kind_code, header_len = _PREAMBLE.unpack_from(buffer, 0)
    if magic != MAGIC:
        raise ValidationError(f'{source}: not a GSNA1 container', code='bad_container')
    offset = _PREAMBLE.size
    try:
        header = json.loads(buffer[offset:offset + header_len].decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValidationError(f'{source}: unreadable GSNA1 header', code='bad_container') from exc
    offset += header_len
    if header.get('schema') != SCHEMA_VERSION:
        raise ValidationError(f"{source}: unsupported GSNA1 schema {header.get('schema')}", code="bad_container")
    kind = header.get('kind')
    if KIND_CODES.get(kind) != kind_code:
        raise ValidationError(f'{source}: kind byte does not match header', code='bad_container')

    n_nodes, n_edges = header['n_nodes'], header['n_edges']
    if kind == HEX:
        raw, offset = _take(buffer, offset, 2 * n_nodes, source)
        keys = [CellId(int(r), int(c)) for r, c in raw.reshape(-1, 2).tolist()]
    else:
        keys = list(header.get('keys', []))
        if len(keys) != n_nodes:
            raise ValidationError(f'{source}: key list does not match n_nodes', code='bad_container')
    node_weights, offset = _take(buffer, offset, n_nodes, source)
    edges, offset = _take(buffer, offset, 3 * n_edges, source)
    if offset != len(buffer):
        raise ValidationError(f'{source}: trailing bytes after GSNA1 payload', code='bad_container')
    edges = edges.reshape(-1, 3)
    graph = DirectedGraph(n_nodes, edges[:, 0], edges[:, 1], edges[:, 2], node_weights=node_weights)
    return CellNetwork(kind=kind, keys=keys, graph=graph, cell_area_km2=header.get('cell_area'))


def write_cell_network(cell_net, path):
    with open(path, 'wb') as fout:
        fout.write(encode_cell_network(cell_net))
    logger.info('Wrote %s network with %d units to %s', cell_net.kind, cell_net.n_cells, path)


def read_cell_network(path):
    try:
        with open(path, 'rb') as fin:
            buffer = fin.read()
    except FileNotFoundError as exc:
        raise ValidationError(f'Missing {path}; run the aggregate stage first', code='missing_artifact') from exc
    return decode_cell_network(buffer, source=path)
