"""
Readers for the raw crawl exports: ``users.csv`` and ``edges.csv``.

``edges.csv`` rows are ``src,dst`` with src the followed account and dst
the follower, i.e. the direction information travels.
"""
import csv
import logging
from dataclasses import dataclass
from typing import Optional

from django.core.exceptions import ValidationError

logger = logging.getLogger(__name__)

USERS_HEADER = ['user_id', 'location']
EDGES_HEADER = ['src', 'dst']


@dataclass(frozen=True)
class RawUserRecord:
    user_id: str
    location: Optional[str] = None


def _rows(path, expected_header):
    with open(path, newline='', encoding='utf-8') as fin:
        reader = csv.reader(fin)
        header = next(reader, None)
        if header is None:
            return
        if [h.strip() for h in header] != expected_header:
            raise ValidationError(
                f"{path}: line 1: expected header {','.join(expected_header)}, got {','.join(header)}",
                code='bad_header',
            )
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            yield line_no, row


def load_users(path):
    """Parse ``users.csv``; blank locations become ``None``."""
    users = []
    seen = set()
    for line_no, row in _rows(path, USERS_HEADER):
        if len(row) != 2 or not row[0].strip():
            raise ValidationError(f'{path}: line {line_no}: malformed user row {row!r}', code='malformed_row')
        user_id = row[0].strip()
        if user_id in seen:
            raise ValidationError(f"{path}: line {line_no}: duplicate user_id '{user_id}'", code="duplicate_user")
        seen.add(user_id)
        location = row[1].strip() or None
        users.append(RawUserRecord(user_id, location))
    logger.info('Loaded %d users from %s', len(users), path)
    return users


def load_edges(path):
    """
    Parse ``edges.csv`` into unique directed ``(src, dst)`` pairs in
    first-seen order. Repeated lines collapse into one pair.
    """
    edges = []
    seen = set()
    duplicates = 0
    for line_no, row in _rows(path, EDGES_HEADER):
        if len(row) != 2:
            raise ValidationError(f'{path}: line {line_no}: malformed edge row {row!r}', code='malformed_row')
        src, dst = row[0].strip(), row[1].strip()
        if not src or not dst or src == dst:
            raise ValidationError(f'{path}: line {line_no}: malformed edge row {row!r}', code='malformed_row')
        if (src, dst) in seen:
            duplicates += 1
            continue
        seen.add((src, dst))
        edges.append((src, dst))
    if duplicates:
        logger.info('Collapsed %d repeated edge lines in %s', duplicates, path)
    logger.info('Loaded %d unique edges from %s', len(edges), path)
    return edges


def write_users(users, path):
    with open(path, 'w', newline='', encoding='utf-8') as fout:
        writer = csv.writer(fout, lineterminator="\n")
        writer.writerow(USERS_HEADER)
        for user in users:
            writer.writerow([user.user_id, user.location or ''])


def write_edges(edges, path):
    with open(path, 'w', newline='', encoding='utf-8') as fout:
        writer = csv.writer(fout, lineterminator="\n")
        writer.writerow(EDGES_HEADER)
        writer.writerows(edges)
