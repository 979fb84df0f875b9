"""Region adjacency graph over a supervoxel map, weighted by shared face counts."""
import json
import logging

import numpy as np

from svx import ParamError


logger = logging.getLogger(__name__)


def face_counts(labels):
    """Count 6-neighbour voxel faces between different labels.

    Returns ``(pairs, counts)`` with ``pairs`` an ``(E, 2)`` array of label
    pairs ``a < b`` in ascending order.
    """
    labels = np.asarray(labels, dtype=np.int64)
    size = int(labels.max()) + 1
    keys = []
    for axis in range(3):
        first = np.moveaxis(labels, axis, 0)[:-1].ravel()
        second = np.moveaxis(labels, axis, 0)[1:].ravel()
        differ = first != second
        low = np.minimum(first[differ], second[differ])
        high = np.maximum(first[differ], second[differ])
        keys.append(low * size + high)

    unique, counts = np.unique(np.concatenate(keys), return_counts=True)
    pairs = np.stack([unique // size, unique % size], axis=1)
    return pairs, counts


def border_face_counts(labels):
    """Faces each label has on the outer surface of the volume."""
    labels = np.asarray(labels, dtype=np.int64)
    size = int(labels.max()) + 1
    counts = np.zeros(size, dtype=np.int64)
    for axis in range(3):
        moved = np.moveaxis(labels, axis, 0)
        counts += np.bincount(moved[0].ravel(), minlength=size)
        counts += np.bincount(moved[-1].ravel(), minlength=size)
    return counts


class Rag(object):

    def __init__(self, size, pairs, counts, border_faces):
        self.size = size
        self.shared = {}
        adjacency = [set() for _ in range(size)]
        total = np.array(border_faces, dtype=np.int64)
        for (a, b), count in zip(pairs.tolist(), counts.tolist()):
            self.shared[a, b] = count
            adjacency[a].add(b)
            adjacency[b].add(a)
            total[a] += count
            total[b] += count
        self.adjacency = [frozenset(neighbours) for neighbours in adjacency]
        self.border_faces = np.array(border_faces, dtype=np.int64)
        self.total_faces = total

    def neighbours(self, label):
        return self.adjacency[label]

    def shared_faces(self, a, b):
        if a > b:
            a, b = b, a
        return self.shared.get((a, b), 0)

    def edges(self):
        """Edges as ``(a, b, faces)`` with ``a < b``, in ascending order."""
        return [(a, b, faces) for (a, b), faces in sorted(self.shared.items())]

    def __len__(self):
        return self.size

    def __repr__(self):
        return 'Rag(nodes={}, edges={})'.format(self.size, len(self.shared))


def build_rag(supervoxels):
    labels = supervoxels.labels
    size = supervoxels.label_count
    pairs, counts = face_counts(labels)
    rag = Rag(size, pairs, counts, border_face_counts(labels))
    logger.debug('Built %r', rag)
    return rag


def _members(members):
    members = frozenset(members)
    if not members:
        raise ParamError('Member set must not be empty.')
    return members


def find_neighbours(rag, members):
    members = _members(members)
    neighbours = set()
    for member in members:
        neighbours.update(rag.neighbours(member))
    return frozenset(neighbours - members)


def shared_border(rag, members, candidate):
    members = frozenset(members)
    if candidate in members:
        raise ParamError('Supervoxel {} is already a member.'.format(candidate))
    return sum(rag.shared_faces(candidate, n) for n in rag.neighbours(candidate) if n in members)


def region_boundary_faces(rag, members):
    """Faces of the member region facing non-members or the volume border."""
    members = _members(members)
    total = 0
    for member in members:
        total += int(rag.total_faces[member])
        total -= sum(rag.shared_faces(member, n) for n in rag.neighbours(member) if n in members)
    return total


def dump_edges(rag, stream):
    for a, b, faces in rag.edges():
        stream.write(json.dumps({'a': a, 'b': b, 'faces': faces}, sort_keys=True) + '\n')
