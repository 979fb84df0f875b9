"""3D SLIC supervoxels.

Clustering runs on a chosen subset of volume channels, smoothed and jointly
rescaled to [0, 1], with the distance

    D = sqrt(d_c ** 2 + (d_s / S) ** 2 * m ** 2)

where ``d_c`` is the intensity distance, ``d_s`` the spatial distance in
voxels, ``S`` the grid step and ``m`` the compactness.
"""
import heapq
import itertools
import logging
import math
from collections import namedtuple

import numpy as np
from scipy import ndimage

from svx import ParamError
from svx.ragraph import face_counts
from svx.volume import LabelMap, array_gradient, gaussian_smooth, gradient_magnitude


logger = logging.getLogger(__name__)


class SlicParams(namedtuple('SlicParams', 'n_segments compactness sigma max_iter min_size_factor channels')):
    __slots__ = ()

    def __new__(cls, n_segments=350, compactness=0.01, sigma=1.0, max_iter=10, min_size_factor=0.25, channels=(0,)):
        return super(SlicParams, cls).__new__(
            cls, int(n_segments), float(compactness), float(sigma), int(max_iter), float(min_size_factor),
            tuple(int(c) for c in channels))

    @classmethod
    def reference(cls, channels=(0,)):
        return cls(n_segments=350, compactness=0.01, sigma=1.0, channels=channels)

    def validate(self, volume):
        if self.n_segments < 1:
            raise ParamError('n_segments must be >= 1, got {}'.format(self.n_segments))
        if self.n_segments > volume.voxel_count:
            raise ParamError('n_segments {} exceeds the voxel count {}'.format(self.n_segments, volume.voxel_count))
        if not self.compactness > 0:
            raise ParamError('compactness must be > 0, got {}'.format(self.compactness))
        if not (self.sigma >= 0 and math.isfinite(self.sigma)):
            raise ParamError('sigma must be finite and >= 0, got {}'.format(self.sigma))
        if self.max_iter < 1:
            raise ParamError('max_iter must be >= 1, got {}'.format(self.max_iter))
        if not self.min_size_factor >= 0:
            raise ParamError('min_size_factor must be >= 0, got {}'.format(self.min_size_factor))
        if not self.channels:
            raise ParamError('At least one clustering channel is required.')
        for channel in self.channels:
            if not 0 <= channel < volume.channels:
                raise ParamError('Channel {} out of range for a {}-channel volume'.format(channel, volume.channels))
        return self


ClusterCenter = namedtuple('ClusterCenter', 'intensity position count')


def grid_step(dims, n_segments):
    return (float(np.prod(dims)) / n_segments) ** (1.0 / 3.0)


def grid_counts(dims, n_segments):
    """Centers per axis: nearest to dim / S, then grown until there are at least K nodes."""
    step = grid_step(dims, n_segments)
    counts = [min(dim, max(1, int(math.floor(dim / step + 0.5)))) for dim in dims]
    while np.prod(counts) < n_segments:
        spacing = [dim / float(count) if count < dim else 0.0 for dim, count in zip(dims, counts)]
        counts[int(np.argmax(spacing))] += 1
    return tuple(counts)


def grid_nodes(dims, n_segments):
    """The K grid nodes nearest the volume center, in grid order."""
    axes = [[(i + 0.5) * dim / count - 0.5 for i in range(count)]
            for dim, count in zip(dims, grid_counts(dims, n_segments))]
    nodes = list(itertools.product(*axes))
    middle = [(dim - 1) / 2.0 for dim in dims]
    distance = [sum((p - c) ** 2 for p, c in zip(node, middle)) for node in nodes]
    keep = sorted(sorted(range(len(nodes)), key=lambda i: distance[i])[:n_segments])
    return [nodes[i] for i in keep]


def _voxel(position, dims):
    return tuple(min(max(int(math.floor(p + 0.5)), 0), dim - 1) for p, dim in zip(position, dims))


def _lowest_gradient_voxel(magnitude, voxel):
    """Walk to the lowest-magnitude voxel of the 3x3x3 neighbourhood until none is strictly lower."""
    while True:
        window = tuple(slice(max(v - 1, 0), v + 2) for v in voxel)
        block = magnitude[window]
        offset = np.unravel_index(int(np.argmin(block)), block.shape)
        best = tuple(w.start + o for w, o in zip(window, offset))
        if not magnitude[best] < magnitude[voxel]:
            return voxel
        voxel = best


def clustering_features(volume, params):
    """Smoothed clustering channels, jointly rescaled to [0, 1]."""
    smoothed = gaussian_smooth(volume.select(params.channels), params.sigma)
    features = smoothed.data.astype(np.float64)
    low, high = features.min(), features.max()
    if high > low:
        features = (features - low) / (high - low)
    else:
        logger.warning('Clustering channels %s are constant; SLIC reduces to spatial clustering', params.channels)
        features = np.zeros_like(features)
    return features


def _centers_from_features(features, n_segments):
    dims = features.shape[1:]
    magnitude = np.zeros(dims)
    for c in range(features.shape[0]):
        magnitude += gradient_magnitude(array_gradient(features[c])) ** 2

    centers = []
    for node in grid_nodes(dims, n_segments):
        start = _voxel(node, dims)
        voxel = _lowest_gradient_voxel(magnitude, start)
        position = node if voxel == start else tuple(float(v) for v in voxel)
        centers.append(ClusterCenter(tuple(features[(slice(None),) + voxel].tolist()), position, 0))
    return centers


def init_cluster_centers(volume, params):
    params.validate(volume)
    return _centers_from_features(clustering_features(volume, params), params.n_segments)


def _assign(features, centers, step, compactness):
    dims = features.shape[1:]
    labels = np.full(dims, -1, dtype=np.int64)
    best = np.full(dims, np.inf)
    spatial_weight = (compactness / step) ** 2

    for index, center in enumerate(centers):
        window = tuple(slice(max(int(math.ceil(p - step)), 0), min(int(math.floor(p + step)), dim - 1) + 1)
                       for p, dim in zip(center.position, dims))
        if any(w.start >= w.stop for w in window):
            continue
        intensity = np.asarray(center.intensity).reshape((-1, 1, 1, 1))
        colour = ((features[(slice(None),) + window] - intensity) ** 2).sum(axis=0)
        grids = np.ogrid[window]
        spatial = sum((g - p) ** 2 for g, p in zip(grids, center.position))
        distance = colour + spatial_weight * spatial

        closer = distance < best[window]
        best[window] = np.where(closer, distance, best[window])
        labels[window] = np.where(closer, index, labels[window])
    return labels


def _update(features, labels, centers, coordinates):
    flat = labels.ravel()
    assigned = flat >= 0
    owners = flat[assigned]
    size = len(centers)
    counts = np.bincount(owners, minlength=size)
    positions = [np.bincount(owners, weights=axis[assigned], minlength=size) for axis in coordinates]
    intensities = [np.bincount(owners, weights=channel.ravel()[assigned], minlength=size) for channel in features]

    updated = []
    for k, center in enumerate(centers):
        n = int(counts[k])
        if n == 0:
            updated.append(center._replace(count=0))
            continue
        updated.append(ClusterCenter(tuple(float(s[k]) / n for s in intensities),
                                     tuple(float(s[k]) / n for s in positions), n))
    return updated


def _components(labels):
    """Split every label into its 6-connected components, numbered from 0."""
    components = np.zeros(labels.shape, dtype=np.int64)
    offset = 0
    for value, bbox in enumerate(ndimage.find_objects(labels + 1)):
        if bbox is None:
            continue
        inside = labels[bbox] == value
        parts, count = ndimage.label(inside)
        components[bbox][inside] = parts[inside] - 1 + offset
        offset += count
    return components, offset


def enforce_connectivity(supervoxels, min_size):
    """Make every label 6-connected and absorb components smaller than ``min_size``.

    A small component joins the neighbouring component with which it shares
    the most faces (ties: lowest component id); the smallest pending
    component is absorbed first.
    """
    labels = np.asarray(supervoxels.labels, dtype=np.int64)
    components, count = _components(labels)
    sizes = np.bincount(components.ravel(), minlength=count).tolist()

    adjacency = [dict() for _ in range(count)]
    if count > 1:
        pairs, faces = face_counts(components)
        for (a, b), n in zip(pairs.tolist(), faces.tolist()):
            adjacency[a][b] = n
            adjacency[b][a] = n

    parent = list(range(count))
    pending = [(size, c) for c, size in enumerate(sizes) if size < min_size]
    heapq.heapify(pending)
    while pending:
        size, c = heapq.heappop(pending)
        if parent[c] != c or size != sizes[c] or not adjacency[c]:
            continue
        target = min(adjacency[c], key=lambda n: (-adjacency[c][n], n))
        parent[c] = target
        sizes[target] += sizes[c]
        for n, faces in adjacency[c].items():
            del adjacency[n][c]
            if n != target:
                adjacency[target][n] = adjacency[target].get(n, 0) + faces
                adjacency[n][target] = adjacency[n].get(target, 0) + faces
        adjacency[c] = {}
        if sizes[target] < min_size:
            heapq.heappush(pending, (sizes[target], target))

    def root(c):
        while parent[c] != c:
            c = parent[c]
        return c

    roots = np.array([root(c) for c in range(count)], dtype=np.int64)
    merged = LabelMap(roots[components], supervoxels.spacing).compact()
    logger.debug('Connectivity: %d components -> %d supervoxels (min size %d)', count, merged.label_count, min_size)
    return merged


def slic(volume, params):
    params.validate(volume)
    features = clustering_features(volume, params)
    step = grid_step(volume.dims, params.n_segments)
    centers = _centers_from_features(features, params.n_segments)
    coordinates = np.indices(volume.dims).reshape(3, -1)

    for _ in range(params.max_iter):
        labels = _assign(features, centers, step, params.compactness)
        centers = _update(features, labels, centers, coordinates)

    # voxels outside every search window form their own fragments
    labels[labels < 0] = len(centers)
    min_size = max(1, int(math.floor(params.min_size_factor * volume.voxel_count / params.n_segments + 0.5)))
    supervoxels = enforce_connectivity(LabelMap(labels, volume.spacing), min_size)

    found = supervoxels.label_count
    if not params.n_segments / 2.0 <= found <= 2 * params.n_segments:
        logger.warning('SLIC produced %d supervoxels for n_segments=%d', found, params.n_segments)
    else:
        logger.info('SLIC produced %d supervoxels for n_segments=%d', found, params.n_segments)
    return supervoxels
