"""Per-supervoxel statistical features and incremental region aggregates.

Each clustering channel contributes 36 values, in this order: mean,
variance, skewness, 10-bin intensity histogram, GLCM contrast, GLCM energy,
GLCM entropy, 10-bin gradient-orientation histogram and 10-bin
gradient-magnitude histogram.

Tables keep the raw sufficient statistics (power sums, unnormalised
histogram counts) so that region aggregates can be merged exactly. GLCM
features are merged as voxel-count weighted averages.
"""
import csv
import logging
import math

import numpy as np

from svx import InternalError, ParamError, StateError
from svx.volume import check_same_dims, gradient_field, gradient_magnitude


logger = logging.getLogger(__name__)


BINS = 10
GRAY_LEVELS = 16
CHANNEL_FEATURES = 36

_SPREAD_EPSILON = 1e-12
_LEVEL_I, _LEVEL_J = np.indices((GRAY_LEVELS, GRAY_LEVELS))


def feature_names(channels):
    names = []
    for c in channels:
        prefix = 'c{}_'.format(c)
        names += [prefix + 'mean', prefix + 'variance', prefix + 'skewness']
        names += [prefix + 'hist_{}'.format(b) for b in range(BINS)]
        names += [prefix + 'contrast', prefix + 'energy', prefix + 'entropy']
        names += [prefix + 'orientation_{}'.format(b) for b in range(BINS)]
        names += [prefix + 'magnitude_{}'.format(b) for b in range(BINS)]
    return names


def bin_index(values, low, high, bins):
    """Equal-width bins over [low, high]; a degenerate range puts everything in bin 0."""
    values = np.asarray(values, dtype=np.float64)
    if not high > low:
        return np.zeros(values.shape, dtype=np.int64)
    index = np.floor((values - low) / (high - low) * bins).astype(np.int64)
    return np.clip(index, 0, bins - 1)


def _normalise(counts):
    """Rows summing to one; an empty row puts its mass in bin 0."""
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum(axis=-1, keepdims=True)
    empty = total[..., 0] == 0
    safe = np.where(total > 0, total, 1.0)
    result = counts / safe
    result[empty, 0] = 1.0
    return result


def moments(count, sums):
    """Mean, variance and skewness (population moments) from power sums."""
    count = np.asarray(count, dtype=np.float64)
    s1, s2, s3 = sums[..., 0] / count, sums[..., 1] / count, sums[..., 2] / count
    mean = s1
    variance = np.maximum(s2 - mean * mean, 0.0)
    third = s3 - 3.0 * mean * s2 + 2.0 * mean ** 3
    flat = variance <= _SPREAD_EPSILON * np.maximum(1.0, mean * mean)
    skewness = np.where(flat, 0.0, third / np.where(flat, 1.0, variance) ** 1.5)
    variance = np.where(flat, 0.0, variance)
    return mean, variance, skewness


def texture_features(cooccurrence):
    """Contrast, energy and entropy of co-occurrence counts, shape (..., 16, 16)."""
    cooccurrence = np.asarray(cooccurrence, dtype=np.float64)
    total = cooccurrence.sum(axis=(-2, -1))
    safe = np.where(total > 0, total, 1.0)
    p = cooccurrence / safe[..., np.newaxis, np.newaxis]
    contrast = (p * (_LEVEL_I - _LEVEL_J) ** 2).sum(axis=(-2, -1))
    energy = (p * p).sum(axis=(-2, -1))
    logs = np.log(np.where(p > 0, p, 1.0))
    entropy = -(p * logs).sum(axis=(-2, -1))
    # no voxel pairs inside the region: treat it as a constant patch
    energy = np.where(total > 0, energy, 1.0)
    return np.stack([contrast, energy, entropy], axis=-1)


def compose_vectors(counts, sums, intensity, texture, orientation, magnitude):
    """Feature vectors, shape (K, 36 * C), from per-channel statistics of shape (K, C, ...)."""
    mean, variance, skewness = moments(counts[:, np.newaxis], sums)
    parts = [mean[..., np.newaxis], variance[..., np.newaxis], skewness[..., np.newaxis],
             _normalise(intensity), texture, _normalise(orientation), _normalise(magnitude)]
    per_channel = np.concatenate(parts, axis=-1)
    return per_channel.reshape(per_channel.shape[0], -1)


class Profile(object):
    """A feature vector together with the number of voxels it summarises."""

    def __init__(self, vector, count):
        self.vector = np.asarray(vector, dtype=np.float64)
        self.count = int(count)

    def __repr__(self):
        return 'Profile(count={})'.format(self.count)


class FeatureTable(object):

    def __init__(self, channels, counts, sums, intensity, cooccurrence, orientation, magnitude,
                 degenerate_channels=()):
        self.channels = tuple(channels)
        self.counts = np.asarray(counts, dtype=np.int64)
        self.sums = np.asarray(sums, dtype=np.float64)
        self.intensity = np.asarray(intensity, dtype=np.float64)
        self.texture = texture_features(cooccurrence)
        self.orientation = np.asarray(orientation, dtype=np.float64)
        self.magnitude = np.asarray(magnitude, dtype=np.float64)
        self.degenerate_channels = frozenset(degenerate_channels)

        self.vectors = compose_vectors(self.counts, self.sums, self.intensity, self.texture,
                                       self.orientation, self.magnitude)
        self.spread_mean = self.vectors.mean(axis=0)
        self.spread_std = self.vectors.std(axis=0)
        self.active = self.spread_std > _SPREAD_EPSILON

    def __len__(self):
        return len(self.counts)

    @property
    def names(self):
        return feature_names(self.channels)

    def profile(self, sv):
        return Profile(self.vectors[sv], self.counts[sv])

    def normalise(self, vector):
        """Z-scores over the dimensions with non-zero spread across supervoxels."""
        active = self.active
        return (np.asarray(vector)[..., active] - self.spread_mean[active]) / self.spread_std[active]

    def __repr__(self):
        return 'FeatureTable(supervoxels={}, channels={})'.format(len(self), self.channels)


def _label_sums(labels, size, values, weights=None):
    return np.bincount(labels, weights=values if weights is None else weights, minlength=size)


def _histogram(labels, size, index, weights=None):
    counts = np.bincount(labels * BINS + index, weights=weights, minlength=size * BINS)
    return counts.reshape(size, BINS)


def _cooccurrence(labels, levels, size):
    counts = np.zeros(size * GRAY_LEVELS * GRAY_LEVELS)
    for axis in range(3):
        first = np.moveaxis(labels, axis, 0)
        first_levels = np.moveaxis(levels, axis, 0)
        inside = first[:-1] == first[1:]
        owner = first[:-1][inside]
        a = first_levels[:-1][inside]
        b = first_levels[1:][inside]
        base = owner * GRAY_LEVELS * GRAY_LEVELS
        counts += np.bincount(base + a * GRAY_LEVELS + b, minlength=counts.size)
        counts += np.bincount(base + b * GRAY_LEVELS + a, minlength=counts.size)
    return counts.reshape(size, GRAY_LEVELS, GRAY_LEVELS)


def extract_features(volume, supervoxels, channels):
    check_same_dims(volume, supervoxels)
    channels = tuple(channels)
    if not channels:
        raise ParamError('At least one feature channel is required.')
    for c in channels:
        volume.channel(c)

    labels = supervoxels.labels
    size = supervoxels.label_count
    flat = labels.ravel()
    counts = np.bincount(flat, minlength=size)
    if np.any(counts == 0):
        raise InternalError('Supervoxel {} has no voxels.'.format(int(np.flatnonzero(counts == 0)[0])))

    shape = (size, len(channels))
    sums = np.zeros(shape + (3,))
    intensity = np.zeros(shape + (BINS,))
    cooccurrence = np.zeros(shape + (GRAY_LEVELS, GRAY_LEVELS))
    orientation = np.zeros(shape + (BINS,))
    magnitude = np.zeros(shape + (BINS,))
    degenerate = []

    for i, c in enumerate(channels):
        values = volume.channel(c).astype(np.float64)
        low, high = float(values.min()), float(values.max())
        if not high > low:
            logger.warning('Channel %d is constant; its histograms collapse into bin 0', c)
            degenerate.append(c)

        v = values.ravel()
        for power in range(3):
            sums[:, i, power] = _label_sums(flat, size, v ** (power + 1))
        intensity[:, i] = _histogram(flat, size, bin_index(v, low, high, BINS))
        cooccurrence[:, i] = _cooccurrence(labels, bin_index(values, low, high, GRAY_LEVELS), size)

        gradients = gradient_field(volume, c)
        norm = gradient_magnitude(gradients).ravel()
        moving = norm > 0
        if np.any(moving):
            owners = flat[moving]
            strength = norm[moving]
            polar = np.arccos(np.clip(gradients[2].ravel()[moving] / strength, -1.0, 1.0))
            orientation[:, i] = _histogram(owners, size, bin_index(polar, 0.0, math.pi, BINS), strength)
            magnitude[:, i] = _histogram(owners, size, bin_index(strength, 0.0, float(norm.max()), BINS))

    table = FeatureTable(channels, counts, sums, intensity, cooccurrence, orientation, magnitude, degenerate)
    logger.debug('Extracted %r', table)
    return table


class RegionAggregate(object):
    """Pooled statistics of a set of supervoxels."""

    def __init__(self, table, members, count, sums, intensity, texture_sum, orientation, magnitude):
        self.table = table
        self.members = frozenset(members)
        self.count = int(count)
        self.sums = sums
        self.intensity = intensity
        self.texture_sum = texture_sum
        self.orientation = orientation
        self.magnitude = magnitude

    @classmethod
    def empty(cls, table):
        channels = len(table.channels)
        return cls(table, (), 0, np.zeros((channels, 3)), np.zeros((channels, BINS)), np.zeros((channels, 3)),
                   np.zeros((channels, BINS)), np.zeros((channels, BINS)))

    def vector(self):
        if self.count == 0:
            raise StateError('An empty region has no feature vector.')
        texture = self.texture_sum / self.count
        return compose_vectors(np.array([self.count]), self.sums[np.newaxis], self.intensity[np.newaxis],
                               texture[np.newaxis], self.orientation[np.newaxis], self.magnitude[np.newaxis])[0]

    def profile(self):
        return Profile(self.vector(), self.count)

    def __contains__(self, sv):
        return sv in self.members

    def __len__(self):
        return len(self.members)

    def __repr__(self):
        return 'RegionAggregate(members={}, voxels={})'.format(len(self.members), self.count)


def merge_features(table, aggregate, sv):
    if sv in aggregate.members:
        raise StateError('Supervoxel {} is already part of the region.'.format(sv))
    n = int(table.counts[sv])
    return RegionAggregate(table, aggregate.members | {sv}, aggregate.count + n,
                           aggregate.sums + table.sums[sv],
                           aggregate.intensity + table.intensity[sv],
                           aggregate.texture_sum + n * table.texture[sv],
                           aggregate.orientation + table.orientation[sv],
                           aggregate.magnitude + table.magnitude[sv])


def aggregate_of(table, members):
    aggregate = RegionAggregate.empty(table)
    for sv in sorted(members):
        aggregate = merge_features(table, aggregate, sv)
    return aggregate


def write_csv(table, stream):
    writer = csv.writer(stream, lineterminator='\n')
    writer.writerow(['id', 'voxel_count'] + table.names)
    for sv in range(len(table)):
        writer.writerow([sv, int(table.counts[sv])] + [repr(float(x)) for x in table.vectors[sv]])
