"""Multi-channel volumes and label maps.

Arrays are indexed ``[x, y, z]`` (``[c, x, y, z]`` for volume data); the
on-disk order (channel-major, x fastest) is handled by :mod:`svx.file_loader`.
"""
import math

import numpy as np
from scipy import ndimage

from svx import DataError, ParamError


DEFAULT_SPACING = (1.0, 1.0, 1.0)


def _check_spacing(spacing):
    spacing = tuple(float(s) for s in spacing)
    if len(spacing) != 3 or not all(s > 0 and math.isfinite(s) for s in spacing):
        raise ParamError('Voxel spacing must be three positive numbers, got {}'.format(spacing))
    return spacing


def _freeze(array):
    array.flags.writeable = False
    return array


class Volume(object):

    def __init__(self, data, spacing=DEFAULT_SPACING):
        data = np.array(data, dtype=np.float32)
        if data.ndim == 3:
            data = data[np.newaxis]
        if data.ndim != 4 or data.shape[0] < 1 or min(data.shape[1:]) < 1:
            raise ParamError('Volume data must have shape (C, nx, ny, nz), got {}'.format(data.shape))
        if not np.all(np.isfinite(data)):
            raise DataError('Volume contains non-finite samples.')

        self.data = _freeze(data)
        self.spacing = _check_spacing(spacing)

    @property
    def dims(self):
        return self.data.shape[1:]

    @property
    def channels(self):
        return self.data.shape[0]

    @property
    def voxel_count(self):
        return int(np.prod(self.dims))

    def channel(self, index):
        if not 0 <= index < self.channels:
            raise ParamError('Channel {} out of range for a {}-channel volume'.format(index, self.channels))
        return self.data[index]

    def select(self, channels):
        return Volume(np.stack([self.channel(c) for c in channels]), self.spacing)

    def __eq__(self, other):
        return (isinstance(other, Volume) and self.spacing == other.spacing and
                self.data.shape == other.data.shape and
                self.data.tobytes() == other.data.tobytes())

    def __ne__(self, other):
        return not self == other

    def __repr__(self):
        return 'Volume(dims={}, channels={}, spacing={})'.format(self.dims, self.channels, self.spacing)


class LabelMap(object):
    """Dense non-negative integer labels; binary masks use {0, 1}."""

    def __init__(self, labels, spacing=DEFAULT_SPACING):
        labels = np.asarray(labels)
        if labels.ndim != 3 or min(labels.shape) < 1:
            raise ParamError('Label data must have shape (nx, ny, nz), got {}'.format(labels.shape))
        if labels.dtype == bool:
            labels = labels.astype(np.int64)
        if not np.issubdtype(labels.dtype, np.integer):
            raise ParamError('Labels must be integers, got {}'.format(labels.dtype))
        labels = labels.astype(np.int64)
        if labels.size and labels.min() < 0:
            raise ParamError('Labels must be non-negative.')

        self.labels = _freeze(labels)
        self.spacing = _check_spacing(spacing)

    @classmethod
    def from_mask(cls, mask, spacing=DEFAULT_SPACING):
        return cls(np.asarray(mask, dtype=bool).astype(np.int64), spacing)

    @property
    def dims(self):
        return self.labels.shape

    @property
    def label_count(self):
        return int(self.labels.max()) + 1 if self.labels.size else 0

    def mask(self):
        return self.labels > 0

    def compact(self):
        """Renumber to 0..K-1, keeping the relative order of label values."""
        _, inverse = np.unique(self.labels, return_inverse=True)
        return LabelMap(inverse.reshape(self.dims), self.spacing)

    def __eq__(self, other):
        return (isinstance(other, LabelMap) and self.spacing == other.spacing and
                self.dims == other.dims and np.array_equal(self.labels, other.labels))

    def __ne__(self, other):
        return not self == other

    def __repr__(self):
        return 'LabelMap(dims={}, labels={}, spacing={})'.format(self.dims, self.label_count, self.spacing)


def check_same_dims(*items):
    dims = set(tuple(item.dims) for item in items)
    if len(dims) > 1:
        raise ParamError('Dimension mismatch: {}'.format(', '.join(str(d) for d in sorted(dims))))


def gaussian_smooth(volume, sigma):
    if not math.isfinite(sigma) or sigma < 0:
        raise ParamError('Smoothing sigma must be finite and >= 0, got {}'.format(sigma))
    if sigma == 0:
        return Volume(volume.data.copy(), volume.spacing)

    radius = int(math.ceil(3 * sigma))
    smoothed = volume.data.astype(np.float64)
    for axis in (1, 2, 3):
        smoothed = ndimage.gaussian_filter1d(smoothed, sigma, axis=axis, mode='nearest', radius=radius)
    return Volume(smoothed, volume.spacing)


def _derivative(values, axis):
    if values.shape[axis] < 2:
        return np.zeros_like(values)
    return np.gradient(values, axis=axis, edge_order=1)


def gradient_field(volume, channel):
    """Central differences inside, one-sided differences on the faces, voxel units.

    Returns ``(gx, gy, gz)`` as float64 arrays.
    """
    return array_gradient(volume.channel(channel))


def array_gradient(values):
    values = np.asarray(values, dtype=np.float64)
    return tuple(_derivative(values, axis) for axis in range(3))


def gradient_magnitude(gradients):
    gx, gy, gz = gradients
    return np.sqrt(gx * gx + gy * gy + gz * gz)
