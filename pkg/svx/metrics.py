"""Overlap and surface-distance metrics for binary masks."""
from collections import namedtuple

import numpy as np
from scipy import ndimage

from svx import EmptyMaskError, ParamError


_FACES = ndimage.generate_binary_structure(3, 1)


def _masks(a, b):
    a, b = np.asarray(a, dtype=bool), np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise ParamError('Mask dimensions differ: {} vs {}'.format(a.shape, b.shape))
    return a, b


def dsc(a, b):
    a, b = _masks(a, b)
    total = int(a.sum()) + int(b.sum())
    if total == 0:
        return 1.0
    return 2.0 * int(np.logical_and(a, b).sum()) / total


def iou(a, b):
    a, b = _masks(a, b)
    union = int(np.logical_or(a, b).sum())
    if union == 0:
        return 1.0
    return float(np.logical_and(a, b).sum()) / union


def surface(mask):
    """Foreground voxels with a background or out-of-volume face neighbour."""
    mask = np.asarray(mask, dtype=bool)
    return mask & ~ndimage.binary_erosion(mask, structure=_FACES, border_value=0)


def directed_surface_distances(a, b, spacing=(1.0, 1.0, 1.0)):
    """Distance from every surface voxel of ``a`` to the nearest surface voxel of ``b``, in mm."""
    target = surface(b)
    distance = ndimage.distance_transform_edt(~target, sampling=spacing)
    return distance[surface(a)]


def hd95(a, b, spacing=(1.0, 1.0, 1.0)):
    a, b = _masks(a, b)
    if not a.any() or not b.any():
        raise EmptyMaskError('HD-95 is undefined for an empty mask.')
    forward = np.percentile(directed_surface_distances(a, b, spacing), 95)
    backward = np.percentile(directed_surface_distances(b, a, spacing), 95)
    return float(max(forward, backward))


def boundary_recall(edges, labels, tolerance=2):
    """Fraction of edge voxels within ``tolerance`` voxels of a supervoxel boundary."""
    edges = np.asarray(edges, dtype=bool)
    labels = np.asarray(labels)
    if not edges.any():
        return 1.0
    boundary = np.zeros(labels.shape, dtype=bool)
    for axis in range(3):
        differ = np.diff(labels, axis=axis) != 0
        lower = [slice(None)] * 3
        upper = [slice(None)] * 3
        lower[axis] = slice(None, -1)
        upper[axis] = slice(1, None)
        boundary[tuple(lower)] |= differ
        boundary[tuple(upper)] |= differ
    if not boundary.any():
        return 0.0
    distance = ndimage.distance_transform_edt(~boundary)
    return float((distance[edges] <= tolerance).mean())


RegionMetrics = namedtuple('RegionMetrics', 'dsc hd95_mm iou pred_voxels gt_voxels')


def region_metrics(pred, gt, spacing=(1.0, 1.0, 1.0)):
    pred, gt = _masks(pred, gt)
    distance = hd95(pred, gt, spacing) if pred.any() and gt.any() else None
    return RegionMetrics(dsc(pred, gt), distance, iou(pred, gt), int(pred.sum()), int(gt.sum()))


class MetricsReport(object):

    def __init__(self, regions):
        self.regions = dict(regions)

    def __getitem__(self, region):
        return self.regions[region]

    @property
    def mean_iou(self):
        return mean_iou(r.iou for r in self.regions.values())

    def as_dict(self):
        result = {name: dict(r._asdict()) for name, r in sorted(self.regions.items())}
        if len(self.regions) > 1:
            result['miou'] = self.mean_iou
        return result


def mean_iou(values):
    values = list(values)
    return float(np.mean(values)) if values else 1.0


def report(pairs, spacing=(1.0, 1.0, 1.0)):
    """Build a `MetricsReport` from ``{region: (pred, gt)}``."""
    return MetricsReport((name, region_metrics(pred, gt, spacing)) for name, (pred, gt) in pairs.items())
