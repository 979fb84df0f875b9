"""Synthetic four-channel tumour phantoms with nested WT/TC ground truth.

Randomness comes from numpy's Philox counter-based generator. One
``SeedSequence`` per phantom is split into independent streams for the
geometry, the bias field and the noise, so changing one never shifts
another. Corruptions use their own stream derived from their seed.
"""
import json
import logging
import math
import os
from collections import namedtuple

import numpy as np
from scipy import ndimage
from skimage.morphology import ball

from svx import FLAIR, MODALITY_ROLES, T1, T1GD, T2, EmptySeedError, ParamError
from svx.file_loader import make_output_dir, open_output, write_image
from svx.volume import LabelMap, Volume


logger = logging.getLogger(__name__)


ROLES = dict((role, index) for index, role in enumerate(MODALITY_ROLES))

BACKGROUND = 0.2

# (WT delta, TC delta) over the background, per channel in ROLES order
DEFAULT_CONTRAST = {
    T1: (-0.05, -0.1),
    T1GD: (0.05, 0.5),
    T2: (0.2, 0.5),
    FLAIR: (0.6, 0.6),
}

ERODE = 'erode'
DILATE = 'dilate'
DROP_COMPONENTS = 'drop_components'
BOUNDARY_NOISE = 'boundary_noise'
CORRUPTION_MODES = (ERODE, DILATE, DROP_COMPONENTS, BOUNDARY_NOISE)


def generator(seed):
    return np.random.Generator(np.random.Philox(seed))


class PhantomParams(namedtuple('PhantomParams', 'dims seed wt_blobs contrast noise_sigma bias_amplitude')):
    __slots__ = ()

    def __new__(cls, dims=(64, 64, 64), seed=0, wt_blobs=3, contrast=None, noise_sigma=0.02, bias_amplitude=0.1):
        contrast = dict(DEFAULT_CONTRAST, **dict(contrast or {}))
        params = super(PhantomParams, cls).__new__(
            cls, tuple(int(d) for d in dims), int(seed), int(wt_blobs),
            tuple((role, tuple(float(x) for x in contrast[role])) for role in MODALITY_ROLES),
            float(noise_sigma), float(bias_amplitude))
        if len(params.dims) != 3 or min(params.dims) < 16:
            raise ParamError('Phantom dims must be at least 16 per axis, got {}'.format(params.dims))
        if params.wt_blobs < 1:
            raise ParamError('wt_blobs must be >= 1, got {}'.format(params.wt_blobs))
        if not params.noise_sigma >= 0:
            raise ParamError('noise_sigma must be >= 0, got {}'.format(params.noise_sigma))
        if not 0 <= params.bias_amplitude < 1:
            raise ParamError('bias_amplitude must be in [0, 1), got {}'.format(params.bias_amplitude))
        if params.seed < 0:
            raise ParamError('seed must be >= 0, got {}'.format(params.seed))
        return params

    def as_dict(self):
        result = self._asdict()
        result['dims'] = list(self.dims)
        result['contrast'] = dict((role, list(deltas)) for role, deltas in self.contrast)
        return result


Phantom = namedtuple('Phantom', 'volume gt_wt gt_tc params')


def _ellipsoid(dims, center, axes):
    grids = np.ogrid[tuple(slice(0, d) for d in dims)]
    distance = sum(((g - c) / float(a)) ** 2 for g, c, a in zip(grids, center, axes))
    return distance <= 1.0


def _blobs(rng, params):
    dims = np.array(params.dims)
    n = float(dims.min())

    axes = rng.uniform(n / 7.0, n / 5.0, size=3)
    center = np.rint(dims / 2.0 + rng.uniform(-n / 10.0, n / 10.0, size=3))
    blobs = [(center, axes)]
    for _ in range(params.wt_blobs - 1):
        offset = rng.uniform(-0.8, 0.8, size=3) * axes
        extra_axes = rng.uniform(n / 10.0, n / 6.5, size=3)
        blobs.append((np.rint(center + offset), extra_axes))

    placed = []
    for center, axes in blobs:
        low = np.ceil(axes) + 2
        high = dims - np.ceil(axes) - 3
        placed.append((np.clip(center, low, np.maximum(low, high)), axes))
    return placed


def _bias_field(rng, params):
    if params.bias_amplitude == 0:
        return np.ones(params.dims)
    phases = rng.uniform(0, 2 * math.pi, size=3)
    grids = np.ogrid[tuple(slice(0, d) for d in params.dims)]
    waves = sum(np.sin(2 * math.pi * g / float(d) + p) for g, d, p in zip(grids, params.dims, phases))
    return 1.0 + params.bias_amplitude * waves / 3.0


def generate_phantom(params):
    geometry, bias, noise = [generator(s) for s in np.random.SeedSequence(params.seed).spawn(3)]

    blobs = _blobs(geometry, params)
    wt = np.zeros(params.dims, dtype=bool)
    for center, axes in blobs:
        wt |= _ellipsoid(params.dims, center, axes)
    core_center, core_axes = blobs[0]
    tc = _ellipsoid(params.dims, core_center, core_axes * 0.5) & wt

    field = _bias_field(bias, params)
    channels = []
    for role, (wt_delta, tc_delta) in params.contrast:
        level = np.full(params.dims, BACKGROUND)
        level[wt] = BACKGROUND + wt_delta
        level[tc] = BACKGROUND + tc_delta
        values = level * field
        if params.noise_sigma > 0:
            values = values + noise.normal(0.0, params.noise_sigma, size=params.dims)
        channels.append(values)

    logger.debug('Phantom seed %d: WT %d voxels, TC %d voxels', params.seed, int(wt.sum()), int(tc.sum()))
    return Phantom(Volume(np.stack(channels)), LabelMap.from_mask(wt), LabelMap.from_mask(tc), params)


def save_phantom(phantom, out_dir):
    make_output_dir(out_dir)
    write_image(phantom.volume, os.path.join(out_dir, 'vol.mhd'))
    write_image(phantom.gt_wt, os.path.join(out_dir, 'gt_wt.mhd'))
    write_image(phantom.gt_tc, os.path.join(out_dir, 'gt_tc.mhd'))
    manifest = dict(phantom.params.as_dict(), roles=ROLES)
    with open_output(os.path.join(out_dir, 'params.json')) as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write('\n')


def _boundary_band(mask):
    """Foreground voxels touching background and background voxels touching foreground."""
    faces = ndimage.generate_binary_structure(3, 1)
    inner = mask & ~ndimage.binary_erosion(mask, structure=faces, border_value=1)
    outer = ndimage.binary_dilation(mask, structure=faces) & ~mask
    return inner | outer


def _drop_components(mask, fraction):
    components, count = ndimage.label(mask)
    sizes = np.bincount(components.ravel())[1:]
    budget = fraction * mask.sum()
    dropped = 0
    result = mask.copy()
    for index in sorted(range(count), key=lambda i: (sizes[i], i)):
        if dropped + sizes[index] > budget:
            break
        result[components == index + 1] = False
        dropped += sizes[index]
    return result


def corrupt_seed(mask, mode, magnitude, seed=0):
    """Degrade a ground-truth mask into a plausible inaccurate pseudo-label."""
    if mode not in CORRUPTION_MODES:
        raise ParamError('Unknown corruption mode {!r}'.format(mode))
    if not magnitude >= 0:
        raise ParamError('Corruption magnitude must be >= 0, got {}'.format(magnitude))
    spacing = mask.spacing
    mask = mask.mask()
    if not mask.any():
        raise EmptySeedError()

    if magnitude == 0:
        result = mask.copy()
    elif mode == ERODE:
        result = ndimage.binary_erosion(mask, structure=ball(int(round(magnitude))), border_value=0)
    elif mode == DILATE:
        result = ndimage.binary_dilation(mask, structure=ball(int(round(magnitude))))
    elif mode == DROP_COMPONENTS:
        result = _drop_components(mask, magnitude)
    else:
        band = _boundary_band(mask)
        flips = generator(np.random.SeedSequence(seed)).random(mask.shape) < magnitude
        result = mask ^ (band & flips)

    if not result.any():
        raise EmptySeedError('Corruption {} with magnitude {} removes the whole mask.'.format(mode, magnitude))
    return LabelMap.from_mask(result, spacing)


CorruptionStep = namedtuple('CorruptionStep', 'mode magnitude')

DEFAULT_CORRUPTION = (CorruptionStep(ERODE, 2), CorruptionStep(BOUNDARY_NOISE, 0.1))


def corrupt_chain(mask, steps, seed=0):
    for index, step in enumerate(steps):
        mask = corrupt_seed(mask, step.mode, step.magnitude, seed + index)
    return mask
