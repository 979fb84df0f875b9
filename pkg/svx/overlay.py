import logging

import numpy as np
from skimage import io
from skimage.segmentation import find_boundaries

from svx import IoError


logger = logging.getLogger(__name__)


SEED_COLOUR = (255, 200, 0)
REFINED_COLOUR = (230, 30, 30)
GT_COLOUR = (40, 220, 60)


def mid_axial(dims):
    return dims[2] // 2


def render_slice(volume, channel, contours, z=None):
    """RGB image (rows = y, columns = x) of one axial slice with mask contours.

    ``contours`` is a sequence of ``(mask, colour)``; later entries paint over
    earlier ones.
    """
    z = mid_axial(volume.dims) if z is None else z
    values = volume.channel(channel)[:, :, z].T.astype(np.float64)
    low, high = values.min(), values.max()
    grey = (values - low) / (high - low) if high > low else np.zeros_like(values)
    image = np.repeat((grey * 255).round().astype(np.uint8)[..., np.newaxis], 3, axis=2)

    for mask, colour in contours:
        plane = np.asarray(mask, dtype=bool)[:, :, z].T
        image[find_boundaries(plane, mode='inner')] = colour
    return image


def save_overlay(path, volume, channel, seed, refined, gt, z=None):
    image = render_slice(volume, channel, [(gt, GT_COLOUR), (seed, SEED_COLOUR), (refined, REFINED_COLOUR)], z)
    try:
        io.imsave(path, image, check_contrast=False)
    except (IOError, OSError) as e:
        raise IoError('Cannot write "{}": {}'.format(path, e))
    logger.debug('Wrote overlay %s', path)
