import json

import numpy as np
import pytest

from svx import FLAIR, T1GD, EmptySeedError, ParamError
from svx.assertions import assert_nested
from svx.file_loader import read_image
from svx.metrics import dsc
from svx.phantom import (BOUNDARY_NOISE, DEFAULT_CORRUPTION, DILATE, DROP_COMPONENTS, ERODE, ROLES,
                         CorruptionStep, PhantomParams, corrupt_chain, corrupt_seed, generate_phantom, save_phantom)
from svx.volume import LabelMap


@pytest.fixture(scope='module')
def phantom():
    return generate_phantom(PhantomParams(dims=(32, 32, 32), seed=11))


@pytest.mark.parametrize('kwargs', [
    {'dims': (8, 32, 32)},
    {'dims': (32, 32)},
    {'wt_blobs': 0},
    {'noise_sigma': -0.1},
    {'bias_amplitude': 1.0},
    {'seed': -1},
])
def test_invalid_params(kwargs):
    with pytest.raises(ParamError):
        PhantomParams(**kwargs)


def test_contrast_overrides_keep_role_order():
    params = PhantomParams(contrast={FLAIR: (0.3, 0.4)})

    assert [role for role, _ in params.contrast] == ['T1', 'T1Gd', 'T2', 'FLAIR']
    assert dict(params.contrast)[FLAIR] == (0.3, 0.4)
    assert params.as_dict()['contrast'][FLAIR] == [0.3, 0.4]


def test_phantom_layout(phantom):
    assert phantom.volume.channels == 4
    assert phantom.volume.dims == (32, 32, 32)
    assert phantom.gt_wt.mask().any()
    assert phantom.gt_tc.mask().any()
    assert_nested(phantom.gt_tc, phantom.gt_wt)


def test_phantom_contrast(phantom):
    flair = phantom.volume.channel(ROLES[FLAIR])
    t1gd = phantom.volume.channel(ROLES[T1GD])
    wt, tc = phantom.gt_wt.mask(), phantom.gt_tc.mask()

    assert flair[wt].mean() > flair[~wt].mean() + 0.4
    assert t1gd[tc].mean() > t1gd[wt & ~tc].mean() + 0.3


def test_phantom_is_deterministic(phantom):
    again = generate_phantom(PhantomParams(dims=(32, 32, 32), seed=11))

    assert again.volume == phantom.volume
    assert again.gt_wt == phantom.gt_wt


def test_phantom_seeds_differ(phantom):
    other = generate_phantom(PhantomParams(dims=(32, 32, 32), seed=12))

    assert other.volume != phantom.volume


def test_noise_does_not_move_the_geometry(phantom):
    quiet = generate_phantom(PhantomParams(dims=(32, 32, 32), seed=11, noise_sigma=0))

    assert quiet.gt_wt == phantom.gt_wt
    assert quiet.gt_tc == phantom.gt_tc


def test_save_phantom(phantom, tmpdir):
    out_dir = str(tmpdir.join('case'))

    save_phantom(phantom, out_dir)

    assert read_image(out_dir + '/vol.mhd') == phantom.volume
    assert read_image(out_dir + '/gt_wt.mhd') == phantom.gt_wt
    with open(out_dir + '/params.json') as f:
        manifest = json.load(f)
    assert manifest['roles'] == ROLES
    assert manifest['seed'] == 11


@pytest.mark.parametrize('mode, magnitude, compare', [
    (ERODE,           2,   lambda seed, gt: seed.sum() < gt.sum() and not np.any(seed & ~gt)),
    (DILATE,          1,   lambda seed, gt: seed.sum() > gt.sum() and not np.any(gt & ~seed)),
    (DROP_COMPONENTS, 0.1, lambda seed, gt: not np.any(seed & ~gt)),
    (BOUNDARY_NOISE,  0.1, lambda seed, gt: 0 < (seed ^ gt).sum() < gt.sum()),
    (ERODE,           0,   lambda seed, gt: np.array_equal(seed, gt)),
])
def test_corrupt_seed(phantom, mode, magnitude, compare):
    seed = corrupt_seed(phantom.gt_wt, mode, magnitude, seed=3)

    assert compare(seed.mask(), phantom.gt_wt.mask())


def test_boundary_noise_is_seeded(phantom):
    first = corrupt_seed(phantom.gt_wt, BOUNDARY_NOISE, 0.2, seed=3)

    assert corrupt_seed(phantom.gt_wt, BOUNDARY_NOISE, 0.2, seed=3) == first
    assert corrupt_seed(phantom.gt_wt, BOUNDARY_NOISE, 0.2, seed=4) != first


def test_drop_components_removes_small_pieces():
    mask = np.zeros((16, 16, 16), dtype=bool)
    mask[2:10, 2:10, 2:10] = True
    mask[13, 13, 13] = True

    seed = corrupt_seed(LabelMap.from_mask(mask), DROP_COMPONENTS, 0.01)

    assert not seed.labels[13, 13, 13]
    assert seed.mask().sum() == 512


def test_erosion_that_removes_everything():
    mask = np.zeros((8, 8, 8), dtype=bool)
    mask[3:5, 3:5, 3:5] = True

    with pytest.raises(EmptySeedError):
        corrupt_seed(LabelMap.from_mask(mask), ERODE, 2)


@pytest.mark.parametrize('mode, magnitude', [('shrink', 1), (ERODE, -1)])
def test_invalid_corruption(phantom, mode, magnitude):
    with pytest.raises(ParamError):
        corrupt_seed(phantom.gt_wt, mode, magnitude)


def test_corrupt_chain(phantom):
    seed = corrupt_chain(phantom.gt_wt, DEFAULT_CORRUPTION, seed=8)

    eroded = corrupt_seed(phantom.gt_wt, ERODE, 2, seed=8)
    expected = corrupt_seed(eroded, BOUNDARY_NOISE, 0.1, seed=9)
    assert seed == expected
    assert DEFAULT_CORRUPTION == (CorruptionStep(ERODE, 2), CorruptionStep(BOUNDARY_NOISE, 0.1))


def test_erosion_lowers_dsc_with_radius(phantom):
    gt = phantom.gt_wt.mask()
    scores = [dsc(corrupt_seed(phantom.gt_wt, ERODE, radius).mask(), gt) for radius in (0, 1, 2, 3)]

    assert scores[0] == 1.0
    assert scores == sorted(scores, reverse=True)
    assert len(set(scores)) == 4
