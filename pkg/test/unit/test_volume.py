import numpy as np
import pytest

import oracles
from svx import DataError, ParamError
from svx.volume import LabelMap, Volume, check_same_dims, gaussian_smooth, gradient_field, gradient_magnitude


def test_volume_promotes_single_channel_data():
    volume = Volume(np.zeros((4, 5, 6)))

    assert volume.channels == 1
    assert volume.dims == (4, 5, 6)
    assert volume.voxel_count == 120
    assert volume.data.dtype == np.float32


def test_volume_is_read_only():
    volume = Volume(np.zeros((2, 3, 3, 3)))

    with pytest.raises(ValueError):
        volume.data[0, 0, 0, 0] = 1.0


@pytest.mark.parametrize('bad', [np.nan, np.inf, -np.inf])
def test_volume_rejects_non_finite_samples(bad):
    data = np.zeros((3, 3, 3))
    data[1, 1, 1] = bad

    with pytest.raises(DataError):
        Volume(data)


@pytest.mark.parametrize('spacing', [(1.0, 1.0), (1.0, 0.0, 1.0), (1.0, -2.0, 1.0), (1.0, float('nan'), 1.0)])
def test_volume_rejects_bad_spacing(spacing):
    with pytest.raises(ParamError):
        Volume(np.zeros((3, 3, 3)), spacing)


def test_channel_out_of_range():
    volume = Volume(np.zeros((2, 3, 3, 3)))

    with pytest.raises(ParamError):
        volume.channel(2)


def test_select_keeps_order_of_requested_channels():
    data = np.arange(3)[:, np.newaxis, np.newaxis, np.newaxis] * np.ones((3, 2, 2, 2))
    volume = Volume(data, (1.0, 2.0, 3.0))

    selected = volume.select([2, 0])

    assert selected.channels == 2
    assert selected.spacing == (1.0, 2.0, 3.0)
    assert np.all(selected.data[0] == 2)
    assert np.all(selected.data[1] == 0)


def test_label_map_rejects_negative_and_float_labels():
    with pytest.raises(ParamError):
        LabelMap(-np.ones((2, 2, 2), dtype=int))
    with pytest.raises(ParamError):
        LabelMap(np.zeros((2, 2, 2), dtype=float))


def test_label_map_from_mask():
    mask = np.zeros((3, 3, 3), dtype=bool)
    mask[1, 1, 1] = True

    labels = LabelMap.from_mask(mask)

    assert labels.label_count == 2
    assert labels.labels.dtype == np.int64
    assert np.array_equal(labels.mask(), mask)


def test_compact_keeps_relative_order():
    labels = LabelMap(np.array([3, 7, 3, 10, 7, 3, 10, 10]).reshape(2, 2, 2))

    compact = labels.compact()

    assert np.array_equal(compact.labels.ravel(), [0, 1, 0, 2, 1, 0, 2, 2])


def test_check_same_dims():
    check_same_dims(Volume(np.zeros((3, 4, 5))), LabelMap(np.zeros((3, 4, 5), dtype=int)))

    with pytest.raises(ParamError):
        check_same_dims(Volume(np.zeros((3, 4, 5))), LabelMap(np.zeros((3, 4, 6), dtype=int)))


def test_gaussian_smooth_with_zero_sigma_is_identity(rng):
    volume = Volume(rng.random((2, 5, 5, 5)))

    assert gaussian_smooth(volume, 0) == volume


def test_gaussian_smooth_keeps_constant_volume():
    volume = Volume(np.full((6, 6, 6), 0.25))

    smoothed = gaussian_smooth(volume, 1.5)

    assert np.allclose(smoothed.data, 0.25)


def test_gaussian_smooth_spreads_an_impulse_symmetrically():
    data = np.zeros((9, 9, 9))
    data[4, 4, 4] = 1.0

    smoothed = gaussian_smooth(Volume(data), 1.0).data[0]

    assert smoothed[4, 4, 4] < 1.0
    assert np.isclose(smoothed[3, 4, 4], smoothed[5, 4, 4])
    assert np.isclose(smoothed[4, 3, 4], smoothed[4, 4, 5])
    assert np.isclose(smoothed.sum(), 1.0, atol=1e-5)


@pytest.mark.parametrize('sigma', [-1.0, float('inf')])
def test_gaussian_smooth_rejects_bad_sigma(sigma):
    with pytest.raises(ParamError):
        gaussian_smooth(Volume(np.zeros((3, 3, 3))), sigma)


def test_gradient_of_a_ramp():
    x = np.arange(5, dtype=float)[:, np.newaxis, np.newaxis] * np.ones((1, 4, 3))

    gx, gy, gz = gradient_field(Volume(2 * x), 0)

    assert np.allclose(gx, 2.0)
    assert np.allclose(gy, 0.0)
    assert np.allclose(gz, 0.0)
    assert np.allclose(gradient_magnitude((gx, gy, gz)), 2.0)


def test_gradient_along_a_single_voxel_axis_is_zero():
    _, _, gz = gradient_field(Volume(np.arange(12, dtype=float).reshape(3, 4, 1)), 0)

    assert gz.shape == (3, 4, 1)
    assert np.all(gz == 0)


@pytest.mark.parametrize('sigma', [0.6, 1.0])
def test_gaussian_smooth_matches_dense_convolution(rng, sigma):
    volume = Volume(rng.random((2, 5, 6, 4)))

    smoothed = gaussian_smooth(volume, sigma)

    for c in range(2):
        expected = oracles.gaussian_smooth(volume.data[c].astype(np.float64), sigma)
        assert np.allclose(smoothed.data[c], expected, atol=1e-6)


@pytest.mark.parametrize('shape', [(5, 5, 5), (2, 5, 3), (5, 1, 4)])
def test_gradient_matches_finite_differences(rng, shape):
    volume = Volume(rng.random(shape))

    gradients = gradient_field(volume, 0)

    expected = oracles.gradient(volume.data[0].astype(np.float64))
    for got, want in zip(gradients, expected):
        assert got.dtype == np.float64
        assert np.allclose(got, want, atol=1e-12)
