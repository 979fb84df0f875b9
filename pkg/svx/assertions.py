import numpy as np
from scipy import ndimage

from svx.features import BINS


def assert_well_formed_partition(supervoxels):
    labels = supervoxels.labels
    present = np.unique(labels)

    assert present[0] == 0
    assert np.array_equal(present, np.arange(len(present)))

    for value, bbox in enumerate(ndimage.find_objects(labels + 1)):
        _, count = ndimage.label(labels[bbox] == value)
        assert count == 1, 'supervoxel {} has {} components'.format(value, count)


def assert_well_formed_rag(rag):
    for a in range(len(rag)):
        for b in rag.neighbours(a):
            assert a in rag.neighbours(b)
            assert rag.shared_faces(a, b) > 0
        shared = sum(rag.shared_faces(a, b) for b in rag.neighbours(a))
        assert shared <= rag.total_faces[a]
        assert shared + rag.border_faces[a] == rag.total_faces[a]


def assert_well_formed_feature_table(table):
    channels = len(table.channels)
    vectors = table.vectors.reshape(len(table), channels, -1)

    assert vectors.shape[2] == 36
    assert np.all(np.isfinite(vectors))
    assert np.all(vectors[:, :, 1] >= 0)

    for start in (3, 16, 26):
        assert np.allclose(vectors[:, :, start:start + BINS].sum(axis=2), 1.0, atol=1e-6)

    energy = vectors[:, :, 14]
    assert np.all((energy > 0) & (energy <= 1 + 1e-12))
    assert np.all(vectors[:, :, 15] >= -1e-12)


def assert_well_formed_refinement(result, fitted_members):
    """Growth only, one merge per adjacent supervoxel, members matching the mask."""
    state = result.state
    fitted_members = frozenset(fitted_members)
    merged = [record.supervoxel_id for record in state.merge_log]

    assert len(set(merged)) == len(merged)
    assert not fitted_members & set(merged)
    assert state.members == fitted_members | set(merged)
    assert len(merged) <= len(state.rag)

    members = set(fitted_members)
    for sv in merged:
        assert state.rag.neighbours(sv) & members, 'supervoxel {} was not adjacent when merged'.format(sv)
        members.add(sv)

    expected = np.isin(result.supervoxels.labels, sorted(state.members))
    assert np.array_equal(result.mask.mask(), expected)


def assert_nested(inner, outer):
    assert not np.any(inner.mask() & ~outer.mask())
