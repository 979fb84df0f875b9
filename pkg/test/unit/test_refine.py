import logging

import numpy as np
import pytest

import oracles
from svx import ConfigError, EmptySeedError, NoSeedOverlapError, ParamError
from svx import refine as refine_module
from svx.assertions import assert_nested, assert_well_formed_refinement
from svx.features import extract_features
from svx.phantom import ROLES, PhantomParams, corrupt_seed, generate_phantom
from svx.ragraph import build_rag
from svx.refine import (JOINT, MUTUAL_REGION, MUTUAL_SUPERVOXEL, PASSTHROUGH, REFINED, SEQUENTIAL, TC, WT,
                        RefineParams, choose_partner, fit_pseudolabel, grow_region, merge_log_records,
                        refine_case, refine_region, region_slic, resolve_roles, seed_overlap)
from svx.similarity import Similarity, SimilarityParams
from svx.supervoxel import SlicParams
from svx.volume import LabelMap, Volume


def slab_seed(*slabs):
    mask = np.zeros((12, 4, 4), dtype=bool)
    for slab in slabs:
        mask[2 * slab:2 * slab + 2] = True
    return LabelMap.from_mask(mask)


@pytest.mark.parametrize('kwargs', [
    {'n_c': 0},
    {'fit_threshold': 0},
    {'fit_threshold': 1.5},
    {'max_passes': 0},
    {'tc_strategy': 'parallel'},
    {'sim_0': -0.5},
    {'mutual': 'both'},
])
def test_invalid_params(kwargs):
    with pytest.raises(ParamError):
        RefineParams(**kwargs)


def test_sim_0_is_shared_with_similarity_params():
    params = RefineParams(sim_0=0.3, similarity=SimilarityParams(lambda_=0.8))

    assert params.similarity == SimilarityParams(lambda_=0.8, sim_0=0.3)
    assert params.sim_0 == 0.3


def test_seed_overlap(bright_block):
    _, supervoxels = bright_block
    mask = np.zeros((12, 4, 4), dtype=bool)
    mask[4:7] = True

    overlap = seed_overlap(supervoxels, LabelMap.from_mask(mask))

    assert overlap.tolist() == [0.0, 0.0, 1.0, 0.5, 0.0, 0.0]


def test_fit_uses_strict_threshold(bright_block):
    volume, supervoxels = bright_block
    table, rag = extract_features(volume, supervoxels, (0,)), build_rag(supervoxels)
    mask = np.zeros((12, 4, 4), dtype=bool)
    mask[4:7] = True

    state = fit_pseudolabel(supervoxels, LabelMap.from_mask(mask), 0.5, table, rag)

    assert state.members == {2}
    assert state.neighbours == {1, 3}


def test_fit_of_empty_seed(bright_block):
    volume, supervoxels = bright_block
    table, rag = extract_features(volume, supervoxels, (0,)), build_rag(supervoxels)

    with pytest.raises(EmptySeedError):
        fit_pseudolabel(supervoxels, LabelMap(np.zeros((12, 4, 4), dtype=int)), 0.5, table, rag)


def test_fit_without_overlap(bright_block):
    volume, supervoxels = bright_block
    table, rag = extract_features(volume, supervoxels, (0,)), build_rag(supervoxels)
    mask = np.zeros((12, 4, 4), dtype=bool)
    mask[4] = True

    with pytest.raises(NoSeedOverlapError):
        fit_pseudolabel(supervoxels, LabelMap.from_mask(mask), 0.5, table, rag)


def test_region_state_merges_only_neighbours(bright_block):
    volume, supervoxels = bright_block
    table, rag = extract_features(volume, supervoxels, (0,)), build_rag(supervoxels)
    state = fit_pseudolabel(supervoxels, slab_seed(2), 0.5, table, rag)

    with pytest.raises(ParamError):
        state.merge(5, 0.9)

    state.merge(3, 0.9)
    assert state.members == {2, 3}
    assert state.neighbours == {1, 4}
    assert state.voxel_count == 64


def test_region_grows_into_similar_slab(bright_block):
    volume, supervoxels = bright_block

    result = refine_region(volume, slab_seed(2), RefineParams(sim_0=0.3), supervoxels=supervoxels)

    assert result.status == REFINED
    assert result.state.members == {2, 3}
    assert [r.supervoxel_id for r in result.merge_log] == [3]
    assert result.merge_log[0].similarity == pytest.approx(0.625)
    assert result.merge_log[0].voxels == 32
    assert result.tau == pytest.approx(216.0)
    assert result.passes == 2
    assert_well_formed_refinement(result, {2})


def test_low_threshold_keeps_growing(bright_block):
    volume, supervoxels = bright_block

    result = refine_region(volume, slab_seed(2), RefineParams(sim_0=0.1), supervoxels=supervoxels)

    assert {2, 3} <= result.state.members
    assert result.merge_log[0].supervoxel_id == 3
    assert_well_formed_refinement(result, {2})


def test_perfect_seed_is_kept(bright_block):
    volume, supervoxels = bright_block
    seed = slab_seed(2, 3)

    result = refine_region(volume, seed, RefineParams(sim_0=0.5), supervoxels=supervoxels)

    assert result.merge_log == []
    assert result.passes == 1
    assert result.mask == seed


def test_max_passes_limits_growth(bright_block):
    volume, supervoxels = bright_block

    result = refine_region(volume, slab_seed(2), RefineParams(sim_0=0.1, max_passes=1), supervoxels=supervoxels)

    assert result.state.members == {2, 3}
    assert result.passes == 1


def test_higher_threshold_never_grows_more(bright_block):
    volume, supervoxels = bright_block
    sizes = [len(refine_region(volume, slab_seed(2), RefineParams(sim_0=s), supervoxels=supervoxels).state.members)
             for s in (0.0, 0.1, 0.3, 0.7)]

    assert sizes == sorted(sizes, reverse=True)


def test_seed_without_overlap_passes_through(bright_block, caplog):
    volume, supervoxels = bright_block
    mask = np.zeros((12, 4, 4), dtype=bool)
    mask[4] = True
    seed = LabelMap.from_mask(mask)

    with caplog.at_level(logging.WARNING, logger='svx.refine'):
        result = refine_region(volume, seed, RefineParams(), supervoxels=supervoxels)

    assert result.status == PASSTHROUGH
    assert result.mask == seed
    assert result.merge_log == []
    assert 'unchanged' in caplog.text


def test_refine_of_empty_seed(bright_block):
    volume, supervoxels = bright_block

    with pytest.raises(EmptySeedError):
        refine_region(volume, LabelMap(np.zeros((12, 4, 4), dtype=int)), RefineParams(), supervoxels=supervoxels)


def test_refine_rejects_mismatched_seed(bright_block):
    volume, supervoxels = bright_block

    with pytest.raises(ParamError):
        refine_region(volume, LabelMap(np.ones((12, 4, 5), dtype=int)), RefineParams(), supervoxels=supervoxels)


def test_merge_log_is_reproducible(bright_block):
    volume, supervoxels = bright_block
    runs = [refine_region(volume, slab_seed(2), RefineParams(sim_0=0.1), supervoxels=supervoxels)
            for _ in range(2)]

    records = merge_log_records(WT, runs[0])
    assert records == merge_log_records(WT, runs[1])
    assert records[0]['region'] == WT
    assert records[0]['supervoxel_id'] == 3
    assert records[0]['voxels'] == 32
    assert records[0]['similarity'] == pytest.approx(0.625)


def test_grown_candidate_must_prefer_the_region(bright_block):
    volume, supervoxels = bright_block
    table, rag = extract_features(volume, supervoxels, (0,)), build_rag(supervoxels)
    similarity = Similarity(rag, table, SimilarityParams())

    # gradient features tie the edge slabs to their bright neighbours
    assert similarity.pair(1, 2) > similarity.pair(1, 0)
    assert similarity.pair(3, 2) > similarity.pair(3, 4)


@pytest.mark.parametrize('roles', [
    {'T1': 0, 'T1Gd': 1, 'T2': 2},
    {'T1': 0, 'T1Gd': 1, 'T2': 2, 'FLAIR': 7},
])
def test_resolve_roles_rejects_incomplete_mapping(roles):
    with pytest.raises(ConfigError):
        resolve_roles(roles, Volume(np.zeros((4, 4, 4, 4))))


@pytest.fixture(scope='module')
def phantom_case():
    phantom = generate_phantom(PhantomParams(dims=(32, 32, 32), seed=5))
    seed_wt = corrupt_seed(phantom.gt_wt, 'erode', 1)
    seed_tc = corrupt_seed(phantom.gt_tc, 'erode', 1)
    return phantom, seed_wt, seed_tc


@pytest.mark.parametrize('strategy', [JOINT, SEQUENTIAL])
def test_refine_case_keeps_tc_inside_wt(phantom_case, strategy):
    phantom, seed_wt, seed_tc = phantom_case
    params = RefineParams(slic=SlicParams(n_segments=80), tc_strategy=strategy)

    result = refine_case(phantom.volume, ROLES, seed_wt, seed_tc, params)

    assert_nested(result.tc.mask, result.wt.mask)
    assert result.wt.mask.dims == phantom.gt_wt.dims
    for region in (result.wt, result.tc):
        assert region.status in (REFINED, PASSTHROUGH)
    if result.wt.status == REFINED:
        assert len(result.wt.merge_log) <= result.wt.supervoxels.label_count


def test_refine_case_uses_region_channels(phantom_case, mocker):
    phantom, seed_wt, seed_tc = phantom_case
    spy = mocker.spy(refine_module, 'refine_region')

    refine_case(phantom.volume, ROLES, seed_wt, seed_tc, RefineParams(slic=SlicParams(n_segments=80)))

    assert [call.kwargs['slic_channels'] for call in spy.call_args_list] == [[3], [1, 2]]
    assert all(call.kwargs['channels'] == (1, 2, 3) for call in spy.call_args_list)
    assert [call.kwargs['region'] for call in spy.call_args_list] == [WT, TC]


def test_region_slic_from_one_record():
    params = SlicParams(n_segments=80)

    assert region_slic(params) == {WT: params, TC: params}


def test_region_slic_fills_missing_regions():
    slic_params = region_slic({TC: SlicParams(n_segments=900)})

    assert slic_params[TC].n_segments == 900
    assert slic_params[WT] == SlicParams.reference()
    assert RefineParams().slic == {WT: SlicParams.reference(), TC: SlicParams.reference()}


def test_region_slic_rejects_unknown_regions():
    with pytest.raises(ParamError):
        RefineParams(slic={'ET': SlicParams()})


class FixedSimilarity(object):
    """Similarity with preset region scores and symmetric pair scores."""

    def __init__(self, region_scores, pair_scores):
        self.region_scores = region_scores
        self.pair_scores = dict((frozenset(pair), score) for pair, score in pair_scores.items())

    def region(self, profile, members, candidate):
        return self.region_scores[candidate]

    def pair(self, a, b):
        return self.pair_scores[frozenset((a, b))]


@pytest.fixture
def fixed_similarity():
    return FixedSimilarity({0: 0.0, 1: 0.05, 3: 0.6, 4: 0.05, 5: 0.0},
                           {(0, 1): 0.3, (1, 2): 0.1, (2, 3): 0.2, (3, 4): 0.5, (4, 5): 0.1})


@pytest.fixture
def slab_state(bright_block):
    volume, supervoxels = bright_block
    table, rag = extract_features(volume, supervoxels, (0,)), build_rag(supervoxels)
    return fit_pseudolabel(supervoxels, slab_seed(2), 0.5, table, rag)


@pytest.mark.parametrize('mutual, expected', [
    (MUTUAL_REGION, 2),
    (MUTUAL_SUPERVOXEL, 4),
])
def test_choose_partner(slab_state, fixed_similarity, mutual, expected):
    assert choose_partner(slab_state, fixed_similarity, 3, 0.6, mutual) == expected


def test_choose_partner_breaks_ties_by_lowest_id(slab_state):
    similarity = FixedSimilarity({}, {(2, 3): 0.5, (3, 4): 0.5})

    assert choose_partner(slab_state, similarity, 3, 0.5, MUTUAL_SUPERVOXEL) == 2
    assert choose_partner(slab_state, similarity, 3, 0.5, MUTUAL_REGION) == 2


@pytest.mark.parametrize('mutual, members, passes', [
    (MUTUAL_REGION, {2, 3}, 2),
    (MUTUAL_SUPERVOXEL, {2}, 1),
])
def test_grow_region_by_mutual_mode(slab_state, fixed_similarity, mutual, members, passes):
    assert grow_region(slab_state, fixed_similarity, 0.1, 30, 10, mutual) == passes
    assert slab_state.members == members
    assert [record.similarity for record in slab_state.merge_log] == [0.6] * (len(members) - 1)


def block_case(seed):
    """Twelve-voxel cube of 27 4x4x4 blocks with random means and a noisy four-block seed."""
    rng = np.random.default_rng(seed)
    labels = np.kron(np.arange(27).reshape(3, 3, 3), np.ones((4, 4, 4), dtype=int))
    means = rng.random((2, 27))
    values = means[:, labels] + rng.normal(0, 0.05, size=(2,) + labels.shape)
    mask = np.isin(labels, rng.choice(27, size=4, replace=False))
    flips = rng.random(labels.shape) < 0.05
    return Volume(values), LabelMap(labels), LabelMap.from_mask(mask ^ flips)


@pytest.mark.parametrize('mutual', [MUTUAL_REGION, MUTUAL_SUPERVOXEL])
@pytest.mark.parametrize('seed', range(4))
def test_random_block_refinement(seed, mutual):
    volume, supervoxels, seed_mask = block_case(seed)
    fitted = oracles.overlap_members(supervoxels.labels, seed_mask.mask(), 0.5)
    params = RefineParams(sim_0=0.1, mutual=mutual)

    result = refine_region(volume, seed_mask, params, supervoxels=supervoxels)
    again = refine_region(volume, seed_mask, params, supervoxels=supervoxels)

    assert len(fitted) == 4
    assert result.status == REFINED
    assert_well_formed_refinement(result, fitted)
    assert all(record.similarity > 0.1 for record in result.merge_log)
    assert len(result.merge_log) <= 27 - len(fitted)
    assert result.passes <= len(result.state.rag)
    assert merge_log_records(WT, result) == merge_log_records(WT, again)


@pytest.mark.parametrize('mutual', [MUTUAL_REGION, MUTUAL_SUPERVOXEL])
@pytest.mark.parametrize('seed', range(4))
def test_random_block_regions_shrink_as_threshold_rises(seed, mutual):
    volume, supervoxels, seed_mask = block_case(seed)

    members = [refine_region(volume, seed_mask, RefineParams(sim_0=s, mutual=mutual),
                             supervoxels=supervoxels).state.members
               for s in (0.0, 0.05, 0.1, 0.2, 0.4, 0.8)]

    for lower, higher in zip(members, members[1:]):
        assert higher <= lower
