"""Pseudo-label seeded supervoxel region refinement.

A seed mask is snapped to the supervoxels it mostly covers; the region then
grows greedily. In each pass the neighbours of the region are visited in
decreasing similarity, at most ``n_c`` of them; a candidate is merged when
its own most similar neighbour already belongs to the region and its
similarity to the region exceeds ``sim_0``. A merge updates the region
statistics and starts a new pass; a pass without a merge ends the growth.

When a candidate picks its most similar neighbour, region members score
with the live region aggregate (``mutual='region'``, the default) or as
individual supervoxels (``mutual='supervoxel'``).
"""
import logging
from collections import namedtuple

import numpy as np

from svx import FLAIR, T1GD, T2, ConfigError, EmptySeedError, NoSeedOverlapError, ParamError
from svx.features import RegionAggregate, extract_features, merge_features
from svx.ragraph import build_rag, find_neighbours
from svx.similarity import Similarity, SimilarityParams
from svx.supervoxel import SlicParams, slic
from svx.volume import LabelMap, check_same_dims


logger = logging.getLogger(__name__)


WT = 'WT'
TC = 'TC'
REGIONS = (WT, TC)

REGION_CHANNELS = {
    WT: (FLAIR,),
    TC: (T1GD, T2),
}
FEATURE_ROLES = (T1GD, T2, FLAIR)

JOINT = 'joint'
SEQUENTIAL = 'sequential'

MUTUAL_REGION = 'region'
MUTUAL_SUPERVOXEL = 'supervoxel'

REFINED = 'refined'
PASSTHROUGH = 'seed_passthrough'


def region_slic(slic):
    """``{WT: SlicParams, TC: SlicParams}`` from one `SlicParams` or a partial mapping."""
    if slic is None:
        slic = {}
    elif isinstance(slic, SlicParams):
        slic = dict((region, slic) for region in REGIONS)
    unknown = set(slic) - set(REGIONS)
    if unknown:
        raise ParamError('SLIC settings given for unknown regions: {}'.format(', '.join(sorted(unknown))))
    return dict((region, slic.get(region) or SlicParams.reference()) for region in REGIONS)


class RefineParams(namedtuple('RefineParams',
                              'sim_0 n_c fit_threshold max_passes similarity slic tc_strategy mutual')):
    __slots__ = ()

    def __new__(cls, sim_0=0.1, n_c=30, fit_threshold=0.5, max_passes=None, similarity=None, slic=None,
                tc_strategy=JOINT, mutual=MUTUAL_REGION):
        similarity = similarity or SimilarityParams()
        similarity = SimilarityParams(similarity.lambda_, similarity.tau, sim_0)
        if int(n_c) < 1:
            raise ParamError('n_c must be >= 1, got {}'.format(n_c))
        if not 0.0 < float(fit_threshold) <= 1.0:
            raise ParamError('fit_threshold must be in (0, 1], got {}'.format(fit_threshold))
        if max_passes is not None and int(max_passes) < 1:
            raise ParamError('max_passes must be >= 1, got {}'.format(max_passes))
        if tc_strategy not in (JOINT, SEQUENTIAL):
            raise ParamError('tc_strategy must be "{}" or "{}", got {!r}'.format(JOINT, SEQUENTIAL, tc_strategy))
        if mutual not in (MUTUAL_REGION, MUTUAL_SUPERVOXEL):
            raise ParamError('mutual must be "{}" or "{}", got {!r}'.format(MUTUAL_REGION, MUTUAL_SUPERVOXEL, mutual))
        return super(RefineParams, cls).__new__(
            cls, similarity.sim_0, int(n_c), float(fit_threshold), None if max_passes is None else int(max_passes),
            similarity, region_slic(slic), tc_strategy, mutual)


MergeRecord = namedtuple('MergeRecord', 'supervoxel_id similarity voxels')


class RegionState(object):

    def __init__(self, table, rag, aggregate):
        self.table = table
        self.rag = rag
        self.aggregate = aggregate
        self.neighbours = find_neighbours(rag, aggregate.members)
        self.merge_log = []

    @property
    def members(self):
        return self.aggregate.members

    @property
    def voxel_count(self):
        return self.aggregate.count

    def merge(self, sv, similarity):
        if sv not in self.neighbours:
            raise ParamError('Supervoxel {} is not adjacent to the region.'.format(sv))
        self.aggregate = merge_features(self.table, self.aggregate, sv)
        self.neighbours = find_neighbours(self.rag, self.aggregate.members)
        self.merge_log.append(MergeRecord(sv, similarity, int(self.table.counts[sv])))

    def __repr__(self):
        return 'RegionState(members={}, neighbours={}, voxels={})'.format(
            len(self.members), len(self.neighbours), self.voxel_count)


def seed_overlap(supervoxels, seed):
    """Fraction of each supervoxel's voxels inside the seed."""
    labels = supervoxels.labels.ravel()
    size = supervoxels.label_count
    inside = np.bincount(labels[seed.mask().ravel()], minlength=size)
    return inside / np.bincount(labels, minlength=size).astype(np.float64)


def fit_pseudolabel(supervoxels, seed, fit_threshold, table, rag):
    check_same_dims(supervoxels, seed)
    if not np.any(seed.mask()):
        raise EmptySeedError()
    members = np.flatnonzero(seed_overlap(supervoxels, seed) > fit_threshold)
    if not members.size:
        raise NoSeedOverlapError(fit_threshold)

    aggregate = RegionAggregate.empty(table)
    for sv in members.tolist():
        aggregate = merge_features(table, aggregate, sv)
    return RegionState(table, rag, aggregate)


def _best(scores):
    """Highest score; ties go to the lowest supervoxel id."""
    return min(scores, key=lambda sv: (-scores[sv], sv))


def choose_partner(state, similarity, candidate, region_score, mutual=MUTUAL_REGION):
    """The candidate's most similar neighbour; ties go to the lowest id."""
    partners = {}
    for q in state.rag.neighbours(candidate):
        if mutual == MUTUAL_REGION and q in state.members:
            partners[q] = region_score
        else:
            partners[q] = similarity.pair(candidate, q)
    return _best(partners)


def grow_region(state, similarity, sim_0, n_c, max_passes, mutual=MUTUAL_REGION):
    passes = 0
    merged = True
    while merged and passes < max_passes:
        passes += 1
        merged = False
        if not state.neighbours:
            break

        profile = state.aggregate.profile()
        scores = {n: similarity.region(profile, state.members, n) for n in state.neighbours}
        # candidates in decreasing similarity; the region is fixed until a merge
        for candidate in sorted(scores, key=lambda sv: (-scores[sv], sv))[:n_c]:
            partner = choose_partner(state, similarity, candidate, scores[candidate], mutual)
            if partner in state.members and scores[candidate] > sim_0:
                state.merge(candidate, scores[candidate])
                logger.debug('Pass %d: merged %d (sim %.4f)', passes, candidate, scores[candidate])
                merged = True
                break
            logger.debug('Pass %d: rejected %d (sim %.4f, best partner %d)', passes, candidate,
                         scores[candidate], partner)
    return passes


class RefinementResult(namedtuple('RefinementResult', 'mask state status supervoxels tau passes')):
    __slots__ = ()

    @property
    def merge_log(self):
        return self.state.merge_log if self.state is not None else []


def refine_region(volume, seed, params, supervoxels=None, channels=None, slic_channels=None, region=WT):
    """Refine ``seed`` on ``volume``; returns a `RefinementResult`.

    ``supervoxels`` defaults to a SLIC map built with ``params.slic[region]``
    over ``slic_channels`` (or that record's channels); features use
    ``channels`` (default: all).
    """
    check_same_dims(volume, seed)
    if not np.any(seed.mask()):
        raise EmptySeedError()
    if supervoxels is None:
        slic_params = params.slic[region]
        if slic_channels is not None:
            slic_params = slic_params._replace(channels=tuple(slic_channels))
        supervoxels = slic(volume, slic_params)
    check_same_dims(volume, supervoxels)
    channels = tuple(range(volume.channels)) if channels is None else tuple(channels)

    table = extract_features(volume, supervoxels, channels)
    rag = build_rag(supervoxels)
    try:
        state = fit_pseudolabel(supervoxels, seed, params.fit_threshold, table, rag)
    except NoSeedOverlapError as e:
        logger.warning('%s Returning the seed unchanged.', e)
        return RefinementResult(LabelMap.from_mask(seed.mask(), seed.spacing), None, PASSTHROUGH, supervoxels,
                                None, 0)

    similarity = Similarity(rag, table, params.similarity)
    max_passes = params.max_passes or len(rag)
    fitted = len(state.members)
    passes = grow_region(state, similarity, params.sim_0, params.n_c, max_passes, params.mutual)

    mask = np.isin(supervoxels.labels, sorted(state.members))
    logger.info('Refined region: %d fitted + %d merged supervoxels, %d voxels, %d passes',
                fitted, len(state.merge_log), int(mask.sum()), passes)
    return RefinementResult(LabelMap.from_mask(mask, seed.spacing), state, REFINED, supervoxels,
                            similarity.tau, passes)


def resolve_roles(roles, volume):
    channels = {}
    for role in FEATURE_ROLES + REGION_CHANNELS[WT] + REGION_CHANNELS[TC]:
        if role not in roles:
            raise ConfigError('Modality role "{}" is not assigned to a channel.'.format(role))
        index = int(roles[role])
        if not 0 <= index < volume.channels:
            raise ConfigError('Role {} maps to channel {}, but the volume has {} channels.'.format(
                role, index, volume.channels))
        channels[role] = index
    return channels


CaseResult = namedtuple('CaseResult', 'wt tc')


def refine_case(volume, roles, seed_wt, seed_tc, params):
    """Refine WT on FLAIR supervoxels and TC on T1Gd/T2 supervoxels; TC is clipped to WT."""
    channels = resolve_roles(roles, volume)
    check_same_dims(volume, seed_wt, seed_tc)
    features = tuple(channels[role] for role in FEATURE_ROLES)

    wt = refine_region(volume, seed_wt, params, channels=features, region=WT,
                       slic_channels=[channels[role] for role in REGION_CHANNELS[WT]])

    if params.tc_strategy == JOINT:
        tc = refine_region(volume, seed_tc, params, channels=features, region=TC,
                           slic_channels=[channels[role] for role in REGION_CHANNELS[TC]])
    else:
        # one single-channel map per TC modality, each pass seeded by the previous result
        seed = seed_tc
        for role in REGION_CHANNELS[TC]:
            tc = refine_region(volume, seed, params, channels=features, region=TC, slic_channels=[channels[role]])
            seed = tc.mask

    clipped = tc.mask.mask() & wt.mask.mask()
    leaked = int(tc.mask.mask().sum() - clipped.sum())
    if leaked:
        logger.info('Clipped %d TC voxels outside the refined WT', leaked)
    tc = tc._replace(mask=LabelMap.from_mask(clipped, seed_tc.spacing))
    return CaseResult(wt, tc)


def merge_log_records(region, result):
    return [{'region': region, 'supervoxel_id': int(record.supervoxel_id),
             'similarity': float(record.similarity), 'voxels': int(record.voxels)}
            for record in result.merge_log]
