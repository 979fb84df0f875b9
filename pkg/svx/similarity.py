"""Similarity between a region and a candidate supervoxel.

    sim = lambda * exp(-ward / tau) + (1 - lambda) * border

``ward`` is the Ward merge cost on z-scored features and ``border`` the
fraction of the smaller boundary that the two share.
"""
import logging
import math
from collections import namedtuple

import numpy as np

from svx import ParamError
from svx.ragraph import region_boundary_faces, shared_border


logger = logging.getLogger(__name__)


AUTO = 'auto'


class SimilarityParams(namedtuple('SimilarityParams', 'lambda_ tau sim_0')):
    __slots__ = ()

    def __new__(cls, lambda_=0.5, tau=AUTO, sim_0=0.1):
        lambda_ = float(lambda_)
        sim_0 = float(sim_0)
        if tau != AUTO:
            tau = float(tau)
            if not tau > 0 or not math.isfinite(tau):
                raise ParamError('tau must be > 0 or "auto", got {}'.format(tau))
        if not 0.0 <= lambda_ <= 1.0:
            raise ParamError('lambda must be in [0, 1], got {}'.format(lambda_))
        if not 0.0 <= sim_0 <= 1.0:
            raise ParamError('sim_0 must be in [0, 1], got {}'.format(sim_0))
        return super(SimilarityParams, cls).__new__(cls, lambda_, tau, sim_0)


def ward_distance(a, b, table):
    """Increase in within-cluster sum of squares when merging profiles ``a`` and ``b``."""
    if a.count <= 0 or b.count <= 0:
        raise ParamError('Ward distance needs positive voxel counts, got {} and {}'.format(a.count, b.count))
    difference = table.normalise(a.vector) - table.normalise(b.vector)
    weight = float(a.count) * b.count / (a.count + b.count)
    return weight * float(np.dot(difference, difference))


def content_similarity(a, b, table, tau):
    if not tau > 0:
        raise ParamError('tau must be > 0, got {}'.format(tau))
    return math.exp(-ward_distance(a, b, table) / tau)


def border_similarity(rag, members, candidate):
    shared = shared_border(rag, members, candidate)
    if shared == 0:
        return 0.0
    smaller = min(int(rag.total_faces[candidate]), region_boundary_faces(rag, members))
    return min(1.0, float(shared) / smaller)


def resolve_tau(params, rag, table):
    """Median Ward distance over the RAG edges when tau is "auto"; 1.0 if that median is 0."""
    if params.tau != AUTO:
        return params.tau
    distances = [ward_distance(table.profile(a), table.profile(b), table) for a, b, _ in rag.edges()]
    tau = float(np.median(distances)) if distances else 0.0
    if not tau > 0:
        logger.info('Median edge Ward distance is 0; using tau = 1.0')
        return 1.0
    logger.debug('Resolved tau = %.6g from %d edges', tau, len(distances))
    return tau


class Similarity(object):
    """Sim(., .) bound to one supervoxel map, feature table and resolved tau."""

    def __init__(self, rag, table, params, tau=None):
        self.rag = rag
        self.table = table
        self.params = params
        self.tau = resolve_tau(params, rag, table) if tau is None else tau

    def combine(self, content, border):
        weight = self.params.lambda_
        return weight * content + (1.0 - weight) * border

    def region(self, profile, members, candidate):
        """Similarity of a region (live aggregate ``profile``) to an unmerged supervoxel."""
        content = content_similarity(profile, self.table.profile(candidate), self.table, self.tau)
        return self.combine(content, border_similarity(self.rag, members, candidate))

    def pair(self, a, b):
        """Similarity of two individual supervoxels."""
        content = content_similarity(self.table.profile(a), self.table.profile(b), self.table, self.tau)
        return self.combine(content, border_similarity(self.rag, (a,), b))


def sim(region, candidate, rag, table, params, tau=None):
    """Similarity of a `RegionAggregate` to a candidate supervoxel.

    With ``tau=None`` and ``params.tau == "auto"`` every call recomputes the
    median Ward distance over all RAG edges; pass the value of `resolve_tau`
    when scoring many candidates, or score through one `Similarity`.
    """
    if not len(region):
        raise ParamError('Region must not be empty.')
    return Similarity(rag, table, params, tau).region(region.profile(), region.members, candidate)
