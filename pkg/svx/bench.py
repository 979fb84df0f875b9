"""Phantom acceptance suite: corrupt ground truth into seeds, refine, score."""
import json
import logging
import os
from collections import namedtuple
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from svx import FLAIR, T1GD, ParamError
from svx.file_loader import make_output_dir, open_output
from svx.metrics import dsc, hd95
from svx.overlay import save_overlay
from svx.phantom import DEFAULT_CORRUPTION, ROLES, PhantomParams, corrupt_chain, generate_phantom
from svx.refine import TC, WT, RefineParams, refine_case
from svx.supervoxel import SlicParams


logger = logging.getLogger(__name__)


THREADS_ENV = 'SVX_THREADS'

# supervoxels per 64^3 phantom: grid steps of about 5 (WT) and 4 (TC) voxels,
# small enough that an eroded core seed still covers most of some supervoxels
BENCH_SEGMENTS = {WT: 2000, TC: 4000}


def bench_refine_params(**kwargs):
    slic = dict((region, SlicParams(n_segments=n)) for region, n in BENCH_SEGMENTS.items())
    return RefineParams(slic=kwargs.pop('slic', slic), **kwargs)


class BenchParams(namedtuple('BenchParams', 'phantom refine corruption')):
    __slots__ = ()

    def __new__(cls, phantom=None, refine=None, corruption=DEFAULT_CORRUPTION):
        return super(BenchParams, cls).__new__(cls, phantom or PhantomParams(), refine or bench_refine_params(),
                                               tuple(corruption))


def worker_count(cases):
    value = os.environ.get(THREADS_ENV)
    if value is None:
        limit = os.cpu_count() or 1
    else:
        try:
            limit = int(value)
        except ValueError:
            raise ParamError('{} must be an integer, got {!r}'.format(THREADS_ENV, value))
        if limit < 1:
            raise ParamError('{} must be >= 1, got {}'.format(THREADS_ENV, limit))
    return max(1, min(limit, cases))


def _scores(pred, gt, spacing):
    pred, gt = pred.mask(), gt.mask()
    distance = hd95(pred, gt, spacing) if pred.any() and gt.any() else None
    return {'dsc': dsc(pred, gt), 'hd95_mm': distance}


def run_case(index, seed, params, out_dir=None):
    case_seed = seed + index
    phantom = generate_phantom(params.phantom._replace(seed=case_seed))
    spacing = phantom.volume.spacing
    seed_wt = corrupt_chain(phantom.gt_wt, params.corruption, seed=2 * case_seed)
    seed_tc = corrupt_chain(phantom.gt_tc, params.corruption, seed=2 * case_seed + 1)

    result = refine_case(phantom.volume, ROLES, seed_wt, seed_tc, params.refine)
    tc_in_wt = not np.any(result.tc.mask.mask() & ~result.wt.mask.mask())

    row = {
        'case': index,
        'phantom_seed': case_seed,
        'wt': {
            'seed': _scores(seed_wt, phantom.gt_wt, spacing),
            'refined': _scores(result.wt.mask, phantom.gt_wt, spacing),
            'status': result.wt.status,
            'merges': len(result.wt.merge_log),
            'supervoxels': result.wt.supervoxels.label_count,
        },
        'tc': {
            'seed': _scores(seed_tc, phantom.gt_tc, spacing),
            'refined': _scores(result.tc.mask, phantom.gt_tc, spacing),
            'status': result.tc.status,
            'merges': len(result.tc.merge_log),
            'supervoxels': result.tc.supervoxels.label_count,
        },
        'tc_within_wt': tc_in_wt,
    }

    if out_dir is not None:
        volume = phantom.volume
        save_overlay(os.path.join(out_dir, 'case{:03d}_wt.png'.format(index)), volume, ROLES[FLAIR],
                     seed_wt.mask(), result.wt.mask.mask(), phantom.gt_wt.mask())
        save_overlay(os.path.join(out_dir, 'case{:03d}_tc.png'.format(index)), volume, ROLES[T1GD],
                     seed_tc.mask(), result.tc.mask.mask(), phantom.gt_tc.mask())

    logger.info('Case %d: WT DSC %.3f -> %.3f, TC DSC %.3f -> %.3f', index,
                row['wt']['seed']['dsc'], row['wt']['refined']['dsc'],
                row['tc']['seed']['dsc'], row['tc']['refined']['dsc'])
    return row


def _run_case_args(args):
    return run_case(*args)


def _mean(rows, region, stage):
    return float(np.mean([row[region][stage]['dsc'] for row in rows]))


def summarise(rows):
    return {
        'cases': len(rows),
        'mean_seed_wt_dsc': _mean(rows, 'wt', 'seed'),
        'mean_refined_wt_dsc': _mean(rows, 'wt', 'refined'),
        'mean_seed_tc_dsc': _mean(rows, 'tc', 'seed'),
        'mean_refined_tc_dsc': _mean(rows, 'tc', 'refined'),
        'tc_within_wt_fraction': float(np.mean([row['tc_within_wt'] for row in rows])),
    }


def bench(cases, seed, params, out_dir=None, workers=None):
    """Run ``cases`` phantom cases; returns ``{'summary': ..., 'rows': [...]}``, rows in case order."""
    if cases < 1:
        raise ParamError('cases must be >= 1, got {}'.format(cases))
    if out_dir is not None:
        make_output_dir(out_dir)

    workers = worker_count(cases) if workers is None else workers
    jobs = [(index, seed, params, out_dir) for index in range(cases)]
    if workers == 1:
        rows = [_run_case_args(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            rows = list(executor.map(_run_case_args, jobs))

    result = {'summary': summarise(rows), 'rows': rows}
    if out_dir is not None:
        with open_output(os.path.join(out_dir, 'summary.json')) as f:
            json.dump(result, f, indent=2, sort_keys=True)
            f.write('\n')
    return result
