"""The ``svx`` command."""
import argparse
import json
import logging
import sys

import numpy as np

import svx
from svx import EXIT_OK, EXIT_USAGE, ParamError, SvxError
from svx import bench as bench_module
from svx import features, metrics, phantom, ragraph, refine, schedule, supervoxel
from svx.config import load_config
from svx.file_loader import open_output, read_image, write_image
from svx.similarity import AUTO, SimilarityParams
from svx.volume import LabelMap, Volume


logger = logging.getLogger(__name__)


class ArgumentParser(argparse.ArgumentParser):

    def error(self, message):
        raise ParamError('{}: {}'.format(self.prog, message))


def _channels(text):
    if isinstance(text, (list, tuple)):
        text = ','.join(str(item) for item in text)
    try:
        return tuple(int(item) for item in str(text).split(',') if item.strip())
    except ValueError:
        raise ParamError('Channel list must be comma-separated integers, got {!r}'.format(text))


def _roles(text):
    if isinstance(text, dict):
        return dict((role, int(index)) for role, index in text.items())
    roles = {}
    for item in str(text).split(','):
        role, separator, index = item.partition('=')
        if not separator:
            raise ParamError('Roles must look like T1=0,T1Gd=1,T2=2,FLAIR=3, got {!r}'.format(text))
        try:
            roles[role.strip()] = int(index)
        except ValueError:
            raise ParamError('Channel for role {} must be an integer, got {!r}'.format(role, index))
    return roles


def _tau(value):
    return AUTO if value in (None, AUTO) else float(value)


def _require(args, *names):
    missing = ['--' + name.replace('_', '-') for name in names if getattr(args, name) is None]
    if missing:
        raise ParamError('missing required option(s): {}'.format(', '.join(missing)))


def _read(path, kind):
    image = read_image(path)
    if not isinstance(image, kind):
        raise svx.FormatError('"{}" holds a {}, expected a {}'.format(path, type(image).__name__, kind.__name__))
    return image


# subcommand -> option dests, so config files can be checked against them
_OPTIONS = {}


def _add(sub, command, *flags, **kwargs):
    action = sub.add_argument(*flags, **kwargs)
    _OPTIONS.setdefault(command, set()).add(action.dest)


def _slic_options(sub, command, n_segments=350):
    _add(sub, command, '--n-segments', type=int, default=n_segments)
    _add(sub, command, '--compactness', type=float, default=0.01)
    _add(sub, command, '--sigma', type=float, default=1.0)
    _add(sub, command, '--max-iter', type=int, default=10)
    _add(sub, command, '--min-size-factor', type=float, default=0.25)


def _refine_options(sub, command, segments=None):
    """``segments`` maps regions to the counts used when neither per-region flags nor --n-segments are given."""
    _slic_options(sub, command, None if segments else 350)
    for region in refine.REGIONS:
        fallback = '--n-segments or {}'.format(segments[region]) if segments else '--n-segments'
        _add(sub, command, '--n-segments-' + region.lower(), type=int,
             help='{} supervoxels (default: {})'.format(region, fallback))
    sub.set_defaults(region_segments=dict(segments or {}))
    _add(sub, command, '--sim0', type=float, default=0.1)
    _add(sub, command, '--nc', type=int, default=30)
    _add(sub, command, '--lambda', dest='lambda_', type=float, default=0.5)
    _add(sub, command, '--tau', default=AUTO)
    _add(sub, command, '--fit-threshold', type=float, default=0.5)
    _add(sub, command, '--max-passes', type=int)
    _add(sub, command, '--tc-strategy', choices=(refine.JOINT, refine.SEQUENTIAL), default=refine.JOINT)
    _add(sub, command, '--mutual', choices=(refine.MUTUAL_REGION, refine.MUTUAL_SUPERVOXEL),
         default=refine.MUTUAL_REGION)


def build_parser():
    common = ArgumentParser(add_help=False)
    common.add_argument('--config', help='JSON run configuration ("schema": "svx-config/1"); flags win')
    common.add_argument('--json', action='store_true', help='print a JSON result on stdout')
    common.add_argument('-v', '--verbose', action='count', default=0)

    parser = ArgumentParser(prog='svx', description='Supervoxel pseudo-label refinement.')
    parser.add_argument('--version', action='version', version='%(prog)s ' + svx.__version__)
    commands = parser.add_subparsers(dest='command', metavar='COMMAND')
    commands.required = True

    sub = commands.add_parser('slic', parents=[common], help='build a supervoxel map')
    _add(sub, 'slic', '--input')
    _add(sub, 'slic', '--channels', default='0')
    _add(sub, 'slic', '--output')
    _slic_options(sub, 'slic')

    sub = commands.add_parser('features', parents=[common], help='per-supervoxel feature table as CSV')
    _add(sub, 'features', '--input')
    _add(sub, 'features', '--supervoxels')
    _add(sub, 'features', '--channels', default='0')
    _add(sub, 'features', '--output')

    sub = commands.add_parser('rag', parents=[common], help='dump the region adjacency graph')
    _add(sub, 'rag', '--supervoxels')
    _add(sub, 'rag', '--output')

    sub = commands.add_parser('refine', parents=[common], help='refine WT and TC pseudo-labels')
    _add(sub, 'refine', '--volume')
    _add(sub, 'refine', '--roles', default='T1=0,T1Gd=1,T2=2,FLAIR=3')
    _add(sub, 'refine', '--seed-wt')
    _add(sub, 'refine', '--seed-tc')
    _add(sub, 'refine', '--out-wt')
    _add(sub, 'refine', '--out-tc')
    _add(sub, 'refine', '--log')
    _refine_options(sub, 'refine')

    sub = commands.add_parser('schedule', parents=[common], help='pseudo-label batch schedule')
    _add(sub, 'schedule', '--alpha-f', type=float, default=3.0)
    _add(sub, 'schedule', '--t1', type=int, default=200)
    _add(sub, 'schedule', '--t2', type=int, default=700)
    _add(sub, 'schedule', '--nt', type=int, default=250)
    _add(sub, 'schedule', '--epochs', type=int, default=1000)
    _add(sub, 'schedule', '--refresh-period', type=int, default=200)
    _add(sub, 'schedule', '--step', type=int, default=1)

    sub = commands.add_parser('metrics', parents=[common], help='DSC, HD-95 and IoU of two masks')
    _add(sub, 'metrics', '--pred')
    _add(sub, 'metrics', '--gt')
    _add(sub, 'metrics', '--output')

    sub = commands.add_parser('phantom', parents=[common], help='write a synthetic case')
    _add(sub, 'phantom', '--seed', type=int, default=0)
    _add(sub, 'phantom', '--out-dir')
    _add(sub, 'phantom', '--dims', type=int, default=64)
    _add(sub, 'phantom', '--wt-blobs', type=int, default=3)
    _add(sub, 'phantom', '--noise-sigma', type=float, default=0.02)
    _add(sub, 'phantom', '--bias-amplitude', type=float, default=0.1)

    sub = commands.add_parser('bench', parents=[common], help='run the phantom acceptance suite')
    _add(sub, 'bench', '--cases', type=int, default=20)
    _add(sub, 'bench', '--seed', type=int, default=7)
    _add(sub, 'bench', '--out-dir')
    _add(sub, 'bench', '--dims', type=int, default=64)
    _add(sub, 'bench', '--wt-blobs', type=int, default=3)
    _add(sub, 'bench', '--noise-sigma', type=float, default=0.02)
    _add(sub, 'bench', '--bias-amplitude', type=float, default=0.1)
    _add(sub, 'bench', '--erosion', type=int, default=2)
    _add(sub, 'bench', '--boundary-noise', type=float, default=0.1)
    _refine_options(sub, 'bench', bench_module.BENCH_SEGMENTS)

    return parser, commands.choices


def _slic_params(args, channels, n_segments=None):
    n_segments = args.n_segments if n_segments is None else n_segments
    return supervoxel.SlicParams(n_segments, args.compactness, args.sigma, args.max_iter,
                                 args.min_size_factor, channels)


def _region_segments(args, region):
    for n_segments in (getattr(args, 'n_segments_' + region.lower()), args.n_segments):
        if n_segments is not None:
            return n_segments
    return args.region_segments[region]


def _refine_params(args):
    return refine.RefineParams(
        sim_0=args.sim0, n_c=args.nc, fit_threshold=args.fit_threshold, max_passes=args.max_passes,
        similarity=SimilarityParams(args.lambda_, _tau(args.tau), args.sim0),
        slic=dict((region, _slic_params(args, (0,), _region_segments(args, region))) for region in refine.REGIONS),
        tc_strategy=args.tc_strategy, mutual=args.mutual)


def run_slic(args):
    _require(args, 'input', 'output')
    volume = _read(args.input, Volume)
    supervoxels = supervoxel.slic(volume, _slic_params(args, _channels(args.channels)))
    write_image(supervoxels, args.output)
    return {'supervoxels': supervoxels.label_count, 'n_segments': args.n_segments, 'output': args.output}


def run_features(args):
    _require(args, 'input', 'supervoxels', 'output')
    volume = _read(args.input, Volume)
    table = features.extract_features(volume, _read(args.supervoxels, LabelMap), _channels(args.channels))
    with open_output(args.output) as f:
        features.write_csv(table, f)
    return {'supervoxels': len(table), 'features': table.vectors.shape[1], 'output': args.output}


def run_rag(args):
    _require(args, 'supervoxels', 'output')
    rag = ragraph.build_rag(_read(args.supervoxels, LabelMap))
    with open_output(args.output) as f:
        ragraph.dump_edges(rag, f)
    return {'nodes': len(rag), 'edges': len(rag.edges()), 'output': args.output}


def _region_summary(result):
    return {'status': result.status, 'merges': len(result.merge_log), 'voxels': int(result.mask.mask().sum()),
            'supervoxels': result.supervoxels.label_count}


def run_refine(args):
    _require(args, 'volume', 'seed_wt', 'seed_tc', 'out_wt', 'out_tc')
    volume = _read(args.volume, Volume)
    result = refine.refine_case(volume, _roles(args.roles), _read(args.seed_wt, LabelMap),
                                _read(args.seed_tc, LabelMap), _refine_params(args))
    write_image(result.wt.mask, args.out_wt)
    write_image(result.tc.mask, args.out_tc)
    if args.log:
        records = refine.merge_log_records(refine.WT, result.wt) + refine.merge_log_records(refine.TC, result.tc)
        with open_output(args.log) as f:
            json.dump(records, f, indent=2)
            f.write('\n')
    return {'wt': _region_summary(result.wt), 'tc': _region_summary(result.tc)}


def run_schedule(args):
    params = schedule.ScheduleParams(alpha_f=args.alpha_f, t1=args.t1, t2=args.t2, n_t=args.nt,
                                     refresh_period=args.refresh_period)
    if args.step < 1:
        raise ParamError('--step must be >= 1, got {}'.format(args.step))
    rows = schedule.schedule_table(args.epochs, params, args.step)
    return {
        'rows': [dict(r._asdict()) for r in rows],
        'refresh_epochs': schedule.refresh_epochs(args.epochs, params),
        'plateau_fraction': params.plateau_fraction,
    }


def _schedule_table(result, stream):
    stream.write('epoch,alpha,pseudo_batches,labelled_batches,refresh\n')
    for row in result['rows']:
        stream.write('{},{!r},{},{},{}\n'.format(row['epoch'], row['alpha'], row['pseudo_batches'],
                                              row['labelled_batches'], int(row['refresh'])))


def run_metrics(args):
    _require(args, 'pred', 'gt')
    pred, gt = _read(args.pred, LabelMap), _read(args.gt, LabelMap)
    if not np.allclose(pred.spacing, gt.spacing):
        raise svx.FormatError('"{}" has spacing {} but "{}" has {}; HD-95 needs one voxel spacing'.format(
            args.pred, tuple(pred.spacing), args.gt, tuple(gt.spacing)))
    result = dict(metrics.region_metrics(pred.mask(), gt.mask(), gt.spacing)._asdict())
    if args.output:
        with open_output(args.output) as f:
            json.dump(result, f, indent=2, sort_keys=True)
            f.write('\n')
    return result


def _phantom_params(args, seed):
    return phantom.PhantomParams(dims=(args.dims,) * 3, seed=seed, noise_sigma=args.noise_sigma,
                                 bias_amplitude=args.bias_amplitude, wt_blobs=args.wt_blobs)


def run_phantom(args):
    _require(args, 'out_dir')
    case = phantom.generate_phantom(_phantom_params(args, args.seed))
    phantom.save_phantom(case, args.out_dir)
    return {'out_dir': args.out_dir, 'seed': args.seed, 'wt_voxels': int(case.gt_wt.mask().sum()),
            'tc_voxels': int(case.gt_tc.mask().sum())}


def run_bench(args):
    corruption = [phantom.CorruptionStep(phantom.ERODE, args.erosion),
                  phantom.CorruptionStep(phantom.BOUNDARY_NOISE, args.boundary_noise)]
    params = bench_module.BenchParams(_phantom_params(args, args.seed), _refine_params(args), corruption)
    return bench_module.bench(args.cases, args.seed, params, args.out_dir)


def _print_human(command, result, stream):
    if command == 'schedule':
        _schedule_table(result, stream)
        return
    if command == 'bench':
        result = result['summary']
    width = max(len(key) for key in result)
    for key in sorted(result):
        stream.write('{}  {}\n'.format(key.ljust(width), json.dumps(result[key], sort_keys=True)))


_RUNNERS = {
    'slic': run_slic,
    'features': run_features,
    'rag': run_rag,
    'refine': run_refine,
    'schedule': run_schedule,
    'metrics': run_metrics,
    'phantom': run_phantom,
    'bench': run_bench,
}


def _configure_logging(verbosity):
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, stream=sys.stderr, format='%(levelname)s %(name)s: %(message)s')


def run(argv, stdout=None):
    stdout = stdout or sys.stdout
    try:
        parser, commands = build_parser()
        args = parser.parse_args(argv)
        if args.config:
            values = load_config(args.config, args.command, _OPTIONS)
            commands[args.command].set_defaults(**values)
            args = parser.parse_args(argv)
        _configure_logging(args.verbose)

        result = _RUNNERS[args.command](args)
        if args.json:
            stdout.write(json.dumps(dict(result, command=args.command), sort_keys=True) + '\n')
        else:
            _print_human(args.command, result, stdout)
        return EXIT_OK
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    except SvxError as e:
        sys.stderr.write('svx: error: {}\n'.format(e))
        return e.exit_code


def main():
    sys.exit(run(sys.argv[1:]))
