"""Pseudo-label batch schedule of the semi-supervised training loop.

The weighting factor ramps linearly from 0 at ``T1`` to ``alpha_f`` at
``T2``; an epoch of ``N_T`` batches then holds
``N_T * alpha / (alpha + 1)`` pseudo-labelled batches.
"""
import math
from collections import namedtuple

from svx import ParamError


class ScheduleParams(namedtuple('ScheduleParams', 'alpha_f t1 t2 n_t p1 p2 refresh_period')):
    __slots__ = ()

    def __new__(cls, alpha_f=3.0, t1=200, t2=700, n_t=250, p1=5, p2=326, refresh_period=200):
        params = super(ScheduleParams, cls).__new__(
            cls, float(alpha_f), int(t1), int(t2), int(n_t), int(p1), int(p2), int(refresh_period))
        if not params.t1 < params.t2:
            raise ParamError('T1 must be smaller than T2, got {} and {}'.format(params.t1, params.t2))
        if params.alpha_f < 0:
            raise ParamError('alpha_f must be >= 0, got {}'.format(params.alpha_f))
        if params.n_t < 1:
            raise ParamError('N_T must be >= 1, got {}'.format(params.n_t))
        if params.p1 < 0 or params.p2 < 0:
            raise ParamError('Patient counts must be >= 0, got {} and {}'.format(params.p1, params.p2))
        if params.refresh_period < 1:
            raise ParamError('refresh_period must be >= 1, got {}'.format(params.refresh_period))
        return params

    @classmethod
    def reference(cls):
        return cls()

    @property
    def plateau_fraction(self):
        return self.alpha_f / (self.alpha_f + 1.0)


def _check_epoch(e):
    if e < 0:
        raise ParamError('Epoch must be >= 0, got {}'.format(e))


def alpha(e, params):
    _check_epoch(e)
    if e < params.t1:
        return 0.0
    if e < params.t2:
        return float(e - params.t1) / (params.t2 - params.t1) * params.alpha_f
    return params.alpha_f


def round_half_up(value):
    return int(math.floor(value + 0.5))


def pseudo_batches(e, params):
    weight = alpha(e, params)
    return round_half_up(params.n_t * weight / (weight + 1.0))


def refresh_epochs(total_epochs, params):
    period = params.refresh_period
    return list(range(period, total_epochs, period))


ScheduleRow = namedtuple('ScheduleRow', 'epoch alpha pseudo_batches labelled_batches refresh')


def schedule_table(total_epochs, params, step=1):
    refresh = set(refresh_epochs(total_epochs, params))
    rows = []
    for e in range(0, total_epochs, step):
        pseudo = pseudo_batches(e, params)
        rows.append(ScheduleRow(e, alpha(e, params), pseudo, params.n_t - pseudo, e in refresh))
    return rows


Stage = namedtuple('Stage', 'name start end patients')


def training_stages(total_epochs, params):
    """Supervised warm-up, then alternating pseudo-label inference and joint training."""
    if total_epochs < params.refresh_period:
        raise ParamError('Training of {} epochs ends before the first refresh at {}'.format(
            total_epochs, params.refresh_period))
    refreshes = refresh_epochs(total_epochs, params)
    stages = [Stage('supervised', 0, params.refresh_period, params.p1)]
    for start, end in zip(refreshes, refreshes[1:] + [total_epochs]):
        stages.append(Stage('inference', start, start, params.p2))
        stages.append(Stage('joint', start, end, params.p1 + params.p2))
    return stages
