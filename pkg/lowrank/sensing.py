"""Alternating minimization for matrix sensing.

Given b = A(M) for a rank-k matrix M, `altmin_sense` alternates exact
least-squares solves for the two factors of X = U V^T, starting from the top-k
left singular vectors of A^T(b). `stage_altmin` grows the rank one stage at a
time, seeding each stage with a single projected-gradient (SVP) step.

>>> from lowrank.operators import single_entry_ensemble, apply_sensing
>>> M = np.outer([1., 2., 0.], [0., 1., 1.])
>>> op = single_entry_ensemble(3, 3)
>>> pair, trace = altmin_sense(op, apply_sensing(op, M), k=1)
>>> bool(np.allclose(pair.product(), M))
True
>>> trace.column('iter')
[0, 1]
"""

import logging
import warnings
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import scipy.linalg

from .decorators import logs, returns
from .errors import (ConfigInvalid, DegenerateInit, NonFiniteEntries, RankDeficient, ShapeMismatch,
                     SingularSubproblem, ZeroMatrix)
from .linalg import (SvdResult, as_matrix, least_squares, qr_decompose, subspace_distance,
                     svd_topk, SVD_MAX_SWEEPS, SVD_RESIDUAL_TOL)
from .misc import Stopwatch
from .operators import apply_sensing, adjoint_sensing
from .table import Table

__all__ = ['FactorPair', 'SolverConfig', 'TraceRecord', 'ConvergenceTrace', 'TraceRecorder',
           'init_sensing', 'altmin_sense', 'stage_altmin', 'residual',
           'factor_design', 'solve_factor', 'orthonormalize',
           'STANDARD', 'ORTHONORMALIZED', 'PARTITIONED', 'FULL', 'CSV_COLUMNS',
           'SVP_STEP', 'DEGENERATE_TOL']

logger = logging.getLogger(__name__)


STANDARD = 'standard'
ORTHONORMALIZED = 'orthonormalized'
PARTITIONED = 'partitioned'
FULL = 'full'

SVP_STEP = 0.75
DEGENERATE_TOL = 1e-12     # sigma_k / sigma_1 below this cannot seed k directions

CSV_COLUMNS = ('iter', 'residual', 'dist_u', 'dist_v', 'elapsed_ms')


@dataclass(frozen=True, eq=False)
class FactorPair:
    """The iterate X = U_hat @ V_hat.T."""
    U_hat: np.ndarray
    V_hat: np.ndarray

    def __post_init__(self):
        U = as_matrix(self.U_hat, 'U_hat')
        V = as_matrix(self.V_hat, 'V_hat')
        if U.shape[1] != V.shape[1]:
            raise ShapeMismatch(f'factors disagree on k: {U.shape[1]} vs {V.shape[1]}')
        object.__setattr__(self, 'U_hat', U)
        object.__setattr__(self, 'V_hat', V)

    @property
    def k(self):
        return self.U_hat.shape[1]

    @property
    def shape(self):
        return self.U_hat.shape[0], self.V_hat.shape[0]

    def product(self):
        return self.U_hat @ self.V_hat.T


@dataclass(frozen=True)
class SolverConfig:
    """Knobs shared by the sensing and completion solvers.

    Attributes:
        T: alternations (per stage for `stage_altmin`).
        tol: stop once residual <= tol * ||b||.
        mode: 'standard' or 'orthonormalized' (QR each iterate before the
            opposite solve).
        ls_regularizer: ridge added to every least-squares half-step.
        seed: reserved; no solver draws random numbers (instances and
            partitions are seeded by the harness).
        schedule: completion only; 'partitioned' consumes a fresh part of
            Omega per half-step, 'full' reuses the whole observed set.
    """
    T: int = 50
    tol: float = 1e-12
    mode: str = STANDARD
    ls_regularizer: float = 0.0
    seed: int = 0
    schedule: str = PARTITIONED
    svd_max_sweeps: int = SVD_MAX_SWEEPS
    svd_tol: float = SVD_RESIDUAL_TOL

    def __post_init__(self):
        errors = {}
        if not isinstance(self.T, (int, np.integer)) or self.T < 1:
            errors['T'] = f'must be an integer >= 1, got {self.T!r}'
        if not self.tol >= 0:
            errors['tol'] = f'must be >= 0, got {self.tol!r}'
        if self.mode not in (STANDARD, ORTHONORMALIZED):
            errors['mode'] = f'must be {STANDARD!r} or {ORTHONORMALIZED!r}, got {self.mode!r}'
        if not self.ls_regularizer >= 0:
            errors['ls_regularizer'] = f'must be >= 0, got {self.ls_regularizer!r}'
        if self.schedule not in (PARTITIONED, FULL):
            errors['schedule'] = f'must be {PARTITIONED!r} or {FULL!r}, got {self.schedule!r}'
        if self.svd_max_sweeps < 1:
            errors['svd_max_sweeps'] = 'must be >= 1'
        if errors:
            raise ConfigInvalid(errors)

    def svd_options(self):
        return {'max_sweeps': self.svd_max_sweeps, 'tol': self.svd_tol}


@dataclass
class TraceRecord:
    """One solver iteration. Record 0 is the initializer."""
    iter: int
    residual: float
    dist_u: Optional[float] = None
    dist_v: Optional[float] = None
    elapsed_ms: Optional[float] = None
    residual_half: Optional[float] = None   # after the V-solve
    rel_error: Optional[float] = None
    stage: Optional[int] = None
    partition_v: Optional[int] = None
    partition_u: Optional[int] = None
    flags: Tuple[str, ...] = ()


class ConvergenceTrace:
    """Per-iteration records of a solver run, with iter strictly increasing from 0."""

    def __init__(self, records=()):
        self.records: List[TraceRecord] = []
        for record in records:
            self.append(record)

    def append(self, record):
        if self.records:
            valid = record.iter > self.records[-1].iter
        else:
            valid = record.iter == 0
        if not valid:
            raise ValueError(f'trace iter must increase strictly from 0, got {record.iter} '
                             f'after {len(self)} records')
        self.records.append(record)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, index):
        return self.records[index]

    def __repr__(self):
        return f'{self.__class__.__name__}(records={len(self)})'

    def column(self, name):
        return [getattr(r, name) for r in self.records]

    @property
    def last(self):
        return self.records[-1]

    @property
    def stage_boundaries(self):
        """Iter index where each stage starts."""
        starts, current = [], object()
        for r in self.records:
            if r.stage is not None and r.stage != current:
                starts.append(r.iter)
                current = r.stage
        return starts

    def stage_end(self, stage):
        """Last record of `stage`."""
        return [r for r in self.records if r.stage == stage][-1]

    def flagged(self, flag):
        return [r.iter for r in self.records if flag in r.flags]

    def to_table(self, timing=True):
        data = {c: self.column(c) for c in CSV_COLUMNS}
        if not timing:
            data['elapsed_ms'] = [None] * len(self)
        return Table(data)

    @classmethod
    def from_table(cls, table):
        missing = [c for c in CSV_COLUMNS if c not in table.columns]
        if missing:
            raise ValueError(f'trace table lacks columns {missing}')

        def number(value):
            return None if value is None else float(value)

        return cls(TraceRecord(iter=int(row['iter']),
                               residual=float(row['residual']),
                               dist_u=number(row['dist_u']),
                               dist_v=number(row['dist_v']),
                               elapsed_ms=number(row['elapsed_ms']))
                   for row in table)


def _distance(X, basis):
    try:
        return subspace_distance(X, basis)
    except ZeroMatrix:
        return 1.0


class TraceRecorder:
    """Builds a ConvergenceTrace; ground-truth columns only when `truth` is given."""

    def __init__(self, truth: Optional[SvdResult] = None):
        self.trace = ConvergenceTrace()
        self.truth = truth
        self.clock = Stopwatch()
        if truth is not None:
            self.M = truth.reconstruct()
            self.M_norm = float(np.linalg.norm(self.M)) or 1.0

    def record(self, U, V, residual, **extra):
        dist_u = dist_v = rel_error = None
        if self.truth is not None:
            rank = U.shape[1]
            dist_u = _distance(U, self.truth.U[:, :rank])
            if V is None:
                rel_error = float(np.linalg.norm(self.M)) / self.M_norm
            else:
                dist_v = _distance(V, self.truth.V[:, :rank])
                rel_error = float(np.linalg.norm(self.M - U @ V.T)) / self.M_norm
        record = TraceRecord(iter=len(self.trace), residual=float(residual),
                             dist_u=dist_u, dist_v=dist_v,
                             elapsed_ms=self.clock.elapsed_ms, rel_error=rel_error, **extra)
        self.trace.append(record)
        logger.debug('iter %d: residual=%.3e dist_u=%s dist_v=%s', record.iter, record.residual,
                     dist_u, dist_v)
        return record


def _measurements(op, b):
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if b.shape[0] != op.d:
        raise ShapeMismatch(f'operator has {op.d} measurements, got {b.shape[0]}')
    if not np.all(np.isfinite(b)):
        raise NonFiniteEntries('measurements must be finite')
    return b


def residual(op, b, pair):
    """||A(U V^T) - b||_2."""
    b = _measurements(op, b)
    if pair.shape != op.shape:
        raise ShapeMismatch(f'pair is {pair.shape}, operator acts on {op.shape}')
    return float(np.linalg.norm(apply_sensing(op, pair.product()) - b))


def factor_design(op, fixed, side):
    """Dense design of a half-step: row i is vec(A_i^T U) for side 'v'
    (fixed = U) or vec(A_i V) for side 'u' (fixed = V)."""
    if side == 'v':
        blocks = np.tensordot(op.mats, fixed, axes=([1], [0]))
    elif side == 'u':
        blocks = np.tensordot(op.mats, fixed, axes=([2], [0]))
    else:
        raise ValueError(f"side must be 'u' or 'v', got {side!r}")
    return blocks.reshape(op.d, -1)


@returns('factor', 'singular')
def solve_factor(op, b, fixed, side, ridge=0.0, method='qr'):
    """argmin over one factor of ||A(U V^T) - b||^2 with the other one fixed.

    `method='normal'` solves the normal equations instead of the QR path; it
    exists to cross-check the QR path on small instances.
    """
    k = fixed.shape[1]
    design = factor_design(op, fixed, side)
    q = design.shape[1]
    if method == 'qr':
        x, rank = least_squares(design, b, ridge)
    elif method == 'normal':
        gram = design.T @ design + ridge * np.eye(q)
        x = scipy.linalg.solve(gram, design.T @ b, assume_a='pos')
        rank = q
    else:
        raise ValueError(f'unknown method {method!r}')
    return x.reshape(-1, k), rank < q


def orthonormalize(X):
    """Q factor of X, or X itself when its columns are dependent."""
    try:
        return qr_decompose(X).Q, False
    except RankDeficient:
        return X, True


def _flag_singular(side, t):
    warnings.warn(f'rank-deficient {side.upper()}-solve at iteration {t}; '
                  'using the minimum-norm solution', SingularSubproblem, stacklevel=3)
    return f'singular_{side}'


def init_sensing(op, b, k, cfg=None):
    """Top-k left singular vectors of A^T(b)."""
    cfg = cfg or SolverConfig()
    b = _measurements(op, b)
    if not 1 <= k <= min(op.m, op.n):
        raise ShapeMismatch(f'k={k} must be in [1, {min(op.m, op.n)}]')
    svd = svd_topk(adjoint_sensing(op, b), k, **cfg.svd_options())
    if svd.sigma[0] == 0.0 or svd.sigma[-1] < DEGENERATE_TOL * svd.sigma[0]:
        raise DegenerateInit(
            f'A^T(b) has sigma_{k} = {svd.sigma[-1]:.3g} against sigma_1 = {svd.sigma[0]:.3g}')
    return svd.U


def _alternate(op, b, U, cfg, recorder, callback=None, stage=None):
    """Runs up to cfg.T alternations from U; returns the last pair."""
    b_norm = float(np.linalg.norm(b))
    pair = None
    for t in range(1, cfg.T + 1):
        flags = []
        V, singular = solve_factor(op, b, U, 'v', cfg.ls_regularizer)
        if singular:
            flags.append(_flag_singular('v', t))
        half = residual(op, b, FactorPair(U, V))
        if cfg.mode == ORTHONORMALIZED:
            V, collapsed = orthonormalize(V)
            if collapsed:
                flags.append('collapsed_v')

        U, singular = solve_factor(op, b, V, 'u', cfg.ls_regularizer)
        if singular:
            flags.append(_flag_singular('u', t))
        pair = FactorPair(U, V)
        res = residual(op, b, pair)
        recorder.record(U, V, res, residual_half=half, stage=stage, flags=tuple(flags))
        if callback is not None:
            callback(recorder.trace.last.iter, pair)

        if res <= cfg.tol * b_norm:
            logger.info('relative residual %.3e <= tol after %d iterations', res / (b_norm or 1.0), t)
            break
        if cfg.mode == ORTHONORMALIZED:
            U, collapsed = orthonormalize(U)
    return pair


def _initial_factor(op, b, k, cfg, init):
    if init is None:
        return init_sensing(op, b, k, cfg)
    U = as_matrix(init, 'init')
    if U.shape != (op.m, k):
        raise ShapeMismatch(f'init must be {op.m}x{k}, got {U.shape}')
    return U


@logs(after=logging.INFO)
@returns('pair', 'trace')
def altmin_sense(op, b, k, cfg=None, truth=None, init=None, callback=None):
    """Alternating least squares for matrix sensing.

    Args:
        op (SensingOperator): the measurement map.
        b (array): measurements, possibly noisy.
        k (int): target rank.
        cfg (SolverConfig, optional): solver knobs.
        truth (SvdResult, optional): ground truth; fills the dist columns.
        init (array, optional): m x k start replacing the spectral initializer.
        callback (callable, optional): called as callback(iter, pair) after
            every alternation.
    """
    cfg = cfg or SolverConfig()
    b = _measurements(op, b)
    if not 1 <= k <= min(op.m, op.n):
        raise ShapeMismatch(f'k={k} must be in [1, {min(op.m, op.n)}]')
    U = _initial_factor(op, b, k, cfg, init)

    recorder = TraceRecorder(truth)
    recorder.record(U, None, np.linalg.norm(b))
    pair = _alternate(op, b, U, cfg, recorder, callback)
    return pair, recorder.trace


@logs(after=logging.INFO)
@returns('pair', 'trace')
def stage_altmin(op, b, k, cfg=None, truth=None, callback=None):
    """Stagewise alternating minimization: stage i fits a rank-i pair,
    initialized by one SVP step from the previous stage's output.

    cfg.T alternations run per stage. Trace records carry their stage number.
    """
    cfg = cfg or SolverConfig()
    b = _measurements(op, b)
    if not 1 <= k <= min(op.m, op.n):
        raise ShapeMismatch(f'k={k} must be in [1, {min(op.m, op.n)}]')

    recorder = TraceRecorder(truth)
    X = np.zeros(op.shape)
    pair = None
    for stage in range(1, k + 1):
        G = X - SVP_STEP * adjoint_sensing(op, apply_sensing(op, X) - b)
        svd = svd_topk(G, stage, **cfg.svd_options())
        if svd.sigma[0] == 0.0 or svd.sigma[-1] < DEGENERATE_TOL * svd.sigma[0]:
            if pair is None:
                raise DegenerateInit('the SVP step from the empty pair is zero')
            logger.info('stage %d has no new direction; keeping the rank-%d fit',
                        stage, pair.k)
            break
        start = FactorPair(svd.U * svd.sigma, svd.V)
        recorder.record(start.U_hat, start.V_hat, residual(op, b, start), stage=stage)
        pair = _alternate(op, b, start.U_hat, cfg, recorder, callback, stage=stage)
        logger.debug('stage %d finished at residual %.3e', stage, recorder.trace.last.residual)
        X = pair.product()
    return pair, recorder.trace
