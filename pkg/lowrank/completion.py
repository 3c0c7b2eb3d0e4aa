"""Alternating minimization for matrix completion.

The least-squares half-steps decouple: with U fixed, each column v_j of the
V factor solves a k x k system built from the observed entries of column j
only (and symmetrically for U with V fixed).

>>> U = np.eye(3)[:, :1]
>>> bool(incoherence_of(U).mu == np.sqrt(3))
True
>>> M = np.outer([1., 2., 2.], [1., -1.])
>>> from lowrank.operators import project_omega
>>> part = project_omega(M, [(i, j) for i in range(3) for j in range(2)])
>>> V, unobserved, singular = solve_row_block(np.array([[1.], [2.], [2.]]) / 3, part, 'v')
>>> np.round(V.ravel(), 12).tolist()
[3.0, -3.0]
"""

import logging
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .decorators import logs, returns
from .errors import (ClippedToRankDeficient, EmptyPartition, NotOrthonormal, RankDeficient,
                     ShapeMismatch, SingularSubproblem)
from .linalg import SvdResult, as_matrix, qr_decompose, spectral_norm, svd_topk
from .operators import PartitionedObservations
from .sensing import (FactorPair, SolverConfig, TraceRecorder, orthonormalize,
                      ORTHONORMALIZED, PARTITIONED)

__all__ = ['CompletionProblem', 'IncoherenceReport', 'incoherence_of', 'clip_threshold',
           'clip_and_orthonormalize', 'init_complete', 'solve_row_block',
           'observed_residual', 'altmin_complete', 'consumed_partitions',
           'ORTHONORMAL_TOL', 'GRAM_RANK_TOL']

logger = logging.getLogger(__name__)


ORTHONORMAL_TOL = 1e-8
GRAM_RANK_TOL = 1e-12      # eigenvalues of a k x k Gram below this (relative) are dropped


@dataclass(frozen=True)
class CompletionProblem:
    """Partitioned observations of an m x n matrix and the target rank.

    `p_hat` defaults to the estimate |Omega_0| (2T + 1) / (m n).
    """
    partitions: PartitionedObservations
    k: int
    p_hat: Optional[float] = None

    def __post_init__(self):
        if not 1 <= self.k <= min(self.m, self.n):
            raise ShapeMismatch(f'k={self.k} must be in [1, {min(self.m, self.n)}]')
        if self.p_hat is None:
            estimate = len(self.partitions[0]) * len(self.partitions) / (self.m * self.n)
            object.__setattr__(self, 'p_hat', float(min(1.0, estimate)))
        if not 0 < self.p_hat <= 1:
            raise ShapeMismatch(f'p_hat must be in (0, 1], got {self.p_hat}')

    @property
    def m(self):
        return self.partitions.shape[0]

    @property
    def n(self):
        return self.partitions.shape[1]

    @property
    def T(self):
        return self.partitions.T


@dataclass(frozen=True)
class IncoherenceReport:
    mu: float
    max_row_norm: float
    argmax_row: int


def _check_orthonormal(U, name='U'):
    U = as_matrix(U, name)
    gap = spectral_norm(U.T @ U - np.eye(U.shape[1]))
    if gap > ORTHONORMAL_TOL:
        raise NotOrthonormal(f'{name} has ||U^T U - I||_2 = {gap:.3g}')
    return U


def incoherence_of(U):
    """mu = sqrt(m / k) * max_i ||U[i]|| for U with orthonormal columns."""
    U = _check_orthonormal(U)
    m, k = U.shape
    norms = np.linalg.norm(U, axis=1)
    row = int(np.argmax(norms))
    return IncoherenceReport(mu=float(np.sqrt(m / k) * norms[row]),
                             max_row_norm=float(norms[row]), argmax_row=row)


def clip_threshold(mu, k, m):
    """Entries of an m-row basis above 2 mu sqrt(k) / sqrt(m) are clipped."""
    return 2.0 * mu * np.sqrt(k) / np.sqrt(m)


def clip_and_orthonormalize(U0, threshold):
    """Zeroes entries with |entry| > threshold and re-orthonormalizes.

    Raises:
        ClippedToRankDeficient: when the clipped columns are dependent.
    """
    if not threshold > 0:
        raise ValueError(f'threshold must be positive, got {threshold}')
    U0 = _check_orthonormal(U0, 'U0')
    clipped = np.where(np.abs(U0) > threshold, 0.0, U0)
    n_clipped = int(np.count_nonzero(clipped != U0))
    if n_clipped:
        logger.debug('clipped %d entries above %.4g', n_clipped, threshold)
    try:
        return qr_decompose(clipped).Q
    except RankDeficient as e:
        raise ClippedToRankDeficient(
            f'clipping {n_clipped} entries at {threshold:.4g} left a rank-deficient basis') from e


def init_complete(part0, p_hat, k, mu, clip=True, svd_options=None):
    """Top-k left singular vectors of P_Omega0(M) / p_hat, clipped at
    `clip_threshold(mu, k, m)` unless `clip` is False."""
    if len(part0) == 0:
        raise EmptyPartition('the initializer partition is empty')
    if not 0 < p_hat <= 1:
        raise ShapeMismatch(f'p_hat must be in (0, 1], got {p_hat}')
    svd = svd_topk(part0.to_dense(1.0 / p_hat), k, **(svd_options or {}))
    if not clip:
        return svd.U
    return clip_and_orthonormalize(svd.U, clip_threshold(mu, k, part0.m))


@returns('factor', 'unobserved', 'singular')
def solve_row_block(fixed, part, side, ridge=0.0):
    """One decoupled least-squares half-step over the entries of `part`.

    side 'v': `fixed` is the m x k U factor; row j of the output minimizes
    sum over observed (i, j) of (M_ij - <U[i], v>)^2.
    side 'u': `fixed` is the n x k V factor, and rows of U are solved.

    Rows without observations come back as zeros (`unobserved` mask); singular
    k x k systems get the minimum-norm solution (`singular` mask).
    """
    if len(part) == 0:
        raise EmptyPartition('cannot solve over an empty partition')
    fixed = as_matrix(fixed, 'fixed')
    if side == 'v':
        own, other, count, expected = part.cols, part.rows, part.n, part.m
    elif side == 'u':
        own, other, count, expected = part.rows, part.cols, part.m, part.n
    else:
        raise ValueError(f"side must be 'u' or 'v', got {side!r}")
    if fixed.shape[0] != expected:
        raise ShapeMismatch(f'fixed factor has {fixed.shape[0]} rows, the grid needs {expected}')
    k = fixed.shape[1]

    F = fixed[other]
    gram = np.zeros((count, k, k))
    np.add.at(gram, own, F[:, :, None] * F[:, None, :])
    rhs = np.zeros((count, k))
    np.add.at(rhs, own, part.values[:, None] * F)
    gram += ridge * np.eye(k)
    unobserved = np.bincount(own, minlength=count) == 0

    w, Q = np.linalg.eigh(gram)
    top = w[:, -1:]
    keep = (w > GRAM_RANK_TOL * top) & (top > 0)
    inv_w = np.divide(1.0, w, out=np.zeros_like(w), where=keep)
    coeff = np.einsum('cji,cj->ci', Q, rhs) * inv_w
    factor = np.einsum('cij,cj->ci', Q, coeff)
    singular = ~unobserved & (keep.sum(axis=1) < k)
    return factor, unobserved, singular


def observed_residual(omega, pair):
    """||P_Omega(U V^T) - P_Omega(M)||_2 over the observed entries only."""
    predicted = np.einsum('ij,ij->i', pair.U_hat[omega.rows], pair.V_hat[omega.cols])
    return float(np.linalg.norm(predicted - omega.values))


def _half_step(fixed, part, side, ridge, t, flags):
    factor, unobserved, singular = solve_row_block(fixed, part, side, ridge)
    if unobserved.any():
        logger.info('iteration %d: %d %s unobserved in the %s-step', t, int(unobserved.sum()),
                    'columns' if side == 'v' else 'rows', side.upper())
        flags.append(f'unobserved_{side}')
    if singular.any():
        warnings.warn(f'{int(singular.sum())} singular {side.upper()}-step systems at iteration '
                      f'{t}; using minimum-norm solutions', SingularSubproblem, stacklevel=3)
        flags.append(f'singular_{side}')
    return factor


@logs(after=logging.INFO)
@returns('pair', 'trace')
def altmin_complete(problem, cfg=None, mu=3.0, truth: Optional[SvdResult] = None,
                    init=None, callback=None, clip=True):
    """Alternating least squares over observed entries.

    With cfg.schedule 'partitioned' the initializer uses Omega_0, and
    iteration t solves V on Omega_t and U on Omega_{T+t}, so every part is
    consumed once. With 'full', the initializer and every half-step use the
    whole observed set. Residuals are always measured on the whole observed set.

    Args:
        problem (CompletionProblem): partitioned observations and rank.
        cfg (SolverConfig, optional): solver knobs; cfg.T alternations.
        mu (float): incoherence parameter for the clipping threshold.
        truth (SvdResult, optional): ground truth; fills the dist columns.
        init (array, optional): m x k start replacing the clipped initializer.
        callback (callable, optional): called as callback(iter, pair).
        clip (bool): clip the spectral initializer.
    """
    cfg = cfg or SolverConfig()
    T, k = cfg.T, problem.k
    parts = problem.partitions
    observed = parts.union()
    partitioned = cfg.schedule == PARTITIONED
    if partitioned and len(parts) != 2 * T + 1:
        raise ShapeMismatch(f'{len(parts)} partitions cannot drive T={T} alternations '
                            f'(need {2 * T + 1})')

    if init is not None:
        U = as_matrix(init, 'init')
        if U.shape != (problem.m, k):
            raise ShapeMismatch(f'init must be {problem.m}x{k}, got {U.shape}')
    elif partitioned:
        U = init_complete(parts[0], problem.p_hat, k, mu, clip, cfg.svd_options())
    else:
        U = init_complete(observed, len(observed) / (problem.m * problem.n), k, mu, clip,
                          cfg.svd_options())

    values_norm = float(np.linalg.norm(observed.values))
    recorder = TraceRecorder(truth)
    recorder.record(U, None, values_norm, partition_u=0 if partitioned else None)
    pair = None
    for t in range(1, T + 1):
        flags = []
        v_index, u_index = (t, T + t) if partitioned else (None, None)
        V = _half_step(U, parts[t] if partitioned else observed, 'v', cfg.ls_regularizer, t, flags)
        half = observed_residual(observed, FactorPair(U, V))
        if cfg.mode == ORTHONORMALIZED:
            V, collapsed = orthonormalize(V)
            if collapsed:
                flags.append('collapsed_v')

        U = _half_step(V, parts[T + t] if partitioned else observed, 'u', cfg.ls_regularizer,
                       t, flags)
        pair = FactorPair(U, V)
        res = observed_residual(observed, pair)
        recorder.record(U, V, res, residual_half=half, partition_v=v_index,
                        partition_u=u_index, flags=tuple(flags))
        if callback is not None:
            callback(recorder.trace.last.iter, pair)

        if res <= cfg.tol * values_norm:
            logger.info('observed residual %.3e <= tol after %d iterations', res, t)
            break
        if cfg.mode == ORTHONORMALIZED:
            U, _ = orthonormalize(U)
    return pair, recorder.trace


def consumed_partitions(trace):
    """Partition indices in the order a partitioned run consumed them."""
    used = []
    for record in trace:
        used.extend(i for i in (record.partition_v, record.partition_u) if i is not None)
    return used
