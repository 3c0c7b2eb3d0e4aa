"""Measurement models: Gaussian sensing ensembles, entrywise sampling,
partitioning of the observed set and restricted-isometry probes.

>>> op = SensingOperator(np.eye(2)[None])
>>> apply_sensing(op, np.eye(2)).tolist()
[2.0]
>>> adjoint_sensing(op, np.array([0.])).tolist()
[[0.0, 0.0], [0.0, 0.0]]

>>> M = np.array([[1., 2.], [3., 4.]])
>>> project_omega(M, [(0, 1), (1, 0)]).values.tolist()
[2.0, 3.0]
>>> len(sample_omega(M, 1.0, seed=3))
4
>>> parts = partition_omega(sample_omega(M, 1.0, seed=3), T=1, seed=5)
>>> len(parts), parts.audit()['disjoint'], parts.audit()['covers']
(3, True, True)

>>> estimate_rip_constant(single_entry_ensemble(3, 3), k=1, trials=10, seed=0) < 1e-12
True
"""

import io
import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import (ShapeMismatch, NonFiniteEntries, IndexOutOfBounds,
                     EmptyPartition, MalformedFile, DuplicateEntries, OutOfRange)
from .linalg import as_matrix, format_matrix, read_matrix_block
from .misc import make_rng, RNG_NAME
from .path import FilePath

__all__ = ['SensingOperator', 'ObservationSet', 'PartitionedObservations',
           'gaussian_ensemble', 'single_entry_ensemble',
           'apply_sensing', 'adjoint_sensing', 'estimate_rip_constant',
           'sample_omega', 'partition_omega', 'project_omega',
           'format_observations', 'parse_observations',
           'save_observations', 'load_observations',
           'format_operator', 'parse_operator', 'save_operator', 'load_operator']

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SensingOperator:
    """The linear map X -> (tr(A_i^T X))_i, stored as a (d, m, n) array."""
    mats: np.ndarray

    def __post_init__(self):
        mats = np.array(self.mats, dtype=np.float64)
        if mats.ndim != 3 or min(mats.shape) < 1:
            raise ShapeMismatch(f'mats must have shape (d, m, n) with d, m, n >= 1, got {mats.shape}')
        if not np.all(np.isfinite(mats)):
            raise NonFiniteEntries('measurement matrices must be finite')
        mats.setflags(write=False)
        object.__setattr__(self, 'mats', mats)

    @property
    def d(self):
        return self.mats.shape[0]

    @property
    def m(self):
        return self.mats.shape[1]

    @property
    def n(self):
        return self.mats.shape[2]

    @property
    def shape(self):
        return self.m, self.n


@dataclass(frozen=True, eq=False)
class ObservationSet:
    """Observed entries of an m x n matrix as sorted, unique (i, j, value) triplets."""
    m: int
    n: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ShapeMismatch(f'grid must be at least 1x1, got {self.m}x{self.n}')
        rows = np.asarray(self.rows, dtype=np.int64).reshape(-1)
        cols = np.asarray(self.cols, dtype=np.int64).reshape(-1)
        values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if not len(rows) == len(cols) == len(values):
            raise ShapeMismatch('rows, cols and values must have equal lengths')
        if len(rows) and (rows.min() < 0 or rows.max() >= self.m or
                          cols.min() < 0 or cols.max() >= self.n):
            raise IndexOutOfBounds(f'indices fall outside the {self.m}x{self.n} grid')
        if not np.all(np.isfinite(values)):
            raise NonFiniteEntries('observed values must be finite')
        order = np.lexsort((cols, rows))
        rows, cols, values = rows[order], cols[order], values[order]
        linear = rows * self.n + cols
        if len(linear) > 1 and np.any(linear[1:] == linear[:-1]):
            raise DuplicateEntries('duplicate (i, j) entries in the observation set')
        for name, arr in (('rows', rows), ('cols', cols), ('values', values)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def empty(cls, m, n):
        return cls(m, n, np.zeros(0, int), np.zeros(0, int), np.zeros(0))

    @classmethod
    def union(cls, sets):
        sets = list(sets)
        if not sets:
            raise EmptyPartition('union of no observation sets')
        m, n = sets[0].m, sets[0].n
        if any((s.m, s.n) != (m, n) for s in sets):
            raise ShapeMismatch('observation sets live on different grids')
        return cls(m, n,
                   np.concatenate([s.rows for s in sets]),
                   np.concatenate([s.cols for s in sets]),
                   np.concatenate([s.values for s in sets]))

    def __len__(self):
        return len(self.values)

    @property
    def shape(self):
        return self.m, self.n

    @property
    def linear_index(self):
        return self.rows * self.n + self.cols

    def subset(self, mask):
        mask = np.asarray(mask)
        return ObservationSet(self.m, self.n, self.rows[mask], self.cols[mask], self.values[mask])

    def to_dense(self, scale=1.0):
        """P_Omega(M) as a dense matrix, zeros off the observed set."""
        dense = np.zeros((self.m, self.n))
        dense[self.rows, self.cols] = scale * self.values
        return dense

    def triplets(self):
        for i, j, v in zip(self.rows.tolist(), self.cols.tolist(), self.values.tolist()):
            yield i, j, v


@dataclass(frozen=True)
class PartitionedObservations:
    """Disjoint parts Omega_0 ... Omega_2T of one observed set."""
    parts: Tuple[ObservationSet, ...]

    def __post_init__(self):
        parts = tuple(self.parts)
        if not parts:
            raise EmptyPartition('a partition needs at least one part')
        if any(p.shape != parts[0].shape for p in parts):
            raise ShapeMismatch('parts live on different grids')
        object.__setattr__(self, 'parts', parts)

    def __len__(self):
        return len(self.parts)

    def __getitem__(self, index):
        return self.parts[index]

    def __iter__(self):
        return iter(self.parts)

    @property
    def shape(self):
        return self.parts[0].shape

    @property
    def T(self):
        """Number of alternations the partition supports: len == 2T + 1."""
        return (len(self.parts) - 1) // 2

    def union(self):
        return ObservationSet.union(self.parts)

    def audit(self, source=None):
        """Sizes, pairwise disjointness and coverage (of `source`, or of the union)."""
        linear = np.concatenate([p.linear_index for p in self.parts])
        disjoint = len(np.unique(linear)) == len(linear)
        covers = True
        if source is not None:
            covers = disjoint and np.array_equal(np.sort(linear), np.sort(source.linear_index))
        return {'parts': len(self.parts),
                'sizes': [len(p) for p in self.parts],
                'disjoint': bool(disjoint),
                'covers': bool(covers)}


def gaussian_ensemble(m, n, d, seed, rng_name=RNG_NAME):
    """d matrices with i.i.d. Normal(0, 1/d) entries, so E||A(X)||^2 = ||X||_F^2."""
    if min(m, n, d) < 1:
        raise ShapeMismatch(f'm, n, d must be positive, got {(m, n, d)}')
    rng = make_rng(seed, rng_name)
    return SensingOperator(rng.standard_normal((d, m, n)) / np.sqrt(d))


def single_entry_ensemble(m, n):
    """The complete ensemble {e_i e_j^T}: A(X) = vec(X), an exact isometry."""
    return SensingOperator(np.eye(m * n).reshape(m * n, m, n))


def apply_sensing(op, X):
    X = as_matrix(X, 'X')
    if X.shape != op.shape:
        raise ShapeMismatch(f'operator acts on {op.m}x{op.n} matrices, got {X.shape}')
    return np.tensordot(op.mats, X, axes=([1, 2], [0, 1]))


def adjoint_sensing(op, b):
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if b.shape[0] != op.d:
        raise ShapeMismatch(f'operator has {op.d} measurements, got {b.shape[0]}')
    return np.tensordot(b, op.mats, axes=(0, 0))


def estimate_rip_constant(op, k, trials, seed, rng_name=RNG_NAME):
    """Monte-Carlo LOWER bound on the k-RIP constant of `op`.

    Draws `trials` random rank-k matrices of unit Frobenius norm (products of
    Gaussian factors) and returns the largest | ||A(X)||^2 - 1 |.
    """
    if not 1 <= k <= min(op.m, op.n):
        raise ShapeMismatch(f'k={k} must be in [1, {min(op.m, op.n)}]')
    if trials < 1:
        raise OutOfRange(f'trials must be >= 1, got {trials}')
    rng = make_rng(seed, rng_name)
    worst = 0.0
    for _ in range(trials):
        X = rng.standard_normal((op.m, k)) @ rng.standard_normal((op.n, k)).T
        X /= np.linalg.norm(X)
        energy = float(np.sum(apply_sensing(op, X) ** 2))
        worst = max(worst, abs(energy - 1.0))
    logger.debug('RIP lower bound over %d rank-%d trials: %.4g', trials, k, worst)
    return worst


def sample_omega(M, p, seed, rng_name=RNG_NAME):
    """Each entry observed independently with probability p."""
    M = as_matrix(M, 'M')
    if not 0 < p <= 1:
        raise OutOfRange(f'sampling probability must be in (0, 1], got {p}')
    rng = make_rng(seed, rng_name)
    rows, cols = np.nonzero(rng.random(M.shape) < p)
    return ObservationSet(M.shape[0], M.shape[1], rows, cols, M[rows, cols])


def partition_omega(omega, T, seed, rng_name=RNG_NAME):
    """Assigns every observed entry uniformly to one of 2T + 1 disjoint parts."""
    if len(omega) < 1:
        raise EmptyPartition('cannot partition an empty observation set')
    if T < 0:
        raise OutOfRange(f'T must be non-negative, got {T}')
    rng = make_rng(seed, rng_name)
    labels = rng.integers(0, 2 * T + 1, size=len(omega))
    return PartitionedObservations(tuple(omega.subset(labels == t) for t in range(2 * T + 1)))


def project_omega(M, omega):
    """P_Omega(M): the entries of M at the indices of `omega`.

    `omega` is an ObservationSet (its values are ignored) or (i, j) pairs.
    """
    M = as_matrix(M, 'M')
    if isinstance(omega, ObservationSet):
        if omega.shape != M.shape:
            raise ShapeMismatch(f'omega lives on {omega.shape}, M is {M.shape}')
        rows, cols = omega.rows, omega.cols
    else:
        pairs = np.asarray(list(omega), dtype=np.int64).reshape(-1, 2)
        rows, cols = pairs[:, 0], pairs[:, 1]
        if len(rows) and (rows.min() < 0 or rows.max() >= M.shape[0] or
                          cols.min() < 0 or cols.max() >= M.shape[1]):
            raise IndexOutOfBounds(f'indices fall outside the {M.shape[0]}x{M.shape[1]} grid')
    return ObservationSet(M.shape[0], M.shape[1], rows, cols, M[rows, cols])


# Text formats

def format_observations(omega):
    lines = [f'{omega.m} {omega.n}']
    lines.extend(f'{i} {j} {v:.17g}' for i, j, v in omega.triplets())
    return '\n'.join(lines) + '\n'


def parse_observations(text):
    lines = [line for line in text.splitlines() if line.strip()]
    try:
        m, n = (int(t) for t in lines[0].split())
    except (IndexError, ValueError):
        raise MalformedFile('line 1: expected "m n"')
    rows, cols, values = [], [], []
    for number, line in enumerate(lines[1:], start=2):
        fields = line.split()
        if len(fields) != 3:
            raise MalformedFile(f'line {number}: expected "i j value"')
        try:
            rows.append(int(fields[0]))
            cols.append(int(fields[1]))
            values.append(float(fields[2]))
        except ValueError:
            raise MalformedFile(f'line {number}: cannot parse {line!r}')
    return ObservationSet(m, n, np.array(rows, dtype=np.int64),
                          np.array(cols, dtype=np.int64), np.array(values))


def format_operator(op):
    buffer = io.StringIO()
    buffer.write(f'{op.m} {op.n} {op.d}\n')
    for A in op.mats:
        buffer.write(format_matrix(A))
    return buffer.getvalue()


def parse_operator(text):
    lines = [line for line in text.splitlines() if line.strip()]
    try:
        m, n, d = (int(t) for t in lines[0].split())
    except (IndexError, ValueError):
        raise MalformedFile('line 1: expected "m n d"')
    if min(m, n, d) < 1:
        raise MalformedFile(f'line 1: m, n, d must be positive, got {m} {n} {d}')
    mats, cursor = [], 1
    for _ in range(d):
        A, cursor = read_matrix_block(lines, cursor)
        if A.shape != (m, n):
            raise MalformedFile(f'measurement matrix {len(mats)} has shape {A.shape}, expected {(m, n)}')
        mats.append(A)
    if cursor != len(lines):
        raise MalformedFile(f'unexpected content after line {cursor}')
    return SensingOperator(np.stack(mats))


def save_observations(omega, path):
    return FilePath(path).mkdir().write_text(format_observations(omega))


def load_observations(path):
    return parse_observations(FilePath(path).read_text())


def save_operator(op, path):
    return FilePath(path).mkdir().write_text(format_operator(op))


def load_operator(path):
    return parse_operator(FilePath(path).read_text())


if __name__ == '__main__':

    import doctest
    doctest.testmod()
