"""Dense linear-algebra kernels: QR, truncated SVD, least squares, spectral
norm and the principal-angle distance between column spans.

Matrices are 2-D float64 `numpy` arrays.

>>> Q, R = qr_decompose(np.diag([2., 3.]))
>>> np.allclose(Q, np.eye(2)), np.allclose(R, np.diag([2., 3.]))
(True, True)

>>> svd = svd_topk(np.diag([5., 3., 1.]), 2)
>>> np.round(svd.sigma, 12).tolist()
[5.0, 3.0]

>>> solve_least_squares(np.array([[1.], [1.]]), np.array([1., 3.])).round(12).tolist()
[2.0]
>>> solve_least_squares(np.array([[1., 1.], [1., 1.], [0., 0.]]), np.array([2., 2., 0.])).round(12).tolist()
[1.0, 1.0]

>>> e1, e2 = np.array([[1.], [0.]]), np.array([[0.], [1.]])
>>> subspace_distance(e1, e2)
1.0
>>> round(subspace_distance(e1, (e1 + e2) / np.sqrt(2)), 5)
0.70711
>>> subspace_distance(e1, np.eye(2))
1.0

>>> round(spectral_norm(np.array([[0., 2.], [0., 0.]])), 12)
2.0
"""

import io
import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .decorators import returns
from .path import FilePath
from .errors import (ShapeMismatch, NonFiniteEntries, RankDeficient,
                     DidNotConverge, ZeroMatrix, MalformedFile)

__all__ = ['SvdResult', 'as_matrix', 'qr_decompose', 'svd_topk', 'jacobi_svd',
           'orthonormal_completion', 'least_squares', 'solve_least_squares',
           'subspace_distance', 'spectral_norm',
           'format_matrix', 'parse_matrix', 'save_matrix', 'load_matrix',
           'QR_RANK_TOL', 'SVD_RESIDUAL_TOL', 'SVD_ZERO_TOL', 'SVD_MAX_SWEEPS',
           'SVD_OVERSAMPLE', 'ORTHO_TOL', 'SPAN_TOL', 'JACOBI_MAX_DIM']

logger = logging.getLogger(__name__)


QR_RANK_TOL = 1e-12         # sigma_min / sigma_max below this is rank-deficient
SVD_RESIDUAL_TOL = 1e-12    # ||A V_k - U_k diag(sigma)||_F / sigma_1 at convergence
SVD_ZERO_TOL = 1e-12        # times max(m, n) * sigma_1, reported as zero
SVD_MAX_SWEEPS = 500
SVD_OVERSAMPLE = 5          # extra block columns in the subspace iteration
ORTHO_TOL = 1e-10
SPAN_TOL = 1e-12            # rank detection in subspace_distance
JACOBI_MAX_DIM = 64

_SVD_START_SEED = 0


@dataclass(frozen=True)
class SvdResult:
    """Top-k singular triplets: A ~ U diag(sigma) V^T."""
    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray

    @property
    def k(self):
        return len(self.sigma)

    def reconstruct(self):
        return (self.U * self.sigma) @ self.V.T


def as_matrix(x, name='matrix'):
    """Validated float64 copy-free view of `x` as a 2-D finite matrix."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(-1, 1)
    if a.ndim != 2 or a.size == 0:
        raise ShapeMismatch(f'{name} must be a non-empty 2-D matrix, got shape {a.shape}')
    if not np.all(np.isfinite(a)):
        raise NonFiniteEntries(f'{name} has NaN or Inf entries')
    return a


@returns('Q', 'R')
def qr_decompose(A, rank_tol=QR_RANK_TOL):
    """Thin QR of a full-column-rank matrix with positive diagonal in R.

    Raises:
        RankDeficient: if sigma_min(A) <= rank_tol * sigma_max(A).
    """
    A = as_matrix(A, 'A')
    m, k = A.shape
    if m < k:
        raise ShapeMismatch(f'qr_decompose needs rows >= cols, got {m}x{k}')
    sv = scipy.linalg.svdvals(A)
    if sv[0] == 0.0 or sv[-1] <= rank_tol * sv[0]:
        raise RankDeficient(
            f'{m}x{k} matrix is rank-deficient (sigma_min/sigma_max = '
            f'{sv[-1] / sv[0] if sv[0] else 0.0:.3g})')
    Q, R = scipy.linalg.qr(A, mode='economic')
    signs = np.where(np.diag(R) < 0, -1.0, 1.0)
    return Q * signs, R * signs[:, None]


def orthonormal_completion(Q, count):
    """`count` unit vectors orthogonal to the columns of `Q` (and each other),
    found by Gram-Schmidt over the coordinate axes in order."""
    Q = np.asarray(Q, dtype=np.float64)
    m = Q.shape[0]
    basis = [Q[:, j] for j in range(Q.shape[1])]
    extra = []
    for i in range(m):
        if len(extra) == count:
            break
        v = np.zeros(m)
        v[i] = 1.0
        for _ in range(2):      # twice is enough
            for q in basis + extra:
                v -= (q @ v) * q
        norm = np.linalg.norm(v)
        if norm > 1e-6:
            extra.append(v / norm)
    if len(extra) < count:
        raise RankDeficient(f'cannot extend {Q.shape[1]} columns by {count} in R^{m}')
    return np.column_stack(extra) if extra else np.zeros((m, 0))


def _fill_null_directions(U, sigma, V, zero_tol, scale):
    """Zero tiny singular values and replace their vectors deterministically."""
    sigma = sigma.copy()
    cutoff = zero_tol * scale * (sigma[0] if len(sigma) else 0.0)
    dead = (sigma <= cutoff) | (sigma[0] == 0.0)
    if not dead.any():
        return U, sigma, V
    keep = ~dead
    sigma[dead] = 0.0
    U, V = U.copy(), V.copy()
    U[:, dead] = orthonormal_completion(U[:, keep], int(dead.sum()))
    V[:, dead] = orthonormal_completion(V[:, keep], int(dead.sum()))
    return U, sigma, V


def svd_topk(A, k, max_sweeps=SVD_MAX_SWEEPS, tol=SVD_RESIDUAL_TOL, zero_tol=SVD_ZERO_TOL,
             oversample=SVD_OVERSAMPLE):
    """Top-k singular triplets by block subspace iteration.

    Each sweep multiplies by A and A^T with QR re-orthonormalization, then
    extracts Ritz triplets from the small projected matrix. The iteration
    stops when the Ritz residual ||A V_k - U_k diag(sigma)||_F is at most
    `tol` times sigma_1. The block carries `oversample` extra columns; when
    it spans a whole side the first sweep is exact.

    Raises:
        DidNotConverge: when `max_sweeps` sweeps leave the residual above `tol`.
    """
    A = as_matrix(A, 'A')
    m, n = A.shape
    if not 1 <= k <= min(m, n):
        raise ShapeMismatch(f'k={k} must be in [1, {min(m, n)}] for a {m}x{n} matrix')

    block = min(k + oversample, min(m, n))
    exact = block == min(m, n)
    rng = np.random.Generator(np.random.Philox(_SVD_START_SEED))
    AV = A @ np.linalg.qr(rng.standard_normal((n, block)))[0]
    for sweep in range(1, max_sweeps + 1):
        U = np.linalg.qr(AV)[0]
        V = np.linalg.qr(A.T @ U)[0]
        AV = A @ V
        P, s, Wt = np.linalg.svd(U.T @ AV)
        sigma = s[:k]
        U_k = U @ P[:, :k]
        W_k = Wt.T[:, :k]
        if exact or sigma[0] == 0.0:
            break
        resid = np.linalg.norm(AV @ W_k - U_k * sigma)
        if resid <= tol * sigma[0]:
            break
    else:
        raise DidNotConverge(
            f'subspace iteration did not converge on the top-{k} singular triplets of a '
            f'{m}x{n} matrix in {max_sweeps} sweeps (residual {resid:.3g} x sigma_1)')

    logger.debug('svd_topk(%dx%d, k=%d) converged after %d sweeps', m, n, k, sweep)
    U_k, sigma, V_k = _fill_null_directions(U_k, sigma.copy(), V @ W_k, zero_tol, max(m, n))
    return SvdResult(U=U_k, sigma=sigma, V=V_k)


def jacobi_svd(A, tol=1e-13, max_sweeps=60):
    """Full SVD by one-sided (Hestenes) Jacobi rotations.

    Slow but independent of LAPACK's SVD; used as the reference on small
    matrices (at most `JACOBI_MAX_DIM` on each side).
    """
    A = as_matrix(A, 'A')
    if max(A.shape) > JACOBI_MAX_DIM:
        raise ShapeMismatch(f'jacobi_svd is limited to {JACOBI_MAX_DIM}x{JACOBI_MAX_DIM}')
    transposed = A.shape[0] < A.shape[1]
    W = (A.T if transposed else A).copy()
    rows, cols = W.shape
    J = np.eye(cols)

    for _ in range(max_sweeps):
        rotated = False
        for i in range(cols - 1):
            for j in range(i + 1, cols):
                alpha = W[:, i] @ W[:, i]
                beta = W[:, j] @ W[:, j]
                gamma = W[:, i] @ W[:, j]
                if gamma == 0.0 or abs(gamma) <= tol * np.sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = (1.0 if zeta >= 0 else -1.0) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                for X in (W, J):
                    xi = X[:, i].copy()
                    X[:, i] = c * xi - s * X[:, j]
                    X[:, j] = s * xi + c * X[:, j]
        if not rotated:
            break
    else:
        raise DidNotConverge(f'Jacobi SVD did not converge in {max_sweeps} sweeps')

    sigma = np.linalg.norm(W, axis=0)
    order = np.argsort(-sigma, kind='stable')
    sigma, W, J = sigma[order], W[:, order], J[:, order]
    live = sigma > 0
    left = np.zeros_like(W)
    left[:, live] = W[:, live] / sigma[live]
    if not live.all():
        left[:, ~live] = orthonormal_completion(left[:, live], int((~live).sum()))
    if transposed:
        return SvdResult(U=J, sigma=sigma, V=left)
    return SvdResult(U=left, sigma=sigma, V=J)


@returns('x', 'rank')
def least_squares(design, rhs, ridge=0.0):
    """Minimizer of ||design @ x - rhs||^2 + ridge * ||x||^2.

    Full-rank problems go through a column-pivoted QR; rank-deficient ones
    fall back to the minimum-norm solution (LAPACK gelsd).
    """
    design = as_matrix(design, 'design')
    rhs = np.asarray(rhs, dtype=np.float64).reshape(-1)
    d, q = design.shape
    if rhs.shape[0] != d:
        raise ShapeMismatch(f'design has {d} rows but rhs has {rhs.shape[0]} entries')
    if ridge > 0:
        design = np.vstack([design, np.sqrt(ridge) * np.eye(q)])
        rhs = np.concatenate([rhs, np.zeros(q)])
        d += q

    if d >= q:
        Q, R, perm = scipy.linalg.qr(design, mode='economic', pivoting=True)
        diag = np.abs(np.diag(R))
        rank = int(np.sum(diag > max(d, q) * np.finfo(float).eps * diag[0])) if diag[0] > 0 else 0
        if rank == q:
            x = np.empty(q)
            x[perm] = scipy.linalg.solve_triangular(R, Q.T @ rhs)
            return x, rank
    x, _, rank, _ = scipy.linalg.lstsq(design, rhs, lapack_driver='gelsd')
    return x, int(rank)


def solve_least_squares(design, rhs, ridge=0.0):
    """x minimizing ||design @ x - rhs||_2 (minimum-norm when not unique)."""
    return least_squares(design, rhs, ridge).x


def _span_basis(X, name):
    X = as_matrix(X, name)
    U, s, _ = np.linalg.svd(X, full_matrices=False)
    if s[0] == 0.0:
        raise ZeroMatrix(f'{name} spans nothing (all columns are zero)')
    return U[:, s > SPAN_TOL * s[0]]


def subspace_distance(U_hat, W_hat, method='projection'):
    """Sine of the largest principal angle between span(U_hat) and span(W_hat).

    Inputs need not be orthonormal. Spans of different dimension are at
    distance 1.

    Args:
        method (str): 'projection' computes ||(I - U U^T) W||_2 and is accurate
            for tiny angles; 'cosine' uses sqrt(1 - sigma_min(U^T W)^2);
            'complement' forms an explicit basis of the orthogonal complement.
    """
    U = _span_basis(U_hat, 'U_hat')
    W = _span_basis(W_hat, 'W_hat')
    if U.shape[0] != W.shape[0]:
        raise ShapeMismatch(f'spans live in R^{U.shape[0]} and R^{W.shape[0]}')
    if U.shape[1] != W.shape[1]:
        return 1.0
    if method == 'projection':
        value = spectral_norm(W - U @ (U.T @ W))
    elif method == 'cosine':
        cos_min = np.linalg.svd(U.T @ W, compute_uv=False)[-1]
        value = np.sqrt(max(0.0, 1.0 - cos_min ** 2))
    elif method == 'complement':
        U_perp = scipy.linalg.null_space(U.T)
        value = spectral_norm(U_perp.T @ W) if U_perp.size else 0.0
    else:
        raise ValueError(f'unknown method {method!r}')
    return float(min(1.0, value))


def spectral_norm(A):
    """Largest singular value."""
    A = np.asarray(A, dtype=np.float64)
    if A.size == 0:
        return 0.0
    return float(np.linalg.norm(A, 2))


# Dense matrix text format: "rows cols" then one row per line.

def format_matrix(A):
    A = as_matrix(A)
    lines = [f'{A.shape[0]} {A.shape[1]}']
    lines.extend(' '.join(f'{x:.17g}' for x in row) for row in A)
    return '\n'.join(lines) + '\n'


def read_matrix_block(lines, start=0):
    """Parses one matrix starting at `lines[start]`; returns (matrix, next line)."""
    try:
        rows, cols = (int(t) for t in lines[start].split())
    except (IndexError, ValueError):
        raise MalformedFile(f'line {start + 1}: expected "rows cols"')
    if rows < 1 or cols < 1:
        raise MalformedFile(f'line {start + 1}: dimensions must be positive')
    body = lines[start + 1:start + 1 + rows]
    if len(body) != rows:
        raise MalformedFile(f'expected {rows} rows after line {start + 1}, got {len(body)}')
    try:
        data = np.loadtxt(io.StringIO('\n'.join(body)), dtype=np.float64, ndmin=2)
    except ValueError as e:
        raise MalformedFile(f'rows after line {start + 1}: {e}')
    if data.shape != (rows, cols):
        raise MalformedFile(f'matrix at line {start + 1} has shape {data.shape}, '
                            f'header says {(rows, cols)}')
    return as_matrix(data), start + 1 + rows


def parse_matrix(text):
    lines = [line for line in text.splitlines() if line.strip()]
    A, end = read_matrix_block(lines)
    if end != len(lines):
        raise MalformedFile(f'unexpected content after line {end}')
    return A


def save_matrix(A, path):
    return FilePath(path).mkdir().write_text(format_matrix(A))


def load_matrix(path):
    return parse_matrix(FilePath(path).read_text())


if __name__ == '__main__':

    import doctest
    doctest.testmod()
