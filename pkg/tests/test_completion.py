import numpy as np
import pytest

from lowrank.completion import (CompletionProblem, altmin_complete, clip_and_orthonormalize,
                                clip_threshold, consumed_partitions, incoherence_of,
                                init_complete, observed_residual, solve_row_block)
from lowrank.errors import (ClippedToRankDeficient, EmptyPartition, NotOrthonormal, RankDeficient,
                            ShapeMismatch)
from lowrank.linalg import SvdResult, qr_decompose, solve_least_squares, subspace_distance
from lowrank.misc import make_rng
from lowrank.operators import (ObservationSet, PartitionedObservations, partition_omega,
                               project_omega, sample_omega)
from lowrank.sensing import FactorPair, SolverConfig

from conftest import orthonormal


def make_truth(rng, m, n, sigma):
    k = len(sigma)
    return SvdResult(U=orthonormal(rng, m, k), sigma=np.asarray(sigma, dtype=float),
                     V=orthonormal(rng, n, k))


def full_grid(M):
    m, n = M.shape
    return project_omega(M, [(i, j) for i in range(m) for j in range(n)])


def test_incoherence_examples(rng):
    assert incoherence_of(np.eye(10)[:, :2]).mu == pytest.approx(np.sqrt(5))
    assert incoherence_of(np.ones((16, 1)) / 4).mu == pytest.approx(1.0)
    U = orthonormal(rng, 100, 2)
    report = incoherence_of(U)
    norms = [np.sqrt(U[i] @ U[i]) for i in range(100)]
    assert report.max_row_norm == pytest.approx(max(norms), abs=1e-12)
    assert report.argmax_row == int(np.argmax(norms))
    assert report.mu == pytest.approx(np.sqrt(50) * max(norms), abs=1e-12)


def test_incoherence_requires_orthonormal_columns():
    with pytest.raises(NotOrthonormal):
        incoherence_of(2 * np.eye(4)[:, :2])


def test_clip_without_clipping_keeps_span(rng):
    U0 = orthonormal(rng, 30, 3)
    U = clip_and_orthonormalize(U0, threshold=1.0)
    assert subspace_distance(U, U0) <= 1e-10


def test_clip_whole_column_is_rank_deficient():
    with pytest.raises(ClippedToRankDeficient):
        clip_and_orthonormalize(np.eye(4)[:, :1], threshold=0.9)
    assert issubclass(ClippedToRankDeficient, RankDeficient)


@pytest.mark.parametrize('seed', range(20))
def test_clipping_bounds_incoherence(seed):
    rng = make_rng(seed)
    m, k = 100, 2
    base = orthonormal(rng, m, k)
    mu = incoherence_of(base).mu
    spiked = base.copy()
    direction = rng.standard_normal(k)
    spiked[int(rng.integers(m))] += 1.2 * direction / np.linalg.norm(direction)
    U0 = qr_decompose(spiked).Q
    try:
        U = clip_and_orthonormalize(U0, clip_threshold(mu, k, m))
    except ClippedToRankDeficient:
        pytest.skip('clipping removed a direction')
    assert incoherence_of(U).mu <= 4 * mu * np.sqrt(k)


def test_init_complete_full_grid_is_svd(rng):
    truth = make_truth(rng, 12, 10, [3.0, 1.0])
    U0 = init_complete(full_grid(truth.reconstruct()), 1.0, 2, mu=10.0)
    assert subspace_distance(U0, truth.U) <= 1e-10


def test_init_complete_single_entry():
    omega = ObservationSet(5, 4, [3], [1], [2.5])
    U0 = init_complete(omega, 0.5, 1, mu=1.0, clip=False)
    assert np.allclose(np.abs(U0.ravel()), np.eye(5)[3])


def test_init_complete_errors():
    with pytest.raises(EmptyPartition):
        init_complete(ObservationSet.empty(3, 3), 0.5, 1, mu=1.0)
    with pytest.raises(ShapeMismatch):
        init_complete(ObservationSet(3, 3, [0], [0], [1.0]), 1.5, 1, mu=1.0)


def test_init_complete_sampled(rng):
    truth = make_truth(rng, 150, 150, [1.0, 1.0])
    omega = sample_omega(truth.reconstruct(), 0.4, seed=4)
    U0 = init_complete(omega, 0.4, 2, mu=3.0)
    assert subspace_distance(U0, truth.U) <= 0.5


def test_solve_row_block_full_grid_recovers_factor(rng):
    truth = make_truth(rng, 9, 7, [2.0, 0.5])
    part = full_grid(truth.reconstruct())
    V, unobserved, singular = solve_row_block(truth.U, part, 'v')
    assert np.allclose(V, truth.V * truth.sigma, atol=1e-12)
    assert not unobserved.any() and not singular.any()
    U, _, _ = solve_row_block(truth.V, part, 'u')
    assert np.allclose(U, truth.U * truth.sigma, atol=1e-12)


def test_solve_row_block_unobserved_column(rng):
    M = rng.standard_normal((5, 4))
    part = project_omega(M, [(i, j) for i in range(5) for j in (0, 1, 3)])
    V, unobserved, singular = solve_row_block(orthonormal(rng, 5, 2), part, 'v')
    assert unobserved.tolist() == [False, False, True, False]
    assert V[2].tolist() == [0.0, 0.0]
    assert not singular.any()


def test_solve_row_block_single_observation_is_singular(rng):
    part = ObservationSet(4, 2, [0, 0, 1, 2], [0, 1, 1, 1], [1.0, 2.0, 3.0, 4.0])
    V, unobserved, singular = solve_row_block(orthonormal(rng, 4, 2), part, 'v')
    assert singular.tolist() == [True, False]
    assert np.all(np.isfinite(V))


def dense_oracle(fixed, part, side):
    """The coupled least-squares problem over all observed entries at once."""
    k = fixed.shape[1]
    count = part.n if side == 'v' else part.m
    design = np.zeros((len(part), count * k))
    for row, (i, j, _) in enumerate(part.triplets()):
        own, other = (j, i) if side == 'v' else (i, j)
        design[row, own * k:(own + 1) * k] = fixed[other]
    return solve_least_squares(design, part.values).reshape(count, k)


@pytest.mark.parametrize('seed', range(5))
@pytest.mark.parametrize('side', ['u', 'v'])
def test_solve_row_block_matches_dense_least_squares(seed, side):
    rng = make_rng(seed)
    M = rng.standard_normal((30, 30))
    part = sample_omega(M, 0.5, seed=seed)
    fixed = orthonormal(rng, 30, 3)
    fast, unobserved, singular = solve_row_block(fixed, part, side)
    assert not unobserved.any() and not singular.any()
    assert np.allclose(fast, dense_oracle(fixed, part, side), atol=1e-10)


def test_solve_row_block_errors(rng):
    with pytest.raises(EmptyPartition):
        solve_row_block(np.ones((3, 1)), ObservationSet.empty(3, 3), 'v')
    part = ObservationSet(3, 4, [0], [0], [1.0])
    with pytest.raises(ShapeMismatch):
        solve_row_block(np.ones((4, 1)), part, 'v')
    with pytest.raises(ValueError):
        solve_row_block(np.ones((3, 1)), part, 'w')


def test_observed_residual(rng):
    truth = make_truth(rng, 6, 5, [1.0])
    omega = sample_omega(truth.reconstruct(), 0.5, seed=0)
    assert observed_residual(omega, FactorPair(truth.U, truth.V)) <= 1e-12
    zero = FactorPair(np.zeros((6, 1)), np.zeros((5, 1)))
    assert observed_residual(omega, zero) == pytest.approx(np.linalg.norm(omega.values))


def test_completion_problem_estimates_p():
    parts = PartitionedObservations((ObservationSet(4, 5, [0, 1], [0, 1], [1.0, 1.0]),
                                     ObservationSet(4, 5, [2], [2], [1.0]),
                                     ObservationSet(4, 5, [3], [3], [1.0])))
    problem = CompletionProblem(parts, k=1)
    assert problem.p_hat == pytest.approx(2 * 3 / 20)
    assert problem.T == 1 and (problem.m, problem.n) == (4, 5)
    with pytest.raises(ShapeMismatch):
        CompletionProblem(parts, k=1, p_hat=0.0)
    with pytest.raises(ShapeMismatch):
        CompletionProblem(parts, k=5)


def test_altmin_complete_fully_observed(rng):
    truth = make_truth(rng, 30, 25, [3.0, 1.0])
    omega = full_grid(truth.reconstruct())
    problem = CompletionProblem(partition_omega(omega, 3, seed=1), k=2, p_hat=1.0)
    pair, trace = altmin_complete(problem, SolverConfig(T=3, schedule='full'), mu=10.0,
                                  truth=truth)
    assert trace.last.rel_error <= 1e-10
    assert len(trace) <= 4


def test_altmin_complete_partitioned_consumes_each_part_once(rng):
    truth = make_truth(rng, 200, 200, [1.0, 1.0])
    omega = full_grid(truth.reconstruct())
    T = 4
    problem = CompletionProblem(partition_omega(omega, T, seed=2), k=2)
    pair, trace = altmin_complete(problem, SolverConfig(T=T), mu=3.0, truth=truth)
    used = consumed_partitions(trace)
    assert used[:3] == [0, 1, T + 1]
    assert len(used) == len(set(used))
    assert set(used) <= set(range(2 * T + 1))
    assert trace.last.rel_error <= 5e-2


def test_altmin_complete_needs_2t_plus_1_parts(rng):
    omega = full_grid(rng.standard_normal((6, 6)))
    problem = CompletionProblem(partition_omega(omega, 1, seed=0), k=1)
    with pytest.raises(ShapeMismatch):
        altmin_complete(problem, SolverConfig(T=2))


def test_altmin_complete_sampled_keeps_iterates_incoherent(rng):
    truth = make_truth(rng, 100, 100, [1.0, 1.0])
    omega = sample_omega(truth.reconstruct(), 0.4, seed=9)
    problem = CompletionProblem(partition_omega(omega, 10, seed=9), k=2, p_hat=0.4)

    mus = []
    pair, trace = altmin_complete(
        problem, SolverConfig(T=15, schedule='full'), mu=3.0, truth=truth,
        callback=lambda t, pair: mus.append(incoherence_of(qr_decompose(pair.V_hat).Q).mu))

    initial_mu = incoherence_of(truth.V).mu
    assert max(mus) <= 3 * initial_mu
    assert trace[0].dist_u <= 0.6
    assert trace.last.rel_error <= 1e-3
    residuals = trace.column('residual')
    assert residuals[-1] < residuals[1]


def test_altmin_complete_orthonormalized_mode(rng):
    truth = make_truth(rng, 40, 40, [1.0, 1.0])
    omega = sample_omega(truth.reconstruct(), 0.6, seed=3)
    problem = CompletionProblem(partition_omega(omega, 8, seed=3), k=2, p_hat=0.6)
    pair, trace = altmin_complete(problem, SolverConfig(T=15, schedule='full',
                                                        mode='orthonormalized'),
                                  mu=3.0, truth=truth)
    assert np.allclose(pair.V_hat.T @ pair.V_hat, np.eye(2), atol=1e-10)
    assert trace.last.rel_error <= 1e-3
