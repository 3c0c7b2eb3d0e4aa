import numpy as np
import pytest

from lowrank.errors import (DuplicateEntries, EmptyPartition, IndexOutOfBounds, MalformedFile,
                            NonFiniteEntries, OutOfRange, ShapeMismatch)
from lowrank.misc import make_rng
from lowrank.operators import (ObservationSet, PartitionedObservations, SensingOperator,
                               adjoint_sensing, apply_sensing, estimate_rip_constant,
                               gaussian_ensemble, load_observations, load_operator,
                               parse_observations, parse_operator, partition_omega, project_omega,
                               sample_omega, save_observations, save_operator,
                               single_entry_ensemble)


@pytest.mark.parametrize('seed', range(50))
def test_adjoint_identity(seed):
    rng = make_rng(seed)
    op = gaussian_ensemble(5, 4, 30, seed=seed)
    X, y = rng.standard_normal((5, 4)), rng.standard_normal(30)
    lhs = apply_sensing(op, X) @ y
    rhs = np.sum(X * adjoint_sensing(op, y))
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


def test_gaussian_ensemble_is_seeded():
    a = gaussian_ensemble(3, 3, 10, seed=7)
    b = gaussian_ensemble(3, 3, 10, seed=7)
    c = gaussian_ensemble(3, 3, 10, seed=8)
    assert np.array_equal(a.mats, b.mats)
    assert not np.array_equal(a.mats, c.mats)
    assert a.shape == (3, 3) and a.d == 10


def test_gaussian_ensemble_is_near_isometric():
    op = gaussian_ensemble(10, 10, 2000, seed=0)
    assert estimate_rip_constant(op, k=1, trials=50, seed=1) < 0.3


def test_single_entry_ensemble_is_exact_isometry(rng):
    op = single_entry_ensemble(4, 3)
    X = rng.standard_normal((4, 3))
    assert np.array_equal(apply_sensing(op, X), X.ravel())
    assert np.array_equal(adjoint_sensing(op, X.ravel()), X)
    assert estimate_rip_constant(op, k=2, trials=25, seed=3) <= 1e-12


def test_sensing_operator_validation(rng):
    mats = rng.standard_normal((3, 2, 2))
    op = SensingOperator(mats)
    mats[0, 0, 0] = 100.0
    assert op.mats[0, 0, 0] != 100.0
    assert not op.mats.flags.writeable
    with pytest.raises(ShapeMismatch):
        SensingOperator(np.ones((2, 2)))
    with pytest.raises(NonFiniteEntries):
        SensingOperator(np.full((1, 2, 2), np.inf))
    with pytest.raises(ShapeMismatch):
        apply_sensing(op, np.ones((3, 2)))
    with pytest.raises(ShapeMismatch):
        adjoint_sensing(op, np.ones(4))


def test_observation_set_is_sorted_and_unique():
    omega = ObservationSet(3, 3, [2, 0, 0], [1, 2, 0], [5.0, 2.0, 1.0])
    assert list(omega.triplets()) == [(0, 0, 1.0), (0, 2, 2.0), (2, 1, 5.0)]
    assert omega.linear_index.tolist() == [0, 2, 7]
    with pytest.raises(DuplicateEntries):
        ObservationSet(3, 3, [0, 0], [1, 1], [1.0, 2.0])
    with pytest.raises(IndexOutOfBounds):
        ObservationSet(3, 3, [3], [0], [1.0])
    with pytest.raises(ShapeMismatch):
        ObservationSet(3, 3, [0, 1], [0], [1.0])


def test_observation_set_to_dense():
    omega = ObservationSet(2, 3, [0, 1], [2, 0], [4.0, -1.0])
    assert omega.to_dense(scale=0.5).tolist() == [[0.0, 0.0, 2.0], [-0.5, 0.0, 0.0]]
    assert len(ObservationSet.empty(2, 3)) == 0


def test_project_omega(rng):
    M = rng.standard_normal((4, 5))
    omega = project_omega(M, [(3, 4), (0, 0)])
    assert omega.values.tolist() == [M[0, 0], M[3, 4]]
    assert project_omega(M * 2, omega).values.tolist() == [2 * M[0, 0], 2 * M[3, 4]]
    with pytest.raises(IndexOutOfBounds):
        project_omega(M, [(4, 0)])
    with pytest.raises(ShapeMismatch):
        project_omega(np.ones((2, 2)), omega)


def test_sample_omega(rng):
    M = rng.standard_normal((40, 50))
    assert len(sample_omega(M, 1.0, seed=0)) == 2000
    omega = sample_omega(M, 0.3, seed=0)
    assert 450 < len(omega) < 750
    assert np.array_equal(omega.values, M[omega.rows, omega.cols])
    assert np.array_equal(omega.linear_index, sample_omega(M, 0.3, seed=0).linear_index)
    with pytest.raises(OutOfRange):
        sample_omega(M, 0.0, seed=0)
    with pytest.raises(OutOfRange):
        sample_omega(M, 1.5, seed=0)


@pytest.mark.parametrize('seed', range(100))
def test_partition_is_disjoint_and_covers(seed):
    rng = make_rng(seed)
    M = rng.standard_normal((12, 9))
    omega = sample_omega(M, 0.5, seed=seed)
    T = int(rng.integers(0, 6))
    parts = partition_omega(omega, T, seed=seed)
    audit = parts.audit(omega)
    assert len(parts) == 2 * T + 1 and parts.T == T
    assert audit['disjoint'] and audit['covers']
    assert sum(audit['sizes']) == len(omega)
    assert np.array_equal(parts.union().linear_index, omega.linear_index)


def test_partition_audit_detects_overlap():
    a = ObservationSet(2, 2, [0, 1], [0, 1], [1.0, 1.0])
    b = ObservationSet(2, 2, [0], [0], [1.0])
    audit = PartitionedObservations((a, b)).audit()
    assert not audit['disjoint']
    source = ObservationSet(2, 2, [0, 1, 1], [0, 0, 1], [1.0, 1.0, 1.0])
    assert not PartitionedObservations((a,)).audit(source)['covers']


def test_partition_errors():
    with pytest.raises(EmptyPartition):
        partition_omega(ObservationSet.empty(2, 2), 1, seed=0)
    with pytest.raises(EmptyPartition):
        PartitionedObservations(())
    with pytest.raises(ShapeMismatch):
        PartitionedObservations((ObservationSet.empty(2, 2), ObservationSet.empty(3, 2)))


def test_observation_file_round_trip(tmp_path, rng):
    omega = sample_omega(rng.standard_normal((6, 7)), 0.5, seed=1)
    loaded = load_observations(save_observations(omega, tmp_path / 'omega.txt'))
    assert loaded.shape == omega.shape
    assert np.array_equal(loaded.linear_index, omega.linear_index)
    assert np.array_equal(loaded.values, omega.values)


def test_operator_file_round_trip(tmp_path):
    op = gaussian_ensemble(3, 2, 4, seed=5)
    loaded = load_operator(save_operator(op, tmp_path / 'op.txt'))
    assert np.array_equal(loaded.mats, op.mats)


@pytest.mark.parametrize('text', ['', '2\n', '2 2\n0 0\n', '2 2\n0 5 1.0\n', '2 2\n0 0 1\n0 0 2\n'])
def test_parse_observations_malformed(text):
    with pytest.raises((MalformedFile, IndexOutOfBounds, DuplicateEntries)):
        parse_observations(text)


def test_parse_operator_malformed():
    with pytest.raises(MalformedFile):
        parse_operator('2 2 1\n2 2\n1 0\n')
    with pytest.raises(MalformedFile):
        parse_operator('2 2 1\n1 2\n1 0\n')
    with pytest.raises(MalformedFile):
        parse_operator('2 2 0\n')


def test_gaussian_ensemble_statistics():
    assert abs(gaussian_ensemble(3, 3, 2000, seed=1).mats.mean()) <= 0.0006
    X = make_rng(4).standard_normal((3, 3))
    X /= np.linalg.norm(X)
    energy = np.sum(apply_sensing(gaussian_ensemble(3, 3, 5000, seed=2), X) ** 2)
    assert 0.9 <= energy <= 1.1


def rank_one(rng, m, n):
    X = np.outer(rng.standard_normal(m), rng.standard_normal(n))
    return X / np.linalg.norm(X)


def test_single_entry_ensemble_preserves_inner_products(rng):
    op = single_entry_ensemble(5, 4)
    X1, X2 = rng.standard_normal((5, 4)), rng.standard_normal((5, 4))
    inner = apply_sensing(op, X1) @ apply_sensing(op, X2)
    assert inner == pytest.approx(np.trace(X2.T @ X1), rel=1e-12)


def test_gaussian_ensemble_nearly_preserves_inner_products():
    op = gaussian_ensemble(10, 10, 4000, seed=6)
    assert estimate_rip_constant(op, k=1, trials=200, seed=7) <= 0.25
    rng = make_rng(8)
    for _ in range(20):
        X1, X2 = rank_one(rng, 10, 10), rank_one(rng, 10, 10)
        inner = apply_sensing(op, X1) @ apply_sensing(op, X2)
        assert abs(inner - np.trace(X2.T @ X1)) <= 0.75


def test_rip_constant_of_zero_operator():
    op = SensingOperator(np.zeros((1, 3, 3)))
    assert estimate_rip_constant(op, k=1, trials=5, seed=0) == 1.0


def test_rip_constant_needs_a_trial():
    op = single_entry_ensemble(3, 3)
    with pytest.raises(OutOfRange):
        estimate_rip_constant(op, k=1, trials=0, seed=0)


def test_sample_omega_sizes():
    assert len(sample_omega(np.ones((10, 10)), 1e-9, seed=0)) <= 1
    assert 2817 <= len(sample_omega(np.ones((100, 100)), 0.3, seed=0)) <= 3183


def test_partition_sizes_concentrate():
    omega = sample_omega(np.ones((100, 100)), 1.0, seed=0)
    parts = partition_omega(omega, 2, seed=3)
    assert len(omega) == 10000
    assert all(1800 <= size <= 2200 for size in parts.audit()['sizes'])
