import numpy as np
import pytest

from polygrid.errors import SingularBlockError, SingularMatrixError
from polygrid.linalg import (
    as_index_set,
    condition_number_2,
    lu_solve,
    schur_complement,
)


def well_conditioned(rng, n, smax=1.0, smin=1e-2):
    u, _ = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    v, _ = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    s = np.linspace(smax, smin, n)
    return u @ np.diag(s) @ v.conj().T


class TestLuSolve:
    def test_identity(self):
        b = np.array([[1.0], [2.5], [-3.0]])
        assert np.allclose(lu_solve(np.eye(3), b), b)

    def test_diagonal(self):
        x = lu_solve(np.array([[2.0, 0.0], [0.0, 4.0]]), np.array([[2.0], [8.0]]))
        assert np.allclose(x, [[1.0], [2.0]])

    def test_construct_then_solve_round_trip(self):
        rng = np.random.default_rng(3)
        a = well_conditioned(rng, 12)
        x0 = rng.normal(size=(12, 2)) + 1j * rng.normal(size=(12, 2))
        x = lu_solve(a, a @ x0)
        assert np.max(np.abs(x - x0)) < 1e-10

    def test_vector_rhs_keeps_shape(self):
        x = lu_solve(np.eye(2), np.array([1.0, 2.0]))
        assert x.shape == (2,)

    def test_singular_raises(self):
        with pytest.raises(SingularMatrixError):
            lu_solve(np.array([[1.0, 1.0], [1.0, 1.0]]), np.eye(2))

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            lu_solve(np.array([[np.nan, 0.0], [0.0, 1.0]]), np.eye(2))

    def test_deterministic(self):
        rng = np.random.default_rng(11)
        a = well_conditioned(rng, 8)
        b = rng.normal(size=(8, 3))
        assert np.array_equal(lu_solve(a, b), lu_solve(a.copy(), b.copy()))

    def test_round_trip_property(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            n = int(rng.integers(2, 15))
            a = well_conditioned(rng, n, smin=1e-4)  # cond 1e4 < 1e6
            x = rng.normal(size=n) + 1j * rng.normal(size=n)
            err = np.linalg.norm(lu_solve(a, a @ x) - x) / np.linalg.norm(x)
            assert err < 1e-9


class TestSchurComplement:
    def test_empty_drop_is_restriction(self):
        rng = np.random.default_rng(0)
        m = rng.normal(size=(4, 4))
        out = schur_complement(m, [0, 1, 2, 3], [])
        assert np.array_equal(out, m)

    def test_empty_keep_gives_0x0(self):
        out = schur_complement(np.eye(3), [], [0, 1, 2])
        assert out.shape == (0, 0)

    def test_hand_2x2(self):
        m = np.array([[2.0, -1.0], [-1.0, 2.0]])
        out = schur_complement(m, [0], [1])
        assert np.allclose(out, [[1.5]])

    def test_sequential_equals_combined_spd(self):
        rng = np.random.default_rng(5)
        a = rng.normal(size=(9, 9))
        m = a @ a.T + 9 * np.eye(9)
        keep = np.arange(4)
        one_shot = schur_complement(m, keep, np.arange(4, 9))
        first = schur_complement(m, np.arange(6), np.arange(6, 9))
        second = schur_complement(first, keep, np.arange(4, 6))
        assert np.max(np.abs(one_shot - second)) < 1e-10

    def test_quotient_property_random_hermitian_dominant(self):
        rng = np.random.default_rng(17)
        for _ in range(100):
            n = int(rng.integers(4, 10))
            a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
            m = a + a.conj().T + 2 * n * np.eye(n)
            split1 = int(rng.integers(1, n - 1))
            split2 = int(rng.integers(split1 + 1, n))
            keep = np.arange(split1)
            one_shot = schur_complement(m, keep, np.arange(split1, n))
            partial = schur_complement(m, np.arange(split2), np.arange(split2, n))
            two_step = schur_complement(partial, keep, np.arange(split1, split2))
            assert np.max(np.abs(one_shot - two_step)) < 1e-9

    def test_singular_block_raises(self):
        m = np.array([[1.0, 1.0], [1.0, 0.0]])
        with pytest.raises(SingularBlockError):
            schur_complement(m, [0], [1])

    def test_partition_enforced(self):
        with pytest.raises(ValueError):
            schur_complement(np.eye(3), [0, 1], [1, 2])


class TestConditionNumber:
    def test_identity(self):
        assert condition_number_2(np.eye(5)) == pytest.approx(1.0)

    def test_diagonal(self):
        assert condition_number_2(np.diag([10.0, 0.1])) == pytest.approx(100.0)

    def test_transpose_symmetry(self):
        rng = np.random.default_rng(2)
        a = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        c1, c2 = condition_number_2(a), condition_number_2(a.T)
        assert abs(c1 - c2) / c1 < 1e-8

    def test_scaling_invariance(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            a = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
            c = complex(rng.normal(), rng.normal())
            if abs(c) < 1e-3:
                continue
            c1, c2 = condition_number_2(a), condition_number_2(c * a)
            assert abs(c1 - c2) / c1 < 1e-8

    def test_exactly_singular_gives_inf(self):
        # a zero row yields an exact zero singular value, below the sentinel floor
        assert condition_number_2(np.array([[1.0, 0.0], [0.0, 0.0]])) == np.inf

    def test_zero_rejected(self):
        with pytest.raises(ValueError):
            condition_number_2(np.zeros((2, 2)))


class TestIndexSet:
    def test_strictly_increasing_required(self):
        with pytest.raises(ValueError):
            as_index_set([0, 0, 1], 5)

    def test_bounds_checked(self):
        with pytest.raises(ValueError):
            as_index_set([0, 7], 5)
