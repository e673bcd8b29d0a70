from __future__ import annotations

import numpy as np
import pytest

from koopmode import (
    SnapshotMatrix,
    build_pairs,
    exact_dmd,
    mode_stats,
    optimal_amplitudes,
    truncated_svd,
    vandermonde,
)
from conftest import planted_matrix


class TestTruncatedSvd:
    def test_identity(self):
        f = truncated_svd(np.eye(3), rank=3)
        np.testing.assert_allclose(f.S, [1.0, 1.0, 1.0])

    def test_rank_one_outer_product(self, rng):
        u = rng.standard_normal(6)
        v = rng.standard_normal(4)
        u, v = u / np.linalg.norm(u), v / np.linalg.norm(v)
        f = truncated_svd(7.0 * np.outer(u, v))
        assert f.rank == 1
        np.testing.assert_allclose(f.S, [7.0], atol=1e-10)

    def test_tail_energy_against_full_svd_oracle(self, rng):
        Y = rng.standard_normal((20, 10))
        f = truncated_svd(Y, rank=5)
        err = np.linalg.norm(Y - f.U @ (f.S[:, None] * f.V.conj().T), "fro")
        tail = np.sqrt(np.sum(np.linalg.svd(Y, compute_uv=False)[5:] ** 2))
        assert abs(err - tail) <= 1e-8

    def test_orthonormal_factors(self, rng):
        Y = rng.standard_normal((15, 8))
        f = truncated_svd(Y, rank=4)
        assert np.max(np.abs(f.U.conj().T @ f.U - np.eye(4))) <= 1e-10
        assert np.max(np.abs(f.V.conj().T @ f.V - np.eye(4))) <= 1e-10
        assert np.all(np.diff(f.S) <= 0) and np.all(f.S > 0)

    def test_all_zero_matrix(self):
        with pytest.raises(ValueError):
            truncated_svd(np.zeros((4, 4)))

    def test_rank_too_large(self, rng):
        with pytest.raises(ValueError):
            truncated_svd(rng.standard_normal((4, 3)), rank=4)


class TestExactDmd:
    def test_single_geometric_sequence(self, rng):
        v = rng.standard_normal(5)
        data = np.column_stack([0.9 ** k * v for k in range(20)])
        result = exact_dmd(build_pairs(SnapshotMatrix(data)), rank=1)
        assert abs(result.eigenvalues[0] - 0.9) <= 1e-10

    def test_constant_field(self, rng):
        v = rng.standard_normal(5) + 2.0
        data = np.column_stack([v] * 10)
        result = exact_dmd(build_pairs(SnapshotMatrix(data)), rank=1)
        assert abs(result.eigenvalues[0] - 1.0) <= 1e-10

    def test_complex_pair_against_dense_eigensolver_oracle(self, rng):
        lam = 0.95 * np.exp(1j * np.pi / 6)
        w = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        data = np.column_stack([np.real(2.0 * lam ** k * w) for k in range(40)])
        result = exact_dmd(build_pairs(SnapshotMatrix(data)), rank=2)
        got = sorted(result.eigenvalues, key=lambda z: z.imag)
        want = sorted([lam, np.conj(lam)], key=lambda z: z.imag)
        assert max(abs(g - w_) for g, w_ in zip(got, want)) <= 1e-8
        # oracle: diagonalize the explicitly constructed propagation matrix
        basis = np.column_stack([w, np.conj(w)])
        A = np.real(basis @ np.diag([lam, np.conj(lam)]) @ np.linalg.pinv(basis))
        oracle = np.linalg.eigvals(A)
        oracle = oracle[np.argsort(-np.abs(oracle))][:2]
        for g in got:
            assert np.min(np.abs(oracle - g)) <= 1e-8

    def test_conjugate_symmetry_on_real_data(self, rng):
        data = rng.standard_normal((10, 25))
        result = exact_dmd(build_pairs(SnapshotMatrix(data)), rank=6)
        for lam in result.eigenvalues:
            assert np.min(np.abs(result.eigenvalues - np.conj(lam))) <= 1e-8

    def test_mode_style_span_equivalence(self):
        X, _ = planted_matrix(12, 30, [0.95 * np.exp(0.4j), 0.9 * np.exp(1.1j)],
                              [1.0, 0.7], seed=5)
        pair = build_pairs(X)
        exact = exact_dmd(pair, rank=4, mode_style="exact")
        proj = exact_dmd(pair, rank=4, mode_style="projected")
        Qe, _ = np.linalg.qr(exact.modes)
        Qp, _ = np.linalg.qr(proj.modes)
        angles = np.linalg.svd(Qe.conj().T @ Qp, compute_uv=False)
        assert np.max(np.abs(angles - 1.0)) <= 1e-8

    def test_bad_mode_style(self, rng):
        pair = build_pairs(SnapshotMatrix(rng.standard_normal((4, 6))))
        with pytest.raises(ValueError, match="mode_style"):
            exact_dmd(pair, mode_style="fancy")


class TestVandermonde:
    def test_powers_of_two(self):
        v = vandermonde(np.array([2.0]), 3)
        np.testing.assert_array_equal(v.data, [[1.0, 2.0, 4.0]])

    def test_unit_circle_rotation(self):
        v = vandermonde(np.array([1j]), 4)
        np.testing.assert_allclose(v.data, [[1, 1j, -1, -1j]], atol=1e-15)

    def test_against_pow_oracle(self, rng):
        lam = rng.random(6) * np.exp(2j * np.pi * rng.random(6))
        v = vandermonde(lam, 50)
        for i in range(6):
            for k in range(50):
                want = lam[i] ** k
                assert abs(v.data[i, k] - want) <= 1e-12 * max(abs(want), 1e-300)

    def test_first_column_ones_and_recursion(self, rng):
        lam = rng.random(4) + 1j * rng.random(4)
        v = vandermonde(lam, 12)
        np.testing.assert_array_equal(v.data[:, 0], np.ones(4))
        for k in range(11):
            np.testing.assert_array_equal(v.data[:, k + 1], v.data[:, k] * lam)

    def test_subnormal_clamp(self):
        v = vandermonde(np.array([1e-200]), 3)
        assert v.data[0, 2] == 0.0  # 1e-400 underflows to exact zero


class TestOptimalAmplitudes:
    def test_forward_construct_then_invert(self, rng):
        p, r, M = 9, 3, 15
        modes = rng.standard_normal((p, r)) + 1j * rng.standard_normal((p, r))
        lam = np.exp(2j * np.pi * np.array([0.11, 0.29, 0.43]))
        vand = vandermonde(lam, M)
        b0 = rng.standard_normal(r) + 1j * rng.standard_normal(r)
        Y = modes @ np.diag(b0) @ vand.data
        b = optimal_amplitudes(Y, modes, vand)
        assert np.max(np.abs(b - b0)) <= 1e-8

    def test_zero_data(self, rng):
        modes = rng.standard_normal((4, 2)) + 0j
        vand = vandermonde(np.array([0.9, 0.8]), 6)
        b = optimal_amplitudes(np.zeros((4, 6)), modes, vand)
        assert np.max(np.abs(b)) <= 1e-12

    def test_scalar_least_squares(self):
        modes = np.array([[1.0], [0.0]], dtype=complex)
        vand = vandermonde(np.array([1.0]), 2)
        Y = np.array([[2.0, 2.0], [0.0, 0.0]])
        b = optimal_amplitudes(Y, modes, vand)
        np.testing.assert_allclose(b, [2.0], atol=1e-12)

    def test_reconstruction_identity_on_exact_rank_data(self):
        X, _ = planted_matrix(10, 40, [0.97 * np.exp(0.5j), 0.92], [1.0, 0.8], seed=7)
        pair = build_pairs(X)
        result = exact_dmd(pair, rank=3)
        vand = vandermonde(result.eigenvalues, pair.Y.shape[1])
        b = optimal_amplitudes(pair.Y, result.modes, vand)
        recon = result.modes @ np.diag(b) @ vand.data
        rel = np.linalg.norm(pair.Y - recon, "fro") / np.linalg.norm(pair.Y, "fro")
        assert rel <= 1e-8


class TestModeStats:
    def test_stationary_mode(self):
        stats = mode_stats(1.0)
        assert stats.magnitude == 1.0
        assert np.isinf(stats.e_folding) and np.isinf(stats.period)

    def test_quarter_period_rotation(self):
        stats = mode_stats(-1j)
        assert abs(stats.magnitude - 1.0) <= 1e-12
        assert abs(abs(stats.period) - 4.0) <= 1e-12
        assert stats.period < 0  # clockwise rotation carries the sign

    def test_real_decaying_eigenvalue(self):
        stats = mode_stats(np.exp(-0.1))
        assert abs(stats.e_folding - 10.0) <= 1e-12
        assert np.isinf(stats.period)

    def test_zero_eigenvalue(self):
        with pytest.raises(ValueError):
            mode_stats(0.0)


def test_planted_spectrum_recovery_property(rng):
    lams = [0.95 * np.exp(0.3j), 0.9 * np.exp(0.9j), 0.85]
    X, full = planted_matrix(16, 80, lams, [2.0, 1.0, 0.5], seed=11)
    result = exact_dmd(build_pairs(X), rank=5)
    for lam in full:
        assert np.min(np.abs(result.eigenvalues - lam)) <= 1e-8
