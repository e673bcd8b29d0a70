"""Shared synthetic-data builders used as forward-construction oracles."""
from __future__ import annotations

import numpy as np
import pytest

from koopmode import SnapshotMatrix


def planted_snapshots(p: int, n_steps: int, lams, coeffs, rng) -> tuple[np.ndarray, list]:
    """Real data y_k = Re(sum_j c_j lam_j^k w_j) with random complex directions.

    Returns (p x n_steps matrix, full conjugate-closed eigenvalue list).
    """
    ws = [rng.standard_normal(p) + 1j * rng.standard_normal(p) for _ in lams]
    Y = np.zeros((p, n_steps))
    full = []
    for lam, c, w in zip(lams, coeffs, ws):
        powers = np.array([np.complex128(lam) ** k for k in range(n_steps)])
        Y += np.real(np.outer(c * w, powers))
        full.append(complex(lam))
        if abs(complex(lam).imag) > 1e-14:
            full.append(complex(lam).conjugate())
    return Y, full


def planted_matrix(p: int, n_steps: int, lams, coeffs, seed: int = 0,
                   dt_label: str = "step") -> tuple[SnapshotMatrix, list]:
    rng = np.random.default_rng(seed)
    Y, full = planted_snapshots(p, n_steps, lams, coeffs, rng)
    return SnapshotMatrix(Y, dt_label=dt_label), full


def random_unitary(n: int, rng) -> np.ndarray:
    """Haar-ish unitary via QR of a complex Gaussian matrix."""
    Z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    Q, R = np.linalg.qr(Z)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
