"""Exact DMD: truncated SVD, compressed operator, modes, Vandermonde, amplitudes."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .snapshots import SnapshotPair

RANK_TOL = 1e-10
EIGENBASIS_COND_LIMIT = 1e12
NORMAL_COND_LIMIT = 1e14
MODE_STYLES = ("exact", "projected")


@dataclass(frozen=True)
class SvdFactors:
    """Top-r factors of Y = U diag(S) V*."""

    U: np.ndarray
    S: np.ndarray
    V: np.ndarray
    rank: int


@dataclass(frozen=True)
class DecompositionResult:
    """Eigenvalues, spatial modes, and amplitudes of one decomposition run.

    amplitudes is None until fitted; original_indices tracks each column's
    position in the decomposition before any amplitude re-sorting.
    """

    eigenvalues: np.ndarray
    modes: np.ndarray
    amplitudes: np.ndarray | None
    rank: int
    method: str
    dt_label: str = "step"
    original_indices: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.modes.shape[1] != self.rank or self.eigenvalues.shape[0] != self.rank:
            raise ValueError("modes/eigenvalues inconsistent with rank")
        if self.amplitudes is not None and self.amplitudes.shape[0] != self.rank:
            raise ValueError("amplitudes length inconsistent with rank")
        if self.original_indices is None:
            object.__setattr__(self, "original_indices", np.arange(self.rank))

    def with_amplitudes(self, b: np.ndarray) -> "DecompositionResult":
        """Attach amplitudes and re-sort columns by |b| descending
        (ties broken by ascending original index)."""
        b = np.asarray(b, dtype=complex)
        if b.shape[0] != self.rank:
            raise ValueError("amplitude vector length mismatch")
        order = np.lexsort((self.original_indices, -np.abs(b)))
        return replace(
            self,
            eigenvalues=self.eigenvalues[order],
            modes=self.modes[:, order],
            amplitudes=b[order],
            original_indices=self.original_indices[order],
        )


@dataclass(frozen=True)
class Vandermonde:
    """r x M matrix of eigenvalue powers, entry (i, k) = lambda_i^k."""

    data: np.ndarray

    @property
    def n_steps(self) -> int:
        return self.data.shape[1]


class ModeStats(NamedTuple):
    magnitude: float
    e_folding: float
    period: float


def truncated_svd(Y: np.ndarray, rank: int | None = None) -> SvdFactors:
    """Rank-r SVD; default rank keeps singular values above 1e-10 * sigma_1."""
    Y = np.asarray(Y)
    if Y.size == 0:
        raise ValueError("empty matrix")
    U, s, Vh = np.linalg.svd(Y, full_matrices=False)
    if s[0] <= 0:
        raise ValueError("matrix has no positive singular values")
    if rank is None:
        rank = int(np.count_nonzero(s > RANK_TOL * s[0]))
    else:
        if rank > min(Y.shape):
            raise ValueError(f"rank {rank} exceeds min(p, M)={min(Y.shape)}")
        if s[rank - 1] <= 0:
            raise ValueError(f"zero singular value inside requested rank {rank}")
    return SvdFactors(U=U[:, :rank], S=s[:rank], V=Vh[:rank].conj().T, rank=rank)


def exact_dmd(
    pair: SnapshotPair,
    rank: int | None = None,
    mode_style: str = "exact",
) -> DecompositionResult:
    """Eigendecompose the compressed one-step operator U* Yplus V S^-1.

    Modes are Yplus V S^-1 W ("exact") or U W ("projected"); eigenvector
    columns are normalized to unit 2-norm. Amplitudes are left unset.
    """
    if mode_style not in MODE_STYLES:
        raise ValueError(f"mode_style must be one of {MODE_STYLES}")
    f = truncated_svd(pair.Y, rank)
    propagate = pair.Yplus @ (f.V / f.S)
    atilde = f.U.conj().T @ propagate
    evals, W = np.linalg.eig(atilde)
    W = W / np.linalg.norm(W, axis=0)
    cond = np.linalg.cond(W)
    if cond > EIGENBASIS_COND_LIMIT:
        warnings.warn(f"near-defective eigenbasis, condition {cond:.3e}")
    modes = propagate @ W if mode_style == "exact" else f.U @ W
    order = np.lexsort((np.arange(evals.size), -np.abs(evals)))
    return DecompositionResult(
        eigenvalues=evals[order],
        modes=modes[:, order],
        amplitudes=None,
        rank=f.rank,
        method=f"{mode_style}-dmd",
        dt_label=pair.dt_label,
    )


def vandermonde(eigenvalues: np.ndarray, n_steps: int) -> Vandermonde:
    """Powers by repeated multiplication; subnormal underflow clamps to zero."""
    if n_steps < 1:
        raise ValueError("need at least one column")
    lam = np.asarray(eigenvalues, dtype=complex).reshape(-1)
    out = np.empty((lam.size, n_steps), dtype=complex)
    col = np.ones(lam.size, dtype=complex)
    tiny = np.finfo(float).tiny
    for k in range(n_steps):
        out[:, k] = col
        col = col * lam
        col[np.abs(col) < tiny] = 0.0
    return Vandermonde(out)


def optimal_amplitudes(Y: np.ndarray, modes: np.ndarray, vand: Vandermonde) -> np.ndarray:
    """Least-squares amplitudes for Y ~ modes diag(b) vand via the normal system."""
    from .spdmd import quadratic_form

    form = quadratic_form(Y, modes, vand)
    b, _, rank, sv = np.linalg.lstsq(form.P, form.q, rcond=None)
    if rank < form.q.size or (sv[0] > 0 and sv[0] / sv[-1] > NORMAL_COND_LIMIT):
        warnings.warn("near-singular amplitude system, using minimum-norm solution")
    return b


def mode_stats(eigenvalue: complex, dt_label: str = "step") -> ModeStats:
    """Magnitude, e-folding time 1/|Re(log lam)|, and signed period 2pi/Im(log lam),
    in multiples of dt_label."""
    if eigenvalue == 0:
        raise ValueError("eigenvalue must be nonzero")
    log = np.log(complex(eigenvalue))
    e_fold = np.inf if abs(log.real) < 1e-12 else 1.0 / abs(log.real)
    period = np.inf if abs(log.imag) < 1e-12 else 2.0 * np.pi / log.imag
    return ModeStats(magnitude=abs(eigenvalue), e_folding=e_fold, period=period)
