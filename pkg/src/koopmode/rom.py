"""Reduced-order reconstruction and temporal dynamics from selected mode tuples."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .dmd import DecompositionResult, ModeStats, mode_stats

CONJUGATE_TOL = 1e-8
IMAG_RESIDUAL_TOL = 1e-6


@dataclass(frozen=True)
class KoopmanTuple:
    """One (eigenvalue, spatial mode, amplitude) triple with derived statistics."""

    eigenvalue: complex
    mode: np.ndarray
    amplitude: complex
    magnitude: float
    e_folding: float
    period: float
    original_index: int

    @classmethod
    def build(cls, eigenvalue: complex, mode: np.ndarray, amplitude: complex,
              original_index: int, dt_label: str = "step") -> "KoopmanTuple":
        stats = mode_stats(eigenvalue, dt_label)
        return cls(eigenvalue=complex(eigenvalue), mode=np.asarray(mode, dtype=complex),
                   amplitude=complex(amplitude), magnitude=stats.magnitude,
                   e_folding=stats.e_folding, period=stats.period,
                   original_index=int(original_index))

    @property
    def stats(self) -> ModeStats:
        return ModeStats(self.magnitude, self.e_folding, self.period)


@dataclass(frozen=True)
class ReducedOrderModel:
    """Selected tuples, sorted by |amplitude| descending."""

    tuples: tuple[KoopmanTuple, ...]
    spatial_dim: int
    dt_label: str = "step"

    def __post_init__(self) -> None:
        if not self.tuples:
            raise ValueError("model needs at least one tuple")
        for t in self.tuples:
            if t.mode.shape[0] != self.spatial_dim:
                raise ValueError("mode length inconsistent with spatial_dim")
        order = sorted(
            range(len(self.tuples)),
            key=lambda i: (-abs(self.tuples[i].amplitude), self.tuples[i].original_index),
        )
        object.__setattr__(self, "tuples", tuple(self.tuples[i] for i in order))

    @classmethod
    def from_result(cls, result: DecompositionResult) -> "ReducedOrderModel":
        if result.amplitudes is None:
            raise ValueError("decomposition has no amplitudes yet")
        tuples = tuple(
            KoopmanTuple.build(result.eigenvalues[j], result.modes[:, j],
                               result.amplitudes[j], result.original_indices[j],
                               result.dt_label)
            for j in range(result.rank)
        )
        return cls(tuples=tuples, spatial_dim=result.modes.shape[0],
                   dt_label=result.dt_label)

    @property
    def n_modes(self) -> int:
        return len(self.tuples)


def reconstruct(model: ReducedOrderModel, k: int,
                return_residual: bool = False) -> np.ndarray | tuple[np.ndarray, float]:
    """Real part of sum_j mode_j * eigenvalue_j^k * amplitude_j at time index k.

    The relative imaginary residual is a diagnostic; it should vanish for
    conjugate-complete models and triggers a warning when it does not.
    """
    if k < 0:
        raise ValueError("time index must be nonnegative")
    acc = np.zeros(model.spatial_dim, dtype=complex)
    for t in model.tuples:
        acc += t.mode * (np.complex128(t.eigenvalue) ** k * np.complex128(t.amplitude))
    real = np.real(acc)
    denom = max(float(np.linalg.norm(real)), np.finfo(float).tiny)
    residual = float(np.linalg.norm(np.imag(acc))) / denom
    if residual > IMAG_RESIDUAL_TOL and np.linalg.norm(acc) > 0:
        warnings.warn(f"reconstruction imaginary residual {residual:.3e}")
    if return_residual:
        return real, residual
    return real


def _conjugate_representatives(model: ReducedOrderModel) -> list[int]:
    """Indices keeping one member of each conjugate pair (the one with
    nonnegative imaginary eigenvalue part)."""
    keep: list[int] = []
    used = [False] * model.n_modes
    for i, t in enumerate(model.tuples):
        if used[i]:
            continue
        partner = None
        scale = max(abs(t.eigenvalue), 1.0)
        for j in range(i + 1, model.n_modes):
            if used[j]:
                continue
            other = model.tuples[j]
            if (abs(other.eigenvalue - np.conj(t.eigenvalue)) <= CONJUGATE_TOL * scale
                    and abs(t.eigenvalue.imag) > CONJUGATE_TOL * scale):
                partner = j
                break
        if partner is not None:
            used[partner] = True
            rep = i if t.eigenvalue.imag >= 0 else partner
            keep.append(rep)
        else:
            keep.append(i)
        used[i] = True
    return keep


def temporal_dynamics(model: ReducedOrderModel, t_range: Iterable[int],
                      collapse_pairs: bool = False) -> np.ndarray:
    """Rows of Re(eigenvalue^t * amplitude) over t_range; with collapse_pairs
    only one representative row per conjugate pair is emitted."""
    ts = np.asarray(list(t_range))
    if ts.size == 0:
        raise ValueError("empty time range")
    rows = (list(range(model.n_modes)) if not collapse_pairs
            else _conjugate_representatives(model))
    out = np.empty((len(rows), ts.size))
    for row, j in enumerate(rows):
        t = model.tuples[j]
        out[row] = np.real(t.eigenvalue ** ts.astype(complex) * t.amplitude)
    return out


def forecast(model: ReducedOrderModel, horizon: int, n_train: int) -> np.ndarray:
    """Extrapolate the linear surrogate past the training window; growing modes
    may saturate at the float limit (warned, values still returned)."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if n_train < 0:
        raise ValueError("n_train must be nonnegative")
    out = np.empty((model.spatial_dim, horizon))
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(horizon):
            out[:, step] = reconstruct(model, n_train + step)
    if not np.all(np.isfinite(out)):
        warnings.warn("forecast overflowed for growing modes; saturating values")
        out = np.nan_to_num(out, posinf=np.finfo(float).max, neginf=-np.finfo(float).max)
    return out


def mode_magnitude_grid(
    tup: KoopmanTuple,
    grid_shape: Sequence[int],
    mask: np.ndarray | None = None,
    cycles: int = 1,
    reduce: str | None = None,
) -> np.ndarray:
    """Element-wise mode magnitude on the (n_lat, n_lon) grid, NaN at masked points.

    Cycle-stacked modes (length base*cycles) yield one grid per intra-cycle slot,
    or their mean with reduce="mean".
    """
    n_lat, n_lon = int(grid_shape[0]), int(grid_shape[1])
    full = n_lat * n_lon
    if mask is not None:
        mask = np.asarray(mask, dtype=bool).reshape(-1)
        if mask.size != full:
            raise ValueError(f"mask length {mask.size} != grid size {full}")
        base = int(mask.sum())
    else:
        base = full
    if base * cycles != tup.mode.shape[0]:
        raise ValueError(
            f"mode length {tup.mode.shape[0]} != {base} grid points x {cycles} cycles"
        )
    mag = np.abs(tup.mode)
    grids = np.full((cycles, full), np.nan)
    for c in range(cycles):
        chunk = mag[c * base:(c + 1) * base]
        if mask is not None:
            grids[c, mask] = chunk
        else:
            grids[c] = chunk
    grids = grids.reshape(cycles, n_lat, n_lon)
    if reduce == "mean":
        return grids.mean(axis=0)
    if reduce is not None:
        raise ValueError(f"unknown reduce {reduce!r}")
    return grids[0] if cycles == 1 else grids
