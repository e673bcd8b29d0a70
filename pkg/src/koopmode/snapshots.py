"""Snapshot ingestion: loading, masking, cycle stacking, and time-shift pairing."""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

FORMATS = ("csv", "raw-float64")


@dataclass(frozen=True)
class SnapshotMatrix:
    """A p x N matrix of observable snapshots, one time step per column."""

    data: np.ndarray
    grid_shape: tuple[int, int] | None = None
    mask: np.ndarray | None = None
    dt_label: str = "step"

    def __post_init__(self) -> None:
        data = np.ascontiguousarray(np.asarray(self.data, dtype=np.float64))
        if data.ndim != 2:
            raise ValueError(f"snapshot data must be 2-D, got shape {data.shape}")
        if data.shape[1] < 2:
            raise ValueError(f"need at least 2 snapshots, got N={data.shape[1]}")
        if not np.all(np.isfinite(data)):
            raise ValueError("snapshot data contains NaN/Inf after masking")
        object.__setattr__(self, "data", data)
        if self.mask is not None:
            mask = np.asarray(self.mask, dtype=bool).reshape(-1)
            object.__setattr__(self, "mask", mask)
            if self.grid_shape is not None:
                n_lat, n_lon = self.grid_shape
                if mask.size != n_lat * n_lon:
                    raise ValueError(
                        f"mask length {mask.size} does not match grid {n_lat}x{n_lon}"
                    )
                if int(mask.sum()) != data.shape[0]:
                    raise ValueError(
                        f"mask keeps {int(mask.sum())} points but data has p={data.shape[0]} rows"
                    )
        if self.grid_shape is not None and self.mask is None:
            n_lat, n_lon = self.grid_shape
            if n_lat * n_lon < data.shape[0]:
                raise ValueError(
                    f"grid {n_lat}x{n_lon} smaller than p={data.shape[0]}"
                )

    @property
    def p(self) -> int:
        return self.data.shape[0]

    @property
    def n_steps(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class SnapshotPair:
    """Time-shifted copies: Yplus[:, k] is the successor of Y[:, k]."""

    Y: np.ndarray
    Yplus: np.ndarray
    dt_label: str = "step"

    def __post_init__(self) -> None:
        if self.Y.shape != self.Yplus.shape:
            raise ValueError("Y and Yplus must have identical shapes")


def load_matrix(
    path: str | Path,
    format: str = "csv",
    grid_shape: tuple[int, int] | None = None,
    *,
    header: bool = False,
    transpose: bool = False,
    dt_label: str = "step",
) -> SnapshotMatrix:
    """Load a snapshot matrix from CSV or raw little-endian float64 + JSON sidecar."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    if format not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}, got {format!r}")
    if format == "csv":
        data = np.loadtxt(path, delimiter=",", skiprows=1 if header else 0, ndmin=2)
    else:
        sidecar = path.with_suffix(path.suffix + ".json")
        if not sidecar.exists():
            raise FileNotFoundError(f"missing sidecar header {sidecar}")
        head = json.loads(sidecar.read_text())
        rows, cols = int(head["rows"]), int(head["cols"])
        payload = np.fromfile(path, dtype="<f8")
        if payload.size != rows * cols:
            raise ValueError(
                f"payload holds {payload.size} values, header declares {rows}x{cols}"
            )
        data = payload.reshape((rows, cols), order="F")
    if transpose:
        data = data.T
    return SnapshotMatrix(data, grid_shape=grid_shape, dt_label=dt_label)


def save_matrix(X: SnapshotMatrix, path: str | Path, format: str = "csv") -> None:
    """Write a snapshot matrix; inverse of load_matrix for both formats."""
    path = Path(path)
    if format not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}, got {format!r}")
    if format == "csv":
        with open(path, "w") as fh:
            for row in X.data:
                fh.write(",".join(format_float(v) for v in row) + "\n")
    else:
        sidecar = path.with_suffix(path.suffix + ".json")
        sidecar.write_text(
            json.dumps({"rows": X.p, "cols": X.n_steps}, sort_keys=True) + "\n"
        )
        np.asfortranarray(X.data).astype("<f8").ravel(order="F").tofile(path)


def format_float(x: float) -> str:
    """17-significant-digit text, lossless for float64; lowercase inf/nan."""
    if np.isnan(x):
        return "nan"
    if np.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(float(x), ".17g")


def load_mask(path: str | Path, grid_shape: tuple[int, int]) -> np.ndarray:
    """Read a 0/1 CSV mask, row-major over (lat, lon)."""
    values = np.loadtxt(path, delimiter=",").reshape(-1)
    n_lat, n_lon = grid_shape
    if values.size != n_lat * n_lon:
        raise ValueError(
            f"mask has {values.size} entries, grid needs {n_lat * n_lon}"
        )
    return values.astype(bool)


def apply_mask(X: SnapshotMatrix, mask: np.ndarray) -> SnapshotMatrix:
    """Keep only the rows flagged true; remembers the mapping for grid export."""
    mask = np.asarray(mask, dtype=bool).reshape(-1)
    if int(mask.sum()) == 0:
        raise ValueError("mask keeps zero points")
    if X.mask is None:
        if mask.size != X.p:
            raise ValueError(f"mask length {mask.size} != p={X.p}")
        data = X.data[mask]
        combined = mask
    else:
        if mask.size != X.mask.size:
            raise ValueError(
                f"mask length {mask.size} != stored grid size {X.mask.size}"
            )
        keep = mask[X.mask]
        if int(keep.sum()) == 0:
            raise ValueError("mask keeps zero of the retained points")
        data = X.data[keep]
        combined = X.mask & mask
    return SnapshotMatrix(data, grid_shape=X.grid_shape, mask=combined,
                          dt_label=X.dt_label)


def stack_cycles(X: SnapshotMatrix, c: int, dt_label: str | None = None) -> SnapshotMatrix:
    """Stack c consecutive snapshots into one tall column (seasonal c=3, annual c=12)."""
    if c < 1:
        raise ValueError(f"cycle length must be >= 1, got {c}")
    if c > X.n_steps:
        raise ValueError(f"cycle length {c} exceeds N={X.n_steps}")
    if c == 1:
        return X if dt_label is None else replace(X, dt_label=dt_label)
    n_out = X.n_steps // c
    dropped = X.n_steps - n_out * c
    if dropped:
        warnings.warn(f"dropping {dropped} trailing snapshot(s) not filling a cycle of {c}")
    stacked = X.data[:, : n_out * c].reshape(X.p, n_out, c)
    stacked = np.ascontiguousarray(stacked.transpose(2, 0, 1)).reshape(X.p * c, n_out)
    return SnapshotMatrix(stacked, grid_shape=X.grid_shape, mask=X.mask,
                          dt_label=dt_label if dt_label is not None else X.dt_label)


def unstack_cycles(X: SnapshotMatrix, c: int) -> np.ndarray:
    """Inverse of stack_cycles on the columns it kept."""
    if X.p % c:
        raise ValueError(f"p={X.p} not divisible by cycle length {c}")
    base = X.p // c
    cols = X.data.reshape(c, base, X.n_steps).transpose(1, 2, 0)
    return np.ascontiguousarray(cols).reshape(base, X.n_steps * c)


def build_pairs(X: SnapshotMatrix) -> SnapshotPair:
    """Split into the zero-lag matrix Y and its one-step-shifted copy Yplus."""
    return SnapshotPair(Y=X.data[:, :-1], Yplus=X.data[:, 1:], dt_label=X.dt_label)


def subtract_mean(X: SnapshotMatrix) -> tuple[SnapshotMatrix, np.ndarray]:
    """Remove the temporal mean of each row; returns (centered, mean) so the
    original data is recoverable by addition."""
    mean = X.data.mean(axis=1)
    centered = X.data - mean[:, None]
    return replace(X, data=centered), mean
