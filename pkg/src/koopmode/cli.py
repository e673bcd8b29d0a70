"""Command-line pipelines: ingest-info, decompose, sweep, reconstruct, heatmap.

All artifacts are plain CSV/JSON with 17-significant-digit floats, written
atomically (a failed run leaves no partial files) and byte-stable across runs.
"""
from __future__ import annotations

import argparse
import json
import os
import shutil
import sys
import tempfile
from contextlib import contextmanager
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .cdmd import companion_dmd
from .dmd import DecompositionResult, exact_dmd, mode_stats, optimal_amplitudes, vandermonde
from .rom import KoopmanTuple, ReducedOrderModel, forecast, reconstruct, temporal_dynamics
from .snapshots import (
    SnapshotMatrix,
    apply_mask,
    build_pairs,
    format_float,
    load_mask,
    load_matrix,
    stack_cycles,
    subtract_mean,
)
from .spdmd import AdmmParams, gamma_sweep, log_gamma_grid, quadratic_form, select_modes, solve_at_gamma

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

NAN_COLOR = (255, 0, 255)


@dataclass
class RunConfig:
    """Parameters of one pipeline run; flags mirror the CLI one-to-one."""

    input: str = ""
    format: str = "csv"
    grid_shape: tuple[int, int] | None = None
    mask: str | None = None
    cycles: int = 1
    method: str = "dmd"
    rank: int | None = None
    mode_style: str = "exact"
    gamma: float = 0.0
    gamma_min: float = 1e-3
    gamma_max: float = 1e3
    gamma_count: int = 50
    rho: float = 1.0
    eps_abs: float = 1e-6
    eps_rel: float = 1e-4
    max_iter: int = 10000
    warm_start: bool = True
    out: str = "out"
    dt_label: str = "step"
    subtract_mean: bool = False
    transpose: bool = False
    header: bool = False
    pair_collapse: bool = False
    top_modes: int | None = None

    def validate(self) -> None:
        if self.method not in ("dmd", "cdmd", "spdmd"):
            raise UsageError(f"unknown method {self.method!r}")
        if self.gamma_count > 1 and self.gamma_min <= 0:
            raise UsageError("gamma-min must be positive for a log-spaced grid")
        if self.gamma_min > self.gamma_max:
            raise UsageError("gamma-min must not exceed gamma-max")
        if self.cycles < 1:
            raise UsageError("cycles must be >= 1")

    def admm_params(self) -> AdmmParams:
        return AdmmParams(rho=self.rho, eps_abs=self.eps_abs, eps_rel=self.eps_rel,
                          max_iter=self.max_iter, warm_start=self.warm_start)


class UsageError(Exception):
    """Bad invocation or configuration; maps to exit status 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # exit 1 on usage errors, not argparse's 2
        self.print_usage(sys.stderr)
        raise UsageError(message)


@contextmanager
def _staged_output(outdir: str | Path):
    """Write artifacts into a staging directory, publish only on success."""
    outdir = Path(outdir)
    outdir.parent.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=".stage-", dir=outdir.parent))
    try:
        yield stage
    except BaseException:
        shutil.rmtree(stage, ignore_errors=True)
        raise
    outdir.mkdir(parents=True, exist_ok=True)
    for child in sorted(stage.iterdir()):
        dest = outdir / child.name
        if dest.is_dir():
            shutil.rmtree(dest)
        os.replace(child, dest)
    stage.rmdir()


def _write_csv(path: Path, header: list[str] | None, rows) -> None:
    with open(path, "w") as fh:
        if header:
            fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(v if isinstance(v, str) else format_float(v) for v in row)
                     + "\n")


def _write_grid_csv(path: Path, grid: np.ndarray) -> None:
    _write_csv(path, None, np.atleast_2d(grid))


def _load_input(cfg: RunConfig) -> SnapshotMatrix:
    X = load_matrix(cfg.input, format=cfg.format, grid_shape=cfg.grid_shape,
                    header=cfg.header, transpose=cfg.transpose, dt_label=cfg.dt_label)
    if cfg.mask is not None:
        if cfg.grid_shape is None:
            raise UsageError("--mask requires --grid-shape")
        X = apply_mask(X, load_mask(cfg.mask, cfg.grid_shape))
    if cfg.cycles > 1:
        X = stack_cycles(X, cfg.cycles)
    if cfg.subtract_mean:
        X, _ = subtract_mean(X)
    return X


def _fit(cfg: RunConfig, X: SnapshotMatrix):
    """Run the selected decomposition and the amplitude fit against Y.

    Returns (result_sorted_by_amplitude, fit_matrix Y, quadratic form).
    """
    pair = build_pairs(X)
    if cfg.method == "cdmd":
        result = companion_dmd(X)
        Y = X.data[:, :-1]
        vand = vandermonde(result.eigenvalues, Y.shape[1])
        form = quadratic_form(Y, result.modes, vand)
        return result, Y, form
    base = exact_dmd(pair, rank=cfg.rank, mode_style=cfg.mode_style)
    Y = pair.Y
    vand = vandermonde(base.eigenvalues, Y.shape[1])
    form = quadratic_form(Y, base.modes, vand)
    if cfg.method == "spdmd":
        solution, _ = solve_at_gamma(form, cfg.gamma, cfg.admm_params())
        result = select_modes(base, solution)
        if result.rank == 0:
            raise ValueError(f"gamma={cfg.gamma} zeroed out every amplitude")
        return result, Y, form
    b = optimal_amplitudes(Y, base.modes, vand)
    return base.with_amplitudes(b), Y, form


def _full_fit_loss(form, result: DecompositionResult) -> float:
    b_full = np.zeros(form.size, dtype=complex)
    # undo the amplitude sort so b lines up with the form's column order
    pos = {int(idx): j for j, idx in enumerate(result.original_indices)}
    for i in range(form.size):
        if i in pos:
            b_full[i] = result.amplitudes[pos[i]]
    cost = form.objective(b_full)
    return 100.0 * float(np.sqrt(cost / form.s)) if form.s > 0 else 0.0


def _mode_to_grids(vec: np.ndarray, grid_shape, mask, cycles: int) -> np.ndarray:
    """Reshape one spatial vector onto (cycles, n_lat, n_lon), NaN at masked cells."""
    n_lat, n_lon = grid_shape
    full = n_lat * n_lon
    base = int(mask.sum()) if mask is not None else full
    grids = np.full((cycles, full), np.nan)
    for c in range(cycles):
        chunk = vec[c * base:(c + 1) * base]
        if mask is not None:
            grids[c, mask] = chunk
        else:
            grids[c] = chunk
    return grids.reshape(cycles, n_lat, n_lon)


def _write_decomposition(stage: Path, cfg: RunConfig, X: SnapshotMatrix,
                         result: DecompositionResult, Y: np.ndarray,
                         full_loss: float) -> None:
    rows = []
    for j in range(result.rank):
        lam = result.eigenvalues[j]
        b = result.amplitudes[j]
        stats = mode_stats(lam, result.dt_label)
        rows.append([
            str(int(result.original_indices[j])),
            lam.real, lam.imag, stats.magnitude, stats.e_folding, stats.period,
            b.real, b.imag, abs(b),
        ])
    _write_csv(stage / "eigenvalues.csv",
               ["index", "re", "im", "magnitude", "e_folding", "period",
                "amp_re", "amp_im", "amp_abs"], rows)

    _write_csv(
        stage / "modes_matrix.csv", None,
        [[v for j in range(result.rank)
          for v in (result.modes[i, j].real, result.modes[i, j].imag)]
         for i in range(result.modes.shape[0])],
    )

    grid_shape = cfg.grid_shape if cfg.grid_shape is not None else (1, X.p // cfg.cycles)
    n_export = result.rank if cfg.top_modes is None else min(cfg.top_modes, result.rank)
    modes_dir = stage / "modes"
    modes_dir.mkdir()
    for j in range(n_export):
        idx = int(result.original_indices[j])
        col = result.modes[:, j]
        for tag, values in (("real", col.real), ("imag", col.imag), ("abs", np.abs(col))):
            grids = _mode_to_grids(values, grid_shape, X.mask, cfg.cycles)
            _write_grid_csv(modes_dir / f"{idx}_{tag}.csv", grids.mean(axis=0))

    model = ReducedOrderModel.from_result(result)
    ts = np.arange(Y.shape[1])
    dyn = temporal_dynamics(model, ts, collapse_pairs=cfg.pair_collapse)
    header = ["t"] + [f"mode{int(i)}" for i in range(dyn.shape[0])]
    _write_csv(stage / "temporal.csv", header,
               [[float(t)] + list(dyn[:, k]) for k, t in enumerate(ts)])

    summary = {
        "toolkit_version": __version__,
        "method": result.method,
        "rank": int(result.rank),
        "data_shape": [int(X.p), int(X.n_steps)],
        "grid_shape": list(grid_shape),
        "cycles": int(cfg.cycles),
        "dt_label": result.dt_label,
        "full_fit_loss_percent": full_loss,
        "config": {k: (list(v) if isinstance(v, tuple) else v)
                   for k, v in asdict(cfg).items()},
    }
    (stage / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


def cmd_decompose(cfg: RunConfig) -> int:
    cfg.validate()
    X = _load_input(cfg)
    result, Y, form = _fit(cfg, X)
    with _staged_output(cfg.out) as stage:
        _write_decomposition(stage, cfg, X, result, Y, _full_fit_loss(form, result))
    return EXIT_OK


def cmd_sweep(cfg: RunConfig) -> int:
    cfg.validate()
    if cfg.method != "spdmd":
        raise UsageError("sweep requires method spdmd")
    X = _load_input(cfg)
    pair = build_pairs(X)
    base = exact_dmd(pair, rank=cfg.rank, mode_style=cfg.mode_style)
    vand = vandermonde(base.eigenvalues, pair.Y.shape[1])
    form = quadratic_form(pair.Y, base.modes, vand)
    gammas = log_gamma_grid(cfg.gamma_min, cfg.gamma_max, cfg.gamma_count)
    points, solutions = gamma_sweep(form, gammas, cfg.admm_params())
    with _staged_output(cfg.out) as stage:
        header = ["gamma", "cardinality", "cost", "loss_percent", "iterations", "converged"]
        _write_csv(stage / "sweep.csv", header,
                   [[s.gamma, float(s.cardinality), s.cost, s.loss_percent,
                     float(s.iterations), "true" if s.converged else "false"]
                    for s in solutions])
        best: dict[int, int] = {}
        for i, s in enumerate(solutions):
            if s.cardinality not in best or s.loss_percent < solutions[best[s.cardinality]].loss_percent:
                best[s.cardinality] = i
        chosen = sorted(best.values())
        _write_csv(stage / "pareto.csv", header,
                   [[solutions[i].gamma, float(solutions[i].cardinality),
                     solutions[i].cost, solutions[i].loss_percent,
                     float(solutions[i].iterations),
                     "true" if solutions[i].converged else "false"]
                    for i in chosen])
    return EXIT_OK


def _load_model(artifacts: Path) -> tuple[ReducedOrderModel, dict]:
    summary = json.loads((artifacts / "summary.json").read_text())
    eig = np.loadtxt(artifacts / "eigenvalues.csv", delimiter=",", skiprows=1, ndmin=2)
    modes_flat = np.loadtxt(artifacts / "modes_matrix.csv", delimiter=",", ndmin=2)
    rank = eig.shape[0]
    modes = modes_flat[:, 0::2] + 1j * modes_flat[:, 1::2]
    tuples = tuple(
        KoopmanTuple.build(
            eigenvalue=complex(eig[j, 1], eig[j, 2]),
            mode=modes[:, j],
            amplitude=complex(eig[j, 6], eig[j, 7]),
            original_index=int(eig[j, 0]),
            dt_label=summary["dt_label"],
        )
        for j in range(rank)
    )
    model = ReducedOrderModel(tuples=tuples, spatial_dim=modes.shape[0],
                              dt_label=summary["dt_label"])
    return model, summary


def cmd_reconstruct(artifacts: str, out: str, at: list[int], horizon: int | None,
                    input_path: str | None = None, input_cfg: RunConfig | None = None) -> int:
    if horizon is not None and horizon < 1:
        raise UsageError("horizon must be >= 1 when given")
    if horizon is None and not at:
        raise UsageError("nothing to do: need --at indices or --horizon >= 1")
    art = Path(artifacts)
    for needed in ("summary.json", "eigenvalues.csv", "modes_matrix.csv"):
        if not (art / needed).exists():
            raise FileNotFoundError(f"missing artifact {art / needed}")
    model, summary = _load_model(art)
    n_train = int(summary["data_shape"][1]) - 1
    reference = None
    if input_path is not None:
        cfg = input_cfg or RunConfig()
        cfg.input = input_path
        reference = _load_input(cfg)
        if reference.p != model.spatial_dim:
            raise ValueError(
                f"input has p={reference.p}, model expects {model.spatial_dim}"
            )
    report: dict = {"indices": list(map(int, at)), "horizon": int(horizon),
                    "relative_errors": {}, "imag_residuals": {}}
    with _staged_output(out) as stage:
        for k in at:
            if k < 0:
                raise UsageError("reconstruction indices must be nonnegative")
            vec, resid = reconstruct(model, k, return_residual=True)
            _write_csv(stage / f"recon_{k}.csv", None, [[v] for v in vec])
            report["imag_residuals"][str(k)] = resid
            if reference is not None and k < reference.n_steps:
                col = reference.data[:, k]
                denom = max(float(np.linalg.norm(col)), np.finfo(float).tiny)
                report["relative_errors"][str(k)] = float(
                    np.linalg.norm(vec - col) / denom
                )
        if horizon is not None:
            fc = forecast(model, horizon, n_train)
            _write_csv(stage / "forecast.csv", None, fc)
        (stage / "recon_report.json").write_text(
            json.dumps(report, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def read_grid_csv(path: str | Path) -> np.ndarray:
    """Rectangular numeric grid, NaN sentinel allowed; ragged rows are an error."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rows.append([float(tok) for tok in line.split(",")])
    if not rows:
        raise ValueError(f"empty grid file {path}")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ValueError(f"ragged rows in grid file {path}")
    return np.asarray(rows)


def render_heatmap(grid: np.ndarray) -> bytes:
    """Binary PPM: linear grayscale from grid min to max, NaN in a fixed color."""
    h, w = grid.shape
    finite = grid[np.isfinite(grid)]
    lo = float(finite.min()) if finite.size else 0.0
    hi = float(finite.max()) if finite.size else 0.0
    span = hi - lo
    pixels = bytearray()
    for i in range(h):
        for j in range(w):
            v = grid[i, j]
            if not np.isfinite(v):
                pixels.extend(NAN_COLOR)
            else:
                g = 0 if span == 0 else int(round(255.0 * (v - lo) / span))
                pixels.extend((g, g, g))
    return f"P6\n{w} {h}\n255\n".encode() + bytes(pixels)


def cmd_heatmap(grid_path: str, out_path: str) -> int:
    grid = read_grid_csv(grid_path)
    data = render_heatmap(grid)
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = out.with_suffix(out.suffix + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, out)
    return EXIT_OK


def cmd_ingest_info(cfg: RunConfig) -> int:
    cfg.validate()
    X = _load_input(cfg)
    info = {
        "p": X.p,
        "n_steps": X.n_steps,
        "dt_label": X.dt_label,
        "grid_shape": list(X.grid_shape) if X.grid_shape else None,
        "masked_points": int(X.mask.sum()) if X.mask is not None else None,
        "min": float(X.data.min()),
        "max": float(X.data.max()),
        "mean": float(X.data.mean()),
    }
    print(json.dumps(info, indent=2, sort_keys=True))
    return EXIT_OK


def _add_input_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("input", help="snapshot matrix file")
    sub.add_argument("--format", choices=("csv", "raw-float64"), default="csv")
    sub.add_argument("--header", action="store_true", help="skip one CSV header line")
    sub.add_argument("--transpose", action="store_true",
                     help="input is time x space instead of space x time")
    sub.add_argument("--grid-shape", nargs=2, type=int, metavar=("NLAT", "NLON"))
    sub.add_argument("--mask", help="0/1 CSV mask over the full grid")
    sub.add_argument("--cycles", type=int, default=1,
                     help="stack this many consecutive snapshots per column")
    sub.add_argument("--subtract-mean", action="store_true")
    sub.add_argument("--dt-label", default="step")


def _add_solver_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--rho", type=float, default=1.0)
    sub.add_argument("--eps-abs", type=float, default=1e-6)
    sub.add_argument("--eps-rel", type=float, default=1e-4)
    sub.add_argument("--max-iter", type=int, default=10000)
    sub.add_argument("--no-warm-start", action="store_true")


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    for name in vars(cfg):
        if hasattr(args, name):
            setattr(cfg, name, getattr(args, name))
    if getattr(args, "grid_shape", None):
        cfg.grid_shape = (args.grid_shape[0], args.grid_shape[1])
    if getattr(args, "no_warm_start", False):
        cfg.warm_start = False
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="koopmode",
                     description="Koopman mode decomposition pipelines")
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("ingest-info", help="load and summarize a snapshot matrix")
    _add_input_args(p)

    p = subs.add_parser("decompose", help="run a decomposition and export artifacts")
    _add_input_args(p)
    p.add_argument("--method", choices=("dmd", "cdmd", "spdmd"), default="dmd")
    p.add_argument("--rank", type=int, default=None)
    p.add_argument("--mode-style", choices=("exact", "projected"), default="exact")
    p.add_argument("--gamma", type=float, default=0.0,
                   help="sparsity weight (method spdmd only)")
    p.add_argument("--pair-collapse", action="store_true",
                   help="emit one temporal row per conjugate pair")
    p.add_argument("--top-modes", type=int, default=None,
                   help="limit how many mode grids are exported")
    p.add_argument("--out", default="out")
    _add_solver_args(p)

    p = subs.add_parser("sweep", help="trade accuracy against mode count over gamma")
    _add_input_args(p)
    p.add_argument("--method", choices=("spdmd",), default="spdmd")
    p.add_argument("--rank", type=int, default=None)
    p.add_argument("--mode-style", choices=("exact", "projected"), default="exact")
    p.add_argument("--gamma-min", type=float, default=1e-3)
    p.add_argument("--gamma-max", type=float, default=1e3)
    p.add_argument("--gamma-count", type=int, default=50)
    p.add_argument("--out", default="out")
    _add_solver_args(p)

    p = subs.add_parser("reconstruct", help="rebuild snapshots and forecast from artifacts")
    p.add_argument("--artifacts", required=True, help="decompose output directory")
    p.add_argument("--at", type=int, action="append", default=[],
                   help="time index to reconstruct (repeatable)")
    p.add_argument("--horizon", type=int, default=None,
                   help="forecast this many steps past the training window")
    p.add_argument("--input", default=None,
                   help="original data file for per-column error reporting")
    p.add_argument("--format", choices=("csv", "raw-float64"), default="csv")
    p.add_argument("--header", action="store_true")
    p.add_argument("--transpose", action="store_true")
    p.add_argument("--grid-shape", nargs=2, type=int, metavar=("NLAT", "NLON"))
    p.add_argument("--mask", default=None)
    p.add_argument("--cycles", type=int, default=1)
    p.add_argument("--subtract-mean", action="store_true")
    p.add_argument("--out", default="out")

    p = subs.add_parser("heatmap", help="render a grid CSV as a grayscale PPM image")
    p.add_argument("grid", help="grid CSV (NaN sentinel allowed)")
    p.add_argument("out", help="output .ppm path")

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "ingest-info":
            return cmd_ingest_info(_config_from_args(args))
        if args.command == "decompose":
            return cmd_decompose(_config_from_args(args))
        if args.command == "sweep":
            cfg = _config_from_args(args)
            cfg.method = "spdmd"
            return cmd_sweep(cfg)
        if args.command == "reconstruct":
            input_cfg = _config_from_args(args) if args.input else None
            return cmd_reconstruct(args.artifacts, args.out, args.at, args.horizon,
                                   input_path=args.input, input_cfg=input_cfg)
        if args.command == "heatmap":
            return cmd_heatmap(args.grid, args.out)
        raise UsageError(f"unknown command {args.command!r}")
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # argparse --help / --version
        code = exc.code if isinstance(exc.code, int) else 0
        return code
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
