"""Sparsity-promoting amplitude selection via operator splitting and polishing."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .dmd import DecompositionResult, Vandermonde

ZERO_REL_TOL = 1e-12
HERMITIAN_TOL = 1e-10
PSD_REL_TOL = 1e-8


@dataclass(frozen=True)
class QuadraticForm:
    """(P, q, s) with ||Y - Phi diag(b) Xi||_F^2 = b*Pb - q*b - b*q + s."""

    P: np.ndarray
    q: np.ndarray
    s: float

    def __post_init__(self) -> None:
        P = np.asarray(self.P, dtype=complex)
        if np.max(np.abs(P - P.conj().T)) > HERMITIAN_TOL * max(1.0, np.abs(P).max()):
            raise ValueError("P is not Hermitian")
        evals = np.linalg.eigvalsh(P)
        if evals[0] < -PSD_REL_TOL * max(evals[-1], 1.0):
            raise ValueError(f"P is not positive semidefinite (min eig {evals[0]:.3e})")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "q", np.asarray(self.q, dtype=complex).reshape(-1))
        object.__setattr__(self, "s", float(self.s))

    @property
    def size(self) -> int:
        return self.q.shape[0]

    def objective(self, b: np.ndarray) -> float:
        """Value of the reconstruction objective at amplitude vector b."""
        b = np.asarray(b, dtype=complex).reshape(-1)
        val = np.real(np.vdot(b, self.P @ b)) - 2.0 * np.real(np.vdot(self.q, b)) + self.s
        return max(val, 0.0)


@dataclass(frozen=True)
class SparseSolution:
    """One regularized solve: splitting iterate, polished optimum, and summary."""

    b_sparse: np.ndarray
    b_polished: np.ndarray
    support: np.ndarray
    gamma: float
    cardinality: int
    cost: float
    loss_percent: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class ParetoPoint:
    gamma: float
    cardinality: int
    cost: float
    loss_percent: float


@dataclass(frozen=True)
class AdmmParams:
    rho: float = 1.0
    eps_abs: float = 1e-6
    eps_rel: float = 1e-4
    max_iter: int = 10000
    warm_start: bool = True


@dataclass
class AdmmResult:
    b: np.ndarray
    iterations: int
    converged: bool
    primal_residual: float
    dual_residual: float
    z: np.ndarray = field(repr=False, default=None)
    u: np.ndarray = field(repr=False, default=None)


def quadratic_form(Y: np.ndarray, modes: np.ndarray, vand: Vandermonde | np.ndarray) -> QuadraticForm:
    """Reduce the Frobenius objective over amplitudes to (P, q, s)."""
    xi = vand.data if isinstance(vand, Vandermonde) else np.asarray(vand)
    Y = np.asarray(Y)
    if modes.shape[0] != Y.shape[0] or xi.shape[1] != Y.shape[1] or modes.shape[1] != xi.shape[0]:
        raise ValueError(
            f"incompatible shapes Y{Y.shape}, modes{modes.shape}, vandermonde{xi.shape}"
        )
    G = modes.conj().T @ modes
    H = xi @ xi.conj().T
    P = G * H.conj()
    P = 0.5 * (P + P.conj().T)
    q = np.conj(np.diag(xi @ Y.conj().T @ modes))
    s = float(np.real(np.trace(Y.conj().T @ Y)))
    return QuadraticForm(P=P, q=q, s=s)


def soft_threshold(v: np.ndarray, kappa: float) -> np.ndarray:
    """Complex shrinkage: reduce magnitude by kappa, preserve phase."""
    mag = np.abs(v)
    scale = np.maximum(1.0 - kappa / np.maximum(mag, np.finfo(float).tiny), 0.0)
    return scale * v


def admm_solve(
    form: QuadraticForm,
    gamma: float,
    params: AdmmParams = AdmmParams(),
    z0: np.ndarray | None = None,
    u0: np.ndarray | None = None,
) -> AdmmResult:
    """Minimize the l1-regularized amplitude objective by alternating directions.

    x-update solves (2P + rho I) x = 2q + rho (z - u); z-update soft-thresholds
    at gamma/rho. gamma = 0 short-circuits to the minimum-norm normal solve.
    """
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    if params.rho <= 0:
        raise ValueError("rho must be positive")
    r = form.size
    if gamma == 0.0:
        b, *_ = np.linalg.lstsq(form.P, form.q, rcond=None)
        return AdmmResult(b=b, iterations=0, converged=True,
                          primal_residual=0.0, dual_residual=0.0, z=b.copy(),
                          u=np.zeros(r, dtype=complex))
    rho = params.rho
    M = 2.0 * form.P + rho * np.eye(r)
    try:
        cho = scipy.linalg.cho_factor(M)
    except np.linalg.LinAlgError:
        ridge = 1e-12 * np.real(np.trace(form.P)) / r
        cho = scipy.linalg.cho_factor(M + ridge * np.eye(r))
    z = np.zeros(r, dtype=complex) if z0 is None else z0.astype(complex).copy()
    u = np.zeros(r, dtype=complex) if u0 is None else u0.astype(complex).copy()
    kappa = gamma / rho
    sqrt_r = np.sqrt(r)
    x = z.copy()
    prim = dual = np.inf
    for it in range(1, params.max_iter + 1):
        x = scipy.linalg.cho_solve(cho, 2.0 * form.q + rho * (z - u))
        z_old = z
        z = soft_threshold(x + u, kappa)
        u = u + x - z
        prim = float(np.linalg.norm(x - z))
        dual = float(rho * np.linalg.norm(z - z_old))
        eps_prim = params.eps_abs * sqrt_r + params.eps_rel * max(
            np.linalg.norm(x), np.linalg.norm(z)
        )
        eps_dual = params.eps_abs * sqrt_r + params.eps_rel * rho * np.linalg.norm(u)
        if prim <= eps_prim and dual <= eps_dual:
            return AdmmResult(b=z, iterations=it, converged=True,
                              primal_residual=prim, dual_residual=dual, z=z, u=u)
    warnings.warn(
        f"splitting did not converge in {params.max_iter} iterations "
        f"(primal {prim:.3e}, dual {dual:.3e})"
    )
    return AdmmResult(b=z, iterations=params.max_iter, converged=False,
                      primal_residual=prim, dual_residual=dual, z=z, u=u)


def detect_support(b: np.ndarray, rel_tol: float = ZERO_REL_TOL) -> np.ndarray:
    """Indices with |b_i| above rel_tol times the largest magnitude."""
    mag = np.abs(np.asarray(b))
    peak = mag.max(initial=0.0)
    if peak == 0.0:
        return np.array([], dtype=int)
    return np.flatnonzero(mag > rel_tol * peak)


def polish(form: QuadraticForm, support: np.ndarray) -> np.ndarray:
    """Re-optimize amplitudes with the sparsity pattern fixed, via the KKT system
    that pins the complement of the support to zero."""
    r = form.size
    support = np.asarray(support, dtype=int)
    if support.size and (support.min() < 0 or support.max() >= r):
        raise ValueError("support indices out of range")
    b = np.zeros(r, dtype=complex)
    if support.size == 0:
        return b
    comp = np.setdiff1d(np.arange(r), support)
    if comp.size == 0:
        sol, *_ = np.linalg.lstsq(2.0 * form.P, 2.0 * form.q, rcond=None)
        return sol
    E = np.eye(r, dtype=complex)[comp]
    kkt = np.block([
        [2.0 * form.P, E.conj().T],
        [E, np.zeros((comp.size, comp.size), dtype=complex)],
    ])
    rhs = np.concatenate([2.0 * form.q, np.zeros(comp.size, dtype=complex)])
    sol, _, rank, _ = np.linalg.lstsq(kkt, rhs, rcond=None)
    if rank < kkt.shape[0]:
        warnings.warn("singular polishing system, using minimum-norm solution")
    b = sol[:r]
    b[comp] = 0.0
    return b


def performance_loss(cost: float, s: float) -> float:
    """Residual norm relative to the data norm, as a percentage."""
    if s <= 0:
        raise ValueError("data energy s must be positive")
    if cost < 0:
        raise ValueError("cost must be nonnegative")
    return 100.0 * float(np.sqrt(cost / s))


def solve_at_gamma(
    form: QuadraticForm,
    gamma: float,
    params: AdmmParams = AdmmParams(),
    z0: np.ndarray | None = None,
    u0: np.ndarray | None = None,
) -> tuple[SparseSolution, AdmmResult]:
    """One sweep entry: split, detect support, polish, score."""
    admm = admm_solve(form, gamma, params, z0=z0, u0=u0)
    support = detect_support(admm.b)
    b_sparse = admm.b.copy()
    b_sparse[np.setdiff1d(np.arange(form.size), support)] = 0.0
    b_pol = polish(form, support)
    cost = form.objective(b_pol)
    solution = SparseSolution(
        b_sparse=b_sparse,
        b_polished=b_pol,
        support=support,
        gamma=float(gamma),
        cardinality=int(support.size),
        cost=cost,
        loss_percent=performance_loss(cost, form.s),
        iterations=admm.iterations,
        converged=admm.converged,
    )
    return solution, admm


def log_gamma_grid(gamma_min: float, gamma_max: float, count: int) -> np.ndarray:
    """Geometric grid inclusive of both endpoints."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if count == 1:
        return np.array([float(gamma_min)])
    if gamma_min <= 0:
        raise ValueError("gamma_min must be positive for a log-spaced grid")
    if gamma_min > gamma_max:
        raise ValueError("gamma_min must not exceed gamma_max")
    return np.geomspace(gamma_min, gamma_max, count)


def gamma_sweep(
    form: QuadraticForm,
    gammas: np.ndarray,
    params: AdmmParams = AdmmParams(),
) -> tuple[list[ParetoPoint], list[SparseSolution]]:
    """Solve ascending in gamma, warm-starting each solve from the previous one
    (disable via params.warm_start for independent evaluation)."""
    gammas = np.asarray(gammas, dtype=float).reshape(-1)
    if gammas.size == 0:
        raise ValueError("gamma grid is empty")
    if np.any(gammas < 0):
        raise ValueError("gammas must be nonnegative")
    order = np.argsort(gammas, kind="stable")
    solutions: list[SparseSolution] = [None] * gammas.size
    z0 = u0 = None
    for idx in order:
        sol, admm = solve_at_gamma(
            form, gammas[idx], params,
            z0=z0 if params.warm_start else None,
            u0=u0 if params.warm_start else None,
        )
        solutions[idx] = sol
        if params.warm_start:
            z0, u0 = admm.z, admm.u
    solutions = [solutions[i] for i in order]
    points = [
        ParetoPoint(gamma=s.gamma, cardinality=s.cardinality,
                    cost=s.cost, loss_percent=s.loss_percent)
        for s in solutions
    ]
    return points, solutions


def select_modes(result: DecompositionResult, solution: SparseSolution) -> DecompositionResult:
    """Restrict a decomposition to the nonzero amplitudes of a sparse solution.

    The solution's support indexes the column order of `result` at the time the
    quadratic form was built; `result` must not have been re-sorted since.
    """
    support = solution.support
    if support.size == 0:
        warnings.warn("empty support, returning empty decomposition")
        return DecompositionResult(
            eigenvalues=np.zeros(0, dtype=complex),
            modes=np.zeros((result.modes.shape[0], 0), dtype=complex),
            amplitudes=np.zeros(0, dtype=complex),
            rank=0,
            method="spdmd",
            dt_label=result.dt_label,
            original_indices=np.zeros(0, dtype=int),
        )
    restricted = DecompositionResult(
        eigenvalues=result.eigenvalues[support],
        modes=result.modes[:, support],
        amplitudes=None,
        rank=int(support.size),
        method="spdmd",
        dt_label=result.dt_label,
        original_indices=result.original_indices[support],
    )
    return restricted.with_amplitudes(solution.b_polished[support])
