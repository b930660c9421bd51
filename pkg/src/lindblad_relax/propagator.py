"""Coefficient-space propagation and ensemble convergence experiments.

States are integrated in the traceless coordinates ``c~`` of a Hermitian
orthonormal basis, ``dc~/dt = M0(t) c~ + b(t)``, with ``c_0 = 1/sqrt(n)``
pinned so the trace is exact. Matrices are rebuilt only for diagnostics.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .certifier import _check_grid, cumulative_log_bound, lambda_samples
from .generator import GKLSGenerator
from .operators import (
    HermitianBasis,
    build_basis,
    check_density_matrix,
    from_coefficients,
    to_coefficients,
)
from .tolerances import DEFAULT, parallel_map

DEFAULT_TOL = DEFAULT.integrator
NOISE_FLOOR = 1e-12


class IntegrationError(RuntimeError):
    pass


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    tilde: np.ndarray  # (len(times), d - 1)
    n: int
    trace_err: np.ndarray
    min_eig: np.ndarray
    tilde_norm: np.ndarray
    nonunique: bool = False

    @property
    def c0(self) -> float:
        return 1.0 / np.sqrt(self.n)

    def coefficients(self, k: int) -> np.ndarray:
        return np.concatenate([[self.c0], self.tilde[k]])

    def state(self, k: int, basis: HermitianBasis) -> np.ndarray:
        return from_coefficients(self.coefficients(k), basis)

    def states(self, basis: HermitianBasis) -> np.ndarray:
        full = np.hstack([np.full((len(self.times), 1), self.c0), self.tilde])
        return (full @ basis.vectors.T).reshape(len(self.times), self.n, self.n)

    @property
    def positivity_violated(self) -> bool:
        return bool(np.any(self.min_eig < -DEFAULT.psd))


@dataclass
class ConvergenceSummary:
    times: np.ndarray
    max_pair_dist: np.ndarray
    decay_rate: float | None
    log_bound: np.ndarray  # running integral of Lambda
    lambdas: np.ndarray

    @property
    def envelope(self) -> np.ndarray:
        """Bound on ``|dc~(t)| / |dc~(0)|`` for any pair of solutions."""
        return np.exp(0.5 * self.log_bound)


def _rhs(gen: GKLSGenerator, basis: HermitianBasis):
    def f(t, y):
        blocks = gen.blocks(t, basis)
        return blocks.M0 @ y + blocks.b

    return f


def _diagnostics(tilde: np.ndarray, basis: HermitianBasis):
    n = basis.n
    full = np.hstack([np.full((tilde.shape[0], 1), 1 / np.sqrt(n)), tilde])
    rhos = (full @ basis.vectors.T).reshape(-1, n, n)
    trace_err = np.abs(np.trace(rhos, axis1=1, axis2=2) - 1.0)
    herm = 0.5 * (rhos + np.conj(np.swapaxes(rhos, 1, 2)))
    min_eig = np.linalg.eigvalsh(herm)[:, 0]
    return trace_err, min_eig, np.linalg.norm(tilde, axis=1)


def integrate_tilde(gen, y0, t_grid, basis, tol=DEFAULT_TOL, atol=None) -> np.ndarray:
    """Solve ``dc~/dt = M0 c~ + b`` and return ``c~`` on ``t_grid``."""
    t = _check_grid(t_grid)
    sol = solve_ivp(
        _rhs(gen, basis),
        (t[0], t[-1]),
        np.asarray(y0, dtype=float),
        method="RK45",
        t_eval=t,
        rtol=tol,
        atol=tol if atol is None else atol,
    )
    if sol.status != 0:
        raise IntegrationError(sol.message)
    return sol.y.T


def integrate(
    gen: GKLSGenerator,
    rho0,
    t_grid,
    tol: float = DEFAULT_TOL,
    basis: HermitianBasis | None = None,
    atol: float | None = None,
) -> TrajectoryRecord:
    """Propagate ``rho0`` and sample the solution on ``t_grid``.

    Adaptive Dormand-Prince 5(4) with dense output; ``tol`` bounds the local
    error per step. Positivity violations are recorded, not raised.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    basis = basis or build_basis(gen.dim)
    rho0 = check_density_matrix(rho0)
    c = to_coefficients(rho0, basis)
    tilde = integrate_tilde(gen, c[1:], t_grid, basis, tol, atol)
    trace_err, min_eig, norms = _diagnostics(tilde, basis)
    return TrajectoryRecord(np.asarray(t_grid, dtype=float), tilde, basis.n, trace_err, min_eig, norms)


def fit_decay_rate(times, dist, floor: float = NOISE_FLOOR) -> float | None:
    """Least-squares decay rate of ``log dist`` over the final half of the grid."""
    times = np.asarray(times)
    dist = np.asarray(dist)
    tail = slice(len(times) // 2, None)
    t, d = times[tail], dist[tail]
    keep = d > floor
    if keep.sum() < 2:
        return None
    slope = np.polyfit(t[keep], np.log(d[keep]), 1)[0]
    return float(-slope)


def propagate_ensemble(
    gen: GKLSGenerator,
    initial_states,
    t_grid,
    tol: float = DEFAULT_TOL,
    basis: HermitianBasis | None = None,
    atol: float | None = None,
) -> tuple[list[TrajectoryRecord], ConvergenceSummary]:
    initial_states = list(initial_states)
    if len(initial_states) < 2:
        raise ValueError("an ensemble needs at least two initial states")
    basis = basis or build_basis(gen.dim)
    t = _check_grid(t_grid)
    records = parallel_map(lambda r: integrate(gen, r, t, tol, basis, atol), initial_states)
    return records, summarize(gen, records, basis)


def pairwise_trace_distance(rhos, sigmas) -> np.ndarray:
    """Trace distance per time between two stacks of states."""
    diff = np.asarray(rhos) - np.asarray(sigmas)
    diff = 0.5 * (diff + np.conj(np.swapaxes(diff, -1, -2)))
    return 0.5 * np.sum(np.abs(np.linalg.eigvalsh(diff)), axis=-1)


def summarize(gen, records, basis) -> ConvergenceSummary:
    t = records[0].times
    states = [r.states(basis) for r in records]
    dist = np.zeros(len(t))
    for a, b in itertools.combinations(range(len(states)), 2):
        dist = np.maximum(dist, pairwise_trace_distance(states[a], states[b]))
    lam = lambda_samples(gen, t, basis)
    return ConvergenceSummary(t, dist, fit_decay_rate(t, dist), cumulative_log_bound(lam, t), lam)


def asymptotic_trajectory(
    gen: GKLSGenerator,
    t_grid,
    tol: float = DEFAULT_TOL,
    basis: HermitianBasis | None = None,
    certified: bool = True,
    atol: float | None = None,
) -> TrajectoryRecord:
    """Trajectory started from the maximally mixed state.

    With ``c~(0) = 0`` the homogeneous part vanishes identically, so this is
    the common limit trajectory whenever relaxation is certified. Pass
    ``certified=False`` to flag the record as possibly non-unique.
    """
    basis = basis or build_basis(gen.dim)
    rec = integrate(gen, np.eye(gen.dim) / gen.dim, t_grid, tol, basis, atol)
    rec.nonunique = not certified
    return rec


def fundamental_matrix(
    gen: GKLSGenerator,
    t: float,
    tol: float = DEFAULT_TOL,
    basis: HermitianBasis | None = None,
    t0: float = 0.0,
) -> np.ndarray:
    """``X0(t)`` solving ``dX/dt = M0(t) X`` with ``X0(t0) = 1``."""
    basis = basis or build_basis(gen.dim)
    m = basis.d - 1
    if t < t0:
        raise ValueError("t must be >= t0")
    if t == t0:
        return np.eye(m)

    def f(s, y):
        return (gen.blocks(s, basis).M0 @ y.reshape(m, m)).reshape(-1)

    sol = solve_ivp(f, (t0, t), np.eye(m).reshape(-1), method="RK45", rtol=tol, atol=tol)
    if sol.status != 0:
        raise IntegrationError(sol.message)
    return sol.y[:, -1].reshape(m, m)


@dataclass
class VariationOfConstants:
    record: TrajectoryRecord
    X0: np.ndarray  # (len(times), m, m)
    particular: np.ndarray  # X0(t) int_0^t X0^{-1}(s) b(s) ds
    condition: np.ndarray  # cond(X0(t))


def variation_of_constants(
    gen: GKLSGenerator,
    t_grid,
    rho0,
    tol: float = DEFAULT_TOL,
    basis: HermitianBasis | None = None,
) -> VariationOfConstants:
    """Rebuild ``c~(t) = X0 c~(0) + X0 int X0^{-1} b`` on the grid.

    ``X0`` and ``y(t) = int_0^t X0^{-1} b`` are integrated together as one
    augmented system; nothing here reuses the direct propagation path.
    """
    basis = basis or build_basis(gen.dim)
    t = _check_grid(t_grid)
    m = basis.d - 1
    c = to_coefficients(check_density_matrix(rho0), basis)

    def f(s, z):
        x = z[: m * m].reshape(m, m)
        blocks = gen.blocks(s, basis)
        return np.concatenate([(blocks.M0 @ x).reshape(-1), np.linalg.solve(x, blocks.b)])

    z0 = np.concatenate([np.eye(m).reshape(-1), np.zeros(m)])
    sol = solve_ivp(f, (t[0], t[-1]), z0, method="RK45", t_eval=t, rtol=tol, atol=tol)
    if sol.status != 0:
        raise IntegrationError(sol.message)
    z = sol.y.T
    xs = z[:, : m * m].reshape(-1, m, m)
    ys = z[:, m * m :]
    particular = np.einsum("kij,kj->ki", xs, ys)
    tilde = np.einsum("kij,j->ki", xs, c[1:]) + particular
    trace_err, min_eig, norms = _diagnostics(tilde, basis)
    rec = TrajectoryRecord(t, tilde, basis.n, trace_err, min_eig, norms)
    return VariationOfConstants(rec, xs, particular, np.linalg.cond(xs))


def gronwall_envelope_check(
    records, summary: ConvergenceSummary, gen: GKLSGenerator | None = None, tol: float = DEFAULT.envelope
) -> bool:
    """Every pair obeys ``|dc~(t)|^2 <= |dc~(0)|^2 exp(int_0^t Lambda) + tol``."""
    return gronwall_envelope_excess(records, summary) <= tol


def gronwall_envelope_excess(records, summary: ConvergenceSummary) -> float:
    """Largest ``|dc~(t)|^2 - |dc~(0)|^2 exp(int Lambda)`` over pairs and times."""
    growth = np.exp(summary.log_bound)
    worst = -np.inf
    for a, b in itertools.combinations(records, 2):
        if not np.array_equal(a.times, b.times):
            raise ValueError("records must share one time grid")
        diff2 = np.sum((a.tilde - b.tilde) ** 2, axis=1)
        worst = max(worst, float(np.max(diff2 - diff2[0] * growth)))
    return worst
