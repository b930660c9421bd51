"""Time-dependent GKLS generators and their real superoperator matrices.

A generator is ``L_t(s) = -i[H(t), s] + sum_a g_a(t) (L_a s L_a^+ - 1/2 {L_a^+ L_a, s})``.
Time dependence lives in scalar coefficient functions attached to fixed
operators, so the superoperator matrix is assembled once per term and
recombined per time; operators that are themselves functions of time fall
back to direct assembly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .operators import DimensionError, HermitianBasis, NotHermitianError, as_matrix, dagger, is_hermitian
from .tolerances import DEFAULT


class GeneratorError(RuntimeError):
    pass


class AssemblyError(GeneratorError):
    """Superoperator matrix has imaginary parts beyond tolerance."""


def _call(value, t: float):
    return value(t) if callable(value) else value


@dataclass(frozen=True)
class TabulatedFunction:
    """Linear interpolation of samples on the uniform grid ``t0 + k*dt``.

    Outside the table the end values are held, unless ``periodic``, in which
    case time wraps modulo the table span.
    """

    t0: float
    dt: float
    values: tuple

    periodic: bool = False

    def __post_init__(self):
        if self.dt <= 0 or len(self.values) < 2:
            raise ValueError("tabulated function needs dt > 0 and at least two samples")

    def __call__(self, t: float) -> float:
        x = (t - self.t0) / self.dt
        if self.periodic:
            x %= len(self.values) - 1
        return float(np.interp(x, np.arange(len(self.values)), self.values))


@dataclass(frozen=True)
class HamiltonianTerm:
    operator: np.ndarray
    coefficient: float | Callable[[float], float] = 1.0


@dataclass(frozen=True)
class JumpTerm:
    """Jump operator (matrix or function of time) with its rate (number or function)."""

    operator: np.ndarray | Callable[[float], np.ndarray]
    rate: float | Callable[[float], float]
    label: str = ""

    def operator_at(self, t: float) -> np.ndarray:
        return as_matrix(_call(self.operator, t))

    def rate_at(self, t: float) -> float:
        try:
            r = float(_call(self.rate, t))
        except Exception as exc:  # noqa: BLE001
            raise GeneratorError(f"rate evaluation failed for jump {self.label!r} at t={t}") from exc
        if not np.isfinite(r):
            raise GeneratorError(f"non-finite rate for jump {self.label!r} at t={t}")
        return r


@dataclass(frozen=True)
class SuperoperatorBlocks:
    """``M`` split as ``dc~/dt = M0 c~ + b`` with ``c_0 = 1/sqrt(n)`` pinned."""

    M: np.ndarray
    M0: np.ndarray
    b: np.ndarray

    @property
    def first_row(self) -> np.ndarray:
        return self.M[0]


def hamiltonian_liouvillian(h: np.ndarray) -> np.ndarray:
    """Row-major vectorised ``s -> -i[h, s]``."""
    eye = np.eye(h.shape[0])
    return -1j * (np.kron(h, eye) - np.kron(eye, h.T))


def jump_liouvillian(l: np.ndarray, anticommutator_factor: float = 0.5) -> np.ndarray:
    """Row-major vectorised dissipator ``s -> l s l^+ - 1/2 {l^+ l, s}``."""
    eye = np.eye(l.shape[0])
    ll = dagger(l) @ l
    return np.kron(l, l.conj()) - anticommutator_factor * (np.kron(ll, eye) + np.kron(eye, ll.T))


class GKLSGenerator:
    """Time-dependent GKLS generator.

    ``hamiltonian`` may be ``None``, a matrix, a function ``t -> matrix`` or a
    sequence of :class:`HamiltonianTerm` / ``(operator, coefficient)`` pairs.
    ``markovian_from`` marks the time from which rates are guaranteed
    non-negative; ``period`` declares periodicity in time.
    """

    # anticommutator weight; only altered by tests that break trace preservation
    anticommutator_factor = 0.5

    def __init__(
        self,
        dim: int,
        hamiltonian=None,
        jumps: Sequence[JumpTerm] = (),
        markovian_from: float = 0.0,
        period: float | None = None,
    ):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = int(dim)
        self.markovian_from = float(markovian_from)
        if markovian_from < 0:
            raise ValueError("markovian_from must be >= 0")
        if period is not None and period <= 0:
            raise ValueError("period must be positive")
        self.period = period
        self._h_callable = None
        self.h_terms: tuple[HamiltonianTerm, ...] = ()
        if hamiltonian is None:
            pass
        elif callable(hamiltonian):
            self._h_callable = hamiltonian
        elif isinstance(hamiltonian, np.ndarray) and hamiltonian.ndim == 2:
            self.h_terms = (HamiltonianTerm(self._checked(hamiltonian, hermitian=True)),)
        else:
            terms = []
            for item in hamiltonian:
                if not isinstance(item, HamiltonianTerm):
                    item = HamiltonianTerm(*item)
                terms.append(HamiltonianTerm(self._checked(item.operator, hermitian=True), item.coefficient))
            self.h_terms = tuple(terms)
        self.jumps = tuple(jumps)
        for j in self.jumps:
            if not callable(j.operator):
                self._checked(j.operator)
        self._cache: dict[int, tuple] = {}

    def _checked(self, op, hermitian: bool = False) -> np.ndarray:
        m = as_matrix(op)
        if m.shape[0] != self.dim:
            raise DimensionError(f"operator dim {m.shape[0]} != generator dim {self.dim}")
        if hermitian and not is_hermitian(m):
            raise NotHermitianError("hamiltonian must be Hermitian")
        m = m.copy()
        m.setflags(write=False)
        return m

    @property
    def has_static_operators(self) -> bool:
        return self._h_callable is None and not any(callable(j.operator) for j in self.jumps)

    @property
    def static(self) -> bool:
        """True when nothing depends on time."""
        return (
            self.has_static_operators
            and all(not callable(h.coefficient) for h in self.h_terms)
            and all(not callable(j.rate) for j in self.jumps)
        )

    def hamiltonian_at(self, t: float) -> np.ndarray:
        if self._h_callable is not None:
            h = as_matrix(self._h_callable(t))
            if h.shape[0] != self.dim:
                raise DimensionError("hamiltonian dimension mismatch")
            if not is_hermitian(h):
                raise NotHermitianError(f"hamiltonian is not Hermitian at t={t}")
            return h
        h = np.zeros((self.dim, self.dim), dtype=complex)
        for term in self.h_terms:
            h = h + float(_call(term.coefficient, t)) * term.operator
        return h

    def jumps_at(self, t: float) -> list[tuple[np.ndarray, float]]:
        return [(j.operator_at(t), j.rate_at(t)) for j in self.jumps]

    # -- action on operators -------------------------------------------------

    def dissipator(self, t: float, sigma) -> np.ndarray:
        sigma = as_matrix(sigma)
        if sigma.shape[0] != self.dim:
            raise DimensionError(f"operator dim {sigma.shape[0]} != generator dim {self.dim}")
        out = np.zeros_like(sigma)
        k = self.anticommutator_factor
        for l, rate in self.jumps_at(t):
            if rate == 0.0:
                continue
            ld = dagger(l)
            ll = ld @ l
            out += rate * (l @ sigma @ ld - k * (ll @ sigma + sigma @ ll))
        return out

    def apply(self, t: float, sigma) -> np.ndarray:
        out = self.dissipator(t, sigma)
        sigma = as_matrix(sigma)
        h = self.hamiltonian_at(t)
        return out - 1j * (h @ sigma - sigma @ h)

    # -- superoperator matrix ------------------------------------------------

    def liouvillian(self, t: float) -> np.ndarray:
        """Row-major vectorised generator at time ``t`` (complex ``n^2 x n^2``)."""
        out = hamiltonian_liouvillian(self.hamiltonian_at(t))
        for l, rate in self.jumps_at(t):
            if rate != 0.0:
                out = out + rate * jump_liouvillian(l, self.anticommutator_factor)
        return out

    def _affine_parts(self, basis: HermitianBasis):
        """Per-coefficient real matrices, grouped by coefficient function identity."""
        key = id(basis)
        hit = self._cache.get(key)
        if hit is not None and hit[0] is basis:
            return hit[1], hit[2], hit[3]
        v = basis.vectors
        const = np.zeros((basis.d, basis.d))
        groups: dict[int, list] = {}

        def project(s):
            m = v.conj().T @ s @ v
            _check_real(m, DEFAULT.herm)
            return m.real

        def add(coef, sup):
            nonlocal const
            if callable(coef):
                slot = groups.setdefault(id(coef), [coef, np.zeros((basis.d, basis.d))])
                slot[1] = slot[1] + project(sup)
            else:
                const = const + float(coef) * project(sup)

        for term in self.h_terms:
            add(term.coefficient, hamiltonian_liouvillian(term.operator))
        for j in self.jumps:
            add(j.rate, jump_liouvillian(j.operator, self.anticommutator_factor))
        fns = [g[0] for g in groups.values()]
        stack = np.array([g[1] for g in groups.values()]).reshape(len(fns), basis.d, basis.d)
        self._cache[key] = (basis, const, fns, stack)
        return const, fns, stack

    def superoperator(self, t: float, basis: HermitianBasis) -> np.ndarray:
        """Real matrix ``M_nm = (F_n, L_t(F_m))_HS``."""
        if basis.n != self.dim:
            raise DimensionError(f"basis dim {basis.n} != generator dim {self.dim}")
        if self.has_static_operators:
            const, fns, stack = self._affine_parts(basis)
            if not fns:
                return const.copy()
            coeffs = np.empty(len(fns))
            for i, f in enumerate(fns):
                try:
                    coeffs[i] = f(t)
                except Exception as exc:  # noqa: BLE001
                    raise GeneratorError(f"coefficient evaluation failed at t={t}") from exc
            if not np.all(np.isfinite(coeffs)):
                raise GeneratorError(f"non-finite coefficient at t={t}")
            return const + np.tensordot(coeffs, stack, axes=1)
        v = basis.vectors
        m = v.conj().T @ self.liouvillian(t) @ v
        _check_real(m, DEFAULT.herm)
        return m.real

    def blocks(self, t: float, basis: HermitianBasis) -> SuperoperatorBlocks:
        return split_blocks(self.superoperator(t, basis), basis.n)


def _check_real(m: np.ndarray, tol: float) -> None:
    scale = max(1.0, float(np.max(np.abs(m), initial=0.0)))
    resid = float(np.max(np.abs(m.imag), initial=0.0))
    if resid > tol * scale:
        raise AssemblyError(
            f"superoperator has imaginary residue {resid:.3g}; generator does not preserve Hermiticity"
        )


def split_blocks(m: np.ndarray, n: int) -> SuperoperatorBlocks:
    return SuperoperatorBlocks(M=m, M0=m[1:, 1:].copy(), b=m[1:, 0] / np.sqrt(n))


def apply_generator(gen: GKLSGenerator, t: float, sigma) -> np.ndarray:
    return gen.apply(t, sigma)


def dissipator_only(gen: GKLSGenerator, t: float, sigma) -> np.ndarray:
    return gen.dissipator(t, sigma)


def assemble_superoperator(gen: GKLSGenerator, t: float, basis: HermitianBasis) -> SuperoperatorBlocks:
    return gen.blocks(t, basis)


def check_trace_preservation(gen: GKLSGenerator, t_samples, basis: HermitianBasis | None = None,
                             tol: float = DEFAULT.tp) -> bool:
    """True iff the first row of ``M(t)`` vanishes at every sampled time."""
    from .operators import build_basis

    basis = basis or build_basis(gen.dim)
    for t in np.atleast_1d(t_samples):
        m = gen.superoperator(float(t), basis)
        if np.max(np.abs(m[0])) >= tol * max(1.0, float(np.max(np.abs(m)))):
            return False
    return True


def max_sampled_jump(gen: GKLSGenerator, t_grid, basis: HermitianBasis) -> float:
    """Largest Frobenius change of ``M`` between consecutive grid samples.

    Heuristic continuity probe: for a continuous ``t -> M(t)`` this shrinks
    as the grid is refined, for a discontinuous one it does not.
    """
    ms = [gen.superoperator(float(t), basis) for t in t_grid]
    return max(float(np.linalg.norm(b - a)) for a, b in zip(ms, ms[1:]))

