"""Dense operator arithmetic and the Hermitian orthonormal operator basis.

Operators are plain ``numpy`` complex arrays of shape ``(n, n)``. A state
is expanded as ``rho = sum_k c_k F_k`` over a basis whose first element is
``1/sqrt(n)`` and whose remaining elements are traceless; with Hermitian
basis elements the coefficients of a Hermitian operator are real.
"""

from __future__ import annotations

from functools import reduce

import numpy as np

from .tolerances import DEFAULT

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
# |+1> (sigma_z = +1) is basis index 0; sigma^+ = |+1><-1|
SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)


class DimensionError(ValueError):
    pass


class NotHermitianError(ValueError):
    pass


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def _same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch: {a.shape} vs {b.shape}")


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def is_hermitian(a, tol: float = DEFAULT.herm) -> bool:
    a = np.asarray(a)
    return bool(np.max(np.abs(a - dagger(a)), initial=0.0) <= tol * max(1.0, np.max(np.abs(a), initial=0.0)))


def hs_inner(a, b) -> complex:
    """Hilbert-Schmidt product ``tr(a^dagger b)``."""
    a, b = as_matrix(a), as_matrix(b)
    _same_dim(a, b)
    return complex(np.vdot(a, b))


def hs_norm(a) -> float:
    return float(np.linalg.norm(np.asarray(a)))


def commutator(a, b) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    _same_dim(a, b)
    return a @ b - b @ a


def anticommutator(a, b) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    _same_dim(a, b)
    return a @ b + b @ a


def tensor(*ops) -> np.ndarray:
    return reduce(np.kron, [as_matrix(o) for o in ops])


def embed_site(op, site: int, n_sites: int) -> np.ndarray:
    """Place a single-site operator on ``site`` (1-based, wrapped mod ``n_sites``)."""
    op = as_matrix(op)
    if n_sites < 1:
        raise ValueError("n_sites must be positive")
    j = (site - 1) % n_sites
    local = op.shape[0]
    eye = np.eye(local, dtype=complex)
    return tensor(*[op if k == j else eye for k in range(n_sites)])


def hermitian_eigenvalues(a, tol: float = DEFAULT.herm) -> np.ndarray:
    """Ascending real spectrum of a Hermitian matrix."""
    a = as_matrix(a)
    if not is_hermitian(a, tol):
        raise NotHermitianError("matrix is not Hermitian")
    return np.linalg.eigvalsh(0.5 * (a + dagger(a)))


def trace_distance(rho, sigma) -> float:
    rho, sigma = as_matrix(rho), as_matrix(sigma)
    _same_dim(rho, sigma)
    diff = rho - sigma
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (diff + dagger(diff))))))


def check_density_matrix(rho, tol=DEFAULT) -> np.ndarray:
    """Validate and return ``rho`` as a density matrix."""
    rho = as_matrix(rho)
    if not is_hermitian(rho, tol.herm):
        raise NotHermitianError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > tol.trace:
        raise ValueError(f"density matrix trace {np.trace(rho).real:.3g} != 1")
    if np.linalg.eigvalsh(rho)[0] < -tol.psd:
        raise ValueError("density matrix is not positive semidefinite")
    return rho


class HermitianBasis:
    """Orthonormal Hermitian operator basis ``F_0 = 1/sqrt(n), F_1.. traceless``.

    ``elements`` has shape ``(n**2, n, n)``; ``vectors`` holds the row-major
    vectorised elements as columns, shape ``(n**2, n**2)``.
    """

    def __init__(self, elements):
        elements = np.asarray(elements, dtype=complex)
        self.elements = elements
        self.elements.setflags(write=False)
        self.n = elements.shape[1]
        self.d = elements.shape[0]
        self.vectors = elements.reshape(self.d, -1).T.copy()
        self.vectors.setflags(write=False)

    def __len__(self) -> int:
        return self.d

    def __getitem__(self, k) -> np.ndarray:
        return self.elements[k]

    def gram(self) -> np.ndarray:
        return self.vectors.conj().T @ self.vectors

    def validate(self, tol: float = DEFAULT.orth) -> None:
        n, d = self.n, self.d
        if d != n * n:
            raise ValueError(f"basis has {d} elements, expected {n * n}")
        if np.max(np.abs(self.elements[0] - np.eye(n) / np.sqrt(n))) > tol:
            raise ValueError("first basis element must be identity/sqrt(n)")
        if np.max(np.abs(self.elements - dagger(self.elements))) > tol:
            raise ValueError("basis elements must be Hermitian")
        if np.max(np.abs(np.trace(self.elements[1:], axis1=1, axis2=2)), initial=0.0) > tol:
            raise ValueError("basis elements beyond the first must be traceless")
        if np.max(np.abs(self.gram() - np.eye(d))) > tol:
            raise ValueError("basis is not orthonormal")


def build_basis(n: int) -> HermitianBasis:
    """Normalised generalised Gell-Mann basis, identity first.

    Ordering: identity, then for each pair ``j < k`` the symmetric and the
    antisymmetric element, then the diagonal family. For ``n = 2`` this is
    ``(1, sigma_x, sigma_y, sigma_z) / sqrt(2)``.
    """
    if n < 2:
        raise ValueError("basis requires n >= 2")
    els = [np.eye(n, dtype=complex) / np.sqrt(n)]
    s = 1 / np.sqrt(2)
    for j in range(n):
        for k in range(j + 1, n):
            sym = np.zeros((n, n), dtype=complex)
            sym[j, k] = sym[k, j] = s
            anti = np.zeros((n, n), dtype=complex)
            anti[j, k] = -1j * s
            anti[k, j] = 1j * s
            els += [sym, anti]
    for l in range(1, n):
        diag = np.zeros(n)
        diag[:l] = 1.0
        diag[l] = -l
        els.append(np.diag(diag / np.sqrt(l * (l + 1))).astype(complex))
    return HermitianBasis(els)


def random_basis(n: int, rng: np.random.Generator) -> HermitianBasis:
    """Gell-Mann basis with its traceless part rotated by a random orthogonal matrix."""
    base = build_basis(n)
    q, r = np.linalg.qr(rng.normal(size=(base.d - 1, base.d - 1)))
    q = q * np.sign(np.diag(r))
    rotated = np.einsum("ij,jab->iab", q.T, base.elements[1:])
    return HermitianBasis(np.concatenate([base.elements[:1], rotated]))


def to_coefficients(rho, basis: HermitianBasis, tol: float = DEFAULT.herm) -> np.ndarray:
    """Real coefficients ``c_k = (F_k, rho)_HS`` of a Hermitian operator."""
    rho = as_matrix(rho)
    if rho.shape[0] != basis.n:
        raise DimensionError(f"operator dim {rho.shape[0]} vs basis dim {basis.n}")
    c = basis.vectors.conj().T @ rho.reshape(-1)
    scale = max(1.0, float(np.max(np.abs(c), initial=0.0)))
    if np.max(np.abs(c.imag), initial=0.0) > tol * scale:
        raise NotHermitianError("operator is not Hermitian (complex coefficients)")
    return c.real.copy()


def from_coefficients(c, basis: HermitianBasis) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    if c.shape != (basis.d,):
        raise DimensionError(f"expected {basis.d} coefficients, got {c.shape}")
    return (basis.vectors @ c).reshape(basis.n, basis.n)


def random_hermitian(n: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * 0.5 * (g + g.conj().T)


def random_density_matrix(n: int, rng: np.random.Generator) -> np.ndarray:
    """Hilbert-Schmidt-uniform state from a normalised square Wishart matrix."""
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    w = g @ g.conj().T
    return w / np.trace(w).real
