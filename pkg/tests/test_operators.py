import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lindblad_relax.operators import (
    IDENTITY_2,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    DimensionError,
    NotHermitianError,
    build_basis,
    commutator,
    embed_site,
    from_coefficients,
    hermitian_eigenvalues,
    hs_inner,
    random_basis,
    random_density_matrix,
    random_hermitian,
    tensor,
    to_coefficients,
    trace_distance,
)


def test_hs_inner_paulis():
    assert hs_inner(SIGMA_X, SIGMA_X) == pytest.approx(2)
    assert hs_inner(SIGMA_X, SIGMA_Y) == pytest.approx(0)


def test_hs_inner_identity_with_state(rng):
    rho = random_density_matrix(2, rng)
    assert hs_inner(IDENTITY_2 / np.sqrt(2), rho) == pytest.approx(1 / np.sqrt(2))


def test_hs_inner_dimension_mismatch():
    with pytest.raises(DimensionError):
        hs_inner(SIGMA_X, np.eye(3))


def test_qubit_basis_is_normalised_pauli():
    basis = build_basis(2)
    expected = [IDENTITY_2, SIGMA_X, SIGMA_Y, SIGMA_Z]
    for f, p in zip(basis.elements, expected):
        np.testing.assert_allclose(f, p / np.sqrt(2), atol=1e-15)


@pytest.mark.parametrize("n", [2, 3, 4, 5, 8, 16])
def test_basis_gram_is_identity(n):
    basis = build_basis(n)
    assert len(basis) == n * n
    assert np.max(np.abs(basis.gram() - np.eye(n * n))) < 1e-10
    basis.validate()


def test_basis_rejects_trivial_dimension():
    with pytest.raises(ValueError):
        build_basis(1)


def test_random_basis_is_valid(rng):
    random_basis(3, rng).validate()


def test_coefficients_maximally_mixed():
    c = to_coefficients(np.eye(2) / 2, build_basis(2))
    np.testing.assert_allclose(c, [1 / np.sqrt(2), 0, 0, 0], atol=1e-15)


def test_coefficients_ground_state():
    # |0><0| = (1 + sigma_z) / 2
    c = to_coefficients(np.diag([1.0, 0.0]), build_basis(2))
    np.testing.assert_allclose(c, [1 / np.sqrt(2), 0, 0, 1 / np.sqrt(2)], atol=1e-15)


def test_coefficients_reject_non_hermitian():
    with pytest.raises(NotHermitianError):
        to_coefficients(np.array([[0, 1], [0, 0]]), build_basis(2))


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 16), seed=st.integers(0, 2**32 - 1))
def test_coefficient_round_trip(n, seed):
    rng = np.random.default_rng(seed)
    basis = build_basis(n)
    rho = random_hermitian(n, rng)
    back = from_coefficients(to_coefficients(rho, basis), basis)
    assert np.linalg.norm(rho - back) < 1e-10


def test_commutator_pauli():
    np.testing.assert_allclose(commutator(SIGMA_X, SIGMA_Y), 2j * SIGMA_Z)


def test_tensor_and_embed():
    assert tensor(IDENTITY_2, SIGMA_Z).shape == (4, 4)
    np.testing.assert_array_equal(embed_site(SIGMA_Z, 3, 3), tensor(IDENTITY_2, IDENTITY_2, SIGMA_Z))
    # periodic wrap
    np.testing.assert_array_equal(embed_site(SIGMA_Z, 4, 3), embed_site(SIGMA_Z, 1, 3))
    np.testing.assert_array_equal(embed_site(SIGMA_Z, 0, 3), embed_site(SIGMA_Z, 3, 3))


def test_commutator_dimension_mismatch():
    with pytest.raises(DimensionError):
        commutator(SIGMA_X, np.eye(3))


def test_hermitian_eigenvalues_simple():
    np.testing.assert_allclose(hermitian_eigenvalues(SIGMA_Z), [-1, 1])
    np.testing.assert_allclose(hermitian_eigenvalues(np.diag([3.0, 1.0, 2.0])), [1, 2, 3])


def test_hermitian_eigenvalues_reject_non_hermitian():
    with pytest.raises(NotHermitianError):
        hermitian_eigenvalues(np.array([[0, 1], [0, 0]]))


def _charpoly_roots(a):
    # Faddeev-LeVerrier coefficients, then companion-matrix roots
    n = a.shape[0]
    coeffs = [1.0 + 0j]
    m = np.zeros_like(a)
    for k in range(1, n + 1):
        m = a @ m + coeffs[-1] * np.eye(n)
        coeffs.append(-np.trace(a @ m) / k)
    return np.sort(np.roots(coeffs).real)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_hermitian_eigenvalues_match_characteristic_polynomial(rng, n):
    for _ in range(5):
        a = random_hermitian(n, rng)
        np.testing.assert_allclose(hermitian_eigenvalues(a), _charpoly_roots(a), atol=1e-8)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 12), seed=st.integers(0, 2**32 - 1))
def test_eigenvalue_sum_is_trace(n, seed):
    a = random_hermitian(n, np.random.default_rng(seed))
    assert abs(hermitian_eigenvalues(a).sum() - np.trace(a).real) < 1e-10 * n


def test_trace_distance_examples(rng):
    zero, one = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])
    assert trace_distance(zero, one) == pytest.approx(1)
    rho = random_density_matrix(3, rng)
    assert trace_distance(rho, rho) == pytest.approx(0, abs=1e-15)
    assert trace_distance(zero, np.eye(2) / 2) == pytest.approx(0.5)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(2, 6), seed=st.integers(0, 2**32 - 1))
def test_trace_distance_is_a_metric_on_states(n, seed):
    rng = np.random.default_rng(seed)
    a, b, c = (random_density_matrix(n, rng) for _ in range(3))
    ab, bc, ac = trace_distance(a, b), trace_distance(b, c), trace_distance(a, c)
    assert ab == pytest.approx(trace_distance(b, a))
    assert 0 <= ab <= 1 + 1e-12
    assert ac <= ab + bc + 1e-12
