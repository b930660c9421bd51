import json

import jsonschema
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import DECAY, amplitude_damping, dephasing, depolarizing, thermal_qubit
from lindblad_relax.certifier import (
    CERTIFICATION_REPORT_SCHEMA,
    INCONCLUSIVE,
    STRONG_UNITAL,
    WEAK,
    certify,
    commutant_dimension,
    cumulative_log_bound,
    gronwall_log_bound,
    is_self_adjoint_set,
    lambda_max,
    spohn_bound_rhs,
)
from lindblad_relax.generator import GKLSGenerator, JumpTerm
from lindblad_relax.otto import OttoCycleConfig, OttoEngine
from lindblad_relax.operators import (
    SIGMA_MINUS,
    SIGMA_PLUS,
    SIGMA_X,
    SIGMA_Z,
    build_basis,
    embed_site,
    from_coefficients,
    hs_inner,
    random_basis,
    random_hermitian,
)


def ladder_set(n):
    ops = []
    for j in range(1, n + 1):
        ops += [embed_site(SIGMA_PLUS, j, n), embed_site(SIGMA_MINUS, j, n)]
    return ops


# -- adjoint closure ------------------------------------------------------


def test_ladder_pair_is_self_adjoint():
    res = is_self_adjoint_set([SIGMA_PLUS, SIGMA_MINUS])
    assert res and res.pairs == [(0, 1)] and res.self_paired == []


def test_single_lowering_operator_is_not_self_adjoint():
    res = is_self_adjoint_set([SIGMA_MINUS])
    assert not res and res.unmatched == [0]


def test_hermitian_jump_is_self_paired():
    res = is_self_adjoint_set([SIGMA_Z])
    assert res and res.self_paired == [0]


def test_empty_set_rejected():
    with pytest.raises(ValueError):
        is_self_adjoint_set([])


# -- commutant ------------------------------------------------------------


@pytest.mark.parametrize("n", [1, 2, 3])
def test_ladder_commutant_is_trivial(n):
    assert commutant_dimension(ladder_set(n)).dimension == 1


def test_sigma_z_commutant_has_witness():
    res = commutant_dimension([SIGMA_Z])
    assert res.dimension == 2
    w = res.witness
    assert abs(np.trace(w)) < 1e-12
    assert np.linalg.norm(w @ SIGMA_Z - SIGMA_Z @ w) < 1e-10
    # witness is proportional to sigma_z
    assert abs(abs(hs_inner(w, SIGMA_Z)) - np.sqrt(2)) < 1e-10


@pytest.mark.parametrize("n", [2, 3])
def test_identity_commutant_is_everything(n):
    assert commutant_dimension([np.eye(n)]).dimension == n * n
    assert commutant_dimension([np.zeros((n, n))]).dimension == n * n


def test_commutant_of_random_diagonal():
    # nondegenerate diagonal matrix commutes exactly with the diagonal algebra
    assert commutant_dimension([np.diag([0.1, 0.7, 1.9, 3.0])]).dimension == 4


@settings(max_examples=15, deadline=None)
@given(n=st.integers(1, 3), seed=st.integers(0, 2**32 - 1))
def test_commutant_invariant_under_invertible_mixing(n, seed):
    rng = np.random.default_rng(seed)
    ops = ladder_set(n)
    k = len(ops)
    v = rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k))
    mixed = [sum(v[a, b] * ops[b] for b in range(k)) for a in range(k)]
    assert commutant_dimension(mixed).dimension == commutant_dimension(ops).dimension == 1


def test_commutant_of_subset_bounds_superset(rng):
    # adding operators can only shrink the commutant
    ops = [embed_site(SIGMA_Z, 1, 2)]
    assert commutant_dimension(ops).dimension == 8
    assert commutant_dimension(ops + ladder_set(2)).dimension == 1


# -- spohn bound ----------------------------------------------------------


def test_spohn_bound_dephasing_example():
    g = 0.6
    gen = dephasing(g)
    s = SIGMA_X / np.sqrt(2)
    rhs = spohn_bound_rhs(gen, 0.0, s)
    assert rhs == pytest.approx(-4 * g)
    assert rhs == pytest.approx(2 * hs_inner(s, gen.apply(0.0, s)).real)


def test_spohn_bound_identity_limit():
    assert spohn_bound_rhs(dephasing(), 0.0, np.zeros((2, 2))) == 0.0


def test_spohn_bound_needs_traceless_sigma():
    with pytest.raises(ValueError):
        spohn_bound_rhs(dephasing(), 0.0, np.eye(2))


def test_spohn_bound_needs_self_adjoint_set():
    with pytest.raises(ValueError):
        spohn_bound_rhs(amplitude_damping(), 0.0, SIGMA_X)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_spohn_bound_dominates_unital_dissipation(seed):
    rng = np.random.default_rng(seed)
    n = 3
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    hermitian = random_hermitian(n, rng)
    rate = rng.uniform(0.1, 1.0)
    gen = GKLSGenerator(n, hamiltonian=random_hermitian(n, rng), jumps=[
        JumpTerm(a, rate), JumpTerm(a.conj().T, rate), JumpTerm(hermitian, rng.uniform(0.1, 1.0)),
    ])
    s = random_hermitian(n, rng)
    s -= np.trace(s) / n * np.eye(n)
    lhs = 2 * hs_inner(s, gen.apply(0.0, s)).real
    rhs = spohn_bound_rhs(gen, 0.0, s)
    assert rhs <= 0
    assert lhs <= rhs + 1e-9


# -- spectral rate --------------------------------------------------------


def test_lambda_closed_forms():
    g = 0.3
    assert lambda_max(amplitude_damping(g), 0.0) == pytest.approx(-g)
    assert lambda_max(dephasing(g), 0.0) == pytest.approx(0.0, abs=1e-14)
    assert lambda_max(depolarizing(g), 0.0) == pytest.approx(-8 * g)


def test_lambda_is_basis_independent(rng):
    gen = thermal_qubit(1.0, 0.4)
    a = lambda_max(gen, 0.0, build_basis(2))
    b = lambda_max(gen, 0.0, random_basis(2, rng))
    assert a == pytest.approx(b, abs=1e-12)


def test_gronwall_log_bound_constant():
    g = 0.5
    t = np.linspace(0, 3, 31)
    assert gronwall_log_bound(amplitude_damping(g), t) == pytest.approx(-g * 3)
    assert gronwall_log_bound(dephasing(g), t) == pytest.approx(0.0, abs=1e-13)


def test_gronwall_log_bound_rejects_bad_grid():
    with pytest.raises(ValueError):
        gronwall_log_bound(dephasing(), [0.0, 2.0, 1.0])


def test_cumulative_log_bound_quadratic():
    t = np.linspace(0, 2, 41)
    np.testing.assert_allclose(cumulative_log_bound(t**2, t), t**3 / 3, atol=1e-12)


# -- certification --------------------------------------------------------


def test_certify_depolarizing_is_strongly_relaxing():
    rep = certify(depolarizing(0.2), np.linspace(0, 5, 51))
    assert rep.verdict == STRONG_UNITAL
    assert rep.C == pytest.approx(-1.6)
    assert rep.certified.all()


def test_certify_dephasing_is_inconclusive():
    rep = certify(dephasing(0.2), np.linspace(0, 5, 51))
    assert rep.verdict == INCONCLUSIVE
    assert set(rep.commutant_dim) == {2}
    assert np.allclose(rep.lambda_, 0)


def test_certify_thermal_qubit_is_weakly_relaxing():
    rep = certify(thermal_qubit(1.0, 0.5), np.linspace(0, 5, 51))
    assert rep.verdict == WEAK
    assert rep.C < 0


def test_certify_amplitude_damping_is_not_certified():
    # single lowering operator: no adjoint partner
    rep = certify(amplitude_damping(), np.linspace(0, 1, 11))
    assert rep.verdict == INCONCLUSIVE
    assert not rep.self_adjoint_ok.any()


def test_certify_aperiodic_generator_is_inconclusive():
    gen = GKLSGenerator(2, jumps=[JumpTerm(SIGMA_X, lambda t: 1 + 0.1 * t), JumpTerm(SIGMA_Z, 1.0)])
    rep = certify(gen, np.linspace(0, 3, 31))
    assert rep.verdict == INCONCLUSIVE
    assert rep.certified_measure_per_period == pytest.approx(3.0)
    assert any("aperiodic" in r for r in rep.reasons)


def test_certify_periodic_switching():
    # dissipation only switched on for half of each period
    rate = lambda t: max(0.0, np.sin(2 * np.pi * t)) ** 2  # noqa: E731
    gen = GKLSGenerator(2, hamiltonian=SIGMA_Z, jumps=[JumpTerm(SIGMA_X, rate), JumpTerm(SIGMA_Z, rate)], period=1.0)
    rep = certify(gen, np.linspace(0, 1, 201))
    assert rep.verdict == STRONG_UNITAL
    assert 0.4 < rep.certified_measure_per_period < 0.5
    (a, b), = rep.certified_windows()
    assert a == pytest.approx(0.005) and b == pytest.approx(0.495)


def test_certify_rejects_short_grid():
    gen = GKLSGenerator(2, jumps=[JumpTerm(SIGMA_X, 1.0)], period=2.0)
    with pytest.raises(ValueError):
        certify(gen, np.linspace(0, 1, 11))


def test_certify_inspects_from_markovian_time():
    gen = GKLSGenerator(2, jumps=[JumpTerm(SIGMA_X, lambda t: -1.0 if t < 1 else 1.0),
                                  JumpTerm(SIGMA_Z, 1.0)], markovian_from=1.0, period=1.0)
    rep = certify(gen, np.linspace(0, 2, 41))
    assert not rep.inspected[:20].any() and rep.inspected[20:].all()
    assert not rep.certified[:20].any()
    assert rep.verdict == STRONG_UNITAL


def test_certify_verdict_is_basis_independent(rng):
    gen = thermal_qubit(1.0, 0.5)
    t = np.linspace(0, 2, 21)
    a, b = certify(gen, t, basis=build_basis(2)), certify(gen, t, basis=random_basis(2, rng))
    assert a.verdict == b.verdict
    np.testing.assert_allclose(a.lambda_, b.lambda_, atol=1e-12)


def test_report_json_matches_schema():
    rep = certify(thermal_qubit(1.0, 0.5), np.linspace(0, 1, 11))
    doc = json.loads(rep.to_json())
    jsonschema.validate(doc, CERTIFICATION_REPORT_SCHEMA)
    assert len(doc["lambda"]) == len(doc["t_grid"]) == 11
    assert doc["verdict"] == WEAK


def test_zero_rate_jump_is_inactive():
    gen = GKLSGenerator(2, jumps=[JumpTerm(DECAY, 0.0), JumpTerm(SIGMA_X, 1.0), JumpTerm(SIGMA_Z, 1.0)])
    rep = certify(gen, np.linspace(0, 1, 5))
    assert rep.self_adjoint_ok.all()


def test_commutator_bound_fails_along_top_direction_of_non_unital_generator():
    # cold isochore: self-adjoint, irreducible, yet Lambda > 0
    gen = OttoEngine(OttoCycleConfig()).generator()
    basis = build_basis(4)
    m0 = gen.blocks(3.5, basis).M0
    vals, vecs = np.linalg.eigh(m0 + m0.T)
    assert vals[-1] > 0.1
    sigma = from_coefficients(np.concatenate([[0.0], vecs[:, -1]]), basis)
    lhs = 2 * hs_inner(sigma, gen.apply(3.5, sigma)).real
    assert lhs == pytest.approx(vals[-1], rel=1e-9)
    assert spohn_bound_rhs(gen, 3.5, sigma) < 0 < lhs
