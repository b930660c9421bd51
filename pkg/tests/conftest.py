import numpy as np
import pytest

from lindblad_relax.generator import GKLSGenerator, HamiltonianTerm, JumpTerm
from lindblad_relax.operators import SIGMA_X, SIGMA_Y, SIGMA_Z, random_hermitian

# decays |1><1| into |0><0| (index 0 is the sigma_z = +1 state)
DECAY = np.array([[0, 1], [0, 0]], dtype=complex)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def amplitude_damping(gamma=1.0):
    return GKLSGenerator(2, jumps=[JumpTerm(DECAY, gamma)])


def dephasing(gamma=1.0):
    return GKLSGenerator(2, jumps=[JumpTerm(SIGMA_Z, gamma)])


def depolarizing(gamma=1.0, hamiltonian=None):
    return GKLSGenerator(2, hamiltonian=hamiltonian, jumps=[JumpTerm(p, gamma) for p in (SIGMA_X, SIGMA_Y, SIGMA_Z)])


def thermal_qubit(omega=1.0, temperature=0.5, gamma=1.0):
    """Qubit with splitting ``omega`` coupled to a detailed-balance bath."""
    up = gamma
    down = gamma * np.exp(-omega / temperature)
    return GKLSGenerator(
        2,
        hamiltonian=0.5 * omega * SIGMA_Z,
        jumps=[JumpTerm(DECAY, up), JumpTerm(DECAY.conj().T, down)],
    )


def random_generator(n, rng, n_jumps=2, time_dependent=True):
    """Random GKLS generator with smooth non-negative rates."""
    h0, h1 = random_hermitian(n, rng), random_hermitian(n, rng)
    w = rng.uniform(0.5, 2.0)
    terms = [HamiltonianTerm(h0)]
    if time_dependent:
        terms.append(HamiltonianTerm(h1, lambda t, w=w: np.sin(w * t)))
    jumps = []
    for _ in range(n_jumps):
        op = (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))) / np.sqrt(n)
        a, b, v = rng.uniform(0.1, 1.0, size=3)
        rate = (lambda t, a=a, b=b, v=v: a + b * np.sin(v * t) ** 2) if time_dependent else a
        jumps.append(JumpTerm(op, rate))
    return GKLSGenerator(n, hamiltonian=terms, jumps=jumps)


# one PASS/FAIL line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE = []


@pytest.fixture
def criterion():
    def record(label, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  {label}  {detail}".rstrip()
        ACCEPTANCE.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
