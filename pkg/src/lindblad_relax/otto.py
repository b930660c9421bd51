"""Continuous quantum Otto engine on a periodically driven Ising ring.

Strokes per period ``T = t4``: field ramp ``h_c -> h_h`` on ``[0, t1]``,
hot bath on ``[t1, t2]``, ramp back on ``[t2, t3]``, cold bath on
``[t3, t4]``. Bath couplings are switched by smooth bump functions that
extend ``delta`` beyond each isochore. Jump operators flip one spin
conditioned on its two neighbours; their rates follow an Ohmic bath with
exponential cutoff evaluated at the instantaneous Bohr frequencies.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy.integrate import solve_ivp

from .generator import GKLSGenerator, HamiltonianTerm, JumpTerm
from .operators import (
    SIGMA_PLUS,
    SIGMA_Z,
    HermitianBasis,
    build_basis,
    check_density_matrix,
    dagger,
    embed_site,
    to_coefficients,
)

PROJ_UP = np.diag([1.0, 0.0]).astype(complex)
PROJ_DOWN = np.diag([0.0, 1.0]).astype(complex)

# (L1, L2, L3) = TRANSFORM @ (s+_j, z_{j-1} s+_j + s+_j z_{j+1}, z_{j-1} s+_j z_{j+1})
TRANSFORM = np.array([[1, 1, 1], [2, 0, -2], [1, -1, 1]], dtype=float) / 4


class ConfigError(ValueError):
    def __init__(self, violations):
        super().__init__("invalid Otto configuration: " + ", ".join(violations))
        self.violations = list(violations)


@dataclass(frozen=True)
class OttoCycleConfig:
    n: int = 2
    j: float = 1.0
    h_c: float = 1.0
    h_h: float = 3.0
    t1: float = 1.0
    t2: float = 2.0
    t3: float = 3.0
    t4: float = 4.0
    delta: float = 0.1
    t_h: float = 4.0
    t_c: float = 0.5
    kappa_h: float = 0.1
    kappa_c: float = 0.1
    w_cut: float = 20.0
    boundary: str = "periodic"
    ramp: str = "bump"

    @property
    def period(self) -> float:
        return self.t4

    @classmethod
    def from_dict(cls, data: dict) -> "OttoCycleConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError([f"otto.unknown_field:{k}" for k in sorted(unknown)])
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)

    def violations(self) -> list[str]:
        out = []
        if int(self.n) != self.n or self.n < 2:
            out.append("otto.n_spins")
        if not self.h_h > self.h_c:
            out.append("otto.field_order")
        if not 0 < self.t1 < self.t2 < self.t3 < self.t4:
            out.append("otto.stroke_order")
        if not self.delta > 0:
            out.append("otto.delta_positive")
        elif not (
            self.t1 - self.delta > 0
            and self.t2 + self.delta < self.t3 - self.delta
            and self.t4 + self.delta <= self.t1 + self.t4 - self.delta
        ):
            out.append("otto.window_overlap")
        if not (self.t_h > 0 and self.t_c > 0):
            out.append("otto.temperature_positive")
        if self.kappa_h < 0 or self.kappa_c < 0:
            out.append("otto.kappa_nonnegative")
        if not self.w_cut > 0:
            out.append("otto.cutoff_positive")
        if self.boundary != "periodic":
            out.append("otto.boundary")
        if self.ramp not in ("bump", "linear"):
            out.append("otto.ramp")
        return out

    def validate(self) -> "OttoCycleConfig":
        bad = self.violations()
        if bad:
            raise ConfigError(bad)
        return self


# -- smooth switching -------------------------------------------------------


def bump_phi(t: float) -> float:
    """``exp(-1/t)`` for ``t > 0``, else 0."""
    return math.exp(-1.0 / t) if t > 0 else 0.0


def bump_g(t: float) -> float:
    """Smooth step: 0 for ``t <= 0``, 1 for ``t >= 1``."""
    if t <= 0:
        return 0.0
    if t >= 1:
        return 1.0
    u = 1.0 / t - 1.0 / (1.0 - t)
    if u > 700:
        return 0.0
    return 1.0 / (1.0 + math.exp(u))


def bump_g_prime(t: float) -> float:
    if t <= 0 or t >= 1:
        return 0.0
    g = bump_g(t)
    return g * (1.0 - g) * (1.0 / t**2 + 1.0 / (1.0 - t) ** 2)


def _window(t: float, start: float, stop: float, delta: float) -> float:
    return bump_g((t - start + delta) / delta) * bump_g((stop + delta - t) / delta)


def schedule(config: OttoCycleConfig, t: float) -> tuple[float, float, float]:
    """Field ``h`` and bath switches ``(lambda_h, lambda_c)`` at time ``t``."""
    c = config
    T = c.period
    s = t % T
    if s <= c.t1:
        x = s / c.t1
        h = c.h_c + (c.h_h - c.h_c) * (bump_g(x) if c.ramp == "bump" else x)
    elif s <= c.t2:
        h = c.h_h
    elif s <= c.t3:
        x = (c.t3 - s) / (c.t3 - c.t2)
        h = c.h_c + (c.h_h - c.h_c) * (bump_g(x) if c.ramp == "bump" else x)
    else:
        h = c.h_c
    # periodic images: the cold window spills past t4 into the next period
    lam_h = sum(_window(s + k * T, c.t1, c.t2, c.delta) for k in (-1, 0, 1))
    lam_c = sum(_window(s + k * T, c.t3, c.t4, c.delta) for k in (-1, 0, 1))
    return h, lam_h, lam_c


def field_rate(config: OttoCycleConfig, t: float) -> float:
    """``dh/dt``."""
    c = config
    s = t % c.period
    dh = c.h_h - c.h_c
    if 0 < s < c.t1:
        return dh * (bump_g_prime(s / c.t1) if c.ramp == "bump" else 1.0) / c.t1
    if c.t2 < s < c.t3:
        return -dh * (bump_g_prime((c.t3 - s) / (c.t3 - c.t2)) if c.ramp == "bump" else 1.0) / (c.t3 - c.t2)
    return 0.0


# -- spin chain -----------------------------------------------------------


def zz_bonds(n: int) -> np.ndarray:
    """``sum_j z_j z_{j+1}`` on a ring (both bonds counted for ``n = 2``)."""
    return sum(embed_site(SIGMA_Z, j, n) @ embed_site(SIGMA_Z, j + 1, n) for j in range(1, n + 1))


def total_z(n: int) -> np.ndarray:
    return sum(embed_site(SIGMA_Z, j, n) for j in range(1, n + 1))


def ising_hamiltonian(n: int, j: float, h: float) -> np.ndarray:
    """``-J sum z_j z_{j+1} - h sum z_j`` with periodic wrap."""
    if n < 2:
        raise ValueError("need at least two spins")
    return -j * zz_bonds(n) - h * total_z(n)


def bohr_frequencies(h: float, j: float) -> tuple[float, float, float]:
    return 2 * h + 4 * j, 2 * h, 2 * h - 4 * j


@dataclass(frozen=True)
class JumpFamily:
    """``ops[j][a]`` flips spin ``j+1`` up given neighbour channel ``a+1``."""

    n: int
    ops: tuple

    def operators(self) -> list[np.ndarray]:
        return [op for row in self.ops for op in row]

    def with_adjoints(self) -> list[np.ndarray]:
        ops = self.operators()
        return ops + [dagger(o) for o in ops]


def jump_family(n: int) -> JumpFamily:
    """Three-site jumps ``P_{j-1} s+_j P_{j+1}`` sorted by neighbour alignment.

    For ``n = 2`` both neighbours are the same site and each projector is
    applied once; the mixed channel then vanishes identically.
    """
    if n < 2:
        raise ValueError("need at least two spins")
    up = {s: embed_site(PROJ_UP, s + 1, n) for s in range(n)}
    down = {s: embed_site(PROJ_DOWN, s + 1, n) for s in range(n)}
    rows = []
    for j in range(n):
        left, right = (j - 1) % n, (j + 1) % n
        sp = embed_site(SIGMA_PLUS, j + 1, n)

        def sandwich(p, q):
            if left == right:
                return p[left] @ sp @ q[right] if p is q else np.zeros_like(sp)
            return p[left] @ sp @ q[right]

        rows.append(
            (
                sandwich(up, up),
                sandwich(up, down) + sandwich(down, up),
                sandwich(down, down),
            )
        )
    return JumpFamily(n, tuple(rows))


# -- bath rates -----------------------------------------------------------


def bose_occupation(w: float, temperature: float) -> float:
    return 1.0 / math.expm1(w / temperature)


def ohmic_density(w: float, kappa: float, w_cut: float) -> float:
    return kappa * w * math.exp(-w / w_cut)


def thermal_rate(omega: float, temperature: float, kappa: float, w_cut: float) -> float:
    """Emission (``omega > 0``) or absorption (``omega < 0``) rate of an Ohmic bath."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    if omega == 0.0:
        return 2 * math.pi * kappa * temperature
    w = abs(omega)
    x = w / temperature
    # J(w) nbar(w) written as kappa T (x / expm1(x)) e^{-w/w_cut}; stable as w -> 0
    absorbed = 2 * math.pi * kappa * temperature * (x / math.expm1(x) if x < 700 else 0.0) * math.exp(-w / w_cut)
    if omega < 0:
        return absorbed
    return absorbed + 2 * math.pi * ohmic_density(w, kappa, w_cut)


# -- engine ---------------------------------------------------------------


class OttoEngine:
    """Operators, schedules and generators of one engine configuration."""

    def __init__(self, config: OttoCycleConfig):
        self.config = config.validate()
        n = config.n
        self.dim = 2**n
        self.h_zz = -config.j * zz_bonds(n)
        self.h_field = -total_z(n)  # multiplied by h(t)
        self.family = jump_family(n)
        self._last = (None, None)
        self._generator = None
        self._bath_generators = {}

    def schedule(self, t: float) -> tuple[float, float, float]:
        last_t, last = self._last
        if last_t == t:
            return last
        out = schedule(self.config, t)
        self._last = (t, out)
        return out

    def field(self, t: float) -> float:
        return self.schedule(t)[0]

    def hamiltonian(self, t: float) -> np.ndarray:
        return self.h_zz + self.field(t) * self.h_field

    def hamiltonian_rate(self, t: float) -> np.ndarray:
        return field_rate(self.config, t) * self.h_field

    def bath(self, r: str) -> tuple[float, float]:
        c = self.config
        return (c.t_h, c.kappa_h) if r == "h" else (c.t_c, c.kappa_c)

    def rate_function(self, r: str, channel: int, sign: int):
        """``lambda_r(t) * gamma_r(sign * omega_channel(t))``."""
        temperature, kappa = self.bath(r)
        w_cut = self.config.w_cut
        j = self.config.j
        slot = 1 if r == "h" else 2

        def rate(t: float) -> float:
            sched = self.schedule(t)
            lam = sched[slot]
            if lam == 0.0:
                return 0.0
            omega = bohr_frequencies(sched[0], j)[channel]
            return lam * thermal_rate(sign * omega, temperature, kappa, w_cut)

        rate.__name__ = f"rate_{r}{channel + 1}{'+' if sign > 0 else '-'}"
        return rate

    def _jump_terms(self, baths) -> list[JumpTerm]:
        terms = []
        for r in baths:
            for a in range(3):
                up, down = self.rate_function(r, a, +1), self.rate_function(r, a, -1)
                for j, row in enumerate(self.family.ops):
                    op = row[a]
                    if not np.any(op):
                        continue
                    terms.append(JumpTerm(op, up, label=f"{r}:L{j + 1},{a + 1}"))
                    terms.append(JumpTerm(dagger(op), down, label=f"{r}:L{j + 1},{a + 1}+"))
        return terms

    def generator(self) -> GKLSGenerator:
        if self._generator is None:
            self._generator = GKLSGenerator(
                self.dim,
                hamiltonian=[HamiltonianTerm(self.h_zz), HamiltonianTerm(self.h_field, self.field)],
                jumps=self._jump_terms(("h", "c")),
                period=self.config.period,
            )
        return self._generator

    def bath_generator(self, r: str) -> GKLSGenerator:
        """Dissipator of one bath, already weighted by its switch ``lambda_r``."""
        if r not in self._bath_generators:
            self._bath_generators[r] = GKLSGenerator(self.dim, jumps=self._jump_terms((r,)), period=self.config.period)
        return self._bath_generators[r]

    def heat_currents(self, rho, t: float) -> tuple[float, float]:
        h = self.hamiltonian(t)
        return tuple(
            float(np.trace(h @ self.bath_generator(r).dissipator(t, rho)).real) for r in ("h", "c")
        )

    def work_rate(self, rho, t: float) -> float:
        return float(np.trace(self.hamiltonian_rate(t) @ np.asarray(rho)).real)

    def energy(self, rho, t: float) -> float:
        return float(np.trace(self.hamiltonian(t) @ np.asarray(rho)).real)

    def cycle_thermodynamics(
        self, rho0, t_start: float = 0.0, periods: int = 1, tol: float = 1e-10,
        basis: HermitianBasis | None = None,
    ) -> dict:
        """Integrate state, heats and work together over whole periods.

        Heat and work rates are linear in the coefficients, so they ride along
        as three extra ODE components and inherit the integrator's accuracy.
        """
        basis = basis or build_basis(self.dim)
        gen = self.generator()
        hot, cold = self.bath_generator("h"), self.bath_generator("c")
        hz = to_coefficients(self.h_field, basis)
        hzz = to_coefficients(self.h_zz, basis)
        c0 = 1 / np.sqrt(self.dim)

        def f(t, y):
            c = np.concatenate([[c0], y[:-3]])
            blocks = gen.blocks(t, basis)
            hc = hzz + self.field(t) * hz
            return np.concatenate(
                [
                    blocks.M0 @ y[:-3] + blocks.b,
                    [
                        hc @ (hot.superoperator(t, basis) @ c),
                        hc @ (cold.superoperator(t, basis) @ c),
                        field_rate(self.config, t) * (hz @ c),
                    ],
                ]
            )

        c_init = to_coefficients(check_density_matrix(rho0), basis)
        t_end = t_start + periods * self.config.period
        sol = solve_ivp(f, (t_start, t_end), np.concatenate([c_init[1:], [0, 0, 0]]),
                        method="RK45", rtol=tol, atol=tol)
        if sol.status != 0:
            raise RuntimeError(sol.message)
        y = sol.y[:, -1]
        c_end = np.concatenate([[c0], y[:-3]])
        e0 = (hzz + self.field(t_start) * hz) @ c_init
        e1 = (hzz + self.field(t_end) * hz) @ c_end
        q_h, q_c, w = y[-3:]
        return {
            "delta_energy": float(e1 - e0),
            "q_h": float(q_h),
            "q_c": float(q_c),
            "work": float(w),
            "first_law_residual": float(e1 - e0 - q_h - q_c - w),
            "final_coefficients": c_end,
        }


def build_otto_generator(config: OttoCycleConfig) -> GKLSGenerator:
    return OttoEngine(config).generator()


def heat_current(engine: OttoEngine, rho, t: float) -> tuple[float, float]:
    return engine.heat_currents(rho, t)


def work_rate(engine: OttoEngine, rho, t: float) -> float:
    return engine.work_rate(rho, t)
