"""Relaxation certificate for time-dependent GKLS generators.

Per sampled time the certifier checks that the active jump set is closed
under adjoints, that its commutant is one-dimensional, and that the rate
``Lambda(t)``, the top eigenvalue of ``M0 + M0^T``, is strictly negative.
``Lambda`` also drives the log-envelope ``int Lambda`` that bounds how fast
differences of trajectories can grow or shrink.
"""

from __future__ import annotations

import json
import weakref
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson, simpson

from .generator import GKLSGenerator
from .operators import HermitianBasis, as_matrix, build_basis
from .tolerances import DEFAULT, Tolerances, parallel_map

WEAK = "certified-weakly-relaxing"
STRONG_UNITAL = "certified-strongly-relaxing-unital"
INCONCLUSIVE = "inconclusive"
VERDICTS = (WEAK, STRONG_UNITAL, INCONCLUSIVE)


@dataclass(frozen=True)
class AdjointPairing:
    ok: bool
    pairs: list  # (i, j) with ops[j] = ops[i]^dagger, i < j
    self_paired: list  # Hermitian members
    unmatched: list

    def __bool__(self) -> bool:
        return self.ok


def _close(a: np.ndarray, b: np.ndarray, tol: float) -> bool:
    scale = max(1.0, float(np.max(np.abs(a))), float(np.max(np.abs(b))))
    return float(np.max(np.abs(a - b))) <= tol * scale


def _close_table(xs: np.ndarray, ys: np.ndarray, tol: float) -> np.ndarray:
    """``table[i, j]`` is ``_close(xs[i], ys[j], tol)`` for stacked operators."""
    peak_x = np.abs(xs).max(axis=(1, 2))
    peak_y = np.abs(ys).max(axis=(1, 2))
    scale = np.maximum(1.0, np.maximum.outer(peak_x, peak_y))
    return np.abs(xs[:, None] - ys[None]).max(axis=(2, 3)) <= tol * scale


def is_self_adjoint_set(ops, tol: float = DEFAULT.comm) -> AdjointPairing:
    """Check that every operator's adjoint is also in ``ops``."""
    ops = [as_matrix(o) for o in ops]
    if not ops:
        raise ValueError("operator list is empty")
    stack = np.array(ops)
    # close[j, i]: ops[j] matches ops[i]^dagger
    close = _close_table(stack, np.conj(np.swapaxes(stack, 1, 2)), tol)
    pairs, herm, unmatched = [], [], []
    used = set()
    for i in range(len(ops)):
        if close[i, i]:
            herm.append(i)
            continue
        match = [j for j in range(len(ops)) if j != i and close[j, i]]
        if not match:
            unmatched.append(i)
            continue
        if i in used:
            continue
        free = [j for j in match if j not in used]
        j = free[0] if free else match[0]
        used.update((i, j))
        pairs.append((min(i, j), max(i, j)))
    return AdjointPairing(not unmatched, pairs, herm, unmatched)


@dataclass(frozen=True)
class CommutantResult:
    dimension: int
    witness: np.ndarray | None
    singular_values: np.ndarray = field(repr=False, default=None)


def commutant_dimension(ops, sigma_cut: float = DEFAULT.sigma_cut) -> CommutantResult:
    """Complex dimension of ``{X : [X, A] = 0 for all A in ops}``.

    The maps ``X -> [X, A]`` are stacked into one matrix acting on the
    row-major vectorisation of ``X``; the commutant is its nullspace.
    """
    ops = [as_matrix(o) for o in ops]
    if not ops:
        raise ValueError("operator list is empty")
    n = ops[0].shape[0]
    if any(o.shape != (n, n) for o in ops):
        raise ValueError("operators must share one dimension")
    eye = np.eye(n)
    stack = np.vstack([np.kron(eye, a.T) - np.kron(a, eye) for a in ops])
    _, s, vh = np.linalg.svd(stack, full_matrices=False)
    s_full = np.zeros(n * n)
    s_full[: len(s)] = s
    smax = s_full.max()
    if smax == 0.0:
        null = np.ones(n * n, dtype=bool)
    else:
        null = s_full < sigma_cut * smax
    dim = int(null.sum())
    witness = None
    if dim > 1:
        basis = vh.conj()[null]  # rows span the nullspace
        ident = eye.reshape(-1) / np.sqrt(n)
        basis = basis - np.outer(basis @ ident.conj(), ident)
        k = int(np.argmax(np.linalg.norm(basis, axis=1)))
        w = basis[k].reshape(n, n)
        w = w - np.trace(w) / n * eye
        witness = w / np.linalg.norm(w)
    return CommutantResult(dim, witness, s)


# -- active jump sets -----------------------------------------------------


class _JumpIndex:
    """Groups jump terms with identical (static) operators."""

    def __init__(self, gen: GKLSGenerator):
        self.gen = gen
        self.static = gen.has_static_operators
        self.groups: list[list[int]] = []
        self.ops: list[np.ndarray] = []
        if self.static:
            for i, j in enumerate(gen.jumps):
                op = np.asarray(j.operator)
                if not np.any(op):
                    continue
                for g, rep in zip(self.groups, self.ops):
                    if _close(rep, op, DEFAULT.comm):
                        g.append(i)
                        break
                else:
                    self.groups.append([i])
                    self.ops.append(op)
        self._commutant_cache: dict = {}
        self._pairing_cache: dict = {}

    def active(self, t: float):
        """Merged ``(operators, rates, key)`` with non-zero rate at ``t``."""
        if self.static:
            rates = [self.gen.jumps[i].rate_at(t) for i in range(len(self.gen.jumps))]
            ops, rs, key = [], [], []
            for gi, (g, op) in enumerate(zip(self.groups, self.ops)):
                r = sum(rates[i] for i in g)
                if r != 0.0:
                    ops.append(op)
                    rs.append(r)
                    key.append(gi)
            return ops, rs, tuple(key)
        ops, rs = [], []
        for op, r in self.gen.jumps_at(t):
            if r == 0.0 or not np.any(op):
                continue
            for k, o in enumerate(ops):
                if _close(o, op, DEFAULT.comm):
                    rs[k] += r
                    break
            else:
                ops.append(op)
                rs.append(r)
        return ops, rs, None

    def pairing(self, ops, key, tol):
        key = None if key is None else (key, tol)
        if key is not None and key in self._pairing_cache:
            return self._pairing_cache[key]
        p = is_self_adjoint_set(ops, tol) if ops else AdjointPairing(False, [], [], [])
        if key is not None:
            self._pairing_cache[key] = p
        return p

    def commutant(self, ops, key, sigma_cut):
        key = None if key is None else (key, sigma_cut)
        if key is not None and key in self._commutant_cache:
            return self._commutant_cache[key]
        c = commutant_dimension(ops, sigma_cut)
        if key is not None:
            self._commutant_cache[key] = c
        return c


_INDEX_CACHE: "weakref.WeakKeyDictionary[GKLSGenerator, _JumpIndex]" = weakref.WeakKeyDictionary()


def _index_for(gen: GKLSGenerator) -> _JumpIndex:
    index = _INDEX_CACHE.get(gen)
    if index is None:
        index = _INDEX_CACHE[gen] = _JumpIndex(gen)
    return index


def _commutator_norm2(a: np.ndarray, s: np.ndarray) -> float:
    return float(np.linalg.norm(a @ s - s @ a) ** 2)


def spohn_bound_rhs(gen: GKLSGenerator, t: float, sigma, tol: Tolerances = DEFAULT) -> float:
    """Non-positive commutator bound on ``2 Re (s, L_t s)`` for traceless ``s``.

    Each adjoint pair contributes with the smaller of its two rates, each
    Hermitian jump with its own rate.
    """
    s = as_matrix(sigma)
    if abs(np.trace(s)) > tol.herm * max(1.0, np.linalg.norm(s)) * s.shape[0]:
        raise ValueError("sigma must be traceless")
    index = _index_for(gen)
    ops, rates, key = index.active(t)
    if not ops:
        return 0.0
    pairing = index.pairing(ops, key, tol.comm)
    if not pairing:
        raise ValueError(f"jump set at t={t} is not closed under adjoints")
    total = 0.0
    for i in pairing.self_paired:
        total -= rates[i] * _commutator_norm2(ops[i], s)
    for i, j in pairing.pairs:
        total -= min(rates[i], rates[j]) * (_commutator_norm2(ops[i], s) + _commutator_norm2(ops[j], s))
    return total


def lambda_max(gen: GKLSGenerator, t: float, basis: HermitianBasis | None = None) -> float:
    """Top eigenvalue of ``M0(t) + M0(t)^T``."""
    basis = basis or build_basis(gen.dim)
    m0 = gen.blocks(t, basis).M0
    return float(np.linalg.eigvalsh(m0 + m0.T)[-1])


def _check_grid(t_grid) -> np.ndarray:
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) <= 0):
        raise ValueError("time grid must be strictly increasing with at least two points")
    return t


def lambda_samples(gen: GKLSGenerator, t_grid, basis: HermitianBasis | None = None) -> np.ndarray:
    basis = basis or build_basis(gen.dim)
    return np.array(parallel_map(lambda t: lambda_max(gen, float(t), basis), t_grid))


def gronwall_log_bound(gen: GKLSGenerator, t_grid, basis: HermitianBasis | None = None) -> float:
    """Composite-Simpson estimate of ``int Lambda(s) ds`` over the grid."""
    t = _check_grid(t_grid)
    return float(simpson(lambda_samples(gen, t, basis), x=t))


def cumulative_log_bound(lambdas, t_grid) -> np.ndarray:
    """Running ``int_{t_0}^{t} Lambda``, zero at the first grid point."""
    t = _check_grid(t_grid)
    lam = np.asarray(lambdas, dtype=float)
    if t.size == 2:
        return np.array([0.0, 0.5 * (lam[0] + lam[1]) * (t[1] - t[0])])
    return cumulative_simpson(lam, x=t, initial=0.0)


# -- certification --------------------------------------------------------


@dataclass
class CertificationReport:
    times: np.ndarray
    inspected: np.ndarray
    self_adjoint_ok: np.ndarray
    commutant_dim: np.ndarray
    lambda_: np.ndarray
    b_norm: np.ndarray
    certified: np.ndarray
    C: float | None
    certified_measure_per_period: float
    gronwall_integral: float
    lambda_positive_measure_per_period: float
    period: float | None
    markovian_from: float
    verdict: str
    reasons: list = field(default_factory=list)

    def certified_windows(self) -> list[tuple[float, float]]:
        """Contiguous certified sample runs as ``(first, last)`` times."""
        out, start = [], None
        for k, ok in enumerate(self.certified):
            if ok and start is None:
                start = k
            if not ok and start is not None:
                out.append((float(self.times[start]), float(self.times[k - 1])))
                start = None
        if start is not None:
            out.append((float(self.times[start]), float(self.times[-1])))
        return out

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "reasons": list(self.reasons),
            "period": self.period,
            "markovian_from": self.markovian_from,
            "C": self.C,
            "certified_measure_per_period": self.certified_measure_per_period,
            "gronwall_integral": self.gronwall_integral,
            "lambda_positive_measure_per_period": self.lambda_positive_measure_per_period,
            "t_grid": [float(x) for x in self.times],
            "inspected": [bool(x) for x in self.inspected],
            "self_adjoint_ok": [bool(x) for x in self.self_adjoint_ok],
            "commutant_dim": [int(x) for x in self.commutant_dim],
            "lambda": [float(x) for x in self.lambda_],
            "b_norm": [float(x) for x in self.b_norm],
            "certified": [bool(x) for x in self.certified],
            "certified_windows": [list(w) for w in self.certified_windows()],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


_bool_array = {"type": "array", "items": {"type": "boolean"}}
_num_array = {"type": "array", "items": {"type": "number"}}

CERTIFICATION_REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "CertificationReport",
    "type": "object",
    "required": [
        "verdict", "period", "markovian_from", "C", "certified_measure_per_period",
        "gronwall_integral", "t_grid", "inspected", "self_adjoint_ok", "commutant_dim",
        "lambda", "b_norm", "certified",
    ],
    "properties": {
        "verdict": {"enum": list(VERDICTS)},
        "reasons": {"type": "array", "items": {"type": "string"}},
        "period": {"type": ["number", "null"]},
        "markovian_from": {"type": "number"},
        "C": {"type": ["number", "null"]},
        "certified_measure_per_period": {"type": "number", "minimum": 0},
        "gronwall_integral": {"type": "number"},
        "lambda_positive_measure_per_period": {"type": "number", "minimum": 0},
        "t_grid": _num_array,
        "inspected": _bool_array,
        "self_adjoint_ok": _bool_array,
        "commutant_dim": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "lambda": _num_array,
        "b_norm": _num_array,
        "certified": _bool_array,
        "certified_windows": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        },
    },
}


def _cell_weights(t: np.ndarray) -> np.ndarray:
    w = np.zeros_like(t)
    dt = np.diff(t)
    w[:-1] += dt / 2
    w[1:] += dt / 2
    return w


def _shrink(mask: np.ndarray) -> np.ndarray:
    """Drop the first and last sample of every interior run."""
    padded = np.concatenate([[True], mask, [True]])
    return mask & padded[:-2] & padded[2:]


def certify(
    gen: GKLSGenerator,
    t_grid,
    period: float | None = None,
    basis: HermitianBasis | None = None,
    tol: Tolerances = DEFAULT,
) -> CertificationReport:
    """Evaluate the relaxation conditions on ``t_grid`` and issue a verdict.

    Only samples with ``t >= gen.markovian_from`` are inspected. A verdict
    other than inconclusive needs a periodic (or static) generator, a
    certified subset of positive measure with ``C = max Lambda < 0`` on it
    (one grid cell trimmed from each run boundary), and a negative
    integral of ``Lambda`` over the inspected span, which covers intervals
    where ``Lambda`` is positive.
    """
    t = _check_grid(t_grid)
    basis = basis or build_basis(gen.dim)
    period = period if period is not None else gen.period
    index = _JumpIndex(gen)

    def sample(tk):
        tk = float(tk)
        blocks = gen.blocks(tk, basis)
        lam = float(np.linalg.eigvalsh(blocks.M0 + blocks.M0.T)[-1])
        ops, _, key = index.active(tk)
        if ops:
            sa = bool(index.pairing(ops, key, tol.comm))
            cd = index.commutant(ops, key, tol.sigma_cut).dimension
        else:
            sa, cd = False, basis.n**2
        return sa, cd, lam, float(np.max(np.abs(blocks.b)))

    rows = parallel_map(sample, t)
    sa = np.array([r[0] for r in rows])
    cd = np.array([r[1] for r in rows], dtype=int)
    lam = np.array([r[2] for r in rows])
    bn = np.array([r[3] for r in rows])

    inspected = t >= gen.markovian_from - 1e-12
    certified = inspected & sa & (cd == 1) & (lam < -tol.lambda_neg)
    reasons = []

    ti = t[inspected]
    span = float(ti[-1] - ti[0]) if ti.size >= 2 else 0.0
    if gen.static and period is None:
        period = span or None
    if period is not None and span < period * (1 - 1e-9):
        raise ValueError(f"inspected grid span {span} shorter than one period {period}")

    weights = np.zeros_like(t)
    if ti.size >= 2:
        weights[inspected] = _cell_weights(ti)
    measure = float(np.sum(weights[certified]))
    positive = float(np.sum(weights[inspected & (lam > tol.lambda_neg)]))
    scale = (period / span) if (period and span) else 1.0
    gronwall = float(simpson(lam[inspected], x=ti)) if ti.size >= 2 else 0.0

    C = None
    if certified.any():
        core = _shrink(certified)
        C = float(np.max(lam[core] if core.any() else lam[certified]))

    if period is None:
        reasons.append("aperiodic generator: an infinite-measure certified set cannot be established")
    if measure <= 0:
        reasons.append("no certified samples")
    if C is not None and C >= 0:
        reasons.append("Lambda ceiling on the certified set is not negative")
    if gronwall >= 0:
        reasons.append("integral of Lambda over the inspected span is not negative")

    verdict = INCONCLUSIVE
    if not reasons:
        verdict = WEAK
        if np.all(bn[inspected] <= tol.tp):
            verdict = STRONG_UNITAL

    return CertificationReport(
        times=t,
        inspected=inspected,
        self_adjoint_ok=sa,
        commutant_dim=cd,
        lambda_=lam,
        b_norm=bn,
        certified=certified,
        C=C,
        certified_measure_per_period=measure * scale,
        gronwall_integral=gronwall,
        lambda_positive_measure_per_period=positive * scale,
        period=period,
        markovian_from=gen.markovian_from,
        verdict=verdict,
        reasons=reasons,
    )
