"""Batch front-end: ``lindblad-relax --config run.json --out results/``.

A run is described by one JSON document. Scenarios:

``certify``    check the relaxation conditions of an inline generator
``evolve``     certify, then propagate a random ensemble and its limit trajectory
``otto``       the same for the driven Ising engine, plus its switching schedule
``commutant``  dimension of the commutant of an operator list

Exit status is 0 on success, 2 when the configuration is unreadable or
invalid and 3 when a numerical step fails.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import math
import sys
from pathlib import Path

import numpy as np

from .certifier import certify, commutant_dimension, is_self_adjoint_set
from .generator import GeneratorError, GKLSGenerator, HamiltonianTerm, JumpTerm, TabulatedFunction
from .operators import build_basis, random_density_matrix
from .otto import ConfigError, OttoCycleConfig, OttoEngine, schedule
from .propagator import (
    IntegrationError,
    asymptotic_trajectory,
    integrate,
    propagate_ensemble,
)
from .tolerances import DEFAULT, Tolerances

SCENARIOS = ("certify", "evolve", "otto", "commutant")
EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3

DEFAULT_CYCLES = 30
SAMPLES_PER_PERIOD = 40
CERTIFY_SAMPLES = 401


class ValidationError(ValueError):
    def __init__(self, violations):
        super().__init__("invalid configuration: " + ", ".join(violations))
        self.violations = list(violations)


# -- parsing --------------------------------------------------------------


def parse_matrix(raw, where: str) -> np.ndarray:
    """``[[[re, im], ...], ...]`` (plain numbers are read as real) to a complex matrix."""
    try:
        rows = [[complex(*e) if isinstance(e, (list, tuple)) else complex(e) for e in row] for row in raw]
        m = np.array(rows, dtype=complex)
    except (TypeError, ValueError) as exc:
        raise ValidationError([f"{where}.matrix"]) from exc
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0 or not np.all(np.isfinite(m)):
        raise ValidationError([f"{where}.matrix"])
    return m


def parse_scalar_function(raw, where: str):
    """A number, or ``{"type": "tabulated", "t0", "dt", "values", "periodic"}``."""
    if isinstance(raw, (int, float)) and not isinstance(raw, bool):
        return float(raw)
    if isinstance(raw, dict) and raw.get("type") == "tabulated":
        try:
            return TabulatedFunction(
                float(raw.get("t0", 0.0)),
                float(raw["dt"]),
                tuple(float(v) for v in raw["values"]),
                bool(raw.get("periodic", False)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError([f"{where}.tabulated"]) from exc
    raise ValidationError([f"{where}.rate"])


def parse_generator(spec: dict) -> GKLSGenerator:
    if not isinstance(spec, dict):
        raise ValidationError(["generator.missing"])
    ham = spec.get("hamiltonian")
    terms = []
    if isinstance(ham, dict) and "terms" in ham:
        ham = ham["terms"]
    if ham is None:
        pass
    elif isinstance(ham, list) and ham and isinstance(ham[0], dict):
        for k, item in enumerate(ham):
            op = parse_matrix(item.get("operator"), f"generator.hamiltonian[{k}]")
            coef = parse_scalar_function(item.get("coefficient", 1.0), f"generator.hamiltonian[{k}]")
            terms.append(HamiltonianTerm(op, coef))
    else:
        terms.append(HamiltonianTerm(parse_matrix(ham, "generator.hamiltonian")))
    jumps = []
    for k, item in enumerate(spec.get("jumps", [])):
        op = parse_matrix(item.get("operator"), f"generator.jumps[{k}]")
        rate = parse_scalar_function(item.get("rate"), f"generator.jumps[{k}]")
        jumps.append(JumpTerm(op, rate, label=str(item.get("label", f"L{k}"))))
    dims = {t.operator.shape[0] for t in terms} | {j.operator.shape[0] for j in jumps}
    if "dim" in spec:
        dims.add(int(spec["dim"]))
    if len(dims) != 1:
        raise ValidationError(["generator.dim"])
    try:
        return GKLSGenerator(
            dims.pop(),
            hamiltonian=terms or None,
            jumps=jumps,
            markovian_from=float(spec.get("markovian_from", 0.0)),
            period=spec.get("period"),
        )
    except ValueError as exc:
        raise ValidationError(["generator.invalid"]) from exc


def tolerances_from(config: dict) -> Tolerances:
    try:
        return DEFAULT.override(**config.get("tolerances", {}))
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(["tolerances.unknown"]) from exc


def validate(config) -> list[str]:
    """Every invariant violation found in ``config``; empty when runnable."""
    if not isinstance(config, dict):
        return ["config.not_object"]
    out = []
    scenario = config.get("scenario")
    if scenario not in SCENARIOS:
        out.append("scenario.unknown")
    try:
        grid = config.get("grid", {})
        t0, t1 = float(grid.get("t_start", 0.0)), grid.get("t_end")
        if t1 is not None and not float(t1) > t0:
            out.append("grid.monotone")
        if "samples" in grid and int(grid["samples"]) < 2:
            out.append("grid.samples")
    except (AttributeError, TypeError, ValueError):
        out.append("grid.invalid")
    try:
        ens = config.get("ensemble", {})
        if int(ens.get("count", 1)) < 1:
            out.append("ensemble.count")
        if int(ens.get("seed", 0)) < 0:
            out.append("ensemble.seed")
    except (AttributeError, TypeError, ValueError):
        out.append("ensemble.invalid")
    try:
        tol = config.get("tolerances", {})
        known = set(Tolerances.__dataclass_fields__)
        out += [f"tolerances.unknown:{k}" for k in sorted(set(tol) - known)]
        out += [f"tolerances.positive:{k}" for k in sorted(set(tol) & known) if not float(tol[k]) > 0]
    except (AttributeError, TypeError, ValueError):
        out.append("tolerances.invalid")
    if scenario == "otto":
        try:
            out += OttoCycleConfig.from_dict(config.get("otto", {})).violations()
        except ConfigError as err:
            out += err.violations
        except TypeError:
            out.append("otto.invalid")
    elif scenario in ("certify", "evolve"):
        try:
            parse_generator(config.get("generator"))
        except ValidationError as err:
            out += err.violations
        except (AttributeError, TypeError, ValueError):
            out.append("generator.invalid")
    elif scenario == "commutant":
        ops = config.get("operators")
        if not ops:
            out.append("operators.missing")
        else:
            try:
                mats = [parse_matrix(o, f"operators[{k}]") for k, o in enumerate(ops)]
                if len({m.shape for m in mats}) != 1:
                    out.append("operators.dim")
            except ValidationError as err:
                out += err.violations
            except TypeError:
                out.append("operators.invalid")
    return out


# -- output ---------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def write_report(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(_clean(doc), indent=2, sort_keys=True) + "\n")


def emit_plot_data(out: Path, records, summary=None, n: int = 2, limit=None, schedule_rows=None) -> None:
    """Write trajectories.csv, convergence.csv and, for engines, schedule.csv.

    The identity-seeded limit trajectory, when given, is written to
    trajectories.csv with ``state_index = -1``.
    """
    d = records[0].tilde.shape[1]
    header = ["t", "state_index", "trace_err", "min_eig"] + [f"c{k}" for k in range(1, d + 1)]
    labelled = list(enumerate(records)) + ([(-1, limit)] if limit is not None else [])

    def rows():
        for idx, rec in labelled:
            for k, t in enumerate(rec.times):
                yield [t, idx, rec.trace_err[k], rec.min_eig[k], *rec.tilde[k]]

    _write_csv(out / "trajectories.csv", header, rows())

    t = records[0].times
    if summary is None:
        dist = np.zeros(len(t))
        env = np.zeros(len(t))
    else:
        dist = summary.max_pair_dist
        spread = max(
            (float(np.linalg.norm(a.tilde[0] - b.tilde[0])) for a, b in itertools.combinations(records, 2)),
            default=0.0,
        )
        # trace distance <= sqrt(n)/2 * HS distance, HS distance bounded by the Gronwall envelope
        env = 0.5 * math.sqrt(n) * spread * summary.envelope
    _write_csv(out / "convergence.csv", ["t", "max_pair_dist", "gronwall_envelope"], zip(t, dist, env))

    if schedule_rows is not None:
        _write_csv(out / "schedule.csv", ["t", "h", "lambda_h", "lambda_c"], schedule_rows)


# -- scenarios ------------------------------------------------------------


def _grid(config: dict, default_end: float, default_samples: int) -> np.ndarray:
    grid = config.get("grid", {})
    t0 = float(grid.get("t_start", 0.0))
    t1 = float(grid.get("t_end", t0 + default_end))
    return np.linspace(t0, t1, int(grid.get("samples", default_samples)))


def _initial_states(config: dict, n: int) -> list[np.ndarray]:
    ens = config.get("ensemble", {})
    rng = np.random.default_rng(int(ens.get("seed", 0)))
    return [random_density_matrix(n, rng) for _ in range(int(ens.get("count", 5)))]


def _ensemble(gen, states, t, tol, basis):
    if len(states) == 1:
        return [integrate(gen, states[0], t, tol.integrator, basis)], None
    return propagate_ensemble(gen, states, t, tol.integrator, basis)


def _convergence_block(records, summary, limit, n) -> dict:
    block = {"count": len(records)}
    final = [np.linalg.norm(r.tilde[-1] - limit.tilde[-1]) for r in records]
    block["final_hs_distance_to_limit"] = float(max(final))
    block["final_trace_distance_to_maximally_mixed"] = [
        0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(r.states(build_basis(n))[-1] - np.eye(n) / n))))
        for r in records
    ]
    block["positivity_violated"] = any(r.positivity_violated for r in records)
    if summary is not None:
        block["final_max_pair_dist"] = float(summary.max_pair_dist[-1])
        block["decay_rate"] = summary.decay_rate
        block["gronwall_log_bound_final"] = float(summary.log_bound[-1])
    return block


def run_certify(config, out: Path, tol: Tolerances) -> dict:
    gen = parse_generator(config["generator"])
    t = _grid(config, gen.period or 10.0, CERTIFY_SAMPLES)
    report = certify(gen, t, tol=tol)
    doc = report.to_dict()
    doc["scenario"] = "certify"
    return doc


def run_evolve(config, out: Path, tol: Tolerances) -> dict:
    gen = parse_generator(config["generator"])
    basis = build_basis(gen.dim)
    t = _grid(config, 10.0, 201)
    cert_t = t if gen.period is None else np.linspace(t[0], t[0] + gen.period, CERTIFY_SAMPLES)
    report = certify(gen, cert_t, tol=tol)
    states = _initial_states(config, gen.dim)
    records, summary = _ensemble(gen, states, t, tol, basis)
    limit = asymptotic_trajectory(gen, t, tol.integrator, basis, certified=report.verdict != "inconclusive")
    emit_plot_data(out, records, summary, gen.dim, limit)
    doc = report.to_dict()
    doc["scenario"] = "evolve"
    doc["convergence"] = _convergence_block(records, summary, limit, gen.dim)
    return doc


def run_otto(config, out: Path, tol: Tolerances) -> dict:
    cfg = OttoCycleConfig.from_dict(config.get("otto", {})).validate()
    engine = OttoEngine(cfg)
    gen = engine.generator()
    basis = build_basis(engine.dim)
    T = cfg.period
    t = _grid(config, DEFAULT_CYCLES * T, DEFAULT_CYCLES * SAMPLES_PER_PERIOD + 1)
    cert_t = np.linspace(t[0], t[0] + T, CERTIFY_SAMPLES)
    report = certify(gen, cert_t, tol=tol)
    states = _initial_states(config, engine.dim)
    records, summary = _ensemble(gen, states, t, tol, basis)
    limit = asymptotic_trajectory(gen, t, tol.integrator, basis, certified=report.verdict != "inconclusive")
    sched = ([x, *schedule(cfg, x)] for x in cert_t)
    emit_plot_data(out, records, summary, engine.dim, limit, sched)

    doc = report.to_dict()
    doc["scenario"] = "otto"
    doc["otto"] = cfg.to_dict()
    conv = _convergence_block(records, summary, limit, engine.dim)
    # limit-cycle drift at period boundaries that fall on the grid
    drift = []
    k = 1
    while t[0] + (k + 1) * T <= t[-1] + 1e-9:
        a = np.flatnonzero(np.isclose(t, t[0] + k * T, atol=1e-9))
        b = np.flatnonzero(np.isclose(t, t[0] + (k + 1) * T, atol=1e-9))
        if a.size and b.size:
            drift.append(float(np.linalg.norm(limit.tilde[b[0]] - limit.tilde[a[0]])))
        k += 1
    conv["limit_cycle_drift"] = drift
    doc["convergence"] = conv
    return doc


def run_commutant(config, out: Path, tol: Tolerances) -> dict:
    ops = [parse_matrix(o, f"operators[{k}]") for k, o in enumerate(config["operators"])]
    res = commutant_dimension(ops, tol.sigma_cut)
    pairing = is_self_adjoint_set(ops, tol.comm)
    doc = {
        "scenario": "commutant",
        "commutant_dim": res.dimension,
        "self_adjoint": pairing.ok,
        "adjoint_pairs": pairing.pairs,
        "self_paired": pairing.self_paired,
        "singular_values": res.singular_values,
    }
    if res.witness is not None:
        doc["witness"] = [[[z.real, z.imag] for z in row] for row in res.witness]
    return doc


RUNNERS = {"certify": run_certify, "evolve": run_evolve, "otto": run_otto, "commutant": run_commutant}


def run(config: dict, out_dir) -> int:
    """Validate, execute and write artifacts; returns the exit status."""
    bad = validate(config)
    if bad:
        print("invalid configuration: " + ", ".join(bad), file=sys.stderr)
        return EXIT_INVALID
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"cannot create output directory: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        tol = tolerances_from(config)
        doc = RUNNERS[config["scenario"]](config, out, tol)
    except (ValidationError, ConfigError) as err:
        print("invalid configuration: " + ", ".join(err.violations), file=sys.stderr)
        return EXIT_INVALID
    except (IntegrationError, GeneratorError, np.linalg.LinAlgError, FloatingPointError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    write_report(out / "report.json", doc)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lindblad-relax", description=__doc__.split("\n\n")[0])
    p.add_argument("--config", type=Path, help="JSON run description")
    p.add_argument("--out", type=Path, help="output directory (overrides config 'output')")
    p.add_argument("--seed", type=int, help="ensemble seed (overrides config)")
    p.add_argument("--scenario", choices=SCENARIOS, help="scenario (overrides config)")
    p.add_argument("--samples", type=int, help="grid samples (overrides config)")
    return p


def load_config(path: Path | None) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError("configuration must be a JSON object")
    return data


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
    except (OSError, ValueError) as exc:
        print(f"cannot read configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if args.scenario:
        config["scenario"] = args.scenario
    if args.seed is not None:
        config.setdefault("ensemble", {})["seed"] = args.seed
    if args.samples is not None:
        config.setdefault("grid", {})["samples"] = args.samples
    out = args.out or config.get("output")
    if out is None:
        print("no output directory: pass --out or set 'output'", file=sys.stderr)
        return EXIT_INVALID
    return run(config, out)


if __name__ == "__main__":
    sys.exit(main())
