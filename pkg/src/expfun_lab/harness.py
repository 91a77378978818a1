"""Experiment configuration, the continuity suite, and the command-line driver.

Exit codes: 0 success, 1 invalid configuration, 2 failed precondition,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import jsonschema
import numpy as np

from .charstats import (
    CFGrid,
    empirical_cf,
    ks_critical_value,
    ks_distance,
    log_abs_cf,
    weighted_moment_cf,
    zero_mask,
)
from .expfun import (
    ExpFunSample,
    NonConvergentSpecError,
    estimate_cpp_series,
    estimate_euler,
    estimate_event_driven,
    simulate_functional,
)
from .generator import apply_generator, battery, stationarity_residual
from .levy_spec import (
    BijectionDomainError,
    IndependentXiEta,
    JointCompoundPoisson,
    LevyTriplet,
    QuadratureError,
    ULForm,
    UL_to_xi_eta,
    driving_spec_from_json,
    mean_of,
    measure_integral,
)
from .oracles import ORACLES, OracleCase, continuity_counterexample_spec, get_oracle, poisson_xi_product_check
from .pathsim import RngStream, as_stream
from .relations import invert_eta, invert_xi, laplace_residual, residual_compact

log = logging.getLogger("expfun_lab")

SCHEMA_VERSION = "v1"
COMMANDS = ("simulate", "cf", "check-identity", "invert-eta", "invert-xi", "laplace", "oracle", "continuity",
            "generator-probe")

_TRIPLET = {
    "type": "object",
    "properties": {
        "gamma": {"type": "number"},
        "drift": {"type": "number"},
        "sigma2": {"type": "number", "minimum": 0},
        "nu": {"type": "object", "properties": {"type": {"enum": ["atoms", "density", "empty"]}}, "required": ["type"]},
    },
    "additionalProperties": False,
}

_GRID = {
    "oneOf": [
        {"type": "array", "items": {"type": "number"}, "minItems": 1},
        {
            "type": "object",
            "properties": {"start": {"type": "number"}, "stop": {"type": "number"}, "num": {"type": "integer", "minimum": 1}},
            "required": ["start", "stop", "num"],
            "additionalProperties": False,
        },
    ]
}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "spec": {"oneOf": [{"type": "string", "enum": sorted(ORACLES)}, {"type": "object"}]},
        "oracle_params": {"type": "object"},
        "n": {"type": "integer", "minimum": 100},
        "horizon": {"type": "number", "exclusiveMinimum": 0},
        "step": {"type": "number", "exclusiveMinimum": 0},
        "tol": {"type": "number", "exclusiveMinimum": 0},
        "grid": _GRID,
        "x_grid": _GRID,
        "seed": {"type": "integer", "minimum": 0},
        "output": {"type": "string"},
        "sample": {"type": "string"},
        "xi": _TRIPLET,
        "eta": _TRIPLET,
        "estimator": {"enum": ["auto", "euler", "cpp-series", "event-driven"]},
        "allow_nonconvergent": {"type": "boolean"},
        "mask_multiplier": {"type": "number", "exclusiveMinimum": 0},
        "cf_kind": {"enum": ["plain", "log-abs", "weighted(1)", "weighted(2)", "weighted-log(-1)", "weighted-log(-2)"]},
        "family": {
            "type": "object",
            "properties": {
                "name": {"enum": ["example-7.1", "drift-perturbation"]},
                "members": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
            },
            "required": ["name"],
            "additionalProperties": False,
        },
        "delta": {"type": "number", "exclusiveMinimum": 0},
    },
    "required": ["command"],
    "additionalProperties": False,
}


class ConfigError(ValueError):
    def __init__(self, field_path: str, message: str):
        super().__init__(f"config field '{field_path}': {message}")
        self.field = field_path


@dataclass
class ExperimentConfig:
    command: str
    spec: object = None
    oracle_params: dict = field(default_factory=dict)
    n: int = 10_000
    horizon: Optional[float] = None
    step: float = 1e-3
    tol: float = 1e-12
    grid: object = None
    x_grid: object = None
    seed: int = 0
    output: str = "."
    sample: Optional[str] = None
    xi: Optional[dict] = None
    eta: Optional[dict] = None
    estimator: str = "auto"
    allow_nonconvergent: bool = False
    mask_multiplier: float = 5.0
    cf_kind: str = "plain"
    family: Optional[dict] = None
    delta: float = 1.0

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
        errors = sorted(validator.iter_errors(obj), key=lambda e: (len(e.path), list(map(str, e.path))))
        if errors:
            err = errors[0]
            where = "/".join(str(p) for p in err.absolute_path) or "<root>"
            raise ConfigError(where, err.message)
        return cls(**obj)

    def canonical(self) -> dict:
        return {k: v for k, v in asdict(self).items() if k != "output"}

    def digest(self) -> str:
        text = json.dumps(self.canonical(), sort_keys=True, default=str)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    # -- helpers --------------------------------------------------------------

    def grid_array(self, default: np.ndarray, key: str = "grid") -> np.ndarray:
        g = getattr(self, key)
        if g is None:
            return default
        if isinstance(g, dict):
            return _symmetric_linspace(g["start"], g["stop"], g["num"])
        return np.asarray(g, dtype=float)

    def driving_spec(self):
        if isinstance(self.spec, str):
            return get_oracle(self.spec, **self.oracle_params).spec
        if self.spec is None:
            if self.xi is not None and self.eta is not None:
                return IndependentXiEta(LevyTriplet.from_json(self.xi), LevyTriplet.from_json(self.eta))
            raise ConfigError("spec", "a driving spec is required for this command")
        try:
            return driving_spec_from_json(self.spec)
        except (KeyError, TypeError) as exc:
            raise ConfigError("spec", f"malformed driving spec ({exc})") from None


def _symmetric_linspace(start: float, stop: float, num: int) -> np.ndarray:
    g = np.linspace(start, stop, num)
    if start == -stop:
        half = num // 2
        g[num - half:] = -g[:half][::-1]
        if num % 2:
            g[half] = 0.0
    return g


# ---------------------------------------------------------------------------
# continuity suite
# ---------------------------------------------------------------------------


@dataclass
class ContinuityRow:
    n: int
    cond_contcond6: float
    cond_contcond1: float
    E_xi: float
    ks_to_limit: float
    E_log_abs_A: float
    E_logplus_B: float
    E_logplus_B_ci: tuple


@dataclass
class ContinuitySuiteReport:
    rows: list
    verdict: str
    delta: float
    ks_critical: float

    def to_csv(self) -> str:
        head = "n,cond_contcond6,cond_contcond1,E_xi,ks_to_limit,E_log_abs_A,E_logplus_B,E_logplus_B_lo,E_logplus_B_hi\n"
        lines = [
            f"{r.n},{r.cond_contcond6!r},{r.cond_contcond1!r},{r.E_xi!r},{r.ks_to_limit!r},{r.E_log_abs_A!r},"
            f"{r.E_logplus_B!r},{r.E_logplus_B_ci[0]!r},{r.E_logplus_B_ci[1]!r}\n"
            for r in self.rows
        ]
        return head + "".join(lines)


def log_moment_condition(eta: LevyTriplet, delta: float) -> float:
    """``∫_{|x|>1} (log|x|)^{1+δ} ν_η(dx)``."""
    def g(x):
        a = np.abs(x)
        with np.errstate(divide="ignore"):
            return np.where(a > 1.0, np.log(np.maximum(a, 1.0)) ** (1.0 + delta), 0.0)

    return measure_integral(eta.nu, g)


def _abs_moment(xi: LevyTriplet, p: float, n_mc: int, gen: np.random.Generator) -> float:
    if xi.is_deterministic:
        return abs(xi.gamma) ** p
    from .pathsim import sample_at_times

    return float(np.mean(np.abs(sample_at_times(xi, np.ones(n_mc), gen)) ** p))


def _diverging(seq: Sequence[float], factor: float = 10.0) -> bool:
    vals = np.asarray(seq, dtype=float)
    if np.any(~np.isfinite(vals)):
        return True
    if vals.size < 2 or np.any(np.diff(vals) < 0):
        return False
    base = vals[vals > 0]
    return base.size > 0 and vals[-1] > factor * base[0]


def _functional(xi: LevyTriplet, eta: LevyTriplet, n: int, stream: RngStream, horizon: Optional[float] = None) -> np.ndarray:
    if xi.is_deterministic and math.isfinite(eta.jump_rate):
        return estimate_event_driven(xi.gamma, eta, n=n, rng=stream, horizon=horizon).values
    if horizon is not None:
        return estimate_euler(IndependentXiEta(xi, eta), horizon, min(1e-3, horizon / 100), n, stream,
                              allow_nonconvergent=True, pilot_paths=100).values
    return simulate_functional(IndependentXiEta(xi, eta), n, stream).values


def continuity_suite(
    family: Sequence[tuple[int, LevyTriplet]],
    xi: LevyTriplet,
    delta: float,
    n_mc: int,
    rng=None,
    limit: Optional[LevyTriplet] = None,
) -> ContinuitySuiteReport:
    """Evaluate the moment conditions of the continuity theorem along a family.

    Every member is simulated on the same random stream (common random
    numbers), so the KS distances to the limit reflect the change of law and
    not sampling noise.  Conditions are judged by their trend across the
    provided members; a finite family cannot prove a supremum is infinite.
    """
    stream = as_stream(rng)
    members = sorted(family, key=lambda p: p[0])
    if limit is None:
        limit = members[-1][1]
    ref = _functional(xi, limit, n_mc, stream.spawn(0))
    e_xi, _ = mean_of(xi)
    c1 = _abs_moment(xi, 1.0 + delta, n_mc, stream.spawn(1).generator())
    rows = []
    for n, eta in members:
        v = _functional(xi, eta, n_mc, stream.spawn(0))
        b0 = _functional(xi, eta, n_mc, stream.spawn(2), horizon=1.0)
        lb = np.log(np.maximum(np.abs(b0), 1.0))
        se = float(lb.std(ddof=1) / math.sqrt(lb.size))
        rows.append(ContinuityRow(
            n=int(n),
            cond_contcond6=float(log_moment_condition(eta, delta)),
            cond_contcond1=float(c1),
            E_xi=float(e_xi),
            ks_to_limit=ks_distance(v, ref),
            E_log_abs_A=-float(e_xi),
            E_logplus_B=float(lb.mean()),
            E_logplus_B_ci=(float(lb.mean() - 1.96 * se), float(lb.mean() + 1.96 * se)),
        ))
    crit = ks_critical_value(n_mc, n_mc)
    if _diverging([r.cond_contcond6 for r in rows]):
        verdict = "condition-violated: contcond6"
    elif _diverging([r.cond_contcond1 for r in rows]):
        verdict = "condition-violated: contcond1"
    elif not e_xi > 0:
        verdict = "condition-violated: contcond3"
    else:
        ks = [r.ks_to_limit for r in rows]
        shrinking = all(b <= a + 1e-12 for a, b in zip(ks, ks[1:]))
        verdict = "consistent-with-continuity" if shrinking else "inconclusive: ks-not-decreasing"
    return ContinuitySuiteReport(rows, verdict, float(delta), crit)


def example_family(members: Sequence[int] = (2, 4, 8, 16)) -> list[tuple[int, LevyTriplet]]:
    return [(n, continuity_counterexample_spec(n)) for n in members]


def drift_family(members: Sequence[int] = (1, 2, 4, 8, 16, 32, 64)) -> list[tuple[int, LevyTriplet]]:
    return [(n, LevyTriplet.brownian(1.0, drift=1.0 / n)) for n in members]


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _xi_eta(spec) -> IndependentXiEta:
    if isinstance(spec, IndependentXiEta):
        return spec
    if isinstance(spec, ULForm):
        xi, eta, cross = UL_to_xi_eta(spec)
        return IndependentXiEta(xi, eta)
    raise ValueError("this command needs an independent (ξ, η) pair")


def _simulate(cfg: ExperimentConfig, spec) -> ExpFunSample:
    stream = RngStream(cfg.seed)
    if cfg.estimator == "auto":
        return simulate_functional(spec, cfg.n, stream, tol=cfg.tol, step=cfg.step, horizon=cfg.horizon,
                                   allow_nonconvergent=cfg.allow_nonconvergent)
    pair = _xi_eta(spec)
    if cfg.estimator == "euler":
        return estimate_euler(pair, cfg.horizon, cfg.step, cfg.n, stream, cfg.allow_nonconvergent)
    if cfg.estimator == "cpp-series":
        return estimate_cpp_series(pair.xi, pair.eta, cfg.tol, cfg.n, stream)
    if not pair.xi.is_deterministic:
        raise ValueError("event-driven estimator needs ξ_t = γt")
    return estimate_event_driven(pair.xi.gamma, pair.eta, cfg.tol, cfg.n, stream)


def _sample(cfg: ExperimentConfig, spec) -> ExpFunSample:
    if cfg.sample is not None:
        return ExpFunSample.from_csv(cfg.sample)
    return _simulate(cfg, spec)


def _cf_summary(cf: CFGrid, k: float = 4.0) -> dict:
    z = cf.z_scores()
    return {
        "points": int(cf.u.size),
        "frac_within_4se": float(np.mean(z < k)),
        "max_z": float(np.max(z)),
        "warnings": list(cf.warnings),
    }


def _run(cfg: ExperimentConfig) -> tuple[dict, dict]:
    """Execute ``cfg``; returns (``{filename: csv text}``, report dict)."""
    grid = cfg.grid_array(_symmetric_linspace(-5.0, 5.0, 41))
    files: dict[str, str] = {}
    report: dict = {}
    cmd = cfg.command

    if cmd == "simulate":
        s = _simulate(cfg, cfg.driving_spec())
        files["sample.csv"] = s.to_csv()
        report.update(estimator=s.estimator, mean=s.mean, stderr=s.stderr, horizon=s.horizon,
                      tail_bound=s.bias_report.tail_bound, doubling_delta=s.bias_report.doubling_delta)

    elif cmd == "oracle":
        if not isinstance(cfg.spec, str):
            raise ConfigError("spec", "oracle command needs an oracle name")
        case = get_oracle(cfg.spec, **cfg.oracle_params)
        report.update(oracle=case.name, notes=case.notes)
        s = _simulate(cfg, case.spec) if not isinstance(case.spec, JointCompoundPoisson) else \
            simulate_functional(case.spec, cfg.n, RngStream(cfg.seed), tol=cfg.tol)
        files["sample.csv"] = s.to_csv()
        report.update(mean=s.mean, stderr=s.stderr, estimator=s.estimator)
        if case.law_kind == "analytic":
            ks = ks_distance(s, case.cdf)
            report.update(ks=ks, ks_pass=bool(ks < 0.01))
        elif case.name == "dep-pair":
            partner = simulate_functional(case.extra["partner"], cfg.n, RngStream(cfg.seed).spawn(1), tol=cfg.tol)
            ks = ks_distance(s, partner)
            crit = ks_critical_value(cfg.n, cfg.n)
            report.update(ks=ks, ks_critical=crit, ks_pass=bool(ks < crit))
        elif case.name == "poisson-product":
            res = poisson_xi_product_check(case.spec.eta, s, grid, case.extra["lam"])
            files["residual.csv"] = res.to_csv()
            report.update(_cf_summary(res))

    elif cmd == "cf":
        s = _sample(cfg, cfg.driving_spec() if cfg.sample is None else None)
        kind = cfg.cf_kind
        if kind == "plain":
            cf = empirical_cf(s, grid)
        elif kind == "log-abs":
            cf = log_abs_cf(s, grid)
        else:
            k = int(kind[kind.index("(") + 1:-1])
            cf = weighted_moment_cf(s, grid, k, log_mode=kind.startswith("weighted-log"))
        cf = zero_mask(cf, cfg.mask_multiplier) if kind in ("plain", "log-abs") else cf
        files["cf.csv"] = cf.to_csv()
        report.update(points=int(cf.u.size), valid=int(cf.valid_mask.sum()), warnings=list(cf.warnings))

    elif cmd == "check-identity":
        spec = cfg.driving_spec()
        s = _sample(cfg, spec)
        res = residual_compact(spec, s, grid)
        files["residual.csv"] = res.to_csv()
        report.update(_cf_summary(res))

    elif cmd in ("invert-eta", "invert-xi"):
        if cmd == "invert-eta":
            known = LevyTriplet.from_json(cfg.xi) if cfg.xi is not None else _xi_eta(cfg.driving_spec()).xi
        else:
            known = LevyTriplet.from_json(cfg.eta) if cfg.eta is not None else _xi_eta(cfg.driving_spec()).eta
        spec = None if cfg.sample is not None else cfg.driving_spec()
        s = _sample(cfg, spec)
        fn = invert_eta if cmd == "invert-eta" else invert_xi
        out = fn(known, s, grid, cfg.mask_multiplier)
        files["exponent.csv"] = out.to_csv()
        report.update(points=int(out.u.size), valid=int(out.valid_mask.sum()), warnings=list(out.warnings))

    elif cmd == "laplace":
        pair = _xi_eta(cfg.driving_spec())
        lgrid = cfg.grid_array(np.linspace(0.0, 5.0, 21))
        s = _sample(cfg, pair)
        res = laplace_residual(pair.xi, pair.eta, s, lgrid)
        files["residual.csv"] = res.to_csv()
        report.update(_cf_summary(res))

    elif cmd == "continuity":
        fam = cfg.family or {"name": "example-7.1"}
        xi = LevyTriplet.from_json(cfg.xi) if cfg.xi is not None else LevyTriplet.from_drift(1.0)
        if fam["name"] == "example-7.1":
            family = example_family(fam.get("members", (2, 4, 8, 16)))
            limit = continuity_counterexample_spec(0)
        else:
            family = drift_family(fam.get("members", (1, 2, 4, 8, 16, 32, 64)))
            limit = LevyTriplet.brownian(1.0)
        rep = continuity_suite(family, xi, cfg.delta, cfg.n, RngStream(cfg.seed), limit)
        files["continuity.csv"] = rep.to_csv()
        report.update(verdict=rep.verdict, delta=rep.delta, ks_critical=rep.ks_critical)

    elif cmd == "generator-probe":
        spec = cfg.driving_spec()
        xs = cfg.grid_array(np.linspace(-3.0, 3.0, 21), key="x_grid")
        lines = ["x,function,re,im\n"]
        for f in battery():
            vals = np.asarray(apply_generator(spec, f, xs), dtype=complex)
            lines += [f"{x!r},{f.name},{v.real!r},{v.imag!r}\n" for x, v in zip(xs.tolist(), vals.tolist())]
        files["generator.csv"] = "".join(lines)
        if cfg.sample is not None:
            s = ExpFunSample.from_csv(cfg.sample)
            res = {}
            for f in battery():
                m, se = stationarity_residual(spec, f, s)
                res[f.name] = {"re": m.real, "im": m.imag, "stderr": se}
            report["stationarity"] = res

    return files, report


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, (ConfigError, json.JSONDecodeError, KeyError)):
        return 1
    if isinstance(exc, (QuadratureError, OverflowError, FloatingPointError, np.linalg.LinAlgError)):
        return 3
    if isinstance(exc, (NonConvergentSpecError, BijectionDomainError, ValueError, NotImplementedError)):
        return 2
    return 3


def run_config(path, seed: Optional[int] = None, out_dir=None, command: Optional[str] = None) -> int:
    """Run the experiment in the JSON file ``path`` and write its artifacts.

    Data goes to ``<command>``-specific CSV files and a ``report.json``; both
    carry the config hash and seed.  Returns the exit code.
    """
    try:
        with open(path) as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        if command is not None:
            if raw.get("command", command) != command:
                raise ConfigError("command", f"config says {raw['command']!r}, CLI says {command!r}")
            raw["command"] = command
        if seed is not None:
            raw["seed"] = int(seed)
        cfg = ExperimentConfig.from_dict(raw)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, json.JSONDecodeError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    out = Path(out_dir if out_dir is not None else cfg.output)
    try:
        files, report = _run(cfg)
    except Exception as exc:  # mapped onto the exit-code contract
        code = _exit_code(exc)
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        log.debug("command failed", exc_info=True)
        return code

    out.mkdir(parents=True, exist_ok=True)
    digest = cfg.digest()
    header = f"# config_hash: {digest}\n# seed: {cfg.seed}\n"
    for name, text in files.items():
        (out / name).write_text(header + text)
    report = {"schema": SCHEMA_VERSION, "command": cfg.command, "config_hash": digest, "seed": cfg.seed,
              "files": sorted(files), **report}
    (out / "report.json").write_text(json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n")
    return 0


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="expfun-lab", description="Exponential functionals of Lévy processes")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON experiment configuration")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--out", default=None, help="output directory (default: config 'output' or '.')")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return run_config(args.config, args.seed, args.out, args.command)


if __name__ == "__main__":
    sys.exit(main())
