"""Monte Carlo draws of the exponential functional ``∫_0^∞ e^{-ξ_{s-}} dη_s``.

Four estimators are available:

``euler``
    Left-point sums on a time grid (any independent pair).
``cpp-series``
    The exact-in-time series over the jump times of a compound Poisson
    ``ξ``, truncated pathwise once the running product drops below ``tol``.
``event-driven``
    Deterministic ``ξ_t = γt`` with ``η`` drift + Brownian + finite-activity
    jumps: the Gaussian part is drawn in closed form and jumps are summed
    exactly up to the time where ``e^{-γt} < tol``.
``joint-cpp``
    Bivariate compound Poisson ``(χ, η)`` with common jumps.

:func:`simulate_functional` picks the exact estimator when one applies.
"""

from __future__ import annotations

import io
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .levy_spec import (
    IndependentXiEta,
    JointCompoundPoisson,
    LevyMeasure,
    LevyTriplet,
    ULForm,
    UL_to_xi_eta,
    check_convergence,
    laplace_exponent,
)
from .pathsim import (
    JumpSampler,
    PathGrid,
    RngStream,
    as_stream,
    chunk_sizes,
    increments_array,
    parallel_map,
    plan_increments,
    sample_at_times,
)


class NonConvergentSpecError(ValueError):
    """The sufficient convergence condition fails and no override was given."""


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class TruncationReport:
    """Size of what a finite horizon (or truncated series) leaves out.

    ``tail_bound`` estimates ``E|neglected tail|``; ``doubling_delta`` is the
    shift of the sample mean when the horizon is doubled (or the series
    tolerance squared).
    """

    tail_bound: float = 0.0
    doubling_delta: float = 0.0

    def __post_init__(self):
        for name in ("tail_bound", "doubling_delta"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be finite and >= 0, got {v}")


@dataclass
class ExpFunSample:
    values: np.ndarray
    estimator: str
    horizon: float = math.inf
    step: float = 0.0
    seed: int = 0
    bias_report: TruncationReport = field(default_factory=TruncationReport)
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite draws in sample")

    def __len__(self) -> int:
        return self.values.size

    @property
    def mean(self) -> float:
        return float(self.values.mean())

    @property
    def stderr(self) -> float:
        return float(self.values.std(ddof=1) / math.sqrt(self.values.size))

    def scaled(self, c: float) -> "ExpFunSample":
        return ExpFunSample(c * self.values, self.estimator, self.horizon, self.step, self.seed, self.bias_report, dict(self.notes))

    # -- CSV ------------------------------------------------------------------

    def metadata(self) -> dict:
        meta = {
            "estimator": self.estimator,
            "horizon": self.horizon,
            "step": self.step,
            "seed": self.seed,
            "n": int(self.values.size),
            "tail_bound": self.bias_report.tail_bound,
            "doubling_delta": self.bias_report.doubling_delta,
        }
        meta.update(self.notes)
        return meta

    def to_csv(self, path=None, extra: Optional[dict] = None) -> str:
        """Single-column CSV; metadata on leading ``# key: value`` lines."""
        buf = io.StringIO()
        meta = self.metadata()
        if extra:
            meta.update(extra)
        for key in sorted(meta):
            buf.write(f"# {key}: {meta[key]}\n")
        buf.write("V\n")
        for v in self.values.tolist():
            buf.write(f"{v!r}\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path) -> "ExpFunSample":
        meta: dict = {}
        values = []
        with open(path) as fh:
            for line in fh:
                line = line.rstrip("\n")
                if line.startswith("#"):
                    key, _, val = line[1:].partition(":")
                    meta[key.strip()] = val.strip()
                elif line and line != "V":
                    values.append(float(line))

        def num(key, default):
            try:
                return float(meta.get(key, default))
            except ValueError:
                return default

        return cls(
            values=np.array(values),
            estimator=meta.get("estimator", "unknown"),
            horizon=num("horizon", math.inf),
            step=num("step", 0.0),
            seed=int(num("seed", 0)),
            bias_report=TruncationReport(num("tail_bound", 0.0), num("doubling_delta", 0.0)),
        )


def _as_independent(spec) -> IndependentXiEta:
    if isinstance(spec, IndependentXiEta):
        return spec
    if isinstance(spec, ULForm):
        xi, eta, cross = UL_to_xi_eta(spec)
        if cross != 0.0:
            raise NotImplementedError("correlated Gaussian parts are not simulated")
        return IndependentXiEta(xi, eta)
    if isinstance(spec, tuple) and len(spec) == 2:
        return IndependentXiEta(*spec)
    raise TypeError(f"cannot simulate {type(spec).__name__} with this estimator")


def _require_convergence(xi: LevyTriplet, eta: LevyTriplet, allow_nonconvergent: bool) -> None:
    report = check_convergence(xi, eta)
    if report.converges_sufficient:
        return
    if not allow_nonconvergent:
        raise NonConvergentSpecError(f"sufficient convergence condition fails: {report.notes}")
    warnings.warn(f"proceeding without convergence guarantee: {report.notes}", ConvergenceWarning, stacklevel=3)


# ---------------------------------------------------------------------------
# horizon selection
# ---------------------------------------------------------------------------


def default_horizon(xi: LevyTriplet, rng=None, target: float = 1e-4, n_pilot: int = 4000, step: float = 0.05) -> float:
    """Smallest ``T`` with ``E e^{-ξ_T} < target``.

    When ``ξ`` has no negative jumps the Laplace exponent is available and the
    answer is closed form.  Otherwise a pilot simulation estimates the
    expectation; if it never drops below ``target`` (``e^{-ξ}`` may have a
    non-decaying mean even though ``ξ_t → ∞``) the 99th percentile of
    ``e^{-ξ_T}`` is used instead.
    """
    if xi.is_deterministic:
        if xi.gamma <= 0:
            raise NonConvergentSpecError("deterministic ξ needs positive drift")
        return math.log(1.0 / target) / xi.gamma
    if xi.nu.is_empty or xi.nu.is_atomic:
        kappa = laplace_exponent(xi, 1.0)
        if kappa < 0:
            return math.log(target) / kappa
    stream = as_stream(rng).spawn(991)
    gen = stream.generator()
    plan = plan_increments(xi, step)
    t_max = 400.0
    n_steps = int(round(t_max / step))
    level = np.zeros(n_pilot)
    block = 200
    for start in range(0, n_steps, block):
        k = min(block, n_steps - start)
        inc = increments_array(plan, step, n_pilot, k, gen)
        paths = level[:, None] + np.cumsum(inc, axis=1)
        with np.errstate(over="ignore"):
            expo = np.exp(-paths)
        means = expo.mean(axis=0)
        q99 = np.quantile(expo, 0.99, axis=0)
        hit = np.nonzero((means < target) | (q99 < target))[0]
        if hit.size:
            return (start + hit[0] + 1) * step
        level = paths[:, -1]
    raise NonConvergentSpecError("e^{-ξ_T} does not decay within the pilot horizon")


# ---------------------------------------------------------------------------
# Euler estimator
# ---------------------------------------------------------------------------


def _euler_chunk(xi: LevyTriplet, eta: LevyTriplet, horizon: float, step: float, n: int, gen: np.random.Generator,
                 record_at: Optional[int] = None):
    n_steps = int(round(horizon / step))
    xi_plan = plan_increments(xi, step)
    eta_plan = plan_increments(eta, step)
    if xi.is_deterministic:
        left = xi.gamma * step * np.arange(n_steps)
        weights = np.exp(-left)[None, :]
    else:
        dxi = increments_array(xi_plan, step, n, n_steps, gen)
        left = np.zeros_like(dxi)
        np.cumsum(dxi[:, :-1], axis=1, out=left[:, 1:])
        with np.errstate(over="ignore"):
            weights = np.exp(-left)
    if eta.is_deterministic:
        terms = np.broadcast_to(weights * (eta.gamma * step), (n, n_steps))
    else:
        deta = increments_array(eta_plan, step, n, n_steps, gen)
        terms = weights * deta
    total = terms.sum(axis=1)
    if record_at is None:
        return total
    return terms[:, :record_at].sum(axis=1), total


def estimate_euler(
    spec,
    horizon: Optional[float] = None,
    step: float = 1e-3,
    n: int = 10_000,
    rng=None,
    allow_nonconvergent: bool = False,
    pilot_paths: int = 2000,
) -> ExpFunSample:
    """Left-point Euler sums ``Σ_k e^{-ξ_{t_k}} (η_{t_{k+1}} - η_{t_k})``.

    Parameters
    ----------
    spec:
        :class:`IndependentXiEta` (or an independent :class:`ULForm`).
    horizon:
        Integration horizon; ``None`` uses :func:`default_horizon`.
    step:
        Grid width, must be below ``horizon``.
    n:
        Number of draws.
    rng:
        Seed or :class:`RngStream`.  Draws are produced in chunks, each on its
        own child stream, so results do not depend on the worker count.
    allow_nonconvergent:
        Proceed (with a warning) when the sufficient convergence condition
        cannot be confirmed.
    pilot_paths:
        Paths of the horizon-doubling pilot behind ``bias_report``.
    """
    pair = _as_independent(spec)
    xi, eta = pair.xi, pair.eta
    _require_convergence(xi, eta, allow_nonconvergent)
    stream = as_stream(rng)
    if horizon is None:
        horizon = default_horizon(xi, stream)
    if not step < horizon:
        raise ValueError("step must be smaller than the horizon")
    if eta.is_deterministic and eta.gamma == 0.0:
        values = np.zeros(n)
        return ExpFunSample(values, "euler", horizon, step, stream.seed)

    n_steps = int(round(horizon / step))
    chunk = max(1, min(n, 4_000_000 // max(n_steps, 1)))
    sizes = chunk_sizes(n, chunk)

    def work(i: int) -> np.ndarray:
        return _euler_chunk(xi, eta, horizon, step, sizes[i], stream.spawn(i).generator())

    values = np.concatenate(parallel_map(work, len(sizes)))

    # horizon-doubling pilot on common random numbers
    n_p = min(n, pilot_paths)
    pilot_chunk = max(1, min(n_p, 4_000_000 // max(2 * n_steps, 1)))
    psizes = chunk_sizes(n_p, pilot_chunk)
    parts = [
        _euler_chunk(xi, eta, 2 * horizon, step, s, stream.spawn(10**6 + i).generator(), record_at=n_steps)
        for i, s in enumerate(psizes)
    ]
    v_t = np.concatenate([p[0] for p in parts])
    v_2t = np.concatenate([p[1] for p in parts])
    diff = v_2t - v_t
    report = TruncationReport(tail_bound=float(np.mean(np.abs(diff))), doubling_delta=float(abs(diff.mean())))
    return ExpFunSample(values, "euler", horizon, step, stream.seed, report)


# ---------------------------------------------------------------------------
# compound Poisson series
# ---------------------------------------------------------------------------


def _cpp_parts(xi_cpp) -> tuple[float, np.ndarray, np.ndarray]:
    """``(rate, jump values, jump probabilities)`` of a compound Poisson ``ξ``."""
    if isinstance(xi_cpp, LevyTriplet):
        if xi_cpp.sigma2 != 0 or not xi_cpp.nu.is_atomic:
            raise ValueError("ξ must be compound Poisson with atomic jumps")
        if abs(xi_cpp.drift) > 1e-14:
            raise ValueError("compound Poisson ξ must have zero drift")
        rate = float(xi_cpp.nu.masses.sum())
        return rate, xi_cpp.nu.locations.copy(), xi_cpp.nu.masses / rate
    rate, atoms = xi_cpp
    vals = np.array([a for a, _ in atoms], dtype=float)
    probs = np.array([p for _, p in atoms], dtype=float)
    return float(rate), vals, probs / probs.sum()


def estimate_cpp_series(
    xi_cpp,
    eta: LevyTriplet,
    tol: float = 1e-12,
    n: int = 10_000,
    rng=None,
    max_terms: int = 100_000,
) -> ExpFunSample:
    """Series over the jump times ``T_i`` of a compound Poisson ``ξ``.

    Each draw is ``Σ_i (∏_{k<=i} e^{-Δξ_{T_k}}) (η_{T_{i+1}} - η_{T_i})``
    with the η-increments drawn exactly over the Exp(rate) gaps.  A path
    stops once its running product is below ``tol``; ``tol >= 1`` keeps the
    first term only.

    ``xi_cpp`` is a zero-drift compound Poisson :class:`LevyTriplet` or a
    pair ``(rate, [(jump, probability), ...])``.
    """
    rate, jumps, probs = _cpp_parts(xi_cpp)
    if float(np.dot(jumps, probs)) <= 0:
        raise ValueError("mean jump of ξ must be positive for the series to contract")
    stream = as_stream(rng)
    one_term = tol >= 1.0
    tol2 = tol * tol

    def work(i: int):
        gen = stream.spawn(i).generator()
        m = sizes[i]
        v = np.zeros(m)
        v_at_tol = np.zeros(m)
        prod = np.ones(m)
        active = np.ones(m, dtype=bool)
        frozen = np.zeros(m, dtype=bool)
        terms = 0
        while active.any() and terms < max_terms:
            idx = np.nonzero(active)[0]
            gaps = gen.exponential(1.0 / rate, size=idx.size)
            h = sample_at_times(eta, gaps, gen)
            v[idx] += prod[idx] * h
            d = jumps[gen.choice(jumps.size, size=idx.size, p=probs)]
            prod[idx] *= np.exp(-d)
            terms += 1
            if one_term:
                v_at_tol[:] = v
                frozen[:] = True
                break
            newly = active & ~frozen & (prod < tol)
            v_at_tol[newly] = v[newly]
            frozen |= newly
            active &= prod >= tol2
        still = ~frozen
        v_at_tol[still] = v[still]
        return v_at_tol, v, prod, terms

    chunk = 50_000
    sizes = chunk_sizes(n, chunk)
    parts = parallel_map(work, len(sizes))
    values = np.concatenate([p[0] for p in parts])
    extended = np.concatenate([p[1] for p in parts])
    diff = extended - values
    report = TruncationReport(
        tail_bound=float(np.mean(np.abs(diff)) + tol * np.mean(np.abs(extended))),
        doubling_delta=float(abs(diff.mean())),
    )
    notes = {"max_terms_used": max(p[3] for p in parts)}
    return ExpFunSample(values, "cpp-series", math.inf, 0.0, stream.seed, report, notes)


def estimate_joint_cpp(spec: JointCompoundPoisson, tol: float = 1e-12, n: int = 10_000, rng=None,
                       max_terms: int = 100_000) -> ExpFunSample:
    """``Σ_k exp(-Σ_{j<k} Δχ_j) Δη_k`` over the common jump times of ``(χ, η)``."""
    stream = as_stream(rng)

    def work(i: int):
        gen = stream.spawn(i).generator()
        m = sizes[i]
        v = np.zeros(m)
        prod = np.ones(m)
        active = np.ones(m, dtype=bool)
        terms = 0
        while active.any() and terms < max_terms:
            idx = np.nonzero(active)[0]
            dchi, deta = spec.sample_jumps(gen, idx.size)
            v[idx] += prod[idx] * deta
            prod[idx] *= np.exp(-dchi)
            active &= prod >= tol
            terms += 1
        return v, prod

    sizes = chunk_sizes(n, 50_000)
    parts = parallel_map(work, len(sizes))
    values = np.concatenate([p[0] for p in parts])
    tail = tol * float(np.mean(np.abs(values)))
    return ExpFunSample(values, "joint-cpp", math.inf, 0.0, stream.seed, TruncationReport(tail, 0.0))


# ---------------------------------------------------------------------------
# deterministic ξ, event-driven η
# ---------------------------------------------------------------------------


def estimate_event_driven(
    xi_rate: float,
    eta: LevyTriplet,
    tol: float = 1e-12,
    n: int = 10_000,
    rng=None,
    horizon: Optional[float] = None,
) -> ExpFunSample:
    """``∫_0^H e^{-γs} dη_s`` for ``ξ_t = γt`` without discretisation.

    ``H`` defaults to the time where ``e^{-γH}`` times the largest atom of
    ``ν_η`` (at least 1) equals ``tol``.  The drift and
    Gaussian contributions are drawn in closed form; jumps are placed at
    uniform times on ``[0, H]`` with Poisson counts.  Infinite-activity
    densities fall back to the small-jump Gaussian substitute.
    """
    g = float(xi_rate)
    if not g > 0:
        raise NonConvergentSpecError("ξ_t = γt needs γ > 0")
    stream = as_stream(rng)
    if horizon is None:
        # large atoms need a longer horizon before e^{-γt}·|jump| < tol
        big = float(np.max(np.abs(eta.nu.locations))) if eta.nu.is_atomic else 1.0
        h = (math.log(1.0 / tol) + math.log(max(big, 1.0))) / g
    else:
        h = float(horizon)
    plan = plan_increments(eta)
    mean_part = plan.drift * (-math.expm1(-g * h)) / g
    sd_part = math.sqrt(plan.var * (-math.expm1(-2.0 * g * h)) / (2.0 * g)) if plan.var > 0 else 0.0
    sampler = plan.sampler

    def work(i: int) -> np.ndarray:
        gen = stream.spawn(i).generator()
        m = sizes[i]
        v = np.full(m, mean_part)
        if sd_part > 0:
            v += sd_part * gen.standard_normal(m)
        if sampler.rate > 0:
            counts = gen.poisson(sampler.rate * h, size=m)
            total = int(counts.sum())
            if total:
                times = gen.uniform(0.0, h, size=total)
                y = sampler.sample(gen, total)
                rows = np.repeat(np.arange(m), counts)
                v += np.bincount(rows, weights=np.exp(-g * times) * y, minlength=m)
        return v

    sizes = chunk_sizes(n, 50_000)
    values = np.concatenate(parallel_map(work, len(sizes)))
    tail = math.exp(-g * h) * float(np.mean(np.abs(values)))
    report = TruncationReport(tail_bound=tail, doubling_delta=0.0)
    return ExpFunSample(values, "event-driven", h, 0.0, stream.seed, report)


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------


def _is_pure_cpp(t: LevyTriplet) -> bool:
    return t.sigma2 == 0 and t.nu.is_atomic and abs(t.drift) <= 1e-14


def simulate_functional(spec, n: int, rng=None, tol: float = 1e-12, step: float = 1e-3,
                        horizon: Optional[float] = None, allow_nonconvergent: bool = False) -> ExpFunSample:
    """Draws of ``V_∞`` using the exact estimator when one applies."""
    if isinstance(spec, JointCompoundPoisson):
        return estimate_joint_cpp(spec, tol, n, rng)
    pair = _as_independent(spec)
    xi, eta = pair.xi, pair.eta
    if eta.is_deterministic and eta.gamma == 0.0:
        return ExpFunSample(np.zeros(n), "trivial", math.inf, 0.0, as_stream(rng).seed)
    if xi.is_deterministic:
        _require_convergence(xi, eta, allow_nonconvergent)
        if math.isfinite(eta.jump_rate):
            return estimate_event_driven(xi.gamma, eta, tol, n, rng)
    if _is_pure_cpp(xi) and np.dot(xi.nu.locations, xi.nu.masses) > 0:
        _require_convergence(xi, eta, allow_nonconvergent)
        return estimate_cpp_series(xi, eta, tol, n, rng)
    return estimate_euler(pair, horizon, step, n, rng, allow_nonconvergent)


# ---------------------------------------------------------------------------
# GOU paths and the fixed-point series
# ---------------------------------------------------------------------------


def gou_path(spec, x0, horizon: float, step: float, rng=None) -> PathGrid:
    """Generalized Ornstein-Uhlenbeck paths on a grid.

    For ``(ξ, η)`` the recursion ``V_{k+1} = e^{-Δξ_k}(V_k + Δη_k)`` reproduces
    ``e^{-ξ_t}(x0 + Σ e^{ξ_{t_j}} Δη_j)`` without forming ``e^{ξ}``.  For a
    :class:`ULForm` with independent ``U``, ``L`` the Euler step of
    ``dV = V_- dU + dL`` is used.  ``x0`` may be an array (one path each).
    """
    x0_arr = np.atleast_1d(np.asarray(x0, dtype=float))
    n_paths = x0_arr.size
    n_steps = int(round(horizon / step))
    if n_steps < 1:
        raise ValueError("horizon must cover at least one step")
    stream = as_stream(rng)
    gen = stream.generator()
    times = step * np.arange(n_steps + 1)
    levels = np.empty((n_paths, n_steps + 1))
    levels[:, 0] = x0_arr
    if isinstance(spec, ULForm):
        if spec.nu_u.total_mass((-1.0, -1.0), "both") > 0:
            raise ValueError("ν_U({-1}) must be 0")
        if not spec.independent:
            raise NotImplementedError("dependent (U, L) paths")
        du = increments_array(plan_increments(spec.u_triplet, step), step, n_paths, n_steps, gen)
        dl = increments_array(plan_increments(spec.l_triplet, step), step, n_paths, n_steps, gen)
        for k in range(n_steps):
            levels[:, k + 1] = levels[:, k] * (1.0 + du[:, k]) + dl[:, k]
        incs = {"U": du, "L": dl}
    else:
        pair = _as_independent(spec)
        if pair.xi.is_deterministic and math.isfinite(pair.eta.jump_rate):
            # OU type: the within-step integral has a closed-form law
            dxi = np.full((n_paths, n_steps), pair.xi.gamma * step)
            noise = _ou_step_noise(pair.xi.gamma, pair.eta, step, n_paths, n_steps, gen)
            a = math.exp(-pair.xi.gamma * step)
            for k in range(n_steps):
                levels[:, k + 1] = a * levels[:, k] + noise[:, k]
            incs = {"xi": dxi, "eta_weighted": noise}
        else:
            dxi = increments_array(plan_increments(pair.xi, step), step, n_paths, n_steps, gen)
            deta = increments_array(plan_increments(pair.eta, step), step, n_paths, n_steps, gen)
            factor = np.exp(-dxi)
            for k in range(n_steps):
                levels[:, k + 1] = factor[:, k] * (levels[:, k] + deta[:, k])
            incs = {"xi": dxi, "eta": deta}
    if not np.all(np.isfinite(levels)):
        raise OverflowError("GOU path overflowed")
    return PathGrid(times=times, increments=incs, seed=stream.seed, scheme="grid-euler", levels={"V": levels})


def _ou_step_noise(g: float, eta: LevyTriplet, step: float, n_paths: int, n_steps: int,
                   gen: np.random.Generator) -> np.ndarray:
    """Draws of ``∫_0^step e^{-g(step-s)} dη_s`` for ``ξ_t = g t``."""
    plan = plan_increments(eta)
    if g == 0.0:
        w1, w2 = step, step
    else:
        w1 = -math.expm1(-g * step) / g
        w2 = -math.expm1(-2.0 * g * step) / (2.0 * g)
    out = np.full((n_paths, n_steps), plan.drift * w1)
    if plan.var > 0:
        out += math.sqrt(plan.var * w2) * gen.standard_normal((n_paths, n_steps))
    rate = plan.sampler.rate
    if rate > 0:
        counts = gen.poisson(rate * step * n_steps, size=n_paths)
        total = int(counts.sum())
        if total:
            rows = np.repeat(np.arange(n_paths), counts)
            cols = gen.integers(0, n_steps, size=total)
            lag = gen.uniform(0.0, step, size=total)
            np.add.at(out, (rows, cols), np.exp(-g * lag) * plan.sampler.sample(gen, total))
    return out


def fixed_point_series(
    z_dist: Callable[[np.random.Generator, int], np.ndarray],
    b: float,
    n: int,
    terms: int,
    rng=None,
) -> ExpFunSample:
    """Draws of ``Σ_{k<terms} b^k Z_k`` for i.i.d. ``Z_k ~ z_dist``.

    With ``b = e^{-1}`` the limit is the general ``e^{-1}``-decomposable law
    with noise ``Z``.
    """
    if not 0 < b < 1:
        raise ValueError("b must lie in (0, 1)")
    if terms < 1:
        raise ValueError("terms must be >= 1")
    stream = as_stream(rng)
    gen = stream.generator()
    values = np.zeros(n)
    # Horner from the last term keeps the summation order fixed
    for k in range(terms - 1, -1, -1):
        values = b * values + np.asarray(z_dist(gen, n), dtype=float)
    return ExpFunSample(values, "fixed-point", math.inf, 0.0, stream.seed,
                        TruncationReport(0.0, 0.0), {"terms": terms, "b": b})


def screen_log_moment(sample: np.ndarray) -> bool:
    """Crude check that ``E log+ |Z|`` looks finite (Hill index of ``log|Z|``)."""
    logs = np.log(np.maximum(np.abs(sample), 1.0))
    logs = logs[logs > 0]
    if logs.size < 20:
        return True
    k = max(10, logs.size // 100)
    top = np.sort(logs)[-k - 1:]
    if top[0] <= 0:
        return True
    hill = np.mean(np.log(top[1:] / top[0]))
    return hill < 1.0
