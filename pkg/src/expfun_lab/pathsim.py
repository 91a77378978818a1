"""Reproducible sampling of Lévy increments and compound Poisson event lists."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, TypeVar

import numpy as np
from scipy import integrate, interpolate

from .levy_spec import LevyMeasure, LevyTriplet

T = TypeVar("T")


@dataclass(frozen=True)
class RngStream:
    """A seeded random stream; children are derived deterministically.

    ``stream_id`` is the last component of the spawn key, so
    ``RngStream(7).spawn(3).stream_id == 3``.
    """

    seed: int
    spawn_key: tuple[int, ...] = ()

    @property
    def stream_id(self) -> int:
        return self.spawn_key[-1] if self.spawn_key else 0

    def spawn(self, i: int) -> "RngStream":
        return RngStream(self.seed, self.spawn_key + (int(i),))

    def split(self, k: int) -> list["RngStream"]:
        return [self.spawn(i) for i in range(k)]

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed & (2**64 - 1), spawn_key=self.spawn_key)
        return np.random.Generator(np.random.PCG64(ss))


def as_stream(rng) -> RngStream:
    if isinstance(rng, RngStream):
        return rng
    if rng is None:
        return RngStream(0)
    return RngStream(int(rng))


def worker_count() -> int:
    env = os.environ.get("EXPFUN_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def parallel_map(fn: Callable[[int], T], n_tasks: int) -> list[T]:
    """Run ``fn(i)`` for ``i < n_tasks``; results come back ordered by ``i``."""
    workers = min(worker_count(), n_tasks)
    if workers <= 1:
        return [fn(i) for i in range(n_tasks)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(n_tasks)))


def chunk_sizes(n: int, chunk: int) -> list[int]:
    sizes = [chunk] * (n // chunk)
    if n % chunk:
        sizes.append(n % chunk)
    return sizes


@dataclass
class PathGrid:
    """Sampled paths on a time grid.

    ``increments[name]`` has shape ``(n_paths, len(times) - 1)``; ``levels``
    holds path values at the grid times when a scheme produces them.
    Event-driven output stores jump times in ``events``.
    """

    times: np.ndarray
    increments: dict[str, np.ndarray] = field(default_factory=dict)
    seed: int = 0
    scheme: str = "grid-euler"
    levels: dict[str, np.ndarray] = field(default_factory=dict)
    events: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.size and self.times[0] != 0.0:
            raise ValueError("times must start at 0")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        for name, inc in self.increments.items():
            if inc.shape[-1] != len(self.times) - 1:
                raise ValueError(f"increments {name!r} do not match the grid")

    def path(self, name: str) -> np.ndarray:
        """Cumulative path (starting at 0) from the stored increments."""
        inc = self.increments[name]
        out = np.zeros(inc.shape[:-1] + (inc.shape[-1] + 1,))
        np.cumsum(inc, axis=-1, out=out[..., 1:])
        return out


# ---------------------------------------------------------------------------
# jump-size samplers
# ---------------------------------------------------------------------------


class JumpSampler:
    """Jumps of a Lévy measure with ``|x| > eps`` as a compound Poisson law.

    Atomic measures are sampled exactly.  Density measures use a tabulated
    inverse CDF in the variable ``log|x|``; ``eps`` bounds the excluded
    small jumps, which the caller replaces by a Gaussian.
    """

    def __init__(self, nu: LevyMeasure, eps: float = 0.0, grid_points: int = 4001):
        self.nu = nu
        self.eps = eps
        if nu.is_empty:
            self.rate = 0.0
            return
        if nu.is_atomic:
            keep = np.abs(nu.locations) > eps
            self.locations = nu.locations[keep]
            self.masses = nu.masses[keep]
            self.rate = float(self.masses.sum())
            self.probs = self.masses / self.rate if self.rate > 0 else self.masses
            return
        self._tables = []
        rate = 0.0
        lo, hi = nu.support
        for sign in (1.0, -1.0):
            a, b = (max(lo, eps), hi) if sign > 0 else (max(-hi, eps), -lo)
            if sign > 0 and hi <= eps or sign < 0 and lo >= -eps:
                continue
            if not a < b:
                continue
            if a == 0.0:
                if nu.singularity_order > 0:
                    raise ValueError("density jump sampler needs eps > 0 for a density charging 0")
                # bounded near 0: jumps below 1e-12 carry negligible mass
                a = 1e-12
            table = _log_inverse_cdf(nu.density, sign, a, b, grid_points)
            if table is None:
                continue
            mass, inv = table
            rate += mass
            self._tables.append((sign, mass, inv))
        self.rate = rate

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if size == 0 or self.rate == 0.0:
            return np.zeros(size)
        if self.nu.is_atomic:
            idx = rng.choice(len(self.locations), size=size, p=self.probs)
            return self.locations[idx]
        weights = np.array([m for _, m, _ in self._tables])
        which = rng.choice(len(self._tables), size=size, p=weights / weights.sum())
        out = np.empty(size)
        for k, (sign, _, inv) in enumerate(self._tables):
            sel = which == k
            cnt = int(sel.sum())
            if cnt:
                out[sel] = sign * np.exp(inv(rng.random(cnt)))
        return out


def _log_inverse_cdf(dens, sign: float, a: float, b: float, grid_points: int):
    """Mass and inverse CDF (in ``t = log|x|``) of ``dens`` on ``sign * (a, b)``."""
    t_lo = math.log(a)
    t_hi = math.log(b) if math.isfinite(b) else None

    def weight(t):
        x = np.exp(t)
        with np.errstate(all="ignore"):
            d = dens(sign * x) * x
        return np.where(np.isfinite(d), d, 0.0)

    if t_hi is None:
        # extend until the remaining mass is negligible
        t_hi = t_lo + 1.0
        head = integrate.quad(lambda t: float(weight(np.array([t]))[0]), t_lo, t_hi, limit=200)[0]
        while True:
            tail = integrate.quad(lambda t: float(weight(np.array([t]))[0]), t_hi, min(t_hi + 20.0, 700.0), limit=200)[0]
            if tail <= 1e-12 * max(head, 1e-300) or t_hi >= 700.0:
                if tail > 1e-6 * max(head, 1e-300):
                    raise ValueError("jump law tail too heavy to tabulate for simulation")
                break
            head += tail
            t_hi = min(t_hi + 20.0, 700.0)
    ts = np.linspace(t_lo, t_hi, grid_points)
    w = weight(ts)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (w[1:] + w[:-1]) * np.diff(ts))])
    mass = float(cdf[-1])
    if mass <= 0:
        return None
    cdf /= mass
    keep = np.concatenate([[True], np.diff(cdf) > 0])
    inv = interpolate.interp1d(cdf[keep], ts[keep], bounds_error=False, fill_value=(ts[0], ts[-1]))
    return mass, inv


@dataclass(frozen=True)
class IncrementPlan:
    """How a triplet is realised on a grid.

    The increment over ``dt`` is ``drift*dt + sqrt(var*dt) Z + Σ jumps`` where
    the jumps come from ``sampler`` (exact for atoms) and ``var`` includes the
    Gaussian substitute for jumps with ``|x| <= eps``.
    """

    drift: float
    var: float
    sampler: JumpSampler
    eps: float
    small_jump_var: float


def small_jump_variance(nu: LevyMeasure, eps: float) -> float:
    if nu.is_empty or eps <= 0:
        return 0.0
    return nu.integrate(lambda x: x * x, (-eps, eps), "both")


def plan_increments(triplet: LevyTriplet, dt: float = 1.0) -> IncrementPlan:
    """Choose the small-jump threshold and the drift bookkeeping for ``triplet``.

    For infinite-activity densities, ``eps`` is shrunk until the Gaussian
    substitute carries at most ``1e-4`` of the jump variance.
    """
    nu = triplet.nu
    if nu.is_empty:
        return IncrementPlan(triplet.gamma, triplet.sigma2, JumpSampler(nu), 0.0, 0.0)
    rate = triplet.jump_rate
    eps = 0.0
    if math.isinf(rate):
        total_var = nu.integrate(lambda x: np.minimum(x * x, 1.0))
        eps = 1.0
        while small_jump_variance(nu, eps) > 1e-4 * total_var and eps > 1e-12:
            eps *= 0.5
    sampler = JumpSampler(nu, eps)
    # gamma counts the jumps in (eps, 1] through their compensator
    comp = nu.integrate(lambda x: np.where(np.abs(x) > eps, x, 0.0), (-1.0, 1.0), "both")
    small_var = small_jump_variance(nu, eps)
    return IncrementPlan(triplet.gamma - comp, triplet.sigma2 + small_var, sampler, eps, small_var)


def _jump_sums(sampler: JumpSampler, dt: float, shape: tuple[int, int], rng: np.random.Generator) -> np.ndarray:
    """Sum of jumps per cell of an ``(n_paths, n_steps)`` grid of width ``dt``.

    Counts per path are Poisson over the whole horizon and spread uniformly
    over the cells, which has the same law as independent per-cell counts.
    """
    n_paths, n_steps = shape
    out = np.zeros(shape)
    if sampler.rate == 0.0:
        return out
    counts = rng.poisson(sampler.rate * dt * n_steps, size=n_paths)
    total = int(counts.sum())
    if total == 0:
        return out
    rows = np.repeat(np.arange(n_paths), counts)
    cols = rng.integers(0, n_steps, size=total)
    sizes = sampler.sample(rng, total)
    np.add.at(out, (rows, cols), sizes)
    return out


def increments_array(plan: IncrementPlan, dt: float, n_paths: int, n_steps: int, rng: np.random.Generator) -> np.ndarray:
    """Increment matrix of shape ``(n_paths, n_steps)``."""
    inc = np.full((n_paths, n_steps), plan.drift * dt)
    if plan.var > 0:
        inc += math.sqrt(plan.var * dt) * rng.standard_normal((n_paths, n_steps))
    if plan.sampler.rate > 0:
        inc += _jump_sums(plan.sampler, dt, (n_paths, n_steps), rng)
    return inc


def sample_increments(
    triplet: LevyTriplet,
    dt: float,
    n_steps: int,
    rng,
    n_paths: int = 1,
) -> PathGrid:
    """Increments of a Lévy process over ``n_steps`` intervals of length ``dt``.

    Gaussian and drift parts are exact; finite-activity jumps are exact;
    jumps of size at most ``eps`` of an infinite-activity density are
    replaced by a Gaussian of matching variance.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    stream = as_stream(rng)
    plan = plan_increments(triplet, dt)
    inc = increments_array(plan, dt, n_paths, n_steps, stream.generator())
    times = dt * np.arange(n_steps + 1)
    scheme = "grid-euler" if plan.eps > 0 or triplet.sigma2 > 0 else "exact-increments"
    return PathGrid(times=times, increments={"x": inc}, seed=stream.seed, scheme=scheme)


def sample_cpp_path(
    rate: float,
    jump_dist,
    horizon: float,
    rng,
) -> PathGrid:
    """Event-driven compound Poisson path on ``[0, horizon]``.

    ``jump_dist`` is an atomic :class:`LevyMeasure` (normalised to a jump
    law), a list of ``(value, probability)`` pairs, or a callable
    ``(rng, size) -> array`` (possibly returning a tuple of arrays for joint
    jumps).  ``times`` holds ``0`` followed by the jump times; increments
    are the jump sizes.
    """
    if not rate > 0:
        raise ValueError("rate must be positive")
    stream = as_stream(rng)
    gen = stream.generator()
    times = [0.0]
    t = 0.0
    while True:
        block = gen.exponential(1.0 / rate, size=64)
        arr = t + np.cumsum(block)
        inside = arr[arr <= horizon]
        times.extend(inside.tolist())
        if inside.size < block.size:
            break
        t = float(arr[-1])
    times_arr = np.array(times)
    n_jumps = len(times_arr) - 1
    sizes = _draw_jumps(jump_dist, gen, n_jumps)
    increments = {}
    if isinstance(sizes, tuple):
        for k, s in enumerate(sizes):
            increments[f"x{k}"] = np.asarray(s, dtype=float).reshape(1, -1)
    else:
        increments["x"] = np.asarray(sizes, dtype=float).reshape(1, -1)
    return PathGrid(times=times_arr, increments=increments, seed=stream.seed, scheme="event-driven",
                    events={"jump_times": times_arr[1:]})


def _draw_jumps(jump_dist, gen: np.random.Generator, size: int):
    if isinstance(jump_dist, LevyMeasure):
        if not jump_dist.is_atomic:
            raise ValueError("sample_cpp_path needs an atomic jump law")
        p = jump_dist.masses / jump_dist.masses.sum()
        return jump_dist.locations[gen.choice(len(p), size=size, p=p)]
    if callable(jump_dist):
        return jump_dist(gen, size)
    values = np.array([v for v, _ in jump_dist], dtype=float)
    probs = np.array([p for _, p in jump_dist], dtype=float)
    idx = gen.choice(len(probs), size=size, p=probs / probs.sum())
    return values[idx] if values.ndim == 1 else tuple(values[idx].T)


def sample_at_times(triplet: LevyTriplet, t: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Independent draws of ``X_{t_k}`` for an array of (random) times ``t``."""
    t = np.asarray(t, dtype=float)
    plan = plan_increments(triplet)
    out = plan.drift * t
    if plan.var > 0:
        out = out + np.sqrt(plan.var * t) * rng.standard_normal(t.shape)
    if plan.sampler.rate > 0:
        counts = rng.poisson(plan.sampler.rate * t)
        total = int(counts.sum())
        if total:
            sizes = plan.sampler.sample(rng, total)
            idx = np.repeat(np.arange(t.size), counts.ravel())
            out = out + np.bincount(idx, weights=sizes, minlength=t.size).reshape(t.shape)
    return out
