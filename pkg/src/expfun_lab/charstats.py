"""Empirical characteristic functions, weighted moments and distances."""

from __future__ import annotations

import io
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Union

import numpy as np
from scipy import stats

from .expfun import ExpFunSample


class MomentScreenWarning(UserWarning):
    pass


class ZeroDrawError(ValueError):
    """A draw equals zero where ``log|V|`` is required."""


@dataclass
class CFGrid:
    """Estimates on a ``u``-grid with componentwise standard errors.

    ``kind`` is ``"plain"``, ``"weighted(k)"``, ``"log-abs"`` or
    ``"weighted-log(k)"``; residual grids use ``"residual:<name>"``.
    """

    u: np.ndarray
    estimate: np.ndarray
    stderr: np.ndarray
    valid_mask: np.ndarray
    kind: str = "plain"
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.estimate = np.asarray(self.estimate, dtype=complex)
        self.stderr = np.asarray(self.stderr, dtype=float)
        self.valid_mask = np.asarray(self.valid_mask, dtype=bool)
        if not (self.u.shape == self.estimate.shape == self.stderr.shape == self.valid_mask.shape):
            raise ValueError("CFGrid arrays must share one shape")

    def at(self, u: float) -> complex:
        idx = np.nonzero(self.u == u)[0]
        if idx.size == 0:
            raise KeyError(u)
        return complex(self.estimate[idx[0]])

    def z_scores(self) -> np.ndarray:
        """``|estimate| / stderr`` (0 where both vanish)."""
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.abs(self.estimate) / self.stderr
        z[(self.stderr == 0) & (np.abs(self.estimate) == 0)] = 0.0
        return z

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        buf.write("u,re,im,stderr,valid,kind\n")
        for u, e, s, v in zip(self.u.tolist(), self.estimate.tolist(), self.stderr.tolist(), self.valid_mask.tolist()):
            buf.write(f"{u!r},{e.real!r},{e.imag!r},{s!r},{int(v)},{self.kind}\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def _values(sample) -> np.ndarray:
    v = sample.values if isinstance(sample, ExpFunSample) else np.asarray(sample, dtype=float)
    if v.size == 0:
        raise ValueError("empty sample")
    return np.ravel(v)


def symmetric_grid(umax: float = 5.0, num: int = 41) -> np.ndarray:
    """``num`` equispaced points on ``[-umax, umax]`` with exact mirror pairs."""
    g = np.linspace(-umax, umax, num)
    half = num // 2
    g[num - half:] = -g[:half][::-1]
    if num % 2:
        g[half] = 0.0
    return g


def _mean_and_se(terms: np.ndarray) -> tuple[complex, float]:
    """Sample mean and ``sqrt(E|c - mean|^2 / n)``."""
    m = terms.mean()
    dev = terms - m
    var = float(np.mean(dev.real**2 + dev.imag**2))
    return complex(m), math.sqrt(var / terms.size)


def _grid_average(weight: np.ndarray, phase: np.ndarray, grid: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Averages of ``weight * exp(i u phase)`` over the grid.

    Values at ``-u`` are the conjugates of those at ``|u|`` (same sample),
    so Hermitian symmetry holds exactly.
    """
    grid = np.asarray(grid, dtype=float)
    est = np.empty(grid.shape, dtype=complex)
    se = np.empty(grid.shape)
    cache: dict[float, tuple[complex, float]] = {}
    for j, u in enumerate(grid):
        a = abs(float(u))
        if a not in cache:
            cache[a] = _mean_and_se(weight * np.exp(1j * a * phase))
        m, s = cache[a]
        est[j] = m if u >= 0 else np.conj(m)
        se[j] = s
    return est, se


def empirical_cf(sample, grid) -> CFGrid:
    """``mean(e^{iuV})`` with standard error ``sd(e^{iuV}) / sqrt(n)``."""
    v = _values(sample)
    grid = np.asarray(grid, dtype=float)
    est, se = _grid_average(np.ones_like(v), v, grid)
    zero = grid == 0
    est[zero] = 1.0
    se[zero] = 0.0
    return CFGrid(grid, est, se, np.ones(grid.shape, bool), "plain")


def log_abs_cf(sample, grid) -> CFGrid:
    """Characteristic function of ``log|V|``."""
    v = _values(sample)
    _reject_zeros(v)
    grid = np.asarray(grid, dtype=float)
    est, se = _grid_average(np.ones_like(v), np.log(np.abs(v)), grid)
    zero = grid == 0
    est[zero] = 1.0
    se[zero] = 0.0
    return CFGrid(grid, est, se, np.ones(grid.shape, bool), "log-abs")


def _reject_zeros(v: np.ndarray) -> None:
    k = int(np.count_nonzero(v == 0))
    if k:
        raise ZeroDrawError(
            f"{k} draws equal 0; log|V| needs a law without an atom at 0 (the stationary law is continuous)"
        )


def hill_index(x: np.ndarray, frac: float = 0.01, k_min: int = 20) -> float:
    """Hill estimate of the upper tail index of ``|x|`` (``inf`` for light tails)."""
    a = np.abs(np.asarray(x, dtype=float))
    a = a[np.isfinite(a) & (a > 0)]
    if a.size < 2 * k_min:
        return math.inf
    k = max(k_min, int(frac * a.size))
    top = np.sort(a)[-(k + 1):]
    base = top[0]
    if base <= 0:
        return math.inf
    mean_log = float(np.mean(np.log(top[1:] / base)))
    return math.inf if mean_log <= 0 else 1.0 / mean_log


def moment_screen(v: np.ndarray, power: float, margin: float = 0.5) -> tuple[bool, float]:
    """Screen ``E|V|^power < ∞`` (negative powers look at ``1/|V|``).

    Passes when the Hill index exceeds ``|power| + margin``.
    """
    x = v if power > 0 else 1.0 / v[v != 0]
    alpha = hill_index(x)
    return alpha > abs(power) + margin, alpha


def weighted_moment_cf(sample, grid, k: int, log_mode: bool = False, screen_power: float | None = None) -> CFGrid:
    """``mean(V^k e^{iuV})`` or, in log mode, ``mean(V^k e^{iu log|V|})``.

    Plain mode takes ``k ∈ {1, 2}``, log mode ``k ∈ {-1, -2}``.  A failed
    tail-index screen attaches a warning; a zero draw in log mode raises
    :class:`ZeroDrawError`.

    ``screen_power`` overrides the moment checked by the screen.  The inversion
    of ``ξ`` uses a small fractional power here, since only some negative
    moment ``E|V|^{-ε}`` is guaranteed in general.
    """
    v = _values(sample)
    grid = np.asarray(grid, dtype=float)
    if log_mode:
        if k not in (-1, -2):
            raise ValueError("log mode takes k in {-1, -2}")
        _reject_zeros(v)
        phase = np.log(np.abs(v))
        kind = f"weighted-log({k})"
    else:
        if k not in (1, 2):
            raise ValueError("plain mode takes k in {1, 2}")
        phase = v
        kind = f"weighted({k})"
    weight = v.astype(float) ** k
    power = float(k) if screen_power is None else float(screen_power)
    ok, alpha = moment_screen(v, power, margin=0.5 if abs(power) >= 1 else 0.0)
    notes = []
    if not ok:
        msg = f"E|V|^{power:g} may be infinite (Hill index {alpha:.3g})"
        notes.append(msg)
        warnings.warn(msg, MomentScreenWarning, stacklevel=2)
    est, se = _grid_average(weight, phase, grid)
    return CFGrid(grid, est, se, np.ones(grid.shape, bool), kind, notes)


def zero_mask(cf: CFGrid, threshold_multiplier: float = 5.0) -> CFGrid:
    """Mark ``u`` invalid where ``|estimate| <= m * stderr``; ``u = 0`` stays valid."""
    m = float(threshold_multiplier)
    if math.isinf(m):
        valid = np.zeros(cf.u.shape, dtype=bool)
    else:
        valid = np.abs(cf.estimate) > m * cf.stderr
    valid = valid & cf.valid_mask
    valid[cf.u == 0] = True
    return replace(cf, valid_mask=valid, warnings=list(cf.warnings))


def ks_distance(sample, reference: Union[Callable, "ExpFunSample", np.ndarray]) -> float:
    """Kolmogorov-Smirnov distance to an analytic CDF or to a second sample."""
    v = _values(sample)
    if callable(reference) and not isinstance(reference, ExpFunSample):
        return float(stats.kstest(v, reference).statistic)
    w = _values(reference)
    return float(stats.ks_2samp(v, w).statistic)


def ks_critical_value(n: int, m: int, alpha: float = 0.01) -> float:
    """Asymptotic two-sample KS critical value at level ``alpha``."""
    c = math.sqrt(-0.5 * math.log(alpha / 2.0))
    return c * math.sqrt((n + m) / (n * m))
