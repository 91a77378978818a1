"""Stationarity identities for ``μ = L(V∞)``: forward residuals and inversions.

Every quantity here is a ratio or average of per-draw terms computed from the
same sample, so standard errors follow from the per-draw influence values
(delta method for ratios).
"""

from __future__ import annotations

import io
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .charstats import (
    CFGrid,
    MomentScreenWarning,
    _reject_zeros,
    _values,
    empirical_cf,
    log_abs_cf,
    moment_screen,
    zero_mask,
)
from .levy_spec import (
    IndependentXiEta,
    LevyMeasure,
    LevyTriplet,
    ULForm,
    eval_exponent,
    laplace_exponent,
    quadrature_nodes,
    xi_eta_to_UL,
)
from .pathsim import parallel_map

DEFAULT_MASK = 5.0


@dataclass
class ExponentGrid:
    """Recovered exponent values; masked points hold ``nan``."""

    u: np.ndarray
    psi: np.ndarray
    stderr: np.ndarray
    valid_mask: np.ndarray
    warnings: tuple = ()

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.psi = np.asarray(self.psi, dtype=complex)
        self.stderr = np.asarray(self.stderr, dtype=float)
        self.valid_mask = np.asarray(self.valid_mask, dtype=bool)
        if np.any(np.isfinite(self.psi[~self.valid_mask])):
            raise ValueError("masked grid points must not carry values")

    def within(self, truth: Callable[[np.ndarray], np.ndarray], k: float = 4.0) -> np.ndarray:
        """Boolean per valid point: ``|psi - truth| <= k * stderr``."""
        u = self.u[self.valid_mask]
        diff = np.abs(self.psi[self.valid_mask] - truth(u))
        return diff <= k * self.stderr[self.valid_mask] + 1e-12

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        buf.write("u,psi_re,psi_im,stderr,valid\n")
        for u, p, s, v in zip(self.u.tolist(), self.psi.tolist(), self.stderr.tolist(), self.valid_mask.tolist()):
            buf.write(f"{u!r},{p.real!r},{p.imag!r},{s!r},{int(v)}\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def default_grid() -> np.ndarray:
    from .charstats import symmetric_grid

    return symmetric_grid(5.0, 41)


def _ratio(a: np.ndarray, b: np.ndarray) -> tuple[complex, float]:
    """``mean(a) / mean(b)`` with delta-method standard error."""
    abar, bbar = a.mean(), b.mean()
    r = abar / bbar
    c = (a - r * b) / bbar
    var = float(np.mean(np.abs(c - c.mean()) ** 2))
    return complex(r), math.sqrt(var / a.size)


def _mean(a: np.ndarray) -> tuple[complex, float]:
    m = a.mean()
    var = float(np.mean(np.abs(a - m) ** 2))
    return complex(m), math.sqrt(var / a.size)


def _hermitian_map(grid: np.ndarray, fn: Callable[[float], tuple[complex, float]]) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate ``fn`` on ``|u|`` once per distinct value, conjugate for ``u < 0``."""
    grid = np.asarray(grid, dtype=float)
    absvals = sorted({abs(float(u)) for u in grid})
    results = dict(zip(absvals, parallel_map(lambda i: fn(absvals[i]), len(absvals))))
    est = np.empty(grid.shape, dtype=complex)
    se = np.empty(grid.shape)
    for j, u in enumerate(grid):
        m, s = results[abs(float(u))]
        est[j] = m if u >= 0 else np.conj(m)
        se[j] = s
    return est, se


def _second_moment_screen(v: np.ndarray, notes: list, power: float = 2.0) -> None:
    ok, alpha = moment_screen(v, power, margin=0.5 if abs(power) >= 1 else 0.0)
    if not ok:
        msg = f"E|V|^{power:g} may be infinite (Hill index {alpha:.3g})"
        notes.append(msg)
        warnings.warn(msg, MomentScreenWarning, stacklevel=3)


def _exponent_on_values(triplet: LevyTriplet, x: np.ndarray) -> np.ndarray:
    """``ψ(x)`` for many arguments; density measures go through a spline table."""
    if triplet.nu.is_empty or triplet.nu.is_atomic:
        return eval_exponent(triplet, x)
    top = float(np.max(np.abs(x))) if x.size else 0.0
    table_u = np.linspace(0.0, max(top, 1e-12), 2001)
    table = eval_exponent(triplet, table_u)
    re = CubicSpline(table_u, table.real)(np.abs(x))
    im = CubicSpline(table_u, table.imag)(np.abs(x))
    out = re + 1j * np.sign(x) * im
    out[x == 0] = 0.0
    return out


# ---------------------------------------------------------------------------
# compact residual
# ---------------------------------------------------------------------------


def residual_compact(spec, sample, grid=None) -> CFGrid:
    """``R(u) = mean_i (ψ_U(u V_i) + ψ_L(u)) e^{iuV_i}``; zero for the true law.

    ``spec`` is a :class:`ULForm` with independent ``U``, ``L`` or an
    :class:`IndependentXiEta` pair (converted).
    """
    if isinstance(spec, IndependentXiEta):
        spec = xi_eta_to_UL(spec.xi, spec.eta, 0.0)
    if not spec.independent:
        raise ValueError("residual_compact needs independent U and L")
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    v = _values(sample)
    notes: list = []
    _second_moment_screen(v, notes)
    tu, tl = spec.u_triplet, spec.l_triplet

    def at(u: float):
        if u == 0:
            return 0j, 0.0
        terms = (_exponent_on_values(tu, u * v) + complex(eval_exponent(tl, u))) * np.exp(1j * u * v)
        return _mean(terms)

    est, se = _hermitian_map(grid, at)
    return CFGrid(grid, est, se, np.ones(grid.shape, bool), "residual:compact", notes)


# ---------------------------------------------------------------------------
# recovering ψ_η
# ---------------------------------------------------------------------------


def _eta_numerator_terms(xi: LevyTriplet, v: np.ndarray, u: float, nodes, weights) -> np.ndarray:
    """Per-draw terms whose mean is ``ψ_η(u) φ_V(u)``."""
    e = np.exp(1j * u * v)
    ium1 = 1j * u * v * e  # u·i·V e^{iuV}
    terms = xi.gamma * ium1 - 0.5 * xi.sigma2 * (-(u * v) ** 2 * e + ium1)
    for y, w in zip(nodes, weights):
        inner = np.exp(1j * u * math.exp(-y) * v) - e
        if abs(y) <= 1.0:
            inner = inner + y * ium1
        terms = terms - w * inner
    return terms


def invert_eta(xi: LevyTriplet, sample, grid=None, mask_multiplier: float = DEFAULT_MASK) -> ExponentGrid:
    """Recover ``ψ_η`` on the grid from ``ξ`` and a sample of ``V∞``.

    The numerator uses weighted moments ``E[V^k e^{iuV}]`` and, for the jump
    part of ``ξ``, fresh averages ``E[e^{iue^{-y}V}]`` at the atoms (or at
    fixed quadrature nodes for a density).  Points where ``|φ_V|`` is not
    clearly above noise are masked.
    """
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    v = _values(sample)
    notes: list = []
    _second_moment_screen(v, notes)
    cf = zero_mask(empirical_cf(v, grid), mask_multiplier)
    nodes, weights = quadrature_nodes(xi.nu)

    def at(u: float):
        if u == 0:
            return 0j, 0.0
        a = _eta_numerator_terms(xi, v, u, nodes, weights)
        return _ratio(a, np.exp(1j * u * v))

    return _masked_exponent(grid, cf.valid_mask, at, notes)


def _masked_exponent(grid, valid, fn, notes) -> ExponentGrid:
    sub = grid[valid]
    est_sub, se_sub = _hermitian_map(sub, fn)
    psi = np.full(grid.shape, np.nan + 1j * np.nan)
    se = np.full(grid.shape, np.nan)
    psi[valid] = est_sub
    se[valid] = se_sub
    psi[grid == 0] = 0.0
    se[grid == 0] = 0.0
    return ExponentGrid(grid, psi, se, valid, tuple(notes))


# ---------------------------------------------------------------------------
# recovering ψ_{-ξ}
# ---------------------------------------------------------------------------


def invert_xi(eta: LevyTriplet, sample, grid=None, mask_multiplier: float = DEFAULT_MASK,
              screen_power: float = -0.5) -> ExponentGrid:
    """Recover ``ψ_{-ξ}`` on the grid from ``η`` and a sample of ``V∞``.

    Works with ``f(x) = e^{iu log|x|}`` (and ``f(0) = 0``): the weights
    ``E[V^{-k} e^{iu log|V|}]`` use the signed ``V``, and
    ``E[e^{iu log|V + y|}]`` is averaged per jump node with draws hitting
    ``V + y = 0`` contributing 0 (their count is reported).
    """
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    v = _values(sample)
    _reject_zeros(v)
    if eta.is_deterministic and eta.gamma == 0.0:
        raise ValueError("η must not be the zero process")
    notes: list = []
    _second_moment_screen(v, notes, power=screen_power)
    cf = zero_mask(log_abs_cf(v, grid), mask_multiplier)
    nodes, weights = quadrature_nodes(eta.nu)
    logv = np.log(np.abs(v))
    inv = 1.0 / v
    shifted = []
    dropped = 0
    for y in nodes:
        s = v + y
        hit = s == 0
        dropped += int(hit.sum())
        with np.errstate(divide="ignore"):
            shifted.append((np.where(hit, 0.0, np.log(np.abs(np.where(hit, 1.0, s)))), ~hit))
    if dropped:
        notes.append(f"{dropped} draws with V + y = 0 contribute 0")

    def at(u: float):
        if u == 0:
            return 0j, 0.0
        ell0 = np.exp(1j * u * logv)
        w1 = inv * ell0
        terms = -1j * u * eta.gamma * w1 + 0.5 * eta.sigma2 * (1j * u + u * u) * inv * inv * ell0
        for (y, w), (lg, ok) in zip(zip(nodes, weights), shifted):
            inner = np.where(ok, np.exp(1j * u * lg), 0.0) - ell0
            if abs(y) <= 1.0:
                inner = inner - 1j * u * y * w1
            terms = terms - w * inner
        return _ratio(terms, ell0)

    return _masked_exponent(grid, cf.valid_mask, at, notes)


# ---------------------------------------------------------------------------
# Laplace form
# ---------------------------------------------------------------------------


def laplace_residual(xi: LevyTriplet, eta_subordinator: LevyTriplet, sample, grid=None) -> CFGrid:
    """``log E e^{-uη_1}`` minus its estimate from Laplace moments of ``V``.

    ``M_k(u) = E[V^k e^{-uV}]`` and ``L(u) = E[e^{-uV}]``; no moment screen is
    needed since every weight is bounded for ``V ≥ 0``.
    """
    if not eta_subordinator.is_subordinator:
        raise ValueError("η must be a subordinator")
    grid = np.linspace(0.0, 5.0, 21) if grid is None else np.asarray(grid, dtype=float)
    if np.any(grid < 0):
        raise ValueError("Laplace grid must be non-negative")
    v = _values(sample)
    if np.any(v < 0):
        raise ValueError("negative draws: η-subordinator functionals are non-negative")
    nodes, weights = quadrature_nodes(xi.nu)

    def at(u: float):
        if u == 0:
            return 0j, 0.0
        e = np.exp(-u * v)
        m1u = u * v * e
        a = -(xi.gamma * m1u + 0.5 * xi.sigma2 * ((u * v) ** 2 * e - m1u))
        for y, w in zip(nodes, weights):
            inner = np.exp(-u * math.exp(-y) * v) - e
            if abs(y) <= 1.0:
                inner = inner - y * m1u
            a = a - w * inner
        r, s = _ratio(a, e)
        return complex(laplace_exponent(eta_subordinator, u)) - r, s

    est = np.empty(grid.shape, dtype=complex)
    se = np.empty(grid.shape)
    for j, (m, s) in enumerate(parallel_map(lambda i: at(float(grid[i])), grid.size)):
        est[j], se[j] = m, s
    return CFGrid(grid, est, se, np.ones(grid.shape, bool), "residual:laplace")


# ---------------------------------------------------------------------------
# compound Poisson ξ
# ---------------------------------------------------------------------------


def cpp_relation_residual(lam: float, tau: LevyMeasure, eta: LevyTriplet, sample, grid=None) -> CFGrid:
    """``ψ_η(u) φ_V(u) - λ ∫ (E e^{iuV} - E e^{iue^{-y}V}) τ(dy)`` per ``u``.

    ``τ`` is the jump law of ``ξ`` (atoms; normalised if needed).
    """
    if not tau.is_atomic:
        raise ValueError("τ must be atomic")
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    v = _values(sample)
    probs = tau.masses / tau.masses.sum()

    def at(u: float):
        if u == 0:
            return 0j, 0.0
        e = np.exp(1j * u * v)
        terms = complex(eval_exponent(eta, u)) * e
        for y, p in zip(tau.locations, probs):
            terms = terms - lam * p * (e - np.exp(1j * u * math.exp(-y) * v))
        return _mean(terms)

    est, se = _hermitian_map(grid, at)
    return CFGrid(grid, est, se, np.ones(grid.shape, bool), "residual:cpp")


def eta_from_cpp_relation(lam: float, tau: LevyMeasure, sample, grid=None,
                          mask_multiplier: float = DEFAULT_MASK) -> ExponentGrid:
    """``ψ_η`` solved from the compound Poisson identity (a special case of :func:`invert_eta`)."""
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    v = _values(sample)
    cf = zero_mask(empirical_cf(v, grid), mask_multiplier)
    probs = tau.masses / tau.masses.sum()

    def at(u: float):
        if u == 0:
            return 0j, 0.0
        e = np.exp(1j * u * v)
        a = np.zeros_like(e)
        for y, p in zip(tau.locations, probs):
            a = a + lam * p * (e - np.exp(1j * u * math.exp(-y) * v))
        return _ratio(a, e)

    return _masked_exponent(grid, cf.valid_mask, at, [])
