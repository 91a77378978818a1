"""Reference cases with known stationary laws, and counterexample constructions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate, special, stats

from .charstats import CFGrid
from .levy_spec import (
    IndependentXiEta,
    JointCompoundPoisson,
    LevyMeasure,
    LevyTriplet,
    eval_exponent,
    measure_integral,
    tail_integral_status,
)
from .pathsim import as_stream, sample_at_times


@dataclass
class OracleCase:
    """A driving spec with (optionally) its stationary law in closed form.

    ``law_kind`` is ``"analytic"`` (``cdf``/``pdf``/``sampler`` set),
    ``"product-cf"`` (``cf`` set) or ``"none"``.
    """

    name: str
    spec: object
    law_kind: str = "none"
    cdf: Optional[Callable] = None
    pdf: Optional[Callable] = None
    sampler: Optional[Callable[[np.random.Generator, int], np.ndarray]] = None
    cf: Optional[Callable] = None
    notes: str = ""
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.law_kind == "analytic":
            if self.cdf is None or self.pdf is None:
                raise ValueError("analytic law needs cdf and pdf")
            mass = _total_mass(self.pdf)
            if abs(mass - 1.0) > 1e-6:
                raise ValueError(f"stationary density integrates to {mass}")

    def exact_sample(self, n: int, rng=None) -> np.ndarray:
        if self.sampler is None:
            raise ValueError(f"{self.name} has no exact sampler")
        return self.sampler(as_stream(rng).generator(), n)


def _total_mass(pdf: Callable) -> float:
    pieces = [(-math.inf, -1.0), (-1.0, 0.0), (0.0, 1.0), (1.0, math.inf)]
    return sum(integrate.quad(lambda x: float(pdf(x)), a, b, limit=200)[0] for a, b in pieces)


def ou_normal_case(gamma_xi: float = 1.0, v: float = 1.0) -> OracleCase:
    """``ξ_t = γt`` and ``η = sqrt(2γ) v W``: the stationary law is ``N(0, v²)``."""
    if not (gamma_xi > 0 and v > 0):
        raise ValueError("gamma_xi and v must be positive")
    spec = IndependentXiEta(LevyTriplet.from_drift(gamma_xi), LevyTriplet.brownian(math.sqrt(2.0 * gamma_xi) * v))
    law = stats.norm(0.0, v)
    return OracleCase(
        "ou-normal", spec, "analytic", law.cdf, law.pdf,
        lambda g, n: v * g.standard_normal(n), notes=f"N(0, {v**2:g})",
    )


def brownian_xi_case(mu: float = 3.0) -> OracleCase:
    """``ξ_s = 2(B_s + μs)``, ``η_t = t``; ``V∞`` is ``1/(2G)`` with ``G ~ Gamma(μ)``.

    The closed form is taken from outside this package's source material and
    is validated by simulation in the test suite before use.
    """
    if not mu > 0:
        raise ValueError("mu must be positive")
    spec = IndependentXiEta(LevyTriplet.from_drift(2.0 * mu, 4.0), LevyTriplet.from_drift(1.0))
    g = stats.gamma(mu)

    def cdf(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(x > 0, g.sf(1.0 / (2.0 * np.where(x > 0, x, 1.0))), 0.0)

    def pdf(x):
        x = np.asarray(x, dtype=float)
        xs = np.where(x > 0, x, 1.0)
        return np.where(x > 0, g.pdf(1.0 / (2.0 * xs)) / (2.0 * xs * xs), 0.0)

    mean = 1.0 / (2.0 * (mu - 1.0)) if mu > 1 else math.inf
    median = 1.0 / (2.0 * g.ppf(0.5))
    return OracleCase(
        "dufresne", spec, "analytic", cdf, pdf,
        lambda gen, n: 1.0 / (2.0 * gen.gamma(mu, size=n)),
        notes="derived: reciprocal gamma law, checked by simulation",
        extra={"mean": mean, "median": median, "mu": mu},
    )


def first_jump_cf(eta: LevyTriplet, lam: float, u) -> np.ndarray:
    """CF of ``η_T`` with ``T ~ Exp(λ)`` independent: ``λ / (λ - ψ_η(u))``."""
    return lam / (lam - eval_exponent(eta, u))


def poisson_product_cf(eta: LevyTriplet, lam: float, u, terms: int = 31) -> np.ndarray:
    """``∏_{k<terms} φ_{η_T}(e^{-k} u)`` for ``ξ`` Poisson(λ) with unit jumps."""
    u = np.asarray(u, dtype=float)
    out = np.ones(u.shape, dtype=complex)
    for k in range(terms):
        out = out * first_jump_cf(eta, lam, u * math.exp(-k))
    return out


def poisson_xi_product_check(eta: LevyTriplet, sample, grid, lam: float = 1.0) -> CFGrid:
    """Residual of ``φ_W(u) - φ_W(u/e) φ_{η_T}(u)`` from one sample."""
    v = sample.values if hasattr(sample, "values") else np.asarray(sample, dtype=float)
    grid = np.asarray(grid, dtype=float)
    est = np.empty(grid.shape, dtype=complex)
    se = np.empty(grid.shape)
    for j, u in enumerate(grid):
        if u == 0:
            est[j], se[j] = 0.0, 0.0
            continue
        h = complex(first_jump_cf(eta, lam, u))
        d = np.exp(1j * u * v) - h * np.exp(1j * u * math.exp(-1.0) * v)
        m = d.mean()
        est[j] = m
        se[j] = math.sqrt(float(np.mean(np.abs(d - m) ** 2)) / v.size)
    return CFGrid(grid, est, se, np.ones(grid.shape, bool), "residual:poisson-product")


def poisson_product_case(eta: Optional[LevyTriplet] = None, lam: float = 1.0) -> OracleCase:
    eta = LevyTriplet.brownian(1.0) if eta is None else eta
    spec = IndependentXiEta(LevyTriplet.compound_poisson([(1.0, lam)]), eta)
    return OracleCase(
        "poisson-product", spec, "product-cf",
        cf=lambda u: poisson_product_cf(eta, lam, u), notes="ξ Poisson with unit jumps", extra={"lam": lam},
    )


def dependent_pair(eta1: Optional[LevyTriplet] = None) -> tuple[IndependentXiEta, JointCompoundPoisson]:
    """Two driving pairs with the same ``L(V∞)``.

    The first is ``(χ, η)`` with ``χ`` Poisson(1) and ``η`` independent.  The
    second is compound Poisson with common jumps ``(1, Y)``, ``Y ~ η_T`` for
    ``T ~ Exp(1)``, so its ``η``-component is a different process.
    """
    eta1 = LevyTriplet.from_drift(1.0) if eta1 is None else eta1
    first = IndependentXiEta(LevyTriplet.compound_poisson([(1.0, 1.0)]), eta1)

    def sampler(gen: np.random.Generator, size: int):
        t = gen.exponential(1.0, size=size)
        return np.ones(size), sample_at_times(eta1, t, gen)

    second = JointCompoundPoisson(rate=1.0, sampler=sampler, description="jumps (1, η_T), T ~ Exp(1)")
    return first, second


def dep_pair_case(eta1: Optional[LevyTriplet] = None) -> OracleCase:
    first, second = dependent_pair(eta1)
    return OracleCase("dep-pair", second, "none", notes="same law as the independent pair", extra={"partner": first})


def stationary_levy_tail(nu_eta: LevyMeasure) -> float:
    """``∫_{(1,∞)} log y ν_η(dy)``; ``inf`` when the integral diverges."""
    if nu_eta.is_empty:
        return 0.0
    if nu_eta.is_atomic:
        sel = nu_eta.locations > 1.0
        return float(np.sum(np.log(nu_eta.locations[sel]) * nu_eta.masses[sel]))
    value, finite = tail_integral_status(nu_eta, np.log, side="right")
    return value if finite else math.inf


def continuity_counterexample_spec(n: int) -> LevyTriplet:
    """Compound Poisson ``η⁽ⁿ⁾`` of rate 1; ``n = 0`` gives the limit ``½δ₁ + ½δ₋₁``."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if n > 143:
        raise ValueError("n^n overflows double precision for n > 143")
    if n == 0:
        return LevyTriplet.compound_poisson([(1.0, 0.5), (-1.0, 0.5)])
    big = float(n) ** n
    w = 1.0 / n
    atoms = [(1.0, 0.5 * (1 - w)), (-1.0, 0.5 * (1 - w)), (big, 0.5 * w), (-big, 0.5 * w)]
    return LevyTriplet.compound_poisson([(x, m) for x, m in atoms if m > 0])


def discont_case(n: int = 4) -> OracleCase:
    spec = IndependentXiEta(LevyTriplet.from_drift(1.0), continuity_counterexample_spec(n))
    return OracleCase("discont-n", spec, "none", notes=f"η⁽{n}⁾ with ξ_t = t", extra={"n": n})


ORACLES: dict[str, Callable[..., OracleCase]] = {
    "ou-normal": ou_normal_case,
    "dufresne": brownian_xi_case,
    "poisson-product": poisson_product_case,
    "dep-pair": dep_pair_case,
    "discont-n": discont_case,
}


def get_oracle(name: str, **params) -> OracleCase:
    try:
        factory = ORACLES[name]
    except KeyError:
        raise KeyError(f"unknown oracle {name!r}; known: {sorted(ORACLES)}") from None
    return factory(**params)
