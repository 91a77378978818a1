"""Infinitesimal generator of a GOU process on smooth test functions.

Two equivalent forms are implemented: one in terms of the ``(U, L)``
triplets and one in terms of independent ``(ξ, η)``.  Jump integrals over
atoms are exact sums; density measures use adaptive quadrature on
small grids of ``x`` and fixed nodes for whole samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import expit

from .expfun import ExpFunSample, gou_path
from .levy_spec import (
    IndependentXiEta,
    LevyMeasure,
    LevyTriplet,
    ULForm,
    measure_integral,
    quadrature_nodes,
)
from .pathsim import as_stream

TAYLOR_CUTOFF = 1e-6


@dataclass(frozen=True)
class TestFunction:
    """A function with its first two derivatives (vectorised, possibly complex)."""

    __test__ = False  # not a pytest class

    f: Callable[[np.ndarray], np.ndarray]
    f1: Callable[[np.ndarray], np.ndarray]
    f2: Callable[[np.ndarray], np.ndarray]
    class_tag: str = "S_R"
    support_bound: float = math.inf
    name: str = ""

    def __call__(self, x):
        return self.f(x)

    def screen_schwartz(self) -> bool:
        """``|x f'(x)| + |x² f''(x)|`` below ``1e-6`` and non-increasing at large ``|x|``."""
        vals = []
        for r in (1e3, 1e4, 1e5):
            x = np.array([r, -r])
            vals.append(float(np.max(np.abs(x * self.f1(x)) + np.abs(x * x * self.f2(x)))))
        return all(v < 1e-6 for v in vals) and vals[0] >= vals[1] >= vals[2]

    def __add__(self, other: "TestFunction") -> "TestFunction":
        return combine(1.0, self, 1.0, other)


def combine(a: complex, f: TestFunction, b: complex, g: TestFunction) -> TestFunction:
    """``a f + b g``."""
    return TestFunction(
        lambda x: a * f.f(x) + b * g.f(x),
        lambda x: a * f.f1(x) + b * g.f1(x),
        lambda x: a * f.f2(x) + b * g.f2(x),
        f.class_tag if f.class_tag == g.class_tag else "S_R",
        max(f.support_bound, g.support_bound),
        f"{a}*{f.name}+{b}*{g.name}",
    )


def constant(c: float) -> TestFunction:
    zero = lambda x: np.zeros_like(np.asarray(x, dtype=float))
    return TestFunction(lambda x: np.full_like(np.asarray(x, dtype=float), c), zero, zero, "const", math.inf, f"const({c})")


def gaussian_bump() -> TestFunction:
    f = lambda x: np.exp(-0.5 * np.asarray(x, dtype=float) ** 2)
    return TestFunction(f, lambda x: -x * f(x), lambda x: (x * x - 1.0) * f(x), "S_R", math.inf, "gaussian")


def rational_even() -> TestFunction:
    """``(1 + x²)^{-2}``."""
    q = lambda x: 1.0 + np.asarray(x, dtype=float) ** 2
    return TestFunction(
        lambda x: q(x) ** -2,
        lambda x: -4.0 * x * q(x) ** -3,
        lambda x: -4.0 * q(x) ** -3 + 24.0 * x * x * q(x) ** -4,
        "S_R", math.inf, "rational-even",
    )


def rational_odd() -> TestFunction:
    """``x (1 + x²)^{-3}``."""
    q = lambda x: 1.0 + np.asarray(x, dtype=float) ** 2
    return TestFunction(
        lambda x: x * q(x) ** -3,
        lambda x: q(x) ** -3 - 6.0 * x * x * q(x) ** -4,
        lambda x: -18.0 * x * q(x) ** -4 + 48.0 * x**3 * q(x) ** -5,
        "S_R", math.inf, "rational-odd",
    )


def compact_bump(center: float = 0.0, width: float = 1.0) -> TestFunction:
    """``exp(-1/(1 - s²))`` for ``s = (x - center)/width`` inside ``(-1, 1)``."""

    def parts(x):
        s = (np.asarray(x, dtype=float) - center) / width
        inside = np.abs(s) < 1.0
        q = np.where(inside, 1.0 - s * s, 1.0)
        with np.errstate(over="ignore", under="ignore"):
            f = np.where(inside, np.exp(-1.0 / q), 0.0)
        return s, q, f

    def f0(x):
        return parts(x)[2]

    def f1(x):
        s, q, f = parts(x)
        return f * (-2.0 * s / q**2) / width

    def f2(x):
        s, q, f = parts(x)
        return f * (4.0 * s * s / q**4 - 2.0 / q**2 - 8.0 * s * s / q**3) / width**2

    return TestFunction(f0, f1, f2, "Cc2", abs(center) + width, f"bump({center},{width})")


def battery() -> list[TestFunction]:
    """Five analytic members of ``S(ℝ)``."""
    return [gaussian_bump(), rational_even(), rational_odd(), compact_bump(0.0, 1.0), compact_bump(1.0, 2.0)]


def _cutoff(s: np.ndarray):
    """Smooth ``H`` with ``H = 1`` on ``[0, 1]``, ``0`` on ``[2, ∞)``, plus ``H'``, ``H''``."""
    s = np.asarray(s, dtype=float)
    mid = (s > 1.0) & (s < 2.0)
    t = np.where(mid, s, 1.5)
    a, b = t - 1.0, 2.0 - t
    r = -1.0 / a + 1.0 / b
    r1 = 1.0 / a**2 + 1.0 / b**2
    r2 = -2.0 / a**3 + 2.0 / b**3
    h = expit(-r)
    h1 = -h * (1.0 - h) * r1
    h2 = -(h1 * (1.0 - 2.0 * h) * r1 + h * (1.0 - h) * r2)
    H = np.where(s <= 1.0, 1.0, np.where(mid, h, 0.0))
    return H, np.where(mid, h1, 0.0), np.where(mid, h2, 0.0)


def exp_iu(u: float, n: float) -> TestFunction:
    """``f_n(x) = e^{iux} h(x/n)`` with the fixed smooth cutoff ``h``."""

    def parts(x):
        x = np.asarray(x, dtype=float)
        H, H1, H2 = _cutoff(np.abs(x) / n)
        sgn = np.sign(x)
        return np.exp(1j * u * x), H, H1 * sgn / n, H2 / n**2

    def f0(x):
        e, h, _, _ = parts(x)
        return e * h

    def f1(x):
        e, h, h1, _ = parts(x)
        return e * (1j * u * h + h1)

    def f2(x):
        e, h, h1, h2 = parts(x)
        return e * (-u * u * h + 2j * u * h1 + h2)

    return TestFunction(f0, f1, f2, f"exp_iu({u},{n})", 2.0 * n, f"exp_iu({u},{n})")


# ---------------------------------------------------------------------------
# jump integrals
# ---------------------------------------------------------------------------


ADAPTIVE_MAX_POINTS = 64


def _jump_integral(nu: LevyMeasure, integrand: Callable, taylor: Callable, x) -> np.ndarray:
    """``∫ integrand(x, y) ν(dy)`` with a Taylor fallback for ``|y| < 1e-6``.

    ``integrand`` and ``taylor`` take ``(x, y)`` and broadcast.  Atoms are
    summed exactly.  Densities use adaptive quadrature per point for up to
    ``ADAPTIVE_MAX_POINTS`` points and shared fixed nodes for larger arrays
    (whole samples), where the node error sits far below Monte Carlo error.
    """
    x = np.asarray(x, dtype=float)
    if nu.is_empty:
        return np.zeros(x.shape, dtype=complex)

    def g(xx, y):
        y = np.asarray(y, dtype=float)
        small = np.abs(y) < TAYLOR_CUTOFF
        ysafe = np.where(small, 1.0, y)
        with np.errstate(over="ignore", invalid="ignore"):
            return np.where(small, taylor(xx, y), integrand(xx, ysafe))

    if nu.is_atomic or x.size > ADAPTIVE_MAX_POINTS:
        y, w = quadrature_nodes(nu)
        total = np.zeros(x.shape, dtype=complex)
        for yy, ww in zip(y, w):
            total = total + ww * g(x, yy)
        return total
    out = np.empty(x.shape, dtype=complex)
    for idx, xs in np.ndenumerate(x):
        re = measure_integral(nu, lambda y: np.real(g(float(xs), y)))
        im = measure_integral(nu, lambda y: np.imag(g(float(xs), y)))
        out[idx] = re + 1j * im
    return out


def levy_generator(triplet: LevyTriplet, f: TestFunction, x) -> np.ndarray:
    """Generator of a scalar Lévy process: ``γf' + ½σ²f'' + ∫(f(x+y) - f - f'y1) ν``."""
    x = np.asarray(x, dtype=float)
    fx, d1, d2 = f.f(x), f.f1(x), f.f2(x)
    out = triplet.gamma * d1 + 0.5 * triplet.sigma2 * d2

    def integrand(xx, y):
        return f.f(xx + y) - f.f(xx) - f.f1(xx) * y * (np.abs(y) <= 1.0)

    def taylor(xx, y):
        return 0.5 * y * y * f.f2(xx)

    return out + _jump_integral(triplet.nu, integrand, taylor, x)


def apply_generator_ul(spec: ULForm, f: TestFunction, x) -> np.ndarray:
    """Generator in ``(U, L)`` form at ``x`` (scalar or array)."""
    x = np.asarray(x, dtype=float)
    d1, d2 = f.f1(x), f.f2(x)
    out = d1 * (x * spec.gamma_u + spec.gamma_l) + 0.5 * d2 * (x * x * spec.sigma_u2 + 2.0 * x * spec.sigma_ul + spec.sigma_l2)

    def u_integrand(xx, z):
        return f.f(xx + xx * z) - f.f(xx) - f.f1(xx) * xx * z * (np.abs(z) <= 1.0)

    def u_taylor(xx, z):
        return 0.5 * z * z * xx * xx * f.f2(xx)

    def l_integrand(xx, z):
        return f.f(xx + z) - f.f(xx) - f.f1(xx) * z * (np.abs(z) <= 1.0)

    def l_taylor(xx, z):
        return 0.5 * z * z * f.f2(xx)

    out = out + _jump_integral(spec.nu_u, u_integrand, u_taylor, x)
    out = out + _jump_integral(spec.nu_l, l_integrand, l_taylor, x)
    for (z1, z2), m in spec.joint_atoms:
        dz = x * z1 + z2
        inside = math.hypot(z1, z2) <= 1.0
        out = out + m * (f.f(x + dz) - f.f(x) - (f.f1(x) * dz if inside else 0.0))
    return out


def apply_generator_xieta(xi: LevyTriplet, eta: LevyTriplet, f: TestFunction, x) -> np.ndarray:
    """Generator in ``(ξ, η)`` form for independent drivers."""
    x = np.asarray(x, dtype=float)
    d1, d2 = f.f1(x), f.f2(x)
    out = levy_generator(eta, f, x) - d1 * x * xi.gamma + 0.5 * (d2 * x * x + d1 * x) * xi.sigma2

    def integrand(xx, y):
        # e^{-y} capped so that x = 0 never meets an infinite factor
        return f.f(xx * np.exp(np.minimum(-y, 700.0))) - f.f(xx) + f.f1(xx) * xx * y * (np.abs(y) <= 1.0)

    def taylor(xx, y):
        return 0.5 * y * y * (xx * xx * f.f2(xx) + xx * f.f1(xx))

    return out + _jump_integral(xi.nu, integrand, taylor, x)


def apply_generator_split(xi: LevyTriplet, eta: LevyTriplet, f: TestFunction, x) -> np.ndarray:
    """``A^η f(x) + A^{-ξ} f̃(log x)`` with ``f̃(s) = f(e^s)``, for ``x > 0``."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("split form needs x > 0")
    ft = TestFunction(
        lambda s: f.f(np.exp(s)),
        lambda s: np.exp(s) * f.f1(np.exp(s)),
        lambda s: np.exp(s) * f.f1(np.exp(s)) + np.exp(2 * s) * f.f2(np.exp(s)),
        "S_R",
    )
    return levy_generator(eta, f, x) + levy_generator(xi.negated(), ft, np.log(x))


def apply_generator(spec, f: TestFunction, x) -> np.ndarray:
    if isinstance(spec, ULForm):
        return apply_generator_ul(spec, f, x)
    if isinstance(spec, IndependentXiEta):
        return apply_generator_xieta(spec.xi, spec.eta, f, x)
    raise TypeError(f"no generator for {type(spec).__name__}")


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------


def semigroup_estimate(spec, f: TestFunction, x: float, t: float, n: int, rng=None,
                       step: Optional[float] = None) -> tuple[complex, float]:
    """``E^x f(V_t)`` from ``n`` GOU paths; grid step at most ``t/100``."""
    if not t > 0:
        raise ValueError("t must be positive")
    step = t / 100.0 if step is None else min(step, t / 100.0)
    grid = gou_path(spec, np.full(n, float(x)), t, step, as_stream(rng))
    vals = np.asarray(f.f(grid.levels["V"][:, -1]))
    m = vals.mean()
    se = math.sqrt(float(np.mean(np.abs(vals - m) ** 2)) / n)
    return complex(m), se


def stationarity_residual(spec, f: TestFunction, sample) -> tuple[complex, float]:
    """Sample mean of ``A f(V_i)``; zero in expectation under the invariant law."""
    v = sample.values if isinstance(sample, ExpFunSample) else np.asarray(sample, dtype=float)
    vals = np.asarray(apply_generator(spec, f, v), dtype=complex)
    m = vals.mean()
    se = math.sqrt(float(np.mean(np.abs(vals - m) ** 2)) / v.size)
    return complex(m), se
