import math

import numpy as np
import pytest

from expfun_lab.generator import (
    TestFunction,
    _cutoff,
    apply_generator,
    apply_generator_split,
    apply_generator_ul,
    apply_generator_xieta,
    battery,
    combine,
    compact_bump,
    constant,
    exp_iu,
    gaussian_bump,
    levy_generator,
    semigroup_estimate,
    stationarity_residual,
)
from expfun_lab.levy_spec import (
    IndependentXiEta,
    LevyMeasure,
    LevyTriplet,
    ULForm,
    density_from_json,
    eval_exponent,
    xi_eta_to_UL,
)

X = np.linspace(-3.0, 3.0, 13)


def numeric_derivs(f, x, h=1e-4):
    d1 = (f.f(x + h) - f.f(x - h)) / (2 * h)
    d2 = (f.f(x + h) - 2 * f.f(x) + f.f(x - h)) / (h * h)
    return d1, d2


@pytest.mark.parametrize("f", battery(), ids=lambda f: f.name)
def test_battery_derivatives(f):
    x = np.linspace(-2.7, 3.3, 31)
    d1, d2 = numeric_derivs(f, x)
    np.testing.assert_allclose(f.f1(x), d1, atol=1e-6)
    np.testing.assert_allclose(f.f2(x), d2, atol=2e-4)
    assert f.screen_schwartz()


def test_slow_rational_fails_screen():
    q = lambda x: 1.0 + np.asarray(x, dtype=float) ** 2
    slow = TestFunction(lambda x: 1 / q(x), lambda x: -2 * x / q(x) ** 2, lambda x: (6 * x * x - 2) / q(x) ** 3)
    assert not slow.screen_schwartz()


def test_combination_and_constant():
    g = combine(2.0, gaussian_bump(), -1.0, compact_bump())
    x = np.array([0.3])
    assert g.f(x) == pytest.approx(2 * gaussian_bump().f(x) - compact_bump().f(x))
    assert (gaussian_bump() + constant(1.0)).f(np.array([0.0]))[0] == pytest.approx(2.0)


def test_cutoff_is_smooth_partition():
    s = np.linspace(0.0, 3.0, 3001)
    h, h1, h2 = _cutoff(s)
    assert np.all(h[s <= 1] == 1) and np.all(h[s >= 2] == 0)
    assert np.all(np.diff(h) <= 1e-15)
    ds = s[1] - s[0]
    np.testing.assert_allclose(np.gradient(h, ds)[1:-1], h1[1:-1], atol=5e-3)


def test_levy_generator_on_exponentials():
    t = LevyTriplet(0.3, 0.7, LevyMeasure.atoms([(0.4, 1.0), (-2.0, 0.5)]))
    u, x = 1.3, np.array([0.2, 5.0, 40.0])
    f = exp_iu(u, 1e6)
    expected = np.exp(1j * u * x) * eval_exponent(t, u)
    np.testing.assert_allclose(levy_generator(t, f, x), expected, atol=1e-12)


def test_ou_generator_value():
    spec = IndependentXiEta(LevyTriplet.from_drift(1.0), LevyTriplet.brownian(math.sqrt(2.0)))
    # A f = -x f' + f''; at 0 for the Gaussian bump this is f''(0) = -1
    assert complex(apply_generator(spec, gaussian_bump(), 0.0)) == pytest.approx(-1.0)


def pairs():
    ts = density_from_json({"type": "density", "family": "tempered_stable", "params": {"alpha": 0.7}})
    return [
        (LevyTriplet.compound_poisson([(1.0, 1.0)]), LevyTriplet.from_drift(1.0)),
        (LevyTriplet(0.7, 0.3, LevyMeasure.atoms([(0.5, 1.0), (-2.0, 0.3), (1.5, 0.4)])),
         LevyTriplet(-0.2, 0.5, LevyMeasure.atoms([(1.0, 0.5), (-0.3, 0.5)]))),
        (LevyTriplet(0.5, 0.2, ts), LevyTriplet(0.1, 1.0, ts)),
    ]


@pytest.mark.parametrize("k", range(3))
@pytest.mark.parametrize("f", battery(), ids=lambda f: f.name)
def test_ul_and_xieta_forms_agree(k, f):
    xi, eta = pairs()[k]
    a = apply_generator_xieta(xi, eta, f, X)
    b = apply_generator_ul(xi_eta_to_UL(xi, eta), f, X)
    np.testing.assert_allclose(a, b, atol=1e-9)


@pytest.mark.parametrize("k", range(2))
def test_split_form_agrees(k):
    xi, eta = pairs()[k]
    x = np.linspace(0.1, 3.0, 9)
    for f in battery():
        np.testing.assert_allclose(apply_generator_split(xi, eta, f, x), apply_generator_xieta(xi, eta, f, x), atol=1e-12)
    with pytest.raises(ValueError):
        apply_generator_split(xi, eta, gaussian_bump(), np.array([-1.0]))


def test_scalar_density_path_matches_array_path():
    xi, eta = pairs()[2]
    f = gaussian_bump()
    arr = apply_generator_xieta(xi, eta, f, np.array([0.7]))[0]
    scalar = complex(apply_generator_xieta(xi, eta, f, 0.7))
    assert scalar == pytest.approx(arr, abs=1e-7)


def test_joint_atoms_generator():
    ul = ULForm(gamma_u=-1.0, gamma_l=0.0, joint_atoms=(((0.5, 2.0), 0.3),))
    f = gaussian_bump()
    x = np.array([0.4])
    manual = -1.0 * x * f.f1(x) + 0.3 * (f.f(x + 0.5 * x + 2.0) - f.f(x))
    np.testing.assert_allclose(apply_generator_ul(ul, f, x), manual, atol=1e-15)


def test_cutoff_limit_heavy_tails():
    # η with polynomial jump tails; A f_n(x) → e^{iux}(ψ_η(u) + ψ_U(ux)) as n → ∞
    nu = LevyMeasure.from_density(lambda y: (1.0 + np.abs(y)) ** -2.5, (-math.inf, math.inf), 0.0)
    xi, eta = LevyTriplet.from_drift(1.0), LevyTriplet(0.2, 0.0, nu)
    u, x = 1.1, np.array([0.5])
    limit = np.exp(1j * u * x) * (eval_exponent(eta, u) - 1j * u * x)
    errs = [abs(apply_generator_xieta(xi, eta, exp_iu(u, n), x)[0] - limit[0]) for n in (4, 16, 64, 256)]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 1e-3


def test_semigroup_matches_exact_ou():
    spec = IndependentXiEta(LevyTriplet.from_drift(1.0), LevyTriplet.brownian(math.sqrt(2.0)))
    f, x, t = gaussian_bump(), 0.8, 0.5
    m, s2 = x * math.exp(-t), 1 - math.exp(-2 * t)
    exact = math.exp(-m * m / (2 * (1 + s2))) / math.sqrt(1 + s2)
    est, se = semigroup_estimate(spec, f, x, t, 40_000, 3)
    assert abs(est - exact) < 4 * se
    with pytest.raises(ValueError):
        semigroup_estimate(spec, f, x, 0.0, 10)


def test_stationarity_discriminates():
    spec = IndependentXiEta(LevyTriplet.from_drift(1.0), LevyTriplet.brownian(math.sqrt(2.0)))
    g = np.random.default_rng(0)
    good = g.standard_normal(100_000)
    for f in battery():
        m, se = stationarity_residual(spec, f, good)
        assert abs(m) < 4.5 * se
    m, se = stationarity_residual(spec, gaussian_bump(), 2.0 * good)
    assert abs(m) > 20 * se
