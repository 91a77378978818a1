import math

import numpy as np
import pytest

from expfun_lab.charstats import MomentScreenWarning, symmetric_grid
from expfun_lab.expfun import estimate_euler, simulate_functional
from expfun_lab.levy_spec import IndependentXiEta, LevyMeasure, LevyTriplet, eval_exponent, xi_eta_to_UL
from expfun_lab.oracles import brownian_xi_case
from expfun_lab.relations import (
    ExponentGrid,
    cpp_relation_residual,
    default_grid,
    eta_from_cpp_relation,
    invert_eta,
    invert_xi,
    laplace_residual,
    residual_compact,
)

OU = IndependentXiEta(LevyTriplet.from_drift(1.0), LevyTriplet.brownian(math.sqrt(2.0)))


@pytest.fixture(scope="module")
def ou_sample():
    return simulate_functional(OU, 50_000, 21)


@pytest.fixture(scope="module")
def jump_diffusion():
    spec = IndependentXiEta(
        LevyTriplet.compound_poisson([(1.0, 1.0)]),
        LevyTriplet(0.5, 1.0, LevyMeasure.atoms([(1.0, 0.5), (-1.0, 0.5)])),
    )
    return spec, simulate_functional(spec, 50_000, 22)


def test_default_grid():
    g = default_grid()
    assert g.size == 41 and g[0] == -5 and g[-1] == 5 and g[20] == 0


def test_exponent_grid_rejects_values_at_masked_points():
    with pytest.raises(ValueError):
        ExponentGrid(np.array([1.0]), np.array([1.0 + 0j]), np.array([0.1]), np.array([False]))


def test_compact_identity_true_laws(ou_sample, jump_diffusion, poisson_drift_spec, poisson_drift_sample):
    for spec, sample in ((OU, ou_sample), jump_diffusion, (poisson_drift_spec, poisson_drift_sample)):
        res = residual_compact(spec, sample)
        assert np.max(res.z_scores()) < 4.5
        assert res.estimate[res.u == 0][0] == 0


def test_compact_identity_ul_input(ou_sample):
    res = residual_compact(xi_eta_to_UL(OU.xi, OU.eta), ou_sample, symmetric_grid(3.0, 13))
    assert np.max(res.z_scores()) < 4.5


def test_compact_identity_detects_wrong_law(ou_sample):
    res = residual_compact(OU, ou_sample.scaled(1.2))
    assert np.max(res.z_scores()) > 10


def test_compact_identity_hermitian(ou_sample):
    res = residual_compact(OU, ou_sample)
    np.testing.assert_array_equal(res.estimate[::-1], np.conj(res.estimate))


def test_invert_eta_ou(ou_sample):
    grid = symmetric_grid(3.0, 25)
    out = invert_eta(OU.xi, ou_sample, grid)
    assert out.valid_mask.sum() >= 15
    assert out.within(lambda u: eval_exponent(OU.eta, u)).all()
    assert np.all(np.isnan(out.psi[~out.valid_mask]))


def test_invert_eta_jumps(jump_diffusion):
    spec, sample = jump_diffusion
    out = invert_eta(spec.xi, sample, symmetric_grid(3.0, 25))
    assert out.within(lambda u: eval_exponent(spec.eta, u)).mean() >= 0.95


def test_invert_eta_masks_everything_but_zero(ou_sample):
    out = invert_eta(OU.xi, ou_sample, symmetric_grid(3.0, 7), mask_multiplier=math.inf)
    assert out.valid_mask.sum() == 1 and out.psi[out.u == 0][0] == 0


def test_invert_xi_ou(ou_sample):
    grid = symmetric_grid(2.0, 21)
    out = invert_xi(OU.eta, ou_sample, grid)
    # ψ_{-ξ}(u) = -iu for ξ_t = t
    assert out.within(lambda u: -1j * u).all()


def test_invert_xi_screen_warns_on_small_values():
    v = np.random.default_rng(0).standard_normal(20_000) * np.random.default_rng(1).pareto(0.3, 20_000) ** -1
    with pytest.warns(MomentScreenWarning):
        invert_xi(LevyTriplet.brownian(1.0), v, symmetric_grid(1.0, 5))


def test_laplace_residual(poisson_drift_spec, poisson_drift_sample):
    res = laplace_residual(poisson_drift_spec.xi, poisson_drift_spec.eta, poisson_drift_sample)
    assert res.kind == "residual:laplace" and np.max(res.z_scores()) < 4.5
    wrong = laplace_residual(poisson_drift_spec.xi, poisson_drift_spec.eta, poisson_drift_sample.scaled(1.1))
    assert np.max(wrong.z_scores()) > 10


def test_laplace_residual_brownian_xi():
    case = brownian_xi_case(3.0)
    s = estimate_euler(case.spec, horizon=8.0, step=5e-3, n=5000, rng=9)
    res = laplace_residual(case.spec.xi, case.spec.eta, s, np.linspace(0, 5, 11))
    assert np.max(res.z_scores()) < 4.5


def test_laplace_input_checks(poisson_drift_spec, poisson_drift_sample):
    with pytest.raises(ValueError):
        laplace_residual(poisson_drift_spec.xi, LevyTriplet(0.0, 1.0), poisson_drift_sample)
    with pytest.raises(ValueError):
        laplace_residual(poisson_drift_spec.xi, poisson_drift_spec.eta, poisson_drift_sample, np.array([-1.0]))


def test_cpp_relation(poisson_drift_spec, poisson_drift_sample):
    tau = LevyMeasure.atoms([(1.0, 1.0)])
    res = cpp_relation_residual(1.0, tau, poisson_drift_spec.eta, poisson_drift_sample)
    assert np.max(res.z_scores()) < 4.5
    out = eta_from_cpp_relation(1.0, tau, poisson_drift_sample, symmetric_grid(3.0, 13))
    assert out.within(lambda u: eval_exponent(poisson_drift_spec.eta, u)).all()
