import math

import numpy as np
import pytest
from scipy import stats

from expfun_lab.charstats import (
    CFGrid,
    MomentScreenWarning,
    ZeroDrawError,
    empirical_cf,
    hill_index,
    ks_critical_value,
    ks_distance,
    log_abs_cf,
    moment_screen,
    symmetric_grid,
    weighted_moment_cf,
    zero_mask,
)

GRID = symmetric_grid(5.0, 41)


def test_symmetric_grid_mirrors_exactly():
    g = symmetric_grid(3.0, 25)
    np.testing.assert_array_equal(g, -g[::-1])
    assert g[12] == 0.0


def test_empirical_cf_gaussian(normal_draws, frozen):
    cf = empirical_cf(normal_draws, GRID)
    z = np.abs(cf.estimate - np.exp(-0.5 * GRID**2)) / np.maximum(cf.stderr, 1e-300)
    assert np.all(z[GRID != 0] < 4.5)
    assert cf.at(0.0) == 1 and cf.stderr[GRID == 0] == 0
    assert abs(cf.at(1.0) - frozen["gaussian_cf_at_1"]) < 4 * cf.stderr[GRID == 1.0][0]


def test_hermitian_symmetry_is_exact(normal_draws):
    cf = empirical_cf(normal_draws[:1000] + 0.3, GRID)
    np.testing.assert_array_equal(cf.estimate[::-1], np.conj(cf.estimate))


def test_weighted_moment_gaussian(normal_draws):
    # E[V e^{iuV}] = iu e^{-u²/2} and E[V² e^{iuV}] = (1 - u²) e^{-u²/2}
    for k, truth in ((1, lambda u: 1j * u * np.exp(-u * u / 2)), (2, lambda u: (1 - u * u) * np.exp(-u * u / 2))):
        cf = weighted_moment_cf(normal_draws, GRID, k)
        assert cf.kind == f"weighted({k})" and not cf.warnings
        z = np.abs(cf.estimate - truth(GRID)) / cf.stderr
        assert np.max(z) < 4.5


def test_weighted_log_mode():
    v = np.random.default_rng(0).lognormal(0.0, 1.0, 50_000)
    cf = weighted_moment_cf(v, np.array([0.0, 1.0]), -1, log_mode=True)
    # E[V^{-1} e^{iu log V}] for log V ~ N(0,1) is exp((iu - 1)²/2)
    truth = np.exp(0.5 * (1j * np.array([0.0, 1.0]) - 1) ** 2)
    assert np.all(np.abs(cf.estimate - truth) < 4 * cf.stderr)
    with pytest.raises(ValueError):
        weighted_moment_cf(v, GRID, 1, log_mode=True)


def test_zero_draw_error():
    with pytest.raises(ZeroDrawError):
        log_abs_cf(np.array([1.0, 0.0, 2.0]), GRID)


def test_log_abs_cf():
    v = np.random.default_rng(1).lognormal(0.0, 1.0, 20_000) * np.random.default_rng(2).choice([-1, 1], 20_000)
    cf = log_abs_cf(v, GRID)
    assert np.max(np.abs(cf.estimate - np.exp(-0.5 * GRID**2)) / np.maximum(cf.stderr, 1e-300)) < 4.5


def test_moment_screen_flags_cauchy():
    g = np.random.default_rng(3)
    c = g.standard_cauchy(100_000)
    assert hill_index(c) == pytest.approx(1.0, abs=0.15)
    assert not moment_screen(c, 2.0)[0]
    assert moment_screen(g.standard_normal(100_000), 2.0)[0]
    with pytest.warns(MomentScreenWarning):
        cf = weighted_moment_cf(c, GRID, 2)
    assert cf.warnings


def test_zero_mask():
    cf = empirical_cf(np.random.default_rng(4).standard_normal(10_000), GRID)
    masked = zero_mask(cf, 5.0)
    assert masked.valid_mask[GRID == 0] and masked.valid_mask[np.abs(GRID) <= 2].all()
    assert not masked.valid_mask[np.abs(GRID) == 5].any()
    only_zero = zero_mask(cf, math.inf)
    assert only_zero.valid_mask.sum() == 1 and only_zero.valid_mask[GRID == 0]


def test_cfgrid_shape_check_and_csv():
    with pytest.raises(ValueError):
        CFGrid(np.zeros(2), np.zeros(3), np.zeros(2), np.ones(2, bool))
    cf = empirical_cf(np.array([0.5, 1.5, -1.0]), np.array([0.0, 1.0]))
    text = cf.to_csv()
    assert text.startswith("u,re,im,stderr,valid,kind\n") and "np." not in text


def test_ks(frozen):
    g = np.random.default_rng(5)
    x = g.standard_normal(5000)
    assert ks_distance(x, stats.norm.cdf) < 0.03
    assert ks_distance(x, 2 * g.standard_normal(5000)) > 0.1
    assert ks_critical_value(100_000, 100_000) == pytest.approx(frozen["ks_two_sample_crit_99_1e5"], rel=1e-12)
