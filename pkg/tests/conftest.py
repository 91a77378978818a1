import json
import math
from pathlib import Path

import numpy as np
import pytest

from expfun_lab.levy_spec import IndependentXiEta, LevyMeasure, LevyTriplet
from expfun_lab.expfun import simulate_functional

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def frozen():
    return json.loads((DATA / "frozen_oracles.json").read_text())


@pytest.fixture(scope="session")
def ou_spec():
    return IndependentXiEta(LevyTriplet.from_drift(1.0), LevyTriplet.brownian(math.sqrt(2.0)))


@pytest.fixture(scope="session")
def normal_draws():
    return np.random.default_rng(20240101).standard_normal(100_000)


@pytest.fixture(scope="session")
def poisson_drift_spec():
    return IndependentXiEta(LevyTriplet.compound_poisson([(1.0, 1.0)]), LevyTriplet.from_drift(1.0))


@pytest.fixture(scope="session")
def poisson_drift_sample(poisson_drift_spec):
    return simulate_functional(poisson_drift_spec, 100_000, 11)


@pytest.fixture(scope="session")
def symmetric_cpp():
    return LevyTriplet.compound_poisson([(1.0, 0.5), (-1.0, 0.5)])


@pytest.fixture(scope="session")
def jump_diffusion_pair():
    """ξ: drift + Brownian + two-sided atoms; η: drift + Brownian + atoms."""
    xi = LevyTriplet(0.7, 0.3, LevyMeasure.atoms([(0.5, 1.0), (-2.0, 0.3), (1.5, 0.4)]))
    eta = LevyTriplet(-0.2, 0.5, LevyMeasure.atoms([(1.0, 0.5), (-0.3, 0.5)]))
    return xi, eta
