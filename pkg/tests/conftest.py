import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from stringstab import IdmParams, LinearCoeffs, ParamDistribution, linearize, sample_params


@pytest.fixture(scope="session")
def ngsim():
    return ParamDistribution.ngsim_defaults()


@pytest.fixture(scope="session")
def mean_params(ngsim):
    return ngsim.mean_params


@pytest.fixture(scope="session")
def random_coeff_sets(ngsim):
    """100 linearisation coefficient sets drawn from the population model at
    random admissible equilibrium speeds."""
    rng = np.random.default_rng(2024)
    out = []
    for p in sample_params(ngsim, rng, 100):
        v_eq = float(rng.uniform(1.0, 0.9 * p.v_max))
        out.append(linearize(p, v_eq))
    return out


# Reference coefficient sets of the two-vehicle worked example: vehicle 2
# (aggressive lead follower) and vehicle 3 (calmer follower).
C2 = LinearCoeffs(-0.075, 0.091, 0.55)
C3 = LinearCoeffs(-0.26, 0.10, 0.64)


@pytest.fixture(scope="session")
def c2():
    return C2


@pytest.fixture(scope="session")
def c3():
    return C3
