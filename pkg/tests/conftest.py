import math

import numpy as np
import pytest

from xicavity.dynamics import initial_amplitudes, truncation_cutoff
from xicavity.nonlinearity import NonlinearitySpec
from xicavity.validation import Suite

ALPHA = math.sqrt(10.0)

SPECS = [
    NonlinearitySpec("constant"),
    NonlinearitySpec("harmonious"),
    NonlinearitySpec("trapped_ion", 0.2),
]


@pytest.fixture(scope="session")
def suite():
    """Default-parameter trajectories (|alpha|^2=10, gt in [0,25], 1000 steps), computed once."""
    return Suite()


@pytest.fixture(scope="session")
def wf0():
    return initial_amplitudes(ALPHA, truncation_cutoff(ALPHA, 1e-12))


@pytest.fixture(params=SPECS, ids=lambda s: s.kind)
def spec(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20241016)
