import itertools

import numpy as np
import pytest

from logtrop.thinning import split, thin
from logtrop.tropical import TropicalSeries, monomial_minorant
from logtrop.weights import make_weight


def parabola_series() -> TropicalSeries:
    """{(k, -k^2) : k >= 0}, lazily."""
    return TropicalSeries.lazy((k, -float(k * k)) for k in itertools.count())


@pytest.fixture
def parabola():
    return parabola_series()


@pytest.fixture(scope="session")
def parabola_chain():
    return thin(parabola_series(), 4.0, 12)


@pytest.fixture(scope="session", params=["exp_power:beta=1", "log_power:alpha=2.5"])
def certified(request):
    """(weight, chain, G triple) for the two reference rapid weights."""
    w = make_weight(request.param)
    chain = thin(monomial_minorant(w), 4.0, 64)
    return w, chain, split(chain)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
