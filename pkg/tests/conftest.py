import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cconcave.grids import default_grid
from cconcave.manifold import Euclidean, FlatTorus, Sphere

settings.register_profile(
    "repo", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("repo")

N = np.array([0.0, 0.0, 1.0])

MANIFOLDS = {
    "sphere": Sphere(1.0),
    "sphere_r2": Sphere(2.0),
    "torus": FlatTorus(1.0),
    "plane": Euclidean(2),
}


@pytest.fixture(params=sorted(MANIFOLDS))
def manifold(request):
    return MANIFOLDS[request.param]


@pytest.fixture(scope="session")
def unit_sphere():
    return Sphere(1.0)


@pytest.fixture(scope="session")
def sphere_grid4096(unit_sphere):
    return default_grid(unit_sphere, 4096, seed=1)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
