import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def segment():
    from fourier_ratio.measures import make_canonical_measure
    return make_canonical_measure("segment", {"d": 2})


@pytest.fixture(scope="session")
def circle():
    from fourier_ratio.measures import make_canonical_measure
    return make_canonical_measure("circle", {})


@pytest.fixture(scope="session")
def dirac2():
    from fourier_ratio.measures import make_canonical_measure
    return make_canonical_measure("dirac", {"d": 2})


@pytest.fixture(scope="session")
def cantor():
    from fourier_ratio.measures import make_canonical_measure
    return make_canonical_measure("cantor", {})
