from functools import lru_cache

import pytest

from penrose_rw.pipeline import prepare_environment

SEED = 42


@lru_cache(maxsize=None)
def env(radius, seed=SEED):
    return prepare_environment(seed, radius)


@pytest.fixture(scope="session")
def env30():
    return env(30)


@pytest.fixture(scope="session")
def env60():
    return env(60)


@pytest.fixture(scope="session")
def env80():
    return env(80)


@pytest.fixture(scope="session")
def env120():
    return env(120)


@pytest.fixture(scope="session")
def env160():
    return env(160)
