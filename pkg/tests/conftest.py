import numpy as np
import pytest

from chevalley.coxeter import build_root_system, coxeter_type, enumerate_strata
from chevalley.invariants import basic_invariants


@pytest.fixture(scope="session")
def rs_cache():
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = build_root_system(coxeter_type(name))
        return cache[name]

    return get


@pytest.fixture(scope="session")
def basis_cache():
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = basic_invariants(name)
        return cache[name]

    return get


@pytest.fixture(scope="session")
def strata_cache(rs_cache):
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = enumerate_strata(rs_cache(name))
        return cache[name]

    return get


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)
