"""
Contains fixtures that are automatically available in all test files.
"""
import numpy as np
import pytest

from gridtune.netmodel import NetworkTopology, SystemParams


def random_topology(rng, n_buses):
    """
    Random connected topology: a random spanning tree plus random extra
    lines.
    """
    lines = {}
    order = rng.permutation(n_buses)
    for k in range(1, n_buses):
        i = int(order[k])
        j = int(order[rng.integers(0, k)])
        lines[(min(i, j), max(i, j))] = rng.uniform(0.5, 5.0)
    for _ in range(rng.integers(0, n_buses)):
        i, j = rng.choice(n_buses, size=2, replace=False)
        key = (int(min(i, j)), int(max(i, j)))
        lines.setdefault(key, rng.uniform(0.5, 5.0))
    return NetworkTopology(n_buses, [(i, j, b) for (i, j), b in lines.items()])


def random_instance(rng, max_buses=20):
    """
    Random homogeneous instance as dictionary of topology and parameters.
    """
    n_buses = int(rng.integers(1, max_buses + 1))
    return {
        "topology": random_topology(rng, n_buses),
        "m": rng.uniform(0.1, 10.0),
        "d": rng.uniform(0.1, 10.0),
        "r_r_inv": rng.uniform(0.1, 10.0),
        "nu": rng.uniform(0.0, 10.0),
        "delta": rng.uniform(0.01, 10.0),
        "k_p": rng.uniform(0.0, 5.0),
        "k_omega": rng.uniform(0.0, 5.0),
    }


def pytest_configure():
    pytest.random_topology = random_topology
    pytest.random_instance = random_instance


@pytest.fixture
def two_bus():
    """
    Two buses joined by a unit line with unit parameters and noise.
    """
    return NetworkTopology(2, [(0, 1, 1.0)])


@pytest.fixture
def unit_params():
    return SystemParams(m=1.0, d=1.0, k_p=1.0, k_omega=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(2021)
