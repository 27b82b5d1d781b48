import math

import numpy as np
import pytest

from gridtune.closedform import (
    DECREASING,
    FLAT,
    INCREASING,
    alpha1_roots,
    alpha_coefficients,
    beta_coefficients,
    f_of_delta,
    f_prime,
    g_of_nu,
    h2_droop,
    h2_idroop,
    h2_idroop_mode,
    h2_virtual_inertia,
    monotonicity,
)
from gridtune.common import InputError
from gridtune.lyap import h2_network
from gridtune.netmodel import Droop, IDroop, SystemParams, build_laplacian
from gridtune.spectral import eigendecompose


def _lambdas(topology):
    decomposition = eigendecompose(build_laplacian(topology))
    return np.where(decomposition.zero_modes(), 0.0, decomposition.lambdas)


def test_reference_values():
    assert h2_droop(1, 1.0, 1.0, 1.0, 1.0, 1.0) == 0.5
    assert h2_droop(2, 1.0, 1.0, 1.0, 1.0, 1.0) == 1.0
    value = h2_idroop(2, [0.0, 2.0], 1.0, 1.0, 1.0, 2.0, 1.0, 1.0, 1.0)
    assert np.isclose(value, 43.0 / 28.0, rtol=1e-14)
    assert np.isclose(h2_idroop_mode(0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 1.0, 1.0), 0.75)


def test_zero_noise():
    assert h2_droop(3, 1.0, 2.0, 1.0, 0.0, 0.0) == 0.0
    assert h2_idroop(2, [0.0, 1.0], 1.0, 1.0, 1.0, 2.0, 1.0, 0.0, 0.0) == 0.0


def test_delta_zero_exact():
    """
    For delta = 0 the norm equals g(nu) exactly and does not depend on the
    network.
    """
    for lambdas in ([0.0], [0.0, 1.0, 3.0], [0.0, 0.1]):
        n = len(lambdas)
        value = h2_idroop(n, lambdas, 2.0, 0.5, 1.0, 3.0, 0.0, 1.5, 0.7)
        assert value == g_of_nu(n, 2.0, 0.5, 1.5, 0.7, 3.0)


def test_delta_infinite():
    value = h2_idroop(2, [0.0, 2.0], 1.0, 1.0, 1.0, 2.0, math.inf, 1.0, 1.0)
    assert np.isclose(value, h2_droop(2, 1.0, 1.0, 1.0, 1.0, 1.0))


def test_virtual_inertia():
    assert math.isinf(h2_virtual_inertia(2, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0))
    assert h2_virtual_inertia(2, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0) == h2_droop(
        2, 2.0, 1.0, 1.0, 1.0, 0.0
    )
    assert h2_virtual_inertia(2, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0) == h2_droop(
        2, 1.0, 1.0, 1.0, 1.0, 1.0
    )


def test_invalid_input():
    with pytest.raises(InputError):
        h2_droop(1, 0.0, 1.0, 1.0, 1.0, 1.0)
    with pytest.raises(InputError):
        h2_idroop(1, [0.0], 1.0, 1.0, 1.0, -1.0, 1.0, 1.0, 1.0)
    with pytest.raises(InputError):
        h2_idroop(2, [0.0], 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0)


def test_closed_form_vs_lyapunov(rng):
    """
    The closed-form iDroop norm matches the Lyapunov solution on random
    homogeneous instances.
    """
    for _ in range(50):
        instance = pytest.random_instance(rng)
        topology = instance["topology"]
        params = SystemParams(
            instance["m"], instance["d"], instance["k_p"], instance["k_omega"]
        )
        config = IDroop(instance["nu"], instance["delta"], instance["r_r_inv"])
        closed = h2_idroop(
            topology.n_buses, _lambdas(topology), instance["m"], instance["d"],
            instance["r_r_inv"], instance["nu"], instance["delta"],
            instance["k_p"], instance["k_omega"],
        )
        numeric = h2_network(topology, params, config).squared_norm
        assert np.isclose(closed, numeric, rtol=1e-8, atol=1e-12)


def test_droop_vs_lyapunov(rng):
    for _ in range(20):
        instance = pytest.random_instance(rng)
        topology = instance["topology"]
        params = SystemParams(
            instance["m"], instance["d"], instance["k_p"], instance["k_omega"]
        )
        closed = h2_droop(
            topology.n_buses, instance["m"], instance["d"], instance["r_r_inv"],
            instance["k_p"], instance["k_omega"],
        )
        numeric = h2_network(topology, params, Droop(instance["r_r_inv"])).squared_norm
        assert np.isclose(closed, numeric, rtol=1e-8, atol=1e-12)


def test_f_matches_h2_idroop(rng):
    for _ in range(20):
        instance = pytest.random_instance(rng)
        lambdas = _lambdas(instance["topology"])
        args = (instance["m"], instance["d"], instance["r_r_inv"])
        noise = (instance["k_p"], instance["k_omega"])
        for delta in [0.0, 0.1, 1.0, 10.0]:
            f = f_of_delta(lambdas, *args, *noise, instance["nu"], delta)
            h2 = h2_idroop(len(lambdas), lambdas, *args, instance["nu"], delta, *noise)
            assert np.isclose(f, h2, rtol=1e-12, atol=1e-14)


def test_droop_limit(rng):
    """
    For large delta iDroop approaches droop control.
    """
    for _ in range(20):
        instance = pytest.random_instance(rng)
        lambdas = _lambdas(instance["topology"])
        f = f_of_delta(
            lambdas, instance["m"], instance["d"], instance["r_r_inv"],
            instance["k_p"], instance["k_omega"], instance["nu"], 1e9,
        )
        droop = h2_droop(
            len(lambdas), instance["m"], instance["d"], instance["r_r_inv"],
            instance["k_p"], instance["k_omega"],
        )
        assert np.isclose(f, droop, rtol=1e-6, atol=1e-12)


@pytest.mark.parametrize("nu", [0.5, 2.0, 5.0])
def test_droop_limit_convergence(nu):
    """
    The distance to the droop norm shrinks as delta grows.
    """
    lambdas = [0.0, 1.0, 3.0]
    args = (lambdas, 1.0, 1.0, 1.0, 10.0, 1.0, nu)
    droop = h2_droop(3, 1.0, 1.0, 1.0, 10.0, 1.0)
    distances = [abs(f_of_delta(*args, delta) - droop) for delta in [1e2, 1e4, 1e6]]
    assert distances[0] > distances[1] > distances[2]


def test_monotonicity(rng):
    """
    The norm increases in delta iff alpha_1 is positive.
    """
    checked = 0
    for _ in range(50):
        instance = pytest.random_instance(rng)
        lambdas = _lambdas(instance["topology"])
        args = (
            lambdas, instance["m"], instance["d"], instance["r_r_inv"],
            instance["k_p"], instance["k_omega"], instance["nu"],
        )
        alpha1 = alpha_coefficients(*args[1:]).alpha1
        if abs(alpha1) <= 1e-6:
            continue
        checked += 1
        for delta in rng.uniform(1e-3, 100.0, size=10):
            step = 0.5 * delta
            difference = f_of_delta(*args, delta + step) - f_of_delta(*args, delta - step)
            assert np.sign(difference) == np.sign(alpha1)
            assert np.sign(f_prime(*args, delta)) == np.sign(alpha1)
        expected = INCREASING if alpha1 > 0 else DECREASING
        assert monotonicity(alpha1) == expected
    assert checked > 0
    assert monotonicity(0.0) == FLAT


def test_f_prime_finite_difference():
    lambdas = np.array([0.0, 1.0, 3.0])
    args = (lambdas, 1.0, 0.5, 1.0, 2.0, 1.0, 3.0)
    delta, step = 0.7, 1e-6
    numeric = (f_of_delta(*args, delta + step) - f_of_delta(*args, delta - step)) / (2 * step)
    assert np.isclose(f_prime(*args, delta), numeric, rtol=1e-6)


def test_beta_coefficients(rng):
    """
    The numerator of alpha_1 is the quadratic with coefficients beta.
    """
    for _ in range(10):
        m, d, r, k_p, k_omega = rng.uniform(0.1, 5.0, size=5)
        beta2, beta1, beta0 = beta_coefficients(d, r, k_p, k_omega)
        for nu in rng.uniform(0.0, 10.0, size=5):
            alpha1 = alpha_coefficients(m, d, r, k_p, k_omega, nu).alpha1
            quadratic = beta2 * nu ** 2 + beta1 * nu + beta0
            assert np.isclose(alpha1 * (d + nu), quadratic, rtol=1e-9, atol=1e-12)
        nu_1, nu_2 = alpha1_roots(d, r, k_p, k_omega)
        assert np.isclose(beta2 * nu_1 ** 2 + beta1 * nu_1 + beta0, 0.0, atol=1e-9)
        assert np.isclose(beta2 * nu_2 ** 2 + beta1 * nu_2 + beta0, 0.0, atol=1e-8)


def test_alpha1_roots_without_noise():
    assert alpha1_roots(1.0, 2.0, 1.0, 0.0) == (2.0, math.inf)
