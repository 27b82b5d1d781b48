import logging
import math

import numpy as np
import pytest

import gridtune.delay
from gridtune.common import DomainError, InputError
from gridtune.delay import (
    BISECTION,
    CLOSED_FORM_DELTA0,
    CLOSED_FORM_DELTA_INF,
    crossover_frequencies,
    delay_independent,
    delay_lower_bound,
    is_stable_with_delay,
    loop_transfer,
    omega_n,
    tau_rob_bisection,
    tau_rob_closed,
    winding_number,
)
from gridtune.netmodel import Droop, IDroop, VirtualInertia


def test_closed_form_references():
    report = tau_rob_closed(0.0, 1.0, 0.0, Droop(1.0))
    assert np.isclose(report.tau_rob, math.pi / 2.0)
    assert report.method == CLOSED_FORM_DELTA_INF

    report = tau_rob_closed(2.0, 1.0, 1.0, IDroop(2.0, 0.0, 1.0))
    assert np.isclose(report.tau_rob, 0.82970, atol=1e-5)
    assert np.isclose(report.crossover_frequency, 2.5243, atol=1e-4)
    assert report.method == CLOSED_FORM_DELTA0


def test_delay_independent_closed_form():
    report = tau_rob_closed(2.0, 1.0, 2.0, IDroop(1.5, 0.0, 1.0))
    assert math.isinf(report.tau_rob)
    assert report.crossover_frequency is None
    assert math.isinf(tau_rob_closed(1.0, 1.0, 1.0, Droop(1.0)).tau_rob)


def test_closed_form_errors():
    with pytest.raises(DomainError):
        tau_rob_closed(2.0, 1.0, 1.0, IDroop(2.0, 1.0, 1.0))
    with pytest.raises(InputError):
        tau_rob_closed(2.0, 1.0, -1.0, Droop(1.0))


def test_lower_bound(rng):
    """
    The lower bound never exceeds the delay margin and is attained for
    d = 0 and lambda_n = 0.
    """
    assert np.isclose(delay_lower_bound(1.0, 1.0, 0.0), math.pi / 2.0)
    assert math.isinf(delay_lower_bound(0.0, 1.0, 0.0))
    for _ in range(50):
        a, m, lambda_n = rng.uniform(0.1, 10.0, size=3)
        d = rng.uniform(0.0, 0.99) * a
        report = tau_rob_closed(lambda_n, m, d, Droop(a))
        assert report.lower_bound <= report.tau_rob * (1.0 + 1e-12)


def test_crossover_phase(rng):
    """
    At the closed-form delay margin the loop gain has unit modulus and phase
    -pi at the crossover frequency.
    """
    for _ in range(20):
        a, m, lambda_n = rng.uniform(0.1, 10.0, size=3)
        d = rng.uniform(0.0, 0.9) * a
        report = tau_rob_closed(lambda_n, m, d, Droop(a))
        loop = loop_transfer(
            lambda_n, m, max(d, 1e-12), Droop(a), report.tau_rob,
            report.crossover_frequency,
        )
        assert np.isclose(abs(loop), 1.0, rtol=1e-6)
        assert np.isclose(abs(np.angle(loop)), math.pi, rtol=1e-6)


def test_omega_n():
    assert np.isclose(omega_n(0.5, 0.0, 1.0), 1.0)
    assert np.isclose(omega_n(1.5, 2.0, 1.0), 2.5243, atol=1e-4)


def test_loop_transfer():
    assert loop_transfer(0.0, 1.0, 1.0, Droop(1.0), 0.0, 0.0) == 1.0
    values = loop_transfer(2.0, 1.0, 1.0, Droop(1.0), 0.5, np.array([0.5, 1.0]))
    assert values.shape == (2,)
    assert loop_transfer(2.0, 1.0, 1.0, IDroop(0.0, 0.0, 1.0), 0.5, 1.0) == 0.0
    with pytest.raises(DomainError):
        loop_transfer(2.0, 1.0, 0.0, Droop(1.0), 0.0, 1.0)
    with pytest.raises(DomainError):
        loop_transfer(2.0, 1.0, 1.0, VirtualInertia(1.0, 1.0), 0.0, 1.0)


def test_winding_number():
    assert winding_number(2.0, 1.0, 1.0, Droop(3.0), 0.0) == 0
    assert winding_number(2.0, 1.0, 1.0, IDroop(2.0, 1.0, 1.0), 0.0) == 0
    assert winding_number(2.0, 1.0, 1.0, Droop(3.0), 1.0) != 0


def test_stability_around_margin():
    lambdas = [0.0, 2.0]
    for config in [Droop(3.0), IDroop(2.0, 0.0, 1.0)]:
        tau_rob = tau_rob_closed(2.0, 1.0, 1.0, config).tau_rob
        assert is_stable_with_delay(lambdas, 1.0, 1.0, config, 0.9 * tau_rob)
        assert not is_stable_with_delay(lambdas, 1.0, 1.0, config, 1.1 * tau_rob)


@pytest.mark.parametrize("config", [Droop(3.0), IDroop(2.0, 0.0, 1.0)])
def test_bisection_matches_closed_form(config):
    """
    The numeric delay margin agrees with the closed form. For the iDroop
    case the critical mode is the one with lambda = 2, the mode at
    lambda = 0 tolerates a delay of 1.209.
    """
    closed = tau_rob_closed(2.0, 1.0, 1.0, config).tau_rob
    report = tau_rob_bisection([0.0, 2.0], 1.0, 1.0, config)
    assert report.method == BISECTION
    assert np.isclose(report.tau_rob, closed, atol=1e-4)


def test_bisection_general_delta():
    config = IDroop(2.0, 1.0, 1.0)
    report = tau_rob_bisection([0.0, 2.0], 1.0, 1.0, config, tol=1e-5)
    assert math.isfinite(report.tau_rob)
    assert report.crossover_frequency is not None
    assert is_stable_with_delay([0.0, 2.0], 1.0, 1.0, config, 0.95 * report.tau_rob)
    assert not is_stable_with_delay([0.0, 2.0], 1.0, 1.0, config, 1.05 * report.tau_rob)


def test_bisection_delay_independent():
    report = tau_rob_bisection([0.0, 2.0], 1.0, 1.0, Droop(0.5))
    assert math.isinf(report.tau_rob)


def test_delay_independent():
    assert delay_independent([0.0, 2.0], 1.0, 1.0, Droop(0.5))
    assert not delay_independent([0.0, 2.0], 1.0, 1.0, Droop(3.0))


def test_crossover_frequencies():
    """
    For droop gain 3 at lambda = 2 the gain crosses one at the roots of
    w^4 - 12 w^2 + 4.
    """
    crossings = crossover_frequencies(2.0, 1.0, 1.0, Droop(3.0))
    expected = [math.sqrt(6.0 - math.sqrt(32.0)), math.sqrt(6.0 + math.sqrt(32.0))]
    assert np.allclose(crossings, expected, rtol=1e-8)
    assert crossover_frequencies(2.0, 1.0, 1.0, Droop(0.5)) == []


@pytest.mark.parametrize("regime", ["delta0", "droop"])
def test_bisection_random(rng, regime):
    """
    Bisection on the Nyquist test reproduces the closed-form delay margin
    on random instances.
    """
    for _ in range(5):
        m = rng.uniform(0.5, 5.0)
        a = rng.uniform(0.5, 5.0)
        d = rng.uniform(0.05, 0.9) * a
        lambdas = np.concatenate([[0.0], rng.uniform(0.1, 10.0, size=2)])
        if regime == "delta0":
            config = IDroop(a, 0.0, rng.uniform(0.1, 5.0))
        else:
            config = Droop(a)
        closed = tau_rob_closed(lambdas.max(), m, d, config).tau_rob
        numeric = tau_rob_bisection(lambdas, m, d, config).tau_rob
        assert np.isclose(numeric, closed, atol=1e-4)


def test_delay_is_all_pass():
    omega = np.geomspace(1e-2, 1e2, 50)
    config = IDroop(2.0, 1.0, 1.0)
    undelayed = loop_transfer(2.0, 1.0, 1.0, config, 0.0, omega)
    delayed = loop_transfer(2.0, 1.0, 1.0, config, 0.3, omega)
    assert np.allclose(np.abs(delayed), np.abs(undelayed))
    assert np.allclose(delayed / undelayed, np.exp(-0.3j * omega))


def test_winding_around_margin():
    """
    A single bus with unit droop and almost no damping loses stability at a
    delay of pi / 2.
    """
    tau = 0.5 * math.pi
    assert winding_number(0.0, 1.0, 1e-6, Droop(1.0), 0.99 * tau) == 0
    assert winding_number(0.0, 1.0, 1e-6, Droop(1.0), 1.01 * tau) >= 1


def test_margin_decreases_with_lambda_n():
    margins = [
        tau_rob_closed(lambda_n, 1.0, 1.0, Droop(3.0)).tau_rob
        for lambda_n in [0.5, 1.0, 2.0, 4.0]
    ]
    assert np.all(np.diff(margins) < 0.0)


def test_margin_decreases_with_nu():
    margins = [
        tau_rob_closed(2.0, 1.0, 1.0, IDroop(nu, 0.0, 1.0)).tau_rob
        for nu in [1.5, 2.0, 3.0, 4.0]
    ]
    assert np.all(np.isfinite(margins))
    assert np.all(np.diff(margins) < 0.0)


def test_instability_persists():
    """
    Beyond the delay margin the network does not regain stability.
    """
    lambdas = [0.0, 2.0]
    config = Droop(3.0)
    tau_rob = tau_rob_closed(2.0, 1.0, 1.0, config).tau_rob
    for factor in [1.05, 1.5, 2.0, 4.0, 8.0, 15.0]:
        assert not is_stable_with_delay(lambdas, 1.0, 1.0, config, factor * tau_rob)


def test_coarse_grid_warning(monkeypatch, caplog):
    """
    Without refinement a long delay leaves phase jumps on the frequency grid,
    which is reported.
    """
    caplog.set_level(logging.WARNING, logger="gridtune.delay")
    winding_number(2.0, 1.0, 1.0, Droop(3.0), 0.0)
    assert "Phase step" not in caplog.text

    monkeypatch.setattr(gridtune.delay, "MAX_REFINEMENTS", 0)
    winding_number(2.0, 1.0, 1.0, Droop(3.0), 500.0)
    assert "Phase step" in caplog.text
