"""
============
gridtune.sim
============

Time-domain simulation of the network model.

:py:func:`simulate_sde` estimates the squared :math:`H_2` norm as the
stationary output variance of the model driven by unit white noise, which
provides a Monte-Carlo check of the Lyapunov and closed-form results.
:py:func:`simulate_delayed` simulates the impulse response of the modal
subsystems with delayed frequency measurements and detects divergence.
"""
from dataclasses import dataclass
import logging
import math

import numpy as np
import scipy.linalg as la
import xarray as xr

from gridtune.common import InputError, StabilityError
from gridtune.lyap import MONTE_CARLO, H2Report, deflate_zero_mode
from gridtune.logging import SimulationLogger
from gridtune.netmodel import Droop, IDroop, VirtualInertia

_LOGGER = logging.getLogger(__name__)

DIVERGENCE_NORM = 1e12
STEP_FRACTION = 0.1
BLOCK_SIZE = 10_000
DELTA_SMALL = 1e-3


@dataclass
class SimConfig:
    """
    Settings of a stochastic simulation.

    Attributes:
        dt: The time step.
        horizon: The simulated time.
        burn_in: Initial time excluded from the variance estimate.
        n_trajectories: The number of independent trajectories.
        seed: Seed from which the random streams of all trajectories are
            derived.
    """
    dt: float = 1e-3
    horizon: float = 200.0
    burn_in: float = 50.0
    n_trajectories: int = 64
    seed: int = 0

    def __post_init__(self):
        if not self.dt > 0.0:
            raise InputError("The time step 'dt' must be positive.")
        if not self.horizon > 0.0:
            raise InputError("The 'horizon' must be positive.")
        if not 0.0 <= self.burn_in < self.horizon:
            raise InputError("The 'burn_in' must lie in [0, horizon).")
        if int(self.n_trajectories) < 1:
            raise InputError("At least one trajectory is required.")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise InputError("The 'seed' must be an unsigned 64-bit integer.")
        self.n_trajectories = int(self.n_trajectories)
        self.seed = int(self.seed)

    @property
    def n_steps(self):
        return int(round(self.horizon / self.dt))

    @property
    def n_burn_in(self):
        return int(round(self.burn_in / self.dt))


@dataclass
class SimResult:
    """
    Result of a stochastic simulation.

    Attributes:
        empirical_h2_squared: Estimate of the squared :math:`H_2` norm,
            ``None`` if the simulation diverged.
        std_error: Standard error of the estimate across trajectories.
        diverged: Whether the state norm exceeded the divergence threshold.
        n_samples: The number of time steps averaged per trajectory.
    """
    empirical_h2_squared: float = None
    std_error: float = None
    diverged: bool = False
    n_samples: int = 0

    def to_report(self):
        """
        The estimate as an ``H2Report`` with method ``"monte_carlo"``.

        Raises:
            StabilityError: If the simulation diverged.
        """
        if self.diverged:
            raise StabilityError("The simulation diverged, there is no estimate.")
        return H2Report(self.empirical_h2_squared, MONTE_CARLO)


def trajectory_rng(seed, index):
    """
    Counter-based random generator of one trajectory. The stream only
    depends on the seed and the trajectory index.
    """
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=(index,))
    return np.random.Generator(np.random.Philox(sequence))


def check_step(a, dt):
    """
    Check that the time step resolves the fastest time constant of ``a``.

    Raises:
        InputError: If ``dt`` exceeds a tenth of the fastest time constant.
    """
    if a.size == 0:
        return
    fastest = np.max(np.abs(np.linalg.eigvals(a)))
    if fastest > 0.0 and dt > STEP_FRACTION / fastest:
        raise InputError(
            f"Time step {dt:.3g} exceeds {STEP_FRACTION} times the fastest time "
            f"constant {1.0 / fastest:.3g} of the system."
        )


def simulate_sde(model, config=None, progress=False, block_size=BLOCK_SIZE):
    """
    Estimate the squared :math:`H_2` norm of a network model by
    Euler-Maruyama simulation.

    The model, with its zero mode removed, is driven by independent unit
    white noise on all inputs. After the burn-in the time average of
    :math:`y^Ty` is recorded for every trajectory; the estimate is the mean
    over trajectories.

    Args:
        model: ``StateSpaceModel`` of the network.
        config: ``SimConfig``, defaults are used if ``None``.
        progress: Whether to display a progress bar.
        block_size: Number of time steps for which noise is drawn at once.

    Returns:
        ``SimResult``
    """
    if config is None:
        config = SimConfig()
    a, b, c, _ = deflate_zero_mode(model)
    n_steps, n_burn = config.n_steps, config.n_burn_in
    n_samples = n_steps - n_burn
    if not np.any(b):
        return SimResult(0.0, 0.0, False, n_samples)
    check_step(a, config.dt)

    n_states, n_inputs = b.shape
    k = config.n_trajectories
    rngs = [trajectory_rng(config.seed, i) for i in range(k)]

    phi = np.eye(n_states) + config.dt * a
    gamma = math.sqrt(config.dt) * b
    x = np.zeros((n_states, k))
    energy = np.zeros(k)

    n_blocks = int(math.ceil(n_steps / block_size))
    _LOGGER.info(
        "Simulating %s trajectories of %s steps with dt = %.3g.", k, n_steps, config.dt
    )
    with SimulationLogger(n_blocks, title="SDE", enabled=progress) as logger:
        step = 0
        for _ in range(n_blocks):
            size = min(block_size, n_steps - step)
            noise = np.stack(
                [rng.standard_normal((size, n_inputs)) for rng in rngs], axis=-1
            )
            for i in range(size):
                x = phi @ x + gamma @ noise[i]
                if step + i >= n_burn:
                    y = c @ x
                    energy += np.sum(y * y, axis=0)
            step += size

            if not np.all(np.isfinite(x)) or np.max(np.abs(x)) > DIVERGENCE_NORM:
                _LOGGER.warning("Simulation diverged after %s steps.", step)
                return SimResult(None, None, True, n_samples)
            if step > n_burn:
                logger.block(float(np.mean(energy)) / (step - n_burn))
            else:
                logger.block()

    per_trajectory = energy / n_samples
    estimate = float(np.mean(per_trajectory))
    if k > 1:
        std_error = float(np.std(per_trajectory, ddof=1) / math.sqrt(k))
    else:
        std_error = math.inf
    return SimResult(estimate, std_error, False, n_samples)


###############################################################################
# Delayed simulation
###############################################################################


@dataclass
class DelayedResult:
    """
    Result of a simulation with delayed frequency measurement.

    Attributes:
        diverged: Whether the frequency oscillation grows.
        dt: The time step actually used.
        window_peaks: Peak absolute frequency deviation in consecutive
            windows at the end of the horizon.
        peak: The overall peak absolute frequency deviation.
        trajectory: ``xarray.Dataset`` with the peak absolute frequency
            deviation over time.
    """
    diverged: bool
    dt: float
    window_peaks: np.ndarray
    peak: float
    trajectory: xr.Dataset = None


def _delayed_mode(lambda_, m, d, config):
    """
    Open-loop matrices of one mode and the input vector of the delayed
    frequency measurement.
    """
    if isinstance(config, VirtualInertia) and config.nu == 0.0:
        config = Droop(config.r_r_inv)
    if isinstance(config, IDroop):
        if math.isinf(config.delta):
            config = Droop(config.r_r_inv)
        else:
            delta = config.delta if config.delta > 0.0 else DELTA_SMALL
            nu, r_r_inv = config.nu, config.r_r_inv
            a = np.array([
                [0.0, 1.0, 0.0],
                [-lambda_ / m, -d / m, 1.0 / m],
                [0.0, 0.0, -delta],
            ])
            u = np.array([0.0, -nu / m, delta * (nu - r_r_inv)])
            return a, u
    if not isinstance(config, Droop):
        raise InputError(f"Delayed simulation does not support {config!r}.")
    a = np.array([[0.0, 1.0], [-lambda_ / m, -d / m]])
    u = np.array([0.0, -config.r_r_inv / m])
    return a, u


def _strictly_increasing(peaks):
    peaks = np.log(np.maximum(peaks, np.finfo(np.float64).tiny))
    return bool(np.all(np.diff(peaks) > 0.0))


def simulate_delayed(
        lambdas,
        m,
        d,
        config,
        tau,
        dt=1e-3,
        horizon=200.0,
        window=0.2,
        n_windows=5,
        progress=False
):
    """
    Simulate the modal subsystems with delayed frequency measurement.

    Every mode starts from a unit frequency deviation. The dynamics are
    discretized exactly under zero-order hold and the delayed frequency is
    read from a ring buffer, for which ``dt`` is adjusted to divide ``tau``.

    Args:
        lambdas: The Laplacian eigenvalues.
        m: Inertia.
        d: Damping.
        config: The controller. iDroop with ``delta = 0`` is simulated with
            a small positive ``delta``.
        tau: The measurement delay.
        dt: The nominal time step.
        horizon: The simulated time.
        window: Fraction of the horizon at its end used to detect
            divergence.
        n_windows: Number of sub-windows the end of the horizon is split
            into.
        progress: Whether to display a progress bar.

    Returns:
        ``DelayedResult``. The simulation is considered diverged if the peaks
        of the sub-windows increase strictly.
    """
    if tau < 0.0 or not dt > 0.0 or not horizon > 0.0:
        raise InputError("Expected tau >= 0, dt > 0 and horizon > 0.")
    lambdas = np.atleast_1d(np.asarray(lambdas, dtype=np.float64))
    n_delay = 0
    if tau > 0.0:
        n_delay = int(math.ceil(tau / dt))
        dt = tau / n_delay

    blocks, inputs, omega_index = [], [], []
    offset = 0
    for lambda_ in lambdas:
        a, u = _delayed_mode(float(lambda_), m, d, config)
        blocks.append(a)
        inputs.append(u)
        omega_index.append(offset + 1)
        offset += a.shape[0]
    a = la.block_diag(*blocks)
    b = la.block_diag(*[u[:, np.newaxis] for u in inputs])
    omega_index = np.array(omega_index)
    n_states, n_modes = b.shape

    augmented = np.zeros((n_states + n_modes, n_states + n_modes))
    augmented[:n_states, :n_states] = a
    augmented[:n_states, n_states:] = b
    transition = la.expm(augmented * dt)
    phi = transition[:n_states, :n_states]
    gamma = transition[:n_states, n_states:]

    x = np.zeros(n_states)
    x[omega_index] = 1.0
    buffer = np.zeros((max(n_delay, 1), n_modes))
    pointer = 0

    n_steps = int(round(horizon / dt))
    peaks = np.zeros(n_steps)
    n_blocks = int(math.ceil(n_steps / BLOCK_SIZE))
    diverged_early = False
    with SimulationLogger(n_blocks, title="Delayed", enabled=progress) as logger:
        for step in range(n_steps):
            omega = x[omega_index]
            if n_delay > 0:
                u = buffer[pointer].copy()
                buffer[pointer] = omega
                pointer = (pointer + 1) % n_delay
            else:
                u = omega
            x = phi @ x + gamma @ u
            peaks[step] = np.max(np.abs(x[omega_index]))
            if not np.isfinite(peaks[step]) or peaks[step] > DIVERGENCE_NORM:
                diverged_early = True
                peaks[step:] = np.inf
                break
            if (step + 1) % BLOCK_SIZE == 0:
                logger.block(peaks[step])

    n_window = max(int(window * n_steps) // n_windows, 1)
    tail = peaks[n_steps - n_windows * n_window:]
    window_peaks = tail.reshape(n_windows, n_window).max(axis=1)
    diverged = diverged_early or _strictly_increasing(window_peaks)

    time = dt * np.arange(1, n_steps + 1)
    stride = max(n_steps // 2000, 1)
    trajectory = xr.Dataset(
        {"peak_abs_omega": (("time",), peaks[::stride])},
        coords={"time": time[::stride]},
    )
    trajectory.attrs.update({"tau": tau, "dt": dt})
    _LOGGER.info("Delayed simulation with tau = %.6g: diverged = %s", tau, diverged)
    return DelayedResult(diverged, dt, window_peaks, float(np.max(peaks)), trajectory)
