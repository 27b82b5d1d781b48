"""
==============
gridtune.delay
==============

Robustness of inverter controllers to a delay :math:`\\tau` in the frequency
measurement.

With homogeneous parameters the delayed network decouples into modes with
loop transfer function

.. math::

    L_i(s) = \\frac{s\\,c(s)\\,e^{-s\\tau}}{m s^2 + d s + \\lambda_i}

and the network is stable iff the Nyquist plot of every :math:`L_i` does not
encircle :math:`-1`. For droop control and iDroop with :math:`\\delta = 0`
the controller is a constant gain :math:`a` and the largest delay the
network tolerates has the closed form

.. math::

    \\tau_{rob} = \\frac{\\arccos(-d/a)}{\\omega_n(x)},\\qquad
    x = \\frac{a^2 - d^2}{2m^2}.

For general :math:`\\delta` the delay margin is found by bisection on the
numeric Nyquist test.
"""
from dataclasses import dataclass
import logging
import math

import numpy as np
from scipy.optimize import brentq

from gridtune.common import (
    DomainError,
    InputError,
    MarginalStabilityError,
    StabilityError,
)
from gridtune.netmodel import (
    Droop,
    IDroop,
    VirtualInertia,
    controller_gains,
    controller_transfer,
)

_LOGGER = logging.getLogger(__name__)

ZERO_TOL = 1e-9
D_SUBSTITUTE = 1e-9
MARGINAL_TOL = 1e-9

OMEGA_MIN = 1e-4
OMEGA_MAX = 1e4
N_BASE = 2000
PHASE_STEP = 0.1
BAND_PHASE_STEP = 0.02
DELAY_STEP = 0.5
MAX_PHASE_STEP = 0.5 * math.pi
GAIN_BAND = (0.5, 2.0)
MAX_REFINEMENTS = 40
MAX_POINTS = 1_000_000

TAU_MAX = 1e3
TAU_TOL = 1e-6

CLOSED_FORM_DELTA0 = "closed_form_delta0"
CLOSED_FORM_DELTA_INF = "closed_form_delta_inf"
BISECTION = "bisection"


@dataclass
class DelayReport:
    """
    Result of a delay-robustness computation.

    Attributes:
        tau_rob: The largest delay for which the network is stable, possibly
            ``inf``.
        method: How ``tau_rob`` was obtained.
        crossover_frequency: The frequency at which the critical loop gain
            crosses one, ``None`` if the network is delay independent.
        lower_bound: The lower bound :math:`m\\pi / (2\\sqrt{a^2 + 2m\\lambda_n})`
            for the high-frequency gain :math:`a` of the controller.
    """
    tau_rob: float
    method: str
    crossover_frequency: float = None
    lower_bound: float = None


###############################################################################
# Loop transfer function
###############################################################################


def _loop_controller(config):
    if isinstance(config, VirtualInertia):
        if config.nu > 0.0:
            raise DomainError(
                "The delay test requires a proper controller; virtual inertia "
                "with nu > 0 is not supported."
            )
        return Droop(config.r_r_inv)
    if isinstance(config, IDroop):
        if math.isinf(config.delta):
            return Droop(config.r_r_inv)
        if config.delta == 0.0:
            # c(s) = nu after cancellation of the pole at the origin
            return Droop(config.nu) if config.nu > 0.0 else None
    return config


def loop_transfer(lambda_, m, d, config, tau, omega):
    """
    Evaluate the loop transfer function :math:`L(j\\omega)` of one mode.

    For :math:`\\lambda = 0` the pole-zero cancellation at the origin is
    carried out analytically.

    Args:
        lambda_: The Laplacian eigenvalue of the mode.
        m: Inertia.
        d: Damping, must be positive.
        config: The controller.
        tau: The measurement delay.
        omega: Angular frequency, scalar or array.

    Returns:
        Complex loop gain with the shape of ``omega``.
    """
    if not d > 0.0:
        raise DomainError("The loop transfer function requires d > 0.")
    if tau < 0.0:
        raise InputError("The delay must be non-negative.")
    omega = np.asarray(omega, dtype=np.float64)
    s = 1j * omega
    controller = _loop_controller(config)
    if controller is None:
        return np.zeros_like(s) if s.ndim else 0j
    c = np.asarray(controller_transfer(controller, s))
    delay = np.exp(-s * tau)
    if abs(lambda_) < ZERO_TOL:
        value = c * delay / (m * s + d)
    else:
        value = s * c * delay / (m * s ** 2 + d * s + lambda_)
    if value.ndim == 0:
        return complex(value)
    return value


def _frequency_range(lambda_, m, d, config, tau):
    lower = OMEGA_MIN
    if isinstance(config, IDroop) and 0.0 < config.delta < math.inf:
        lower = min(lower, 1e-2 * config.delta)
    lower = min(lower, 1e-2 * d / m)
    if tau > 0.0:
        lower = min(lower, 1e-2 / tau)
    lower = max(lower, 1e-12)

    dc, hf = controller_gains(_loop_controller(config) or Droop(1.0))
    upper = max(OMEGA_MAX, 10.0 * max(dc, hf) / m, 10.0 * math.sqrt(abs(lambda_) / m))
    for _ in range(10):
        if abs(loop_transfer(lambda_, m, d, config, tau, upper)) < GAIN_BAND[0]:
            break
        upper *= 10.0
    return lower, upper


def _refined_grid(lambda_, m, d, config, tau):
    lower, upper = _frequency_range(lambda_, m, d, config, tau)
    omega = np.geomspace(lower, upper, N_BASE)
    resonance = math.sqrt(abs(lambda_) / m)
    if lower < resonance < upper:
        omega = np.sort(np.append(omega, resonance))
    for _ in range(MAX_REFINEMENTS):
        loop = loop_transfer(lambda_, m, d, config, tau, omega)
        f = 1.0 + loop
        step = np.abs(np.angle(f[1:] / f[:-1]))
        gain = np.abs(loop)
        in_band = (gain >= GAIN_BAND[0]) & (gain <= GAIN_BAND[1])
        in_band = in_band[1:] | in_band[:-1]
        large = gain >= GAIN_BAND[0]
        large = large[1:] | large[:-1]
        loop_step = np.abs(np.angle(loop[1:] / loop[:-1]))
        delay_step = np.diff(omega) * tau
        refine = (
            (step > PHASE_STEP)
            | (in_band & (loop_step > BAND_PHASE_STEP))
            | (large & (delay_step > DELAY_STEP))
        )
        if not np.any(refine):
            break
        if omega.size + refine.sum() > MAX_POINTS:
            _LOGGER.warning(
                "Frequency grid reached %s points before converging.", omega.size
            )
            break
        index = np.flatnonzero(refine)
        midpoints = np.sqrt(omega[index] * omega[index + 1])
        omega = np.sort(np.concatenate([omega, midpoints]))
    return omega


def winding_number(lambda_, m, d, config, tau):
    """
    Number of clockwise encirclements of :math:`-1` by the Nyquist plot of
    the loop transfer function of one mode.

    The phase of :math:`1 + L(j\\omega)` is accumulated over an adaptively
    refined logarithmic frequency grid and mirrored for negative
    frequencies.

    Args:
        lambda_: The Laplacian eigenvalue of the mode.
        m: Inertia.
        d: Damping, must be positive.
        config: The controller.
        tau: The measurement delay.

    Returns:
        The number of encirclements. Zero means the mode is stable.

    Raises:
        MarginalStabilityError: If the Nyquist plot passes through
            :math:`-1`.
    """
    if _loop_controller(config) is None:
        return 0
    omega = _refined_grid(lambda_, m, d, config, tau)
    f = 1.0 + loop_transfer(lambda_, m, d, config, tau, omega)

    distance = np.abs(f)
    index = int(np.argmin(distance))
    if distance[index] < MARGINAL_TOL:
        raise MarginalStabilityError(
            f"Nyquist plot passes through -1 at omega = {omega[index]:.6g}.",
            frequency=float(omega[index]),
        )

    steps = np.angle(f[1:] / f[:-1])
    largest = float(np.max(np.abs(steps)))
    if largest > MAX_PHASE_STEP:
        _LOGGER.warning(
            "Phase step of %.3g rad at lambda = %.6g; the encirclement count "
            "may be unreliable.", largest, lambda_
        )
    change = np.angle(f[0]) + math.fsum(steps) - np.angle(f[-1])
    return -int(round(2.0 * change / (2.0 * math.pi)))


def _unique_lambdas(lambdas):
    lambdas = np.atleast_1d(np.asarray(lambdas, dtype=np.float64))
    if lambdas.size == 0:
        raise InputError("Expected at least one Laplacian eigenvalue.")
    lambdas = np.where(np.abs(lambdas) < ZERO_TOL, 0.0, lambdas)
    return np.unique(np.round(lambdas, 12))[::-1]


def _damping(d):
    if d < 0.0:
        raise InputError("The damping must be non-negative.")
    if d == 0.0:
        _LOGGER.info("Using d = %.1g for the numeric Nyquist test.", D_SUBSTITUTE)
        return D_SUBSTITUTE
    return d


def is_stable_with_delay(lambdas, m, d, config, tau):
    """
    Determine whether the delayed network is stable.

    Args:
        lambdas: The Laplacian eigenvalues.
        m: Inertia.
        d: Damping. ``d = 0`` is replaced by a small positive value.
        config: The controller.
        tau: The measurement delay.

    Returns:
        ``True`` if no mode's Nyquist plot encircles :math:`-1`.
    """
    d = _damping(d)
    for lambda_ in _unique_lambdas(lambdas):
        if winding_number(lambda_, m, d, config, tau) != 0:
            return False
    return True


###############################################################################
# Closed form
###############################################################################


def omega_n(x, lambda_n, m):
    """
    Crossover frequency

    .. math::

        \\omega_n(x) = \\sqrt{\\sqrt{x^2 + 2x\\lambda_n/m} + x + \\lambda_n/m}
    """
    ratio = lambda_n / m
    return math.sqrt(math.sqrt(x ** 2 + 2.0 * x * ratio) + x + ratio)


def delay_lower_bound(a, m, lambda_n):
    """
    Lower bound :math:`m\\pi / (2\\sqrt{a^2 + 2m\\lambda_n})` on the delay
    margin for a constant controller gain ``a``.
    """
    denominator = 2.0 * math.sqrt(a ** 2 + 2.0 * m * lambda_n)
    if denominator == 0.0:
        return math.inf
    return m * math.pi / denominator


def _constant_gain(config):
    if isinstance(config, Droop):
        return config.r_r_inv, CLOSED_FORM_DELTA_INF
    if isinstance(config, VirtualInertia) and config.nu == 0.0:
        return config.r_r_inv, CLOSED_FORM_DELTA_INF
    if isinstance(config, IDroop):
        if math.isinf(config.delta):
            return config.r_r_inv, CLOSED_FORM_DELTA_INF
        if config.delta == 0.0:
            return config.nu, CLOSED_FORM_DELTA0
    raise DomainError(
        f"No closed-form delay margin for {config!r}; use tau_rob_bisection."
    )


def tau_rob_closed(lambda_n, m, d, config):
    """
    Closed-form delay margin for controllers with constant gain.

    Args:
        lambda_n: The largest Laplacian eigenvalue.
        m: Inertia.
        d: Damping, ``d = 0`` is allowed.
        config: ``Droop``, or ``IDroop`` with ``delta`` equal to ``0`` or
            ``inf``.

    Returns:
        ``DelayReport``. The delay margin is ``inf`` if the controller gain
        does not exceed the damping.

    Raises:
        DomainError: For controllers without constant gain.
    """
    if d < 0.0 or m <= 0.0 or lambda_n < 0.0:
        raise InputError("Expected m > 0, d >= 0 and lambda_n >= 0.")
    a, method = _constant_gain(config)
    bound = delay_lower_bound(a, m, lambda_n)
    if a <= d:
        return DelayReport(math.inf, method, lower_bound=bound)
    x = (a ** 2 - d ** 2) / (2.0 * m ** 2)
    frequency = omega_n(x, lambda_n, m)
    tau = math.acos(-d / a) / frequency
    return DelayReport(tau, method, crossover_frequency=frequency, lower_bound=bound)


###############################################################################
# Bisection
###############################################################################


def _gain_grid(lambda_, m):
    omega = np.geomspace(1e-6, 1e6, 20_000)
    if lambda_ > 0.0:
        omega = np.sort(np.append(omega, math.sqrt(lambda_ / m)))
    return omega


def delay_independent(lambdas, m, d, config):
    """
    Whether the network is stable for every delay, that is, whether
    :math:`|L_i(j\\omega)| \\leq 1` for all modes and frequencies.
    """
    d = _damping(d)
    for lambda_ in _unique_lambdas(lambdas):
        gain = np.abs(loop_transfer(lambda_, m, d, config, 0.0, _gain_grid(lambda_, m)))
        if gain.max() > 1.0 + 1e-12:
            return False
    return True


def crossover_frequencies(lambda_, m, d, config):
    """
    Frequencies at which the loop gain of a mode crosses one.

    Returns:
        Sorted list of crossover frequencies, empty if the gain never
        reaches one.
    """
    d = _damping(d)
    omega = _gain_grid(lambda_, m)

    def excess(w):
        return abs(loop_transfer(lambda_, m, d, config, 0.0, w)) - 1.0

    values = np.abs(loop_transfer(lambda_, m, d, config, 0.0, omega)) - 1.0
    changes = np.flatnonzero(np.sign(values[1:]) != np.sign(values[:-1]))
    return [brentq(excess, omega[k], omega[k + 1]) for k in changes]


def tau_rob_bisection(lambdas, m, d, config, tau_max=TAU_MAX, tol=TAU_TOL):
    """
    Delay margin by bisection on the Nyquist test.

    Args:
        lambdas: The Laplacian eigenvalues.
        m: Inertia.
        d: Damping.
        config: The controller.
        tau_max: Largest delay tried before the network is considered delay
            independent.
        tol: Absolute tolerance of the delay margin.

    Returns:
        ``DelayReport``

    Raises:
        StabilityError: If the network is unstable without delay.
    """
    lambdas = _unique_lambdas(lambdas)
    d = _damping(d)
    lambda_n = float(lambdas.max())
    _, hf = controller_gains(_loop_controller(config) or Droop(1.0))
    bound = delay_lower_bound(hf, m, lambda_n) if math.isfinite(hf) else None

    if not is_stable_with_delay(lambdas, m, d, config, 0.0):
        raise StabilityError("The network is unstable without delay.")
    if delay_independent(lambdas, m, d, config):
        _LOGGER.info("Loop gain never exceeds one; network is delay independent.")
        return DelayReport(math.inf, BISECTION, lower_bound=bound)

    lower, upper = 0.0, 1.0
    while is_stable_with_delay(lambdas, m, d, config, upper):
        lower = upper
        upper *= 2.0
        if upper > tau_max:
            if is_stable_with_delay(lambdas, m, d, config, tau_max):
                _LOGGER.warning("No instability found for delays up to %.3g.", tau_max)
                return DelayReport(math.inf, BISECTION, lower_bound=bound)
            upper = tau_max
            break

    while upper - lower > tol:
        middle = 0.5 * (lower + upper)
        try:
            stable = is_stable_with_delay(lambdas, m, d, config, middle)
        except MarginalStabilityError:
            stable = False
        if stable:
            lower = middle
        else:
            upper = middle
        _LOGGER.debug("Delay margin bracket [%.9g, %.9g]", lower, upper)

    crossings = [
        w for lambda_ in lambdas for w in crossover_frequencies(lambda_, m, d, config)
    ]
    crossover = max(crossings) if crossings else None
    return DelayReport(0.5 * (lower + upper), BISECTION, crossover, bound)
