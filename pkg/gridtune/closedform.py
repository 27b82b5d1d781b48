"""
===================
gridtune.closedform
===================

Closed-form expressions for the squared :math:`H_2` norm of the network
model with homogeneous parameters.

With droop control the norm is

.. math::

    \\|G_{DC}\\|_{H_2}^2 = \\frac{n\\left[k_p^2 + (r_r^{-1}k_\\omega)^2\\right]}{2m(d + r_r^{-1})}

and with iDroop each mode :math:`\\lambda_i` of the Laplacian contributes

.. math::

    \\frac{k_p^2 + \\nu^2 k_\\omega^2}{2m(d + \\nu)}
    + \\frac{\\delta^2(\\nu - r_r^{-1})\\left[\\frac{k_p^2 + \\nu^2 k_\\omega^2}{d + \\nu}
    - (\\nu + r_r^{-1})k_\\omega^2\\right]}
    {2\\left[(d + \\nu + m\\delta)\\delta(d + r_r^{-1}) + (d + \\nu)\\lambda_i\\right]}

All sums over modes use compensated summation (``math.fsum``).
"""
from dataclasses import dataclass
import math

import numpy as np

from gridtune.common import InputError

FLAT_TOL = 1e-12

INCREASING = "increasing"
DECREASING = "decreasing"
FLAT = "flat"


def _require(m=1.0, d=1.0, r_r_inv=1.0, nu=0.0, delta=0.0, k_p=0.0, k_omega=0.0):
    if not (m > 0.0 and d > 0.0 and r_r_inv > 0.0):
        raise InputError("The parameters m, d and r_r_inv must be positive.")
    if not (nu >= 0.0 and delta >= 0.0 and k_p >= 0.0 and k_omega >= 0.0):
        raise InputError("The parameters nu, delta, k_p and k_omega must be non-negative.")


def _as_lambdas(lambdas):
    lambdas = np.atleast_1d(np.asarray(lambdas, dtype=np.float64))
    if lambdas.ndim != 1 or lambdas.size == 0:
        raise InputError("Expected a non-empty vector of Laplacian eigenvalues.")
    return lambdas


###############################################################################
# Droop control and virtual inertia
###############################################################################


def h2_droop_mode(m, d, r_r_inv, k_p, k_omega):
    """
    Squared :math:`H_2` norm of a single mode under droop control. The
    value does not depend on the Laplacian eigenvalue.
    """
    _require(m=m, d=d, r_r_inv=r_r_inv, k_p=k_p, k_omega=k_omega)
    return (k_p ** 2 + (r_r_inv * k_omega) ** 2) / (2.0 * m * (d + r_r_inv))


def h2_droop(n, m, d, r_r_inv, k_p, k_omega):
    """
    Squared :math:`H_2` norm of ``n`` buses under droop control.
    """
    return n * h2_droop_mode(m, d, r_r_inv, k_p, k_omega)


def h2_virtual_inertia(n, m, d, nu, r_r_inv, k_p, k_omega):
    """
    Squared :math:`H_2` norm with virtual inertia.

    Infinite whenever the inverters differentiate noisy frequency
    measurements; otherwise the controller acts as added inertia on top of
    droop control.
    """
    _require(m=m, d=d, r_r_inv=r_r_inv, nu=nu, k_p=k_p, k_omega=k_omega)
    if nu > 0.0 and k_omega > 0.0:
        return math.inf
    return h2_droop(n, m + nu, d, r_r_inv, k_p, k_omega)


###############################################################################
# iDroop
###############################################################################


def g_of_nu(n, m, d, k_p, k_omega, nu):
    """
    Squared :math:`H_2` norm of iDroop for :math:`\\delta = 0`:

    .. math::

        g(\\nu) = \\frac{n(k_p^2 + \\nu^2 k_\\omega^2)}{2m(d + \\nu)}
    """
    _require(m=m, d=d, nu=nu, k_p=k_p, k_omega=k_omega)
    return n * (k_p ** 2 + nu ** 2 * k_omega ** 2) / (2.0 * m * (d + nu))


def h2_idroop_mode(lambda_, m, d, r_r_inv, nu, delta, k_p, k_omega):
    """
    Contribution of the mode with Laplacian eigenvalue ``lambda_`` to the
    squared :math:`H_2` norm of iDroop.
    """
    _require(m, d, r_r_inv, nu, delta, k_p, k_omega)
    base = (k_p ** 2 + nu ** 2 * k_omega ** 2) / (2.0 * m * (d + nu))
    if delta == 0.0:
        return base
    if math.isinf(delta):
        return h2_droop_mode(m, d, r_r_inv, k_p, k_omega)
    bracket = (k_p ** 2 + nu ** 2 * k_omega ** 2) / (d + nu) - (nu + r_r_inv) * k_omega ** 2
    numerator = delta ** 2 * (nu - r_r_inv) * bracket
    denominator = 2.0 * (
        (d + nu + m * delta) * delta * (d + r_r_inv) + (d + nu) * lambda_
    )
    return base + numerator / denominator


def h2_idroop_modes(lambdas, m, d, r_r_inv, nu, delta, k_p, k_omega):
    """
    Per-mode contributions to the squared :math:`H_2` norm of iDroop.

    Returns:
        Array with one entry per eigenvalue in ``lambdas``.
    """
    lambdas = _as_lambdas(lambdas)
    return np.array([
        h2_idroop_mode(l, m, d, r_r_inv, nu, delta, k_p, k_omega) for l in lambdas
    ])


def h2_idroop(n, lambdas, m, d, r_r_inv, nu, delta, k_p, k_omega):
    """
    Squared :math:`H_2` norm of the network with iDroop.

    Args:
        n: The number of buses.
        lambdas: The ``n`` eigenvalues of the network Laplacian.
        m: Inertia.
        d: Damping.
        r_r_inv: Droop gain, the DC gain of iDroop.
        nu: High-frequency gain of iDroop.
        delta: Corner frequency of iDroop, ``0`` and ``inf`` are allowed.
        k_p: Power-disturbance intensity.
        k_omega: Frequency-noise intensity.

    Returns:
        The squared norm. For ``delta = 0`` this equals ``g_of_nu`` exactly.
    """
    lambdas = _as_lambdas(lambdas)
    if lambdas.size != n:
        raise InputError(f"Expected {n} eigenvalues, got {lambdas.size}.")
    if delta == 0.0:
        return g_of_nu(n, m, d, k_p, k_omega, nu)
    return math.fsum(h2_idroop_modes(lambdas, m, d, r_r_inv, nu, delta, k_p, k_omega))


###############################################################################
# Dependence on delta
###############################################################################


@dataclass(frozen=True)
class AlphaCoefficients:
    """
    Coefficients of the rational dependence of the iDroop norm on
    :math:`\\delta`:

    .. math::

        f(\\delta) = n\\alpha_5 + \\sum_i \\frac{\\alpha_1\\delta^2}
        {\\alpha_2\\delta^2 + \\alpha_3\\delta + \\alpha_4(\\lambda_i)}
    """
    alpha1: float
    alpha2: float
    alpha3: float
    alpha5: float
    d: float
    nu: float

    def alpha4(self, lambda_):
        """:math:`\\alpha_4(\\lambda) = 2(d + \\nu)\\lambda`"""
        return 2.0 * (self.d + self.nu) * lambda_


def alpha_coefficients(m, d, r_r_inv, k_p, k_omega, nu):
    """
    Compute the coefficients :math:`\\alpha_1, \\dots, \\alpha_5` for a given
    high-frequency gain ``nu``.
    """
    _require(m=m, d=d, r_r_inv=r_r_inv, nu=nu, k_p=k_p, k_omega=k_omega)
    power = k_p ** 2 + nu ** 2 * k_omega ** 2
    alpha1 = (nu - r_r_inv) * (power / (d + nu) - (nu + r_r_inv) * k_omega ** 2)
    alpha2 = 2.0 * m * (d + r_r_inv)
    alpha3 = 2.0 * (d + nu) * (d + r_r_inv)
    alpha5 = power / (2.0 * m * (d + nu))
    return AlphaCoefficients(alpha1, alpha2, alpha3, alpha5, d, nu)


def f_of_delta(lambdas, m, d, r_r_inv, k_p, k_omega, nu, delta):
    """
    The squared iDroop norm as function of :math:`\\delta` for fixed
    :math:`\\nu`, evaluated through the coefficients
    :py:func:`alpha_coefficients`. Identical to :py:func:`h2_idroop`.
    """
    lambdas = _as_lambdas(lambdas)
    _require(delta=delta)
    alphas = alpha_coefficients(m, d, r_r_inv, k_p, k_omega, nu)
    n = lambdas.size
    if delta == 0.0:
        return n * alphas.alpha5
    if math.isinf(delta):
        return math.fsum([alphas.alpha5 + alphas.alpha1 / alphas.alpha2] * n)
    terms = [alphas.alpha5] * n
    for lambda_ in lambdas:
        terms.append(
            alphas.alpha1 * delta ** 2
            / (alphas.alpha2 * delta ** 2 + alphas.alpha3 * delta + alphas.alpha4(lambda_))
        )
    return math.fsum(terms)


def f_prime(lambdas, m, d, r_r_inv, k_p, k_omega, nu, delta):
    """
    Derivative of :py:func:`f_of_delta` with respect to :math:`\\delta`:

    .. math::

        f'(\\delta) = \\sum_i \\alpha_1 \\frac{\\alpha_3\\delta^2 + 2\\alpha_4(\\lambda_i)\\delta}
        {(\\alpha_2\\delta^2 + \\alpha_3\\delta + \\alpha_4(\\lambda_i))^2}
    """
    lambdas = _as_lambdas(lambdas)
    alphas = alpha_coefficients(m, d, r_r_inv, k_p, k_omega, nu)
    terms = []
    for lambda_ in lambdas:
        alpha4 = alphas.alpha4(lambda_)
        denominator = alphas.alpha2 * delta ** 2 + alphas.alpha3 * delta + alpha4
        terms.append(
            alphas.alpha1 * (alphas.alpha3 * delta ** 2 + 2.0 * alpha4 * delta)
            / denominator ** 2
        )
    return math.fsum(terms)


def monotonicity(alpha1, tol=FLAT_TOL):
    """
    Direction in which the iDroop norm changes with growing :math:`\\delta`.

    Returns:
        ``"increasing"`` for positive, ``"decreasing"`` for negative and
        ``"flat"`` for vanishing ``alpha1``.
    """
    if abs(alpha1) <= tol:
        return FLAT
    return INCREASING if alpha1 > 0.0 else DECREASING


###############################################################################
# Dependence on nu
###############################################################################


def beta_coefficients(d, r_r_inv, k_p, k_omega):
    """
    Coefficients of the numerator of :math:`\\alpha_1 = (\\beta_2\\nu^2 +
    \\beta_1\\nu + \\beta_0) / (d + \\nu)`.

    Returns:
        Tuple ``(beta2, beta1, beta0)``.
    """
    beta2 = -k_omega ** 2 * (d + r_r_inv)
    beta1 = k_p ** 2 + k_omega ** 2 * r_r_inv ** 2
    beta0 = -r_r_inv * (k_p ** 2 - k_omega ** 2 * r_r_inv * d)
    return beta2, beta1, beta0


def alpha1_roots(d, r_r_inv, k_p, k_omega):
    """
    Roots :math:`\\nu_1 = r_r^{-1}` and
    :math:`\\nu_2 = ((k_p/k_\\omega)^2 - r_r^{-1}d)/(d + r_r^{-1})` of the
    numerator of :math:`\\alpha_1`. ``nu_2`` is ``inf`` for
    ``k_omega = 0``.
    """
    if k_omega == 0.0:
        return r_r_inv, math.inf
    ratio = (k_p / k_omega) ** 2
    return r_r_inv, (ratio - r_r_inv * d) / (d + r_r_inv)
