"""
===============
gridtune.tuning
===============

Tuning of the iDroop controller.

The high-frequency gain minimizing the :math:`H_2` norm for
:math:`\\delta = 0` is

.. math::

    \\nu^* = -d + \\sqrt{d^2 + k_p^2/k_\\omega^2}

and iDroop improves on droop control for every finite :math:`\\delta` whenever
:math:`\\nu` lies strictly between the roots of :math:`\\alpha_1`. Whether
iDroop acts as lead or lag compensator depends on the sign of
:math:`(k_p/k_\\omega)^2 - (2R_r^{-1}d + R_r^{-2})`.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import logging
import math

import numpy as np
import xarray as xr

from gridtune.closedform import alpha1_roots, g_of_nu, h2_droop, h2_idroop
from gridtune.common import InputError, UnboundedOptimumError
from gridtune.delay import delay_lower_bound, tau_rob_closed
from gridtune.netmodel import IDroop

_LOGGER = logging.getLogger(__name__)

DEGENERATE_TOL = 1e-12
INTERVAL_SLACK = 1e-12
DELTA_REC = 1e-3
NU_MAX = 100.0

LEAD = "lead"
LAG = "lag"
DEGENERATE = "degenerate"

AXES = ("nu", "delta", "k_p_over_k_omega", "lambda_n")


def optimal_nu(d, k_p, k_omega):
    """
    High-frequency gain minimizing the :math:`H_2` norm of iDroop with
    :math:`\\delta = 0`.

    Raises:
        UnboundedOptimumError: If ``k_omega = 0``, in which case the norm
            decreases monotonically in ``nu``.
    """
    if k_omega == 0.0:
        raise UnboundedOptimumError(
            "Without measurement noise the H2 norm decreases for all nu."
        )
    if d < 0.0 or k_p < 0.0 or k_omega < 0.0:
        raise InputError("Expected d, k_p and k_omega to be non-negative.")
    ratio = (k_p / k_omega) ** 2
    return ratio / (d + math.sqrt(d ** 2 + ratio)) if ratio > 0.0 else 0.0


@dataclass(frozen=True)
class ImprovementInterval:
    """
    An interval of high-frequency gains.

    Attributes:
        lower: The lower end.
        upper: The upper end, possibly ``inf``.
        lower_closed: Whether ``lower`` belongs to the interval.
        upper_closed: Whether ``upper`` belongs to the interval.
    """
    lower: float
    upper: float
    lower_closed: bool = False
    upper_closed: bool = False

    @property
    def is_empty(self):
        if self.lower < self.upper:
            return False
        return not (self.lower == self.upper and self.lower_closed and self.upper_closed)

    def contains(self, nu, slack=INTERVAL_SLACK):
        """
        Whether ``nu`` lies in the interval. Open ends are shrunk by
        ``slack`` relative to their magnitude.
        """
        if self.is_empty:
            return False
        if self.lower_closed:
            above = nu >= self.lower
        else:
            above = nu > self.lower + slack * max(1.0, abs(self.lower))
        if self.upper_closed:
            below = nu <= self.upper
        elif math.isinf(self.upper):
            below = True
        else:
            below = nu < self.upper - slack * max(1.0, abs(self.upper))
        return bool(above and below)

    def __str__(self):
        left = "[" if self.lower_closed else "("
        right = "]" if self.upper_closed else ")"
        return f"{left}{self.lower:.6g}, {self.upper:.6g}{right}"


def improvement_interval(d, r_r_inv, k_p, k_omega):
    """
    Set of high-frequency gains for which iDroop stays below the
    :math:`H_2` norm of droop control for every finite :math:`\\delta`,
    i.e. for which
    :math:`\\alpha_1 > 0`, restricted to :math:`\\nu \\geq 0`.

    Returns:
        ``ImprovementInterval``, empty if the roots of :math:`\\alpha_1`
        coincide.
    """
    if k_omega == 0.0 and k_p == 0.0:
        return ImprovementInterval(r_r_inv, r_r_inv)
    nu_1, nu_2 = alpha1_roots(d, r_r_inv, k_p, k_omega)
    if abs(nu_1 - nu_2) <= DEGENERATE_TOL * max(1.0, nu_1):
        return ImprovementInterval(nu_1, nu_1)
    if nu_1 < nu_2:
        return ImprovementInterval(nu_1, nu_2)
    if nu_2 < 0.0:
        return ImprovementInterval(0.0, nu_1, lower_closed=True)
    return ImprovementInterval(nu_2, nu_1)


def optimum_bracket(d, r_r_inv, k_p, k_omega):
    """
    The interval between :math:`\\nu^*` and :math:`R_r^{-1}`, which is
    contained in the improvement interval and closed at :math:`\\nu^*`.
    """
    nu_star = optimal_nu(d, k_p, k_omega)
    regime = classify_regime(d, r_r_inv, k_p, k_omega)
    if regime == DEGENERATE:
        return ImprovementInterval(r_r_inv, r_r_inv)
    if nu_star < r_r_inv:
        return ImprovementInterval(nu_star, r_r_inv, lower_closed=True)
    return ImprovementInterval(r_r_inv, nu_star, upper_closed=True)


def threshold_gap(d, r_r_inv, k_p, k_omega):
    """
    :math:`(k_p/k_\\omega)^2 - (2R_r^{-1}d + R_r^{-2})`, positive in the
    lead and negative in the lag regime.
    """
    threshold = 2.0 * r_r_inv * d + r_r_inv ** 2
    if k_omega == 0.0:
        return math.inf if k_p > 0.0 else -threshold
    return (k_p / k_omega) ** 2 - threshold


def classify_regime(d, r_r_inv, k_p, k_omega, tol=DEGENERATE_TOL):
    """
    Classify the optimally tuned iDroop controller.

    Returns:
        ``"lead"`` if :math:`\\nu^* > R_r^{-1}`, ``"lag"`` if
        :math:`\\nu^* < R_r^{-1}` and ``"degenerate"`` if the two coincide.
        Without measurement noise the regime is ``"lead"``.
    """
    if k_omega == 0.0:
        return LEAD if k_p > 0.0 else DEGENERATE
    gap = threshold_gap(d, r_r_inv, k_p, k_omega)
    if abs(gap) <= tol * max(1.0, 2.0 * r_r_inv * d + r_r_inv ** 2):
        return DEGENERATE
    return LEAD if gap > 0.0 else LAG


@dataclass
class TuningReport:
    """
    Recommended iDroop tuning.

    Attributes:
        nu_star: The recommended high-frequency gain.
        interval: The ``ImprovementInterval``.
        regime: ``"lead"``, ``"lag"`` or ``"degenerate"``.
        h2_at_optimum: The squared norm at ``nu_star`` and ``delta = 0``.
        h2_droop: The squared norm of droop control.
        delta_rec: The recommended corner frequency.
        h2_at_delta_rec: The squared norm at ``nu_star`` and ``delta_rec``.
        threshold_gap: See :py:func:`threshold_gap`.
        nu_capped: Whether ``nu_star`` was capped because the optimum is
            unbounded.
    """
    nu_star: float
    interval: ImprovementInterval
    regime: str
    h2_at_optimum: float
    h2_droop: float
    delta_rec: float
    h2_at_delta_rec: float
    threshold_gap: float
    nu_capped: bool = False

    def to_dict(self):
        return {
            "nu_star": self.nu_star,
            "interval": [self.interval.lower, self.interval.upper],
            "interval_empty": self.interval.is_empty,
            "regime": self.regime,
            "h2_at_optimum": self.h2_at_optimum,
            "h2_droop": self.h2_droop,
            "delta_rec": self.delta_rec,
            "h2_at_delta_rec": self.h2_at_delta_rec,
            "threshold_gap": self.threshold_gap,
            "nu_capped": self.nu_capped,
        }


def tune(lambdas, m, d, r_r_inv, k_p, k_omega, delta_rec=DELTA_REC, nu_max=NU_MAX):
    """
    Recommend a tuning of iDroop for a network.

    Args:
        lambdas: The Laplacian eigenvalues.
        m: Inertia.
        d: Damping.
        r_r_inv: The droop gain.
        k_p: Power-disturbance intensity.
        k_omega: Frequency-noise intensity.
        delta_rec: The recommended, small corner frequency.
        nu_max: Gain used when the optimum is unbounded.

    Returns:
        ``TuningReport``
    """
    lambdas = np.atleast_1d(np.asarray(lambdas, dtype=np.float64))
    n = lambdas.size
    try:
        nu_star = optimal_nu(d, k_p, k_omega)
        capped = False
        regime = classify_regime(d, r_r_inv, k_p, k_omega)
    except UnboundedOptimumError:
        _LOGGER.warning("Unbounded optimum, capping nu at %.3g.", nu_max)
        nu_star = nu_max
        capped = True
        regime = LEAD

    report = TuningReport(
        nu_star=nu_star,
        interval=improvement_interval(d, r_r_inv, k_p, k_omega),
        regime=regime,
        h2_at_optimum=g_of_nu(n, m, d, k_p, k_omega, nu_star),
        h2_droop=h2_droop(n, m, d, r_r_inv, k_p, k_omega),
        delta_rec=delta_rec,
        h2_at_delta_rec=h2_idroop(n, lambdas, m, d, r_r_inv, nu_star, delta_rec, k_p, k_omega),
        threshold_gap=threshold_gap(d, r_r_inv, k_p, k_omega),
        nu_capped=capped,
    )
    _LOGGER.info(
        "Tuning: nu* = %.6g (%s), H2^2 = %.6g vs. droop %.6g.",
        report.nu_star, report.regime, report.h2_at_optimum, report.h2_droop,
    )
    return report


###############################################################################
# Parameter sweeps
###############################################################################


def _sweep_point(axis, value, lambdas, m, d, r_r_inv, k_p, k_omega, nu, delta):
    if axis == "nu":
        nu = value
    elif axis == "delta":
        delta = value
    elif axis == "k_p_over_k_omega":
        k_p = value * k_omega
    elif axis == "lambda_n":
        lambdas = lambdas * (value / lambdas.max())

    n = lambdas.size
    lambda_n = float(lambdas.max())
    return (
        h2_idroop(n, lambdas, m, d, r_r_inv, nu, delta, k_p, k_omega),
        h2_droop(n, m, d, r_r_inv, k_p, k_omega),
        delay_lower_bound(nu, m, lambda_n),
        tau_rob_closed(lambda_n, m, d, IDroop(nu, 0.0, r_r_inv)).tau_rob,
    )


def sweep(
        axis,
        values,
        lambdas,
        m,
        d,
        r_r_inv,
        k_p,
        k_omega,
        nu,
        delta,
        n_workers=1
):
    """
    Evaluate the closed-form :math:`H_2` norms and delay margins over a
    grid of one parameter.

    Args:
        axis: The swept parameter, one of ``"nu"``, ``"delta"``,
            ``"k_p_over_k_omega"`` and ``"lambda_n"``. Sweeping
            ``k_p_over_k_omega`` keeps ``k_omega`` fixed; sweeping
            ``lambda_n`` scales the Laplacian spectrum.
        values: Strictly monotone grid of values.
        lambdas: The Laplacian eigenvalues.
        m, d, r_r_inv, k_p, k_omega, nu, delta: The fixed parameters.
        n_workers: Number of threads used for the evaluation.

    Returns:
        ``xarray.Dataset`` with variables ``h2_idroop``, ``h2_droop``,
        ``tau_rob_bound`` and ``tau_rob_delta0`` along the swept axis. Rows
        are in the order of ``values``.
    """
    if axis not in AXES:
        raise InputError(f"Unknown sweep axis '{axis}', expected one of {AXES}.")
    values = np.atleast_1d(np.asarray(values, dtype=np.float64))
    if values.size == 0:
        raise InputError("The sweep grid is empty.")
    steps = np.diff(values)
    if not (np.all(steps > 0.0) or np.all(steps < 0.0)):
        raise InputError("The sweep grid must be strictly monotone.")
    lambdas = np.atleast_1d(np.asarray(lambdas, dtype=np.float64))
    if axis == "k_p_over_k_omega" and k_omega == 0.0:
        raise InputError("Sweeping k_p / k_omega requires k_omega > 0.")
    if axis == "lambda_n" and lambdas.max() <= 0.0:
        raise InputError("Sweeping lambda_n requires a network with lines.")

    def evaluate(value):
        return _sweep_point(
            axis, value, lambdas, m, d, r_r_inv, k_p, k_omega, nu, delta
        )

    if n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            rows = list(pool.map(evaluate, values))
    else:
        rows = [evaluate(value) for value in values]
    rows = np.array(rows, dtype=np.float64).reshape(-1, 4)

    names = ("h2_idroop", "h2_droop", "tau_rob_bound", "tau_rob_delta0")
    dataset = xr.Dataset(
        {name: ((axis,), rows[:, k]) for k, name in enumerate(names)},
        coords={axis: values},
    )
    dataset.attrs.update({
        "axis": axis, "m": m, "d": d, "r_r_inv": r_r_inv, "k_p": k_p,
        "k_omega": k_omega, "nu": nu, "delta": delta,
    })
    return dataset
