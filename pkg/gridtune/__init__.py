r"""
========
gridtune
========

The gridtune package builds linear models of power networks in which
synchronous generators (swing dynamics coupled through the susceptance-weighted
network Laplacian) share the grid with frequency-controlled inverters, and
evaluates inverter controllers on three criteria:

* :math:`H_2` performance under power disturbances and frequency-measurement
  noise (:py:mod:`gridtune.closedform`, :py:mod:`gridtune.lyap`,
  :py:mod:`gridtune.sim`),
* optimal tuning of the iDroop controller (:py:mod:`gridtune.tuning`),
* robustness to measurement delay (:py:mod:`gridtune.delay`).

Each quantity is computed by at least two independent methods. Units are
per-unit power on a common base, rad/s for frequencies and seconds for time.
"""
import logging as _logging
import os

from rich.logging import RichHandler
from gridtune.netmodel import (
    NetworkTopology,
    SystemParams,
    Droop,
    VirtualInertia,
    IDroop,
    StateSpaceModel,
    build_laplacian,
    controller_transfer,
    bus_transfer,
    assemble_state_space,
)
from gridtune.spectral import eigendecompose, modal_subsystems
from gridtune.lyap import solve_lyapunov, h2_numeric_modal, h2_numeric_full
from gridtune.closedform import h2_droop, h2_idroop, g_of_nu, f_of_delta
from gridtune.tuning import optimal_nu, improvement_interval, classify_regime, tune
from gridtune.delay import (
    winding_number,
    is_stable_with_delay,
    tau_rob_closed,
    tau_rob_bisection,
)

_LOG_LEVEL = os.environ.get("GRIDTUNE_LOG_LEVEL", "WARNING").upper()
_logging.basicConfig(
    level=_LOG_LEVEL, format="%(message)s", datefmt="[%X]", handlers=[RichHandler()]
)
