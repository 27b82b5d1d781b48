"""
=================
gridtune.netmodel
=================

This module provides the building blocks of the linearized power network
model: network topologies and their susceptance-weighted Laplacian, the bus
parameters, the inverter controllers and the closed-loop state-space model.

Each bus :math:`i` follows the swing dynamics

.. math::

    \\dot{\\theta}_i = \\omega_i, \\qquad
    M_i \\dot{\\omega}_i = -D_i \\omega_i - (L_B \\theta)_i + x_i + K_{p,i} w_{p,i}

where :math:`x_i = -c_i(s) (\\omega_i + K_{\\omega, i} w_{\\omega, i})` is the
power injected by the inverter at the bus. Power is expressed in per-unit on a
common base, frequencies in rad/s and time in seconds. No unit conversion is
performed anywhere in the package.
"""
from dataclasses import dataclass, field
import logging
import math

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from gridtune.common import (
    ConstructionError,
    DomainError,
    HomogeneityError,
    InputError,
    UnboundedNoiseError,
)

_LOGGER = logging.getLogger(__name__)

MAX_BUSES = 200


###############################################################################
# Network topology
###############################################################################


class NetworkTopology:
    """
    Buses and susceptance-weighted lines of a power network.

    Attributes:
        n_buses: The number of buses.
        lines: Tuple of ``(i, j, b)`` tuples with ``i < j`` describing a line
            between buses ``i`` and ``j`` with susceptance ``b``.
    """
    def __init__(self, n_buses, lines=()):
        """
        Create a network topology.

        Args:
            n_buses: The number of buses in the network.
            lines: Iterable of ``(i, j, b)`` triples. Bus indices are
                zero-based and the line susceptance ``b`` must be positive.

        Raises:
            ConstructionError: If the description contains self-loops,
                duplicate lines, invalid indices or susceptances, or if
                the resulting graph is not connected.
        """
        n_buses = int(n_buses)
        if n_buses < 1:
            raise ConstructionError("A network needs at least one bus.")
        if n_buses > MAX_BUSES:
            raise ConstructionError(
                f"Networks are limited to {MAX_BUSES} buses, got {n_buses}."
            )
        self.n_buses = n_buses

        normalized = []
        seen = set()
        for line in lines:
            try:
                i, j, b = line
                i, j, b = int(i), int(j), float(b)
            except (TypeError, ValueError):
                raise ConstructionError(
                    f"Lines must be given as (i, j, b) triples, got {line!r}."
                )
            if i == j:
                raise ConstructionError(f"Line ({i}, {j}) is a self-loop.")
            if not (0 <= i < n_buses and 0 <= j < n_buses):
                raise ConstructionError(
                    f"Line ({i}, {j}) references a bus outside of "
                    f"[0, {n_buses - 1}]."
                )
            if not (np.isfinite(b) and b > 0.0):
                raise ConstructionError(
                    f"Susceptance of line ({i}, {j}) must be positive, got {b}."
                )
            key = (min(i, j), max(i, j))
            if key in seen:
                raise ConstructionError(f"Duplicate line between buses {key}.")
            seen.add(key)
            normalized.append((key[0], key[1], b))

        self.lines = tuple(normalized)
        if not self.is_connected():
            raise ConstructionError(
                "The network graph is disconnected. Each connected component "
                "must be analyzed as a separate network."
            )

    @property
    def n_lines(self):
        """The number of lines in the network."""
        return len(self.lines)

    def is_connected(self):
        """
        Whether the graph of the network is connected.
        """
        if self.n_buses == 1:
            return True
        if not self.lines:
            return False
        rows = [i for i, _, _ in self.lines]
        cols = [j for _, j, _ in self.lines]
        adjacency = coo_matrix(
            (np.ones(len(rows)), (rows, cols)), shape=(self.n_buses,) * 2
        )
        n_components, _ = connected_components(adjacency, directed=False)
        return n_components == 1

    def __repr__(self):
        return f"NetworkTopology(n_buses={self.n_buses}, n_lines={self.n_lines})"


def path_network(n_buses, susceptance=1.0):
    """
    Buses connected in a line, i.e. bus ``i`` to bus ``i + 1``.
    """
    lines = [(i, i + 1, susceptance) for i in range(n_buses - 1)]
    return NetworkTopology(n_buses, lines)


def ring_network(n_buses, susceptance=1.0):
    """
    Buses connected in a closed ring. Falls back to a path for fewer than
    three buses.
    """
    if n_buses < 3:
        return path_network(n_buses, susceptance)
    lines = [(i, (i + 1) % n_buses, susceptance) for i in range(n_buses)]
    return NetworkTopology(n_buses, lines)


def complete_network(n_buses, susceptance=1.0):
    """
    Every pair of buses connected by a line.
    """
    lines = [
        (i, j, susceptance) for i in range(n_buses) for j in range(i + 1, n_buses)
    ]
    return NetworkTopology(n_buses, lines)


def star_network(n_buses, susceptance=1.0):
    """
    All buses connected to bus 0.
    """
    lines = [(0, j, susceptance) for j in range(1, n_buses)]
    return NetworkTopology(n_buses, lines)


def build_laplacian(topology):
    """
    Build the susceptance-weighted Laplacian of a network.

    The off-diagonal entries are :math:`-b_{ij}` and the diagonal entries
    are chosen so that every row sums to zero.

    Args:
        topology: The ``NetworkTopology`` describing the network.

    Returns:
        Symmetric, positive semi-definite ``(n, n)`` numpy array.

    Raises:
        ConstructionError: If the network is disconnected.
    """
    if not topology.is_connected():
        raise ConstructionError("Cannot build Laplacian of disconnected network.")
    n = topology.n_buses
    laplacian = np.zeros((n, n))
    for i, j, b in topology.lines:
        laplacian[i, j] -= b
        laplacian[j, i] -= b
    # Diagonal as negative off-diagonal row sum so that rows sum exactly to 0.
    np.fill_diagonal(laplacian, 0.0)
    np.fill_diagonal(laplacian, -laplacian.sum(axis=1))
    return laplacian


###############################################################################
# Bus parameters
###############################################################################


def _as_parameter(name, value, strictly_positive):
    array = np.asarray(value, dtype=np.float64)
    if array.ndim > 1:
        raise InputError(f"Parameter '{name}' must be a scalar or a vector.")
    if not np.all(np.isfinite(array)):
        raise InputError(f"Parameter '{name}' must be finite.")
    if strictly_positive and np.any(array <= 0.0):
        raise InputError(f"Parameter '{name}' must be positive.")
    if not strictly_positive and np.any(array < 0.0):
        raise InputError(f"Parameter '{name}' must be non-negative.")
    if array.ndim == 0:
        return float(array)
    return array


@dataclass(frozen=True)
class SystemParams:
    """
    Per-bus parameters of the network model.

    Each parameter is either a scalar, shared by all buses, or a vector
    with one entry per bus.

    Attributes:
        m: Inertia in s^2 pu.
        d: Damping and load-frequency sensitivity in s pu.
        k_p: Intensity of the power disturbances in pu.
        k_omega: Intensity of the frequency-measurement noise in rad/s.
    """
    m: object = 1.0
    d: object = 1.0
    k_p: object = 1.0
    k_omega: object = 1.0

    def __post_init__(self):
        object.__setattr__(self, "m", _as_parameter("m", self.m, True))
        object.__setattr__(self, "d", _as_parameter("d", self.d, True))
        object.__setattr__(self, "k_p", _as_parameter("k_p", self.k_p, False))
        object.__setattr__(
            self, "k_omega", _as_parameter("k_omega", self.k_omega, False)
        )
        sizes = {np.size(v) for v in self._values() if np.ndim(v) > 0}
        if len(sizes) > 1:
            raise InputError("Per-bus parameter vectors differ in length.")

    def _values(self):
        return (self.m, self.d, self.k_p, self.k_omega)

    @property
    def n_buses(self):
        """Number of buses implied by vector parameters or ``None``."""
        for value in self._values():
            if np.ndim(value) > 0:
                return np.size(value)
        return None

    def is_homogeneous(self):
        """
        Whether all parameters are scalars or constant vectors.
        """
        for value in self._values():
            if np.ndim(value) > 0 and np.any(value != value[0]):
                return False
        return True

    def scalars(self):
        """
        The parameters as scalars.

        Returns:
            Tuple ``(m, d, k_p, k_omega)`` of floats.

        Raises:
            HomogeneityError: If the parameters are not homogeneous.
        """
        if not self.is_homogeneous():
            raise HomogeneityError(
                "This operation requires homogeneous bus parameters."
            )
        return tuple(float(np.ravel(v)[0]) for v in self._values())

    def vectors(self, n_buses):
        """
        The parameters broadcast to per-bus vectors.

        Args:
            n_buses: The number of buses of the network.

        Returns:
            Tuple ``(m, d, k_p, k_omega)`` of arrays of length ``n_buses``.
        """
        if self.n_buses is not None and self.n_buses != n_buses:
            raise ConstructionError(
                f"Parameters are given for {self.n_buses} buses but the "
                f"network has {n_buses}."
            )
        return tuple(
            np.broadcast_to(v, (n_buses,)).astype(np.float64) for v in self._values()
        )

    def bus(self, index):
        """
        Homogeneous parameters of a single bus.
        """
        def pick(v):
            return float(v) if np.ndim(v) == 0 else float(v[index])
        return SystemParams(*[pick(v) for v in self._values()])


###############################################################################
# Controllers
###############################################################################


def _check_gain(name, value, allow_inf=False):
    value = float(value)
    if math.isnan(value) or value < 0.0 or (math.isinf(value) and not allow_inf):
        raise InputError(f"Controller parameter '{name}' must be non-negative.")
    return value


@dataclass(frozen=True)
class Droop:
    """
    Droop control :math:`c(s) = R_r^{-1}`.
    """
    r_r_inv: float

    def __post_init__(self):
        object.__setattr__(self, "r_r_inv", _check_gain("r_r_inv", self.r_r_inv))
        if self.r_r_inv <= 0.0:
            raise InputError("The droop gain 'r_r_inv' must be positive.")

    name = "droop"


@dataclass(frozen=True)
class VirtualInertia:
    """
    Virtual inertia :math:`c(s) = \\nu s + R_r^{-1}`.
    """
    nu: float
    r_r_inv: float

    def __post_init__(self):
        object.__setattr__(self, "nu", _check_gain("nu", self.nu))
        object.__setattr__(self, "r_r_inv", _check_gain("r_r_inv", self.r_r_inv))
        if self.r_r_inv <= 0.0:
            raise InputError("The droop gain 'r_r_inv' must be positive.")

    name = "virtual_inertia"


@dataclass(frozen=True)
class IDroop:
    """
    The iDroop controller

    .. math::

        c(s) = \\frac{\\nu s + \\delta R_r^{-1}}{s + \\delta}

    whose DC gain is the droop gain and whose high-frequency gain is
    :math:`\\nu`. ``delta`` may be ``math.inf`` to represent the droop limit.
    """
    nu: float
    delta: float
    r_r_inv: float

    def __post_init__(self):
        object.__setattr__(self, "nu", _check_gain("nu", self.nu))
        object.__setattr__(
            self, "delta", _check_gain("delta", self.delta, allow_inf=True)
        )
        object.__setattr__(self, "r_r_inv", _check_gain("r_r_inv", self.r_r_inv))
        if self.r_r_inv <= 0.0:
            raise InputError("The droop gain 'r_r_inv' must be positive.")

    name = "idroop"


CONTROLLERS = {"droop": Droop, "virtual_inertia": VirtualInertia, "idroop": IDroop}


def controller_gains(config):
    """
    DC and high-frequency gain of a controller.

    Returns:
        Tuple ``(c(0), lim c(s) for s -> inf)``. The high-frequency gain of
        virtual inertia is infinite.
    """
    if isinstance(config, Droop):
        return config.r_r_inv, config.r_r_inv
    if isinstance(config, VirtualInertia):
        if config.nu == 0.0:
            return config.r_r_inv, config.r_r_inv
        return config.r_r_inv, math.inf
    if isinstance(config, IDroop):
        if math.isinf(config.delta):
            return config.r_r_inv, config.r_r_inv
        return config.r_r_inv, config.nu
    raise InputError(f"Unknown controller {config!r}.")


def controller_transfer(config, s):
    """
    Evaluate the controller transfer function :math:`c(s)`.

    Args:
        config: A ``Droop``, ``VirtualInertia`` or ``IDroop`` controller.
        s: Complex frequency, scalar or array.

    Returns:
        The complex gain :math:`c(s)` with the same shape as ``s``.

    Raises:
        DomainError: If ``s`` is a pole of the iDroop controller.
    """
    s_c = np.asarray(s, dtype=np.complex128)
    if isinstance(config, Droop):
        value = np.full_like(s_c, config.r_r_inv)
    elif isinstance(config, VirtualInertia):
        value = config.nu * s_c + config.r_r_inv
    elif isinstance(config, IDroop):
        if math.isinf(config.delta):
            value = np.full_like(s_c, config.r_r_inv)
        else:
            denominator = s_c + config.delta
            if np.any(denominator == 0.0):
                raise DomainError(
                    f"iDroop is evaluated at its pole s = {-config.delta}."
                )
            value = (config.nu * s_c + config.delta * config.r_r_inv) / denominator
    else:
        raise InputError(f"Unknown controller {config!r}.")
    if value.ndim == 0:
        return complex(value)
    return value


def bus_transfer(params, config, s, bus=0):
    """
    Evaluate the closed-loop bus transfer function

    .. math::

        p_i(s) = (M_i s + D_i)^{-1}\\left(1 + \\frac{c_i(s)}{M_i s + D_i}\\right)^{-1}

    Args:
        params: ``SystemParams`` of the network. Vector parameters are
            indexed with ``bus``.
        config: The inverter controller.
        s: Complex frequency, scalar or array.
        bus: Index of the bus.

    Raises:
        DomainError: If ``s`` is a pole of the swing dynamics, of the
            controller or of the bus transfer function.
    """
    p = params.bus(bus)
    s_c = np.asarray(s, dtype=np.complex128)
    swing = p.m * s_c + p.d
    if np.any(swing == 0.0):
        raise DomainError("Bus transfer evaluated at the pole of the swing dynamics.")
    c = controller_transfer(config, s_c)
    loop = 1.0 + c / swing
    if np.any(loop == 0.0):
        raise DomainError("Bus transfer evaluated at one of its poles.")
    value = 1.0 / swing / loop
    if value.ndim == 0:
        return complex(value)
    return value


###############################################################################
# State-space model
###############################################################################


@dataclass
class StateSpaceModel:
    """
    Closed-loop model :math:`\\dot x = Ax + Bw`, :math:`y = Cx` of the network.

    The state is partitioned in blocks of ``n_buses`` states each:
    bus angles ``theta``, frequencies ``omega`` and, for iDroop, the
    controller states ``z``. The input stacks the power disturbances
    ``w_p`` and the frequency-measurement noise ``w_omega``.

    Attributes:
        a: The system matrix.
        b: The input matrix.
        c: The output matrix selecting the frequencies.
        n_buses: Number of buses.
        blocks: Names of the state blocks.
        inputs: Names of the input blocks.
        controller: The controller the model was assembled for.
        laplacian: The network Laplacian.
    """
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    n_buses: int
    blocks: tuple = ("theta", "omega", "z")
    inputs: tuple = ("w_p", "w_omega")
    controller: object = None
    laplacian: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        n = self.n_buses
        n_states = n * len(self.blocks)
        expected = {
            "a": (n_states, n_states),
            "b": (n_states, n * len(self.inputs)),
            "c": (n, n_states),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ConstructionError(
                    f"Matrix '{name}' has shape {getattr(self, name).shape}, "
                    f"expected {shape}."
                )

    @property
    def n_states(self):
        """The number of states of the model."""
        return self.a.shape[0]

    def block(self, name):
        """
        Slice selecting the states of a given block.
        """
        index = self.blocks.index(name)
        return slice(index * self.n_buses, (index + 1) * self.n_buses)

    def state_labels(self):
        """
        Labels of the individual states, e.g. ``omega_3``.
        """
        return [f"{block}_{i}" for block in self.blocks for i in range(self.n_buses)]

    def eigenvalues(self):
        """Eigenvalues of the system matrix."""
        return np.linalg.eigvals(self.a)

    def spectral_abscissa(self, exclude_zero=False, tol=1e-9):
        """
        Largest real part of the eigenvalues of the system matrix.

        Args:
            exclude_zero: If ``True``, eigenvalues with magnitude below
                ``tol`` are ignored.
            tol: The tolerance used to identify zero eigenvalues.
        """
        eigenvalues = self.eigenvalues()
        if exclude_zero:
            eigenvalues = eigenvalues[np.abs(eigenvalues) >= tol]
        if eigenvalues.size == 0:
            return -np.inf
        return float(np.max(eigenvalues.real))

    def frequency_response(self, omega):
        """
        Evaluate the transfer matrix :math:`C (j\\omega I - A)^{-1} B`.

        Args:
            omega: Angular frequency in rad/s.

        Returns:
            Complex array of shape ``(n_buses, 2 * n_buses)``.
        """
        resolvent = 1j * omega * np.eye(self.n_states) - self.a
        return self.c @ np.linalg.solve(resolvent, self.b)


def _droop_model(laplacian, m, d, k_p, k_omega, r_r_inv, controller):
    n = laplacian.shape[0]
    m_inv = np.diag(1.0 / m)
    zeros = np.zeros((n, n))
    identity = np.eye(n)
    a = np.block([
        [zeros, identity],
        [-m_inv @ laplacian, -m_inv @ np.diag(d + r_r_inv)],
    ])
    b = np.block([
        [zeros, zeros],
        [m_inv @ np.diag(k_p), -r_r_inv * m_inv @ np.diag(k_omega)],
    ])
    c = np.block([[zeros, identity]])
    return StateSpaceModel(
        a, b, c, n,
        blocks=("theta", "omega"),
        controller=controller,
        laplacian=laplacian,
    )


def assemble_state_space(topology, params, config):
    """
    Assemble the closed-loop state-space model of the network.

    For iDroop the realization uses the controller state
    :math:`z = x + K_\\nu \\omega`, which avoids measuring
    :math:`\\dot{\\omega}`:

    .. math::

        A = \\begin{bmatrix} 0 & I & 0 \\\\ -M^{-1}L_B & -M^{-1}(D + K_\\nu) & M^{-1} \\\\
        0 & K_\\delta(K_\\nu - R_r^{-1}) & -K_\\delta \\end{bmatrix},\\quad
        B = \\begin{bmatrix} 0 & 0 \\\\ M^{-1}K_p & -M^{-1}K_\\nu K_\\omega \\\\
        0 & K_\\delta(K_\\nu - R_r^{-1})K_\\omega \\end{bmatrix}

    Droop control (and iDroop with ``delta = inf``) uses the reduction without
    the ``z`` block. Virtual inertia without measurement noise acts as added
    inertia :math:`M + K_\\nu` on top of droop control.

    Args:
        topology: The ``NetworkTopology``.
        params: ``SystemParams``, homogeneous or per bus.
        config: The controller used by all inverters.

    Returns:
        The ``StateSpaceModel``.

    Raises:
        UnboundedNoiseError: For virtual inertia with ``k_omega > 0``.
        DomainError: For iDroop with ``delta = 0``, which has no
            asymptotically stable realization of the controller state.
    """
    laplacian = build_laplacian(topology)
    n = topology.n_buses
    m, d, k_p, k_omega = params.vectors(n)

    if isinstance(config, Droop):
        return _droop_model(laplacian, m, d, k_p, k_omega, config.r_r_inv, config)

    if isinstance(config, VirtualInertia):
        if np.any(k_omega > 0.0) and config.nu > 0.0:
            raise UnboundedNoiseError(
                "Virtual inertia differentiates the measured frequency and "
                "therefore the white measurement noise; its H2 norm is "
                "infinite for k_omega > 0."
            )
        return _droop_model(
            laplacian, m + config.nu, d, k_p, k_omega, config.r_r_inv, config
        )

    if not isinstance(config, IDroop):
        raise InputError(f"Unknown controller {config!r}.")

    if math.isinf(config.delta):
        _LOGGER.info("iDroop with delta = inf is assembled as droop control.")
        return _droop_model(laplacian, m, d, k_p, k_omega, config.r_r_inv, config)
    if config.delta <= 0.0:
        raise DomainError(
            "The state-space realization of iDroop requires delta > 0. "
            "Use the closed-form expressions for delta = 0."
        )

    nu, delta, r_r_inv = config.nu, config.delta, config.r_r_inv
    m_inv = np.diag(1.0 / m)
    zeros = np.zeros((n, n))
    identity = np.eye(n)
    coupling = delta * (nu - r_r_inv)
    a = np.block([
        [zeros, identity, zeros],
        [-m_inv @ laplacian, -m_inv @ np.diag(d + nu), m_inv],
        [zeros, coupling * identity, -delta * identity],
    ])
    b = np.block([
        [zeros, zeros],
        [m_inv @ np.diag(k_p), -nu * m_inv @ np.diag(k_omega)],
        [zeros, coupling * np.diag(k_omega)],
    ])
    c = np.block([[zeros, identity, zeros]])
    return StateSpaceModel(a, b, c, n, controller=config, laplacian=laplacian)
