"""
=============
gridtune.lyap
=============

Numeric computation of the :math:`H_2` norm

.. math::

    \\|G\\|_{H_2}^2 = \\mathrm{tr}(B^T X B), \\qquad A^T X + X A = -C^T C

where :math:`X` is the observability Gramian. The absolute-angle mode of the
network is marginally stable and unobservable from the frequency output, so
it is removed before the Lyapunov equation is solved.

Two independent solvers are provided: :py:func:`solve_lyapunov` based on the
real-Schur (Bartels-Stewart) method in ``scipy.linalg`` and
:py:func:`solve_lyapunov_kronecker`, a dense solve of the vectorized equation
that serves as oracle for small systems.
"""
from dataclasses import dataclass
import logging
import math

import numpy as np
import scipy.linalg as la

from gridtune.closedform import (
    h2_droop,
    h2_droop_mode,
    h2_idroop,
    h2_idroop_modes,
    h2_virtual_inertia,
)
from gridtune.common import InputError, StabilityError
from gridtune.netmodel import (
    Droop,
    VirtualInertia,
    assemble_state_space,
    build_laplacian,
)
from gridtune.spectral import ZERO_TOL, eigendecompose, modal_subsystems

_LOGGER = logging.getLogger(__name__)

HURWITZ_TOL = 1e-9
MAX_KRONECKER_SIZE = 60

CLOSED_FORM = "closed_form"
LYAPUNOV_MODAL = "lyapunov_modal"
LYAPUNOV_FULL = "lyapunov_full"
MONTE_CARLO = "monte_carlo"
METHODS = (CLOSED_FORM, LYAPUNOV_MODAL, LYAPUNOV_FULL, MONTE_CARLO)


@dataclass
class H2Report:
    """
    Result of an :math:`H_2` norm computation.

    Attributes:
        squared_norm: The squared :math:`H_2` norm, possibly ``inf``.
        method: The method used to compute the norm.
        per_mode: The contributions of the modal subsystems or ``None``.
        deflated_modes: The number of zero modes removed before solving.
    """
    squared_norm: float
    method: str
    per_mode: np.ndarray = None
    deflated_modes: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise InputError(f"Unknown H2 method '{self.method}'.")
        if self.squared_norm < 0.0:
            raise InputError("Squared H2 norm must be non-negative.")

    @property
    def norm(self):
        """The :math:`H_2` norm."""
        return math.sqrt(self.squared_norm)


def _check_hurwitz(a, tol):
    if a.size == 0:
        return
    eigenvalues = np.linalg.eigvals(a)
    index = int(np.argmax(eigenvalues.real))
    if eigenvalues[index].real >= -tol:
        raise StabilityError(
            f"Matrix is not Hurwitz; eigenvalue {eigenvalues[index]:.6g} has "
            f"real part >= {-tol:.1g}.",
            eigenvalue=complex(eigenvalues[index]),
        )


def _check_square(a, rhs):
    a = np.asarray(a, dtype=np.float64)
    rhs = np.asarray(rhs, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or rhs.shape != a.shape:
        raise InputError(
            f"Lyapunov equation requires square matrices of equal size, got "
            f"{a.shape} and {rhs.shape}."
        )
    return a, rhs


def lyapunov_residual(a, x, rhs):
    """
    Frobenius norm of :math:`A^T X + X A + RHS`.
    """
    return float(np.linalg.norm(a.T @ x + x @ a + rhs, "fro"))


def solve_lyapunov(a, rhs, tol=HURWITZ_TOL):
    """
    Solve the Lyapunov equation :math:`A^T X + X A + RHS = 0`.

    Args:
        a: Hurwitz matrix of shape ``(N, N)``.
        rhs: Symmetric positive semi-definite matrix of shape ``(N, N)``.
        tol: The spectral abscissa of ``a`` must be below ``-tol``.

    Returns:
        The symmetric solution ``X``.

    Raises:
        StabilityError: If ``a`` is not Hurwitz.
    """
    a, rhs = _check_square(a, rhs)
    _check_hurwitz(a, tol)
    x = la.solve_continuous_lyapunov(a.T, -rhs)
    x = 0.5 * (x + x.T)

    residual = lyapunov_residual(a, x, rhs)
    bound = 1e-8 * (1.0 + np.linalg.norm(rhs, "fro"))
    if residual > bound:
        _LOGGER.warning(
            "Lyapunov residual %.3g exceeds bound %.3g (N = %s).",
            residual, bound, a.shape[0],
        )
    return x


def solve_lyapunov_kronecker(a, rhs, tol=HURWITZ_TOL):
    """
    Solve :math:`A^T X + X A + RHS = 0` by a dense solve of the vectorized
    equation :math:`(I \\otimes A^T + A^T \\otimes I)\\,\\mathrm{vec}(X) =
    -\\mathrm{vec}(RHS)`.

    Only meant for small systems; used to check :py:func:`solve_lyapunov`.
    """
    a, rhs = _check_square(a, rhs)
    n = a.shape[0]
    if n > MAX_KRONECKER_SIZE:
        raise InputError(
            f"Kronecker solver is limited to N <= {MAX_KRONECKER_SIZE}, got {n}."
        )
    _check_hurwitz(a, tol)
    identity = np.eye(n)
    operator = np.kron(identity, a.T) + np.kron(a.T, identity)
    x = np.linalg.solve(operator, -rhs.reshape(-1, order="F"))
    x = x.reshape((n, n), order="F")
    return 0.5 * (x + x.T)


def _trace_norm(b, x):
    return float(np.trace(b.T @ x @ b))


def gramian_entries(subsystem, solver=solve_lyapunov):
    """
    Observability Gramian of a modal subsystem.

    Args:
        subsystem: A ``ModalSubsystem`` with non-zero eigenvalue.

    Returns:
        The full Gramian ``Q`` of the subsystem.
    """
    return solver(subsystem.a, subsystem.c.T @ subsystem.c)


def h2_numeric_modal(subsystems, noise=None, solver=solve_lyapunov):
    """
    Squared :math:`H_2` norm as sum of the norms of the modal subsystems.

    Args:
        subsystems: List of ``ModalSubsystem`` objects, ordered by ascending
            eigenvalue.
        noise: Optional tuple ``(k_p, k_omega)`` replacing the noise
            intensities the subsystems were built with.
        solver: The Lyapunov solver to use.

    Returns:
        ``H2Report`` with the per-mode contributions.

    Raises:
        StabilityError: If a subsystem is not Hurwitz after deflation.
    """
    if noise is not None:
        subsystems = [s.with_noise(*noise) for s in subsystems]

    per_mode = []
    deflated = 0
    for subsystem in subsystems:
        a, b, c = subsystem.system()
        deflated += int(subsystem.deflate)
        if not np.any(b):
            per_mode.append(0.0)
            continue
        x = solver(a, c.T @ c)
        value = _trace_norm(b, x)
        _LOGGER.debug("Mode lambda = %.6g: squared norm %.12g", subsystem.lambda_, value)
        per_mode.append(value)

    per_mode = np.array(per_mode)
    return H2Report(
        math.fsum(per_mode), LYAPUNOV_MODAL, per_mode=per_mode, deflated_modes=deflated
    )


def deflate_zero_mode(model, decomposition=None):
    """
    Remove the absolute-angle mode from a network model.

    The angles are projected onto the orthogonal complement of the zero
    eigenvectors of the Laplacian. The frequency output is unaffected since
    the network coupling only depends on angle differences.

    Args:
        model: ``StateSpaceModel`` of the network.
        decomposition: ``ModalDecomposition`` of the model's Laplacian.
            Computed if not given.

    Returns:
        Tuple ``(a, b, c, n_deflated)`` of the reduced matrices and the
        number of removed modes.
    """
    if decomposition is None:
        decomposition = eigendecompose(model.laplacian)
    zero = decomposition.zero_modes()
    basis = decomposition.u[:, ~zero]

    n_states = model.n_states
    theta = model.block("theta")
    rest = np.ones(n_states, dtype=bool)
    rest[theta] = False
    n_rest = int(rest.sum())

    projection = np.zeros((basis.shape[1] + n_rest, n_states))
    projection[: basis.shape[1], theta] = basis.T
    projection[basis.shape[1]:, rest] = np.eye(n_rest)

    a = projection @ model.a @ projection.T
    b = projection @ model.b
    c = model.c @ projection.T
    n_deflated = int(zero.sum())
    _LOGGER.info("Deflated %s zero mode(s) from %s-state model.", n_deflated, n_states)
    return a, b, c, n_deflated


def h2_numeric_full(model, decomposition=None, solver=solve_lyapunov):
    """
    Squared :math:`H_2` norm of the full, possibly heterogeneous, network
    model.

    Args:
        model: ``StateSpaceModel`` from
            :py:func:`gridtune.netmodel.assemble_state_space`.
        decomposition: Optional ``ModalDecomposition`` of the Laplacian.
        solver: The Lyapunov solver to use.

    Returns:
        ``H2Report``

    Raises:
        StabilityError: If the model is not stable after deflation.
    """
    a, b, c, n_deflated = deflate_zero_mode(model, decomposition)
    if not np.any(b):
        return H2Report(0.0, LYAPUNOV_FULL, deflated_modes=n_deflated)
    x = solver(a, c.T @ c)
    return H2Report(_trace_norm(b, x), LYAPUNOV_FULL, deflated_modes=n_deflated)


def _closed_form_report(topology, params, config, zero_tol):
    m, d, k_p, k_omega = params.scalars()
    n = topology.n_buses
    if isinstance(config, Droop):
        per_mode = np.full(n, h2_droop_mode(m, d, config.r_r_inv, k_p, k_omega))
        return H2Report(h2_droop(n, m, d, config.r_r_inv, k_p, k_omega),
                        CLOSED_FORM, per_mode)
    if isinstance(config, VirtualInertia):
        value = h2_virtual_inertia(n, m, d, config.nu, config.r_r_inv, k_p, k_omega)
        return H2Report(value, CLOSED_FORM)
    decomposition = eigendecompose(build_laplacian(topology), zero_tol)
    lambdas = np.where(decomposition.zero_modes(), 0.0, decomposition.lambdas)
    args = (m, d, config.r_r_inv, config.nu, config.delta, k_p, k_omega)
    return H2Report(
        h2_idroop(n, lambdas, *args), CLOSED_FORM, h2_idroop_modes(lambdas, *args)
    )


def h2_network(
        topology,
        params,
        config,
        method=LYAPUNOV_FULL,
        solver=solve_lyapunov,
        zero_tol=ZERO_TOL,
):
    """
    Squared :math:`H_2` norm of a network with a given controller.

    Virtual inertia with measurement noise short-circuits to ``inf``
    without solving.

    Args:
        topology: The ``NetworkTopology``.
        params: ``SystemParams``.
        config: The controller.
        method: ``"lyapunov_full"``, ``"lyapunov_modal"`` or
            ``"closed_form"``.
        solver: The Lyapunov solver to use.
        zero_tol: Eigenvalues of the Laplacian below this are treated as
            zero.

    Returns:
        ``H2Report``

    Raises:
        HomogeneityError: If ``method`` is ``"closed_form"`` or
            ``"lyapunov_modal"`` and the bus parameters differ.
    """
    if isinstance(config, VirtualInertia) and config.nu > 0.0:
        _, _, _, k_omega = params.vectors(topology.n_buses)
        if np.any(k_omega > 0.0):
            _LOGGER.warning("Virtual inertia with measurement noise: H2 norm is inf.")
            return H2Report(math.inf, method)

    if method == CLOSED_FORM:
        return _closed_form_report(topology, params, config, zero_tol)
    if method == LYAPUNOV_FULL:
        model = assemble_state_space(topology, params, config)
        return h2_numeric_full(model, solver=solver)
    if method == LYAPUNOV_MODAL:
        decomposition = eigendecompose(build_laplacian(topology), zero_tol)
        return h2_numeric_modal(
            modal_subsystems(decomposition, params, config), solver=solver
        )
    raise InputError(f"Unsupported method '{method}' for numeric H2 norm.")
