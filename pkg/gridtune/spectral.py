"""
=================
gridtune.spectral
=================

Modal decomposition of the network model. With homogeneous bus parameters
the orthonormal eigenvectors :math:`U` of the Laplacian
:math:`L_B = U \\Gamma U^T` decouple the network model into ``n`` independent
subsystems, one per Laplacian eigenvalue :math:`\\lambda_i`. Since
:math:`U` is orthonormal, the squared :math:`H_2` norm of the network is the
sum of the squared norms of the subsystems.
"""
from dataclasses import dataclass, field, replace
import logging
import math

import numpy as np
import scipy.linalg as la

from gridtune.common import InputError, UnboundedNoiseError
from gridtune.netmodel import Droop, IDroop, VirtualInertia

_LOGGER = logging.getLogger(__name__)

ZERO_TOL = 1e-9
SYMMETRY_TOL = 1e-9


@dataclass
class ModalDecomposition:
    """
    Eigendecomposition :math:`L_B = U \\Gamma U^T` of a network Laplacian.

    Attributes:
        lambdas: The eigenvalues in ascending order.
        u: Orthonormal matrix whose columns are the eigenvectors.
        zero_tol: Tolerance below which an eigenvalue is considered zero.
    """
    lambdas: np.ndarray
    u: np.ndarray
    zero_tol: float = ZERO_TOL

    @property
    def n_buses(self):
        return self.lambdas.size

    def zero_modes(self):
        """
        Boolean mask of the eigenvalues considered zero.
        """
        return np.abs(self.lambdas) < self.zero_tol

    def reconstruct(self):
        """The Laplacian :math:`U \\Gamma U^T`."""
        return (self.u * self.lambdas) @ self.u.T


def eigendecompose(laplacian, zero_tol=ZERO_TOL):
    """
    Diagonalize a network Laplacian.

    The eigenvectors are made unique up to the basis of repeated eigenvalues
    by requiring the first non-zero component of each eigenvector to be
    positive.

    Args:
        laplacian: Symmetric positive semi-definite matrix.
        zero_tol: Absolute tolerance used to identify zero eigenvalues.

    Returns:
        A ``ModalDecomposition`` with eigenvalues sorted in ascending order.

    Raises:
        InputError: If the matrix is not square or not symmetric.
    """
    laplacian = np.asarray(laplacian, dtype=np.float64)
    if laplacian.ndim != 2 or laplacian.shape[0] != laplacian.shape[1]:
        raise InputError("The Laplacian must be a square matrix.")
    asymmetry = np.max(np.abs(laplacian - laplacian.T)) if laplacian.size else 0.0
    if asymmetry > SYMMETRY_TOL:
        raise InputError(
            f"The Laplacian is not symmetric (max. deviation {asymmetry:.3g})."
        )
    laplacian = 0.5 * (laplacian + laplacian.T)
    lambdas, u = la.eigh(laplacian)

    order = np.argsort(lambdas, kind="stable")
    lambdas = lambdas[order]
    u = u[:, order]

    for k in range(u.shape[1]):
        column = u[:, k]
        nonzero = np.flatnonzero(np.abs(column) > 1e-12)
        if nonzero.size and column[nonzero[0]] < 0.0:
            u[:, k] = -column

    if lambdas.size and lambdas[0] < -zero_tol:
        _LOGGER.warning(
            "Smallest Laplacian eigenvalue %.3g is negative beyond tolerance.",
            lambdas[0],
        )
    return ModalDecomposition(lambdas, u, zero_tol)


def algebraic_connectivity(decomposition):
    """
    The second-smallest Laplacian eigenvalue, which is positive iff the
    network is connected.
    """
    if decomposition.n_buses < 2:
        return 0.0
    return float(decomposition.lambdas[1])


@dataclass
class ModalSubsystem:
    """
    One of the decoupled subsystems :math:`(A_i, B_i, C_i)` of the network
    model.

    For iDroop the state is :math:`(\\theta_i', \\omega_i', z_i')` with

    .. math::

        A_i = \\begin{bmatrix} 0 & 1 & 0 \\\\ -\\lambda_i/m & -(d + \\nu)/m & 1/m \\\\
        0 & \\delta(\\nu - r_r^{-1}) & -\\delta \\end{bmatrix},\\quad
        B_i = \\begin{bmatrix} 0 & 0 \\\\ k_p/m & -\\nu k_\\omega/m \\\\
        0 & \\delta(\\nu - r_r^{-1})k_\\omega \\end{bmatrix}

    For droop control the ``z`` state is absent.

    Attributes:
        lambda_: The Laplacian eigenvalue of the mode.
        a: The system matrix.
        b: The input matrix including the noise intensities.
        c: The output matrix.
        deflate: ``True`` for the zero mode whose angle state is
            unobservable and must be removed before Lyapunov solves.
        controller: The controller.
        params: Tuple ``(m, d, k_p, k_omega)`` the matrices were built from.
    """
    lambda_: float
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    deflate: bool
    controller: object = None
    params: tuple = field(default=None, repr=False)

    def reduced(self):
        """
        The subsystem without the angle state.

        Returns:
            Tuple ``(a, b, c)`` of the reduced matrices.
        """
        return self.a[1:, 1:], self.b[1:], self.c[:, 1:]

    def system(self):
        """
        The matrices to use for the norm computation: reduced for the zero
        mode, full otherwise.
        """
        if self.deflate:
            return self.reduced()
        return self.a, self.b, self.c

    def with_noise(self, k_p, k_omega):
        """
        Copy of the subsystem with different noise intensities.
        """
        m, d, _, _ = self.params
        a, b, c = _modal_matrices(self.lambda_, m, d, k_p, k_omega, self.controller)
        return replace(self, a=a, b=b, c=c, params=(m, d, k_p, k_omega))


def _modal_matrices(lambda_, m, d, k_p, k_omega, config):
    if isinstance(config, VirtualInertia):
        if config.nu > 0.0 and k_omega > 0.0:
            raise UnboundedNoiseError(
                "Virtual inertia has infinite H2 norm for k_omega > 0."
            )
        m = m + config.nu
        config = Droop(config.r_r_inv)
    if isinstance(config, IDroop) and math.isinf(config.delta):
        config = Droop(config.r_r_inv)

    if isinstance(config, Droop):
        r_r_inv = config.r_r_inv
        a = np.array([
            [0.0, 1.0],
            [-lambda_ / m, -(d + r_r_inv) / m],
        ])
        b = np.array([
            [0.0, 0.0],
            [k_p / m, -r_r_inv * k_omega / m],
        ])
        c = np.array([[0.0, 1.0]])
        return a, b, c

    if not isinstance(config, IDroop):
        raise InputError(f"Unknown controller {config!r}.")

    nu, delta, r_r_inv = config.nu, config.delta, config.r_r_inv
    coupling = delta * (nu - r_r_inv)
    a = np.array([
        [0.0, 1.0, 0.0],
        [-lambda_ / m, -(d + nu) / m, 1.0 / m],
        [0.0, coupling, -delta],
    ])
    b = np.array([
        [0.0, 0.0],
        [k_p / m, -nu * k_omega / m],
        [0.0, coupling * k_omega],
    ])
    c = np.array([[0.0, 1.0, 0.0]])
    return a, b, c


def modal_subsystems(decomposition, params, config):
    """
    Decouple the network model into one subsystem per Laplacian eigenvalue.

    Args:
        decomposition: ``ModalDecomposition`` of the network Laplacian.
        params: Homogeneous ``SystemParams``.
        config: The controller, ``IDroop`` or ``Droop``.

    Returns:
        List of ``ModalSubsystem`` objects ordered by ascending eigenvalue.
        The zero mode is flagged for deflation and uses :math:`\\lambda = 0`
        exactly.

    Raises:
        HomogeneityError: If the parameters are heterogeneous.
    """
    m, d, k_p, k_omega = params.scalars()
    zero = decomposition.zero_modes()
    subsystems = []
    for lambda_, is_zero in zip(decomposition.lambdas, zero):
        lambda_ = 0.0 if is_zero else float(lambda_)
        a, b, c = _modal_matrices(lambda_, m, d, k_p, k_omega, config)
        subsystems.append(
            ModalSubsystem(
                lambda_, a, b, c, bool(is_zero),
                controller=config,
                params=(m, d, k_p, k_omega),
            )
        )
    return subsystems
