"""
Modal bases on (0, pi).

Two families are provided: the analytic sine modes e_k = sqrt(2/pi) sin(kx)
used for the deck, and the cable modes u_k solving
-(H0/xi^2 u')' = lambda xi u with Dirichlet ends, orthonormal in the
xi-weighted inner product. Both are sampled on the quadrature grid of the
cable profile so every downstream integral uses one rule.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.interpolate import CubicSpline

from utils.cable_profile import CableProfile
from utils.errors import NumericalError, ParameterError
from utils.numerics_core import DEFAULT_FD_POINTS, Grid, sym_tridiag_generalized_eig

logger = logging.getLogger(__name__)

DEFAULT_N_MODES = 16
# finite-difference points required per requested mode
FD_POINTS_PER_MODE = 16
SINE_NORM = math.sqrt(2.0 / math.pi)
DOMAIN_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class SineModes:
    """Samples of e_k and its first two derivatives, one row per mode."""
    e: np.ndarray
    de: np.ndarray
    dde: np.ndarray


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    """Sine modes and weighted cable modes sampled on one grid.

    ``lam`` holds the eigenvalues used by the dynamics (Rayleigh-Ritz values in
    the span of the interpolated modes); ``fd_lambda`` holds the raw
    finite-difference eigenvalues. ``weight`` is xi at the nodes, or ones when
    the unit-weight debug hook is active.
    """
    n_modes: int
    profile: CableProfile
    grid: Grid
    lam: np.ndarray
    fd_lambda: np.ndarray
    u: np.ndarray
    du: np.ndarray
    e: np.ndarray
    de: np.ndarray
    dde: np.ndarray
    weight: np.ndarray
    unit_weight: bool
    fd_points: int

    @property
    def wavenumbers(self) -> np.ndarray:
        return np.arange(1, self.n_modes + 1, dtype=float)

    @property
    def sine_projector(self) -> np.ndarray:
        """Rows e_k * w: plain L2 projection onto the sine modes."""
        return self.e * self.grid.weights

    @property
    def cable_projector(self) -> np.ndarray:
        """Rows u_k * w: plain L2 pairing of a load with the cable modes."""
        return self.u * self.grid.weights

    @property
    def weighted_projector(self) -> np.ndarray:
        """Rows u_k * xi * w: projection in the xi-weighted inner product."""
        return self.u * (self.grid.weights * self.weight)


def _check_domain(grid: Grid) -> None:
    if abs(grid.domain_length - math.pi) > DOMAIN_TOLERANCE:
        raise ParameterError(
            f"modal bases live on (0, pi); grid spans (0, {grid.domain_length:.15g})"
        )


def build_sine_basis(n_modes: int, grid: Grid) -> SineModes:
    """Evaluate e_k, e_k' and e_k'' analytically at the grid nodes."""
    if int(n_modes) != n_modes or n_modes < 1:
        raise ParameterError(f"n_modes must be an integer >= 1, got {n_modes!r}")
    _check_domain(grid)
    k = np.arange(1, int(n_modes) + 1, dtype=float)[:, None]
    phase = k * grid.nodes[None, :]
    e = SINE_NORM * np.sin(phase)
    de = SINE_NORM * k * np.cos(phase)
    dde = -(k * k) * e
    return SineModes(e=e, de=de, dde=dde)


def _gram_schmidt(u: np.ndarray, du: np.ndarray, inner_weights: np.ndarray) -> None:
    """Modified Gram-Schmidt in place; derivatives follow their functions."""
    for k in range(u.shape[0]):
        for j in range(k):
            r = np.dot(inner_weights, u[j] * u[k])
            u[k] -= r * u[j]
            du[k] -= r * du[j]
        norm = math.sqrt(np.dot(inner_weights, u[k] * u[k]))
        if not norm > 0:
            raise NumericalError(f"cable mode {k + 1} collapsed during orthonormalization")
        u[k] /= norm
        du[k] /= norm


def solve_weighted_eigenbasis(profile: CableProfile, n_modes: int = DEFAULT_N_MODES,
                              fd_points: int = DEFAULT_FD_POINTS,
                              grid: Optional[Grid] = None,
                              unit_weight: bool = False) -> SpectralBasis:
    """Compute the cable modes of the weighted Sturm-Liouville problem.

    Args:
        profile: cable profile supplying xi (span must be pi)
        n_modes: number of modes
        fd_points: interior points of the finite-difference grid
        grid: quadrature grid; defaults to the profile's grid
        unit_weight: debug hook forcing xi = 1 in the eigenproblem

    Returns:
        SpectralBasis with both mode families sampled on the grid.
    """
    if grid is None:
        grid = profile.grid
    elif not grid.matches(profile.grid):
        raise ParameterError("basis grid differs from the profile grid")
    if int(n_modes) != n_modes or n_modes < 1:
        raise ParameterError(f"n_modes must be an integer >= 1, got {n_modes!r}")
    n_modes = int(n_modes)
    if int(fd_points) != fd_points or fd_points < FD_POINTS_PER_MODE * n_modes:
        raise ParameterError(
            f"fd_points must be >= {FD_POINTS_PER_MODE} * n_modes = "
            f"{FD_POINTS_PER_MODE * n_modes}, got {fd_points!r}"
        )
    fd_points = int(fd_points)
    sine = build_sine_basis(n_modes, grid)

    H0 = profile.params.H0
    L = grid.domain_length
    h = L / (fd_points + 1)
    x_inner = h * np.arange(1, fd_points + 1, dtype=float)
    x_half = h * (np.arange(fd_points + 1, dtype=float) + 0.5)

    if unit_weight:
        coeff_half = np.full(x_half.shape, H0)
        fd_weight = np.ones(fd_points)
        weight = np.ones(grid.size)
    else:
        coeff_half = H0 / profile.xi_at(x_half) ** 2
        fd_weight = profile.xi_at(x_inner)
        weight = profile.xi.copy()

    diag = (coeff_half[:-1] + coeff_half[1:]) / (h * h)
    offdiag = -coeff_half[1:-1] / (h * h)
    fd_lambda, vectors = sym_tridiag_generalized_eig(diag, offdiag, fd_weight, n_modes)

    # discrete W-normalization sums without h; rescale to the continuous norm
    padded = np.zeros((fd_points + 2, n_modes))
    padded[1:-1] = vectors / math.sqrt(h)
    x_full = np.concatenate(([0.0], x_inner, [L]))
    spline = CubicSpline(x_full, padded, axis=0)
    u = np.ascontiguousarray(spline(grid.nodes).T)
    du = np.ascontiguousarray(spline(grid.nodes, 1).T)

    _gram_schmidt(u, du, grid.weights * weight)

    coeff_nodes = H0 / (weight * weight)
    stiffness = (du * (grid.weights * coeff_nodes)) @ du.T
    stiffness = 0.5 * (stiffness + stiffness.T)
    lam, rotation = np.linalg.eigh(stiffness)
    u = rotation.T @ u
    du = rotation.T @ du

    signs = np.where(du[:, 0] < 0.0, -1.0, 1.0)
    u *= signs[:, None]
    du *= signs[:, None]

    if not (np.all(lam > 0) and np.all(np.diff(lam) > 0)):
        raise NumericalError("cable eigenvalues are not positive and strictly increasing")

    for array in (lam, fd_lambda, u, du, sine.e, sine.de, sine.dde, weight):
        array.setflags(write=False)

    logger.debug(
        "Cable modes: n=%d fd_points=%d lambda_1=%.10g lambda_n=%.10g",
        n_modes, fd_points, lam[0], lam[-1],
    )
    return SpectralBasis(
        n_modes=n_modes,
        profile=profile,
        grid=grid,
        lam=lam,
        fd_lambda=fd_lambda,
        u=u,
        du=du,
        e=sine.e,
        de=sine.de,
        dde=sine.dde,
        weight=weight,
        unit_weight=bool(unit_weight),
        fd_points=fd_points,
    )


def project(samples, basis: SpectralBasis, inner: str = "plain") -> np.ndarray:
    """Modal coefficients of grid samples.

    inner="plain" pairs with e_k in L2; inner="weighted" pairs with u_k in the
    xi-weighted inner product.
    """
    values = np.asarray(samples, dtype=float)
    if values.shape != basis.grid.nodes.shape:
        raise ParameterError(
            f"samples have shape {values.shape}, grid has {basis.grid.nodes.shape}"
        )
    if inner == "plain":
        return basis.sine_projector @ values
    if inner == "weighted":
        return basis.weighted_projector @ values
    raise ParameterError(f"inner must be 'plain' or 'weighted', got {inner!r}")


def reconstruct(coeffs, basis: SpectralBasis, which: str = "sine",
                derivative: int = 0) -> np.ndarray:
    """Grid samples of a modal expansion (or of its derivative)."""
    c = np.asarray(coeffs, dtype=float)
    if c.shape != (basis.n_modes,):
        raise ParameterError(f"expected {basis.n_modes} coefficients, got shape {c.shape}")
    if which == "sine":
        rows = (basis.e, basis.de, basis.dde)
    elif which == "weighted":
        rows = (basis.u, basis.du)
    else:
        raise ParameterError(f"which must be 'sine' or 'weighted', got {which!r}")
    if derivative not in (0, 1, 2):
        raise ParameterError(f"derivative must be 0, 1 or 2, got {derivative!r}")
    if derivative >= len(rows):
        raise ParameterError("second derivatives are only stored for the sine modes")
    return c @ rows[derivative]


def basis_tables(basis: SpectralBasis) -> Tuple[pd.DataFrame, pd.DataFrame, List[float]]:
    """CSV tables for both bases plus the eigenvalue list."""
    labels = range(1, basis.n_modes + 1)
    u_table = pd.DataFrame({"x": basis.grid.nodes})
    e_table = pd.DataFrame({"x": basis.grid.nodes})
    u_table = pd.concat(
        [u_table, pd.DataFrame(basis.u.T, columns=[f"u_{k}" for k in labels])], axis=1
    )
    e_table = pd.concat(
        [e_table, pd.DataFrame(basis.e.T, columns=[f"e_{k}" for k in labels])], axis=1
    )
    return u_table, e_table, [float(value) for value in basis.lam]
