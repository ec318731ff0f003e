"""
Shared numerical kernels: composite Gauss-Legendre grids, a fixed-step
fourth-order integrator for second-order ODEs and a generalized symmetric
tridiagonal eigensolver.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np
from scipy.linalg import LinAlgError, eigh_tridiagonal

from utils.errors import DivergenceError, NumericalError, ParameterError

logger = logging.getLogger(__name__)

# Gauss-Legendre abscissae per panel accepted by make_grid
SUPPORTED_POINTS_PER_PANEL = (2, 3, 4, 5)
DEFAULT_PANEL_COUNT = 256
DEFAULT_POINTS_PER_PANEL = 4
DEFAULT_IVP_STEPS = 4096
DEFAULT_FD_POINTS = 4096


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Grid:
    """Composite quadrature grid on the open interval (0, domain_length)."""
    domain_length: float
    nodes: np.ndarray
    weights: np.ndarray
    panel_count: int
    points_per_panel: int

    @property
    def size(self) -> int:
        return int(self.nodes.size)

    def matches(self, other: "Grid") -> bool:
        """True when both grids carry the same nodes on the same interval."""
        if self is other:
            return True
        return (
            self.domain_length == other.domain_length
            and self.nodes.shape == other.nodes.shape
            and bool(np.array_equal(self.nodes, other.nodes))
        )


@dataclass(frozen=True, eq=False)
class IvpPath:
    """Samples of (s, s') at uniform abscissae, both endpoints included."""
    x: np.ndarray
    s: np.ndarray
    ds: np.ndarray


def make_grid(domain_length: float, panel_count: int = DEFAULT_PANEL_COUNT,
              points_per_panel: int = DEFAULT_POINTS_PER_PANEL) -> Grid:
    """Build a composite Gauss-Legendre grid with equal panels."""
    if not (domain_length > 0 and math.isfinite(domain_length)):
        raise ParameterError(f"domain_length must be positive, got {domain_length!r}")
    if int(panel_count) != panel_count or panel_count < 1:
        raise ParameterError(f"panel_count must be an integer >= 1, got {panel_count!r}")
    if points_per_panel not in SUPPORTED_POINTS_PER_PANEL:
        raise ParameterError(
            f"points_per_panel must be one of {SUPPORTED_POINTS_PER_PANEL}, got {points_per_panel!r}"
        )

    ref_nodes, ref_weights = np.polynomial.legendre.leggauss(points_per_panel)
    edges = np.linspace(0.0, domain_length, int(panel_count) + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])

    nodes = (mid[:, None] + half[:, None] * ref_nodes[None, :]).ravel()
    weights = (half[:, None] * ref_weights[None, :]).ravel()
    return Grid(
        domain_length=float(domain_length),
        nodes=_frozen(nodes),
        weights=_frozen(weights),
        panel_count=int(panel_count),
        points_per_panel=int(points_per_panel),
    )


def integrate(grid: Grid, samples) -> float:
    """Quadrature of grid samples: the weighted dot product."""
    values = np.asarray(samples, dtype=float)
    if values.shape != grid.nodes.shape:
        raise ParameterError(
            f"samples have shape {values.shape}, grid has {grid.nodes.shape}"
        )
    return float(np.dot(grid.weights, values))


def solve_ivp_2nd_order(f: Callable[[float, float, float], float], x0: float,
                        s0: float, ds0: float, x_end: float,
                        step_count: int) -> IvpPath:
    """Integrate s'' = f(x, s, s') with the classical fourth-order Runge-Kutta rule.

    Args:
        f: acceleration as a function of (x, s, s')
        x0, s0, ds0: initial abscissa, value and slope
        x_end: final abscissa (may lie left of x0)
        step_count: number of uniform steps

    Returns:
        IvpPath with step_count + 1 samples including both endpoints.
    """
    if int(step_count) != step_count or step_count < 1:
        raise ParameterError(f"step_count must be an integer >= 1, got {step_count!r}")
    step_count = int(step_count)

    h = (x_end - x0) / step_count
    x = x0 + h * np.arange(step_count + 1, dtype=float)
    x[-1] = x_end
    s = np.empty(step_count + 1)
    ds = np.empty(step_count + 1)
    s[0] = s0
    ds[0] = ds0
    half = 0.5 * h

    for i in range(step_count):
        xi, si, vi = x[i], s[i], ds[i]
        k1s = vi
        k1v = f(xi, si, vi)
        k2s = vi + half * k1v
        k2v = f(xi + half, si + half * k1s, k2s)
        k3s = vi + half * k2v
        k3v = f(xi + half, si + half * k2s, k3s)
        k4s = vi + h * k3v
        k4v = f(xi + h, si + h * k3s, k4s)

        s_next = si + (h / 6.0) * (k1s + 2.0 * k2s + 2.0 * k3s + k4s)
        ds_next = vi + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        if not (math.isfinite(s_next) and math.isfinite(ds_next)):
            raise DivergenceError("initial-value problem diverged", float(x[i + 1]))
        s[i + 1] = s_next
        ds[i + 1] = ds_next

    return IvpPath(x=_frozen(x), s=_frozen(s), ds=_frozen(ds))


def sym_tridiag_generalized_eig(diag, offdiag, weight_diag,
                                count: int) -> Tuple[np.ndarray, np.ndarray]:
    """Smallest eigenpairs of A v = lambda W v, A symmetric tridiagonal, W diagonal.

    The problem is reduced to a standard one with W^(-1/2) A W^(-1/2).
    Eigenvectors come back as columns, W-orthonormal.
    """
    d = np.asarray(diag, dtype=float)
    e = np.asarray(offdiag, dtype=float)
    w = np.asarray(weight_diag, dtype=float)
    n = d.size
    if w.shape != d.shape or e.size != max(n - 1, 0):
        raise ParameterError(
            f"inconsistent sizes: diag {d.size}, offdiag {e.size}, weight {w.size}"
        )
    if np.any(~(w > 0)):
        raise ParameterError("weight_diag must be strictly positive")
    if int(count) != count or count < 1 or count > n:
        raise ParameterError(f"count must lie in [1, {n}], got {count!r}")

    r = 1.0 / np.sqrt(w)
    try:
        values, vectors = eigh_tridiagonal(
            d * r * r, e * r[:-1] * r[1:], select="i", select_range=(0, int(count) - 1)
        )
    except (LinAlgError, ValueError) as exc:
        raise NumericalError(f"tridiagonal eigensolver failed: {exc}") from exc

    if not np.all(np.isfinite(values)) or np.any(np.diff(values) <= 0.0):
        raise NumericalError("eigenvalues are not finite and strictly increasing")
    return values, vectors * r[:, None]
