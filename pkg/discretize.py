#!/usr/bin/python3
import logging
import threading
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
import scipy.linalg

import abstract
import model
import polyspec
from abstract import DomainError, NumericError, ParameterError

l = logging.getLogger(__name__)

# discretize.py - Chebyshev collocation of the reduced equation: grids, residuals, Jacobians and spectra.
# Copyright (C) 2019 Danya Generalov (https://github.com/danya02)
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <https://www.gnu.org/licenses/>.

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class SpectralGrid:
    N: int
    nodes: np.ndarray = field(repr=False)
    D1: np.ndarray = field(repr=False)
    D2: np.ndarray = field(repr=False)
    bary_weights: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.N + 1


def build_grid(N: int) -> SpectralGrid:
    """
    Chebyshev-Lobatto grid of degree N, nodes cos(j pi / N) for j = 0..N (decreasing, +1 first).

    The differentiation matrices use the trigonometric form of x_i - x_j with the flipping
    trick, and the diagonal is filled so that every row sums to zero.
    """
    if int(N) != N or N < 2:
        raise ParameterError(f'grid degree must be an integer >= 2, got {N}')
    size = N + 1
    j = np.arange(size)
    nodes = np.sin(np.pi * (N - 2 * j) / (2 * N))
    th = j * np.pi / N

    n1, n2 = size // 2, (size + 1) // 2
    T = np.tile(th / 2, (size, 1))
    DX = 2 * np.sin(T.T + T) * np.sin(T - T.T)  # x_i - x_j
    DX[n1:, :] = -np.flipud(np.fliplr(DX[0:n2, :]))
    DX[j, j] = 1.0

    C = scipy.linalg.toeplitz((-1.0) ** j)  # c_i / c_j with the sign pattern
    C[0, :] *= 2
    C[-1, :] *= 2
    C[:, 0] *= 0.5
    C[:, -1] *= 0.5

    Z = 1.0 / DX
    Z[j, j] = 0.0

    D1 = Z * C
    D1[j, j] = -np.sum(D1, axis=1)
    D2 = 2 * Z * (C * np.tile(np.diag(D1), (size, 1)).T - D1)
    D2[j, j] = -np.sum(D2, axis=1)

    bary = (-1.0) ** j
    bary[0] *= 0.5
    bary[-1] *= 0.5
    l.debug('Built Chebyshev-Lobatto grid of degree %d', N)
    return SpectralGrid(N, nodes, D1, D2, bary)


class GridCache(metaclass=abstract.Singleton):
    def __init__(self):
        """Process-wide cache of grids by degree. Grids are never mutated after construction."""
        self.grids = dict()
        self.lock = threading.Lock()

    def get(self, N: int) -> SpectralGrid:
        with self.lock:
            if N not in self.grids:
                l.debug('Grid cache miss for N=%d', N)
                self.grids[N] = build_grid(N)
            return self.grids[N]


def interpolation_matrix(grid: SpectralGrid, targets: ArrayLike) -> np.ndarray:
    """Rows map node values to values of the interpolant at 'targets' (second barycentric formula)."""
    targets = np.atleast_1d(np.asarray(targets, dtype=float))
    if np.any(np.abs(targets) > 1):
        raise DomainError('interpolation target outside [-1, 1]', where=targets[np.abs(targets) > 1])
    diff = targets[:, None] - grid.nodes[None, :]
    hit = np.isclose(diff, 0.0, rtol=0, atol=1e-15)
    diff[hit] = 1.0
    E = grid.bary_weights[None, :] / diff
    rows = hit.any(axis=1)
    E[rows, :] = hit[rows, :].astype(float)
    return E / np.sum(E, axis=1, keepdims=True)


def interpolate(phi: np.ndarray, t: ArrayLike, grid: SpectralGrid) -> ArrayLike:
    """Value of the degree-N interpolant of 'phi' at t; exact at the nodes."""
    values = interpolation_matrix(grid, t) @ np.asarray(phi, dtype=float)
    return float(values[0]) if np.ndim(t) == 0 else values


class DiscreteSystem(abstract.CollocationSystem):
    requires_positive = True

    def __init__(self, params: model.ModelParams, N: int, quad_points: Optional[int] = None):
        """
        The collocated equation L phi + mu(lambda) g(phi) = 0 on a Chebyshev-Lobatto grid.

        L = (1-t^2) D2 - n t D1 row by row; at t = +-1 this reduces to -+n D1, which are
        exactly the regular-limit rows of model.endpoint_residual.
        Weighted inner products interpolate onto a Gauss-Jacobi rule of 'quad_points' nodes.
        """
        super().__init__()
        self._params = params
        self._grid = GridCache().get(N)
        self.quad_points = quad_points or N + 1
        t = self._grid.nodes
        self.operator = (1 - t * t)[:, None] * self._grid.D2 - params.n * t[:, None] * self._grid.D1
        self.rule = polyspec.gauss_jacobi_rule(self.quad_points, params.n)
        E = interpolation_matrix(self._grid, self.rule.nodes)
        self.gram = E.T @ (self.rule.weights[:, None] * E)
        self._basis = dict()
        self._lock = threading.Lock()

    @property
    def grid(self) -> SpectralGrid:
        return self._grid

    @property
    def params(self) -> model.ModelParams:
        return self._params

    def reaction(self, phi: np.ndarray) -> np.ndarray:
        return model.reaction(phi, self._params)

    def reaction_derivative(self, phi: np.ndarray) -> np.ndarray:
        return -model.linearized_potential(np.asarray(phi) + 1, 1.0, self._params)

    def inner(self, a: np.ndarray, b: np.ndarray) -> float:
        return float(a @ self.gram @ b)

    def norm(self, a: np.ndarray) -> float:
        return float(np.sqrt(max(self.inner(a, a), 0.0)))

    def mode(self, k: int) -> np.ndarray:
        """P_{k,n} sampled at the nodes."""
        with self._lock:
            if k not in self._basis:
                self._basis[k] = polyspec.gegenbauer_eval(k, self._params.n, self._grid.nodes)
            return self._basis[k]

    def s_coordinate(self, phi: np.ndarray, k: int) -> float:
        """The projection <phi, P_k>_w / <P_k, P_k>_w."""
        P = self.mode(k)
        return self.inner(phi, P) / self.inner(P, P)

    def check_admissible(self, phi: np.ndarray):
        if not self.requires_positive:
            return
        bad = np.flatnonzero(np.asarray(phi) + 1 <= 0)
        if bad.size:
            raise DomainError(f'u = phi + 1 is not positive at node {bad[0]} (t = {self._grid.nodes[bad[0]]:.6f})',
                              where=int(bad[0]))


class LinearizedSystem(DiscreteSystem):
    """The same collocation with g replaced by its linearization (q-2) phi at phi = 0."""
    requires_positive = False

    def reaction(self, phi: np.ndarray) -> np.ndarray:
        return model.linear_reaction(phi, self._params)

    def reaction_derivative(self, phi: np.ndarray) -> np.ndarray:
        return np.full(np.shape(phi), self._params.q - 2.0)


@dataclass(frozen=True)
class SolutionPoint:
    phi: np.ndarray = field(repr=False)
    lam: float
    s_coord: float
    nodal_count: int
    sigma_min: float
    u_min: float
    arclength: float = 0.0
    dphi_left: float = 0.0
    dphi_right: float = 0.0
    residual_norm: float = 0.0
    n_positive: int = 0

    def __post_init__(self):
        if self.nodal_count < 0:
            raise ParameterError(f'nodal count cannot be negative, got {self.nodal_count}')


def _check_shape(phi, sys: DiscreteSystem):
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (sys.grid.size,):
        raise ParameterError(f'expected {sys.grid.size} node values, got shape {phi.shape}')
    return phi


def assemble_residual(phi: np.ndarray, lam: float, sys: DiscreteSystem) -> np.ndarray:
    phi = _check_shape(phi, sys)
    sys.check_admissible(phi)
    grid, params = sys.grid, sys.params
    dphi = grid.D1 @ phi
    d2phi = grid.D2 @ phi
    react = lambda p, _params: sys.reaction(p)
    out = np.empty_like(phi)
    inner = slice(1, grid.N)
    pt = model.ProfilePoint(grid.nodes[inner], phi[inner], dphi[inner], d2phi[inner])
    out[inner] = model.ode_residual(pt, lam, params, react)
    out[0] = model.endpoint_residual(1, phi[0], dphi[0], lam, params, react)
    out[-1] = model.endpoint_residual(-1, phi[-1], dphi[-1], lam, params, react)
    return out


def assemble_jacobian(phi: np.ndarray, lam: float, sys: DiscreteSystem) -> np.ndarray:
    """Exact derivative of assemble_residual with respect to phi."""
    phi = _check_shape(phi, sys)
    sys.check_admissible(phi)
    J = sys.operator.copy()
    J[np.diag_indices_from(J)] += sys.params.mu(lam) * sys.reaction_derivative(phi)
    return J


def lambda_derivative(phi: np.ndarray, lam: float, sys: DiscreteSystem) -> np.ndarray:
    """Derivative of assemble_residual with respect to lambda: g(phi) / (1 + 1/delta)."""
    phi = _check_shape(phi, sys)
    sys.check_admissible(phi)
    return sys.reaction(phi) / sys.params.scale


def _eigenvalues(A: np.ndarray) -> np.ndarray:
    try:
        return scipy.linalg.eigvals(A)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise NumericError(f'dense eigensolver failed on a {A.shape} matrix') from e


def linear_spectrum(sys: DiscreteSystem, count: int) -> list:
    """The 'count' smallest eigenvalues of -L with the regular endpoint rows; j(j+n-1) in exact arithmetic."""
    if count > sys.grid.N - 1:
        raise ParameterError(f'at most N-1 = {sys.grid.N - 1} eigenvalues are resolved, asked for {count}')
    values = np.sort(np.real(_eigenvalues(-sys.operator)))
    return [float(v) for v in values[:count]]


def sigma_min(J: np.ndarray) -> float:
    """The eigenvalue of J of smallest magnitude, real part with sign."""
    J = np.asarray(J, dtype=float)
    if J.ndim != 2 or J.shape[0] != J.shape[1]:
        raise ParameterError(f'sigma_min needs a square matrix, got shape {J.shape}')
    values = _eigenvalues(J)
    return float(np.real(values[np.argmin(np.abs(values))]))


def inertia(J: np.ndarray) -> int:
    """Number of eigenvalues of J with positive real part."""
    return int(np.count_nonzero(np.real(_eigenvalues(J)) > 0))


def nodal_count(phi: np.ndarray, grid: SpectralGrid, refinement: int = 8) -> int:
    """
    Sign changes of the interpolant on a grid of refinement*N+1 points.
    Samples within 1e-9 ||phi||_inf of zero carry no sign, so a tangential zero is not counted.
    """
    phi = np.asarray(phi, dtype=float)
    scale = np.max(np.abs(phi)) if phi.size else 0.0
    if scale == 0:
        return 0
    tau = 1e-9 * scale
    t = np.linspace(-1.0, 1.0, refinement * grid.N + 1)
    values = interpolate(phi, t, grid)
    signs = np.sign(np.where(np.abs(values) < tau, 0.0, values))
    signs = signs[signs != 0]
    return int(np.count_nonzero(signs[1:] != signs[:-1]))


def solution_point(phi: np.ndarray, lam: float, sys: DiscreteSystem, k: Optional[int] = None,
                   arclength: float = 0.0) -> SolutionPoint:
    """Collects the diagnostics of a profile: residual, nodal count, smallest eigenvalue, inertia, endpoint slopes."""
    phi = _check_shape(phi, sys)
    residual = assemble_residual(phi, lam, sys)
    J = assemble_jacobian(phi, lam, sys)
    values = _eigenvalues(J)
    dphi = sys.grid.D1 @ phi
    return SolutionPoint(phi=phi.copy(),
                         lam=float(lam),
                         s_coord=sys.s_coordinate(phi, k) if k else 0.0,
                         nodal_count=nodal_count(phi, sys.grid),
                         sigma_min=float(np.real(values[np.argmin(np.abs(values))])),
                         u_min=float(np.min(phi) + 1),
                         arclength=float(arclength),
                         dphi_left=float(dphi[-1]),
                         dphi_right=float(dphi[0]),
                         residual_norm=float(np.max(np.abs(residual))),
                         n_positive=int(np.count_nonzero(np.real(values) > 0)))
