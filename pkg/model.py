#!/usr/bin/python3
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

import polyspec
from abstract import DomainError, ParameterError

l = logging.getLogger(__name__)

# model.py - Problem constants, the reduced ODE on [-1, 1] and the closed forms attached to it.
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


def _exponent_limit(n: int) -> float:
    return math.inf if n == 2 else (n + 2) / (n - 2)


@dataclass(frozen=True)
class ModelParams:
    n: int
    delta: float
    q: float
    lam: Optional[float] = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ParameterError(f'n must be an integer >= 2, got {self.n}')
        if not self.delta > 0:
            raise ParameterError(f'delta must be positive, got {self.delta}')
        q_f = _exponent_limit(self.n)
        if not 2 < self.q < q_f:
            raise ParameterError(f'q must lie in (2, q_f) with q_f = {q_f}, got {self.q}')
        if self.lam is not None and not self.lam > 0:
            raise ParameterError(f'lambda must be positive, got {self.lam}')

    @property
    def scale(self) -> float:
        """1 + 1/delta, the factor relating Delta_G on invariant functions to the reduced operator."""
        return 1 + 1 / self.delta

    def mu(self, lam: float) -> float:
        """Coefficient of the reaction term in the reduced equation: lambda / (1 + 1/delta)."""
        return lam / self.scale


@dataclass(frozen=True)
class DerivedConstants:
    q_f: float
    p_2n: float
    a_2n: float
    q: float
    delta: float

    def c_factor(self, lam: float) -> float:
        """lambda (q-2) / (1 + 1/delta); equals k(k+n-1) exactly at lambda_k."""
        return lam * (self.q - 2) / (1 + 1 / self.delta)


@dataclass(frozen=True)
class ProfilePoint:
    t: ArrayLike
    phi: ArrayLike
    dphi: ArrayLike
    d2phi: ArrayLike

    def __post_init__(self):
        if np.any(np.abs(self.t) > 1):
            raise DomainError('profile abscissa outside [-1, 1]', where=self.t)


def derived_constants(params: ModelParams) -> DerivedConstants:
    n = params.n
    return DerivedConstants(q_f=_exponent_limit(n),
                            p_2n=(2 * n + 2) / (2 * n - 2),
                            a_2n=4 * (2 * n - 1) / (2 * n - 2),
                            q=params.q,
                            delta=params.delta)


def criticality(params: ModelParams) -> str:
    """Position of q-1 against the critical exponent p_2n of the 2n-dimensional product."""
    p_2n = derived_constants(params).p_2n
    if math.isclose(params.q - 1, p_2n, rel_tol=1e-12):
        return 'critical'
    return 'subcritical' if params.q - 1 < p_2n else 'supercritical'


def lambda_k(k: int, params: ModelParams) -> float:
    """The k-th bifurcation value k(k+n-1)(1+1/delta)/(q-2)."""
    if k < 0:
        raise ParameterError(f'mode index must be nonnegative, got {k}')
    if params.q <= 2:
        raise ParameterError(f'q must exceed 2, got {params.q}')
    return k * (k + params.n - 1) * params.scale / (params.q - 2)


def yamabe_lambda(n: int, delta: float) -> float:
    """The lambda for which the equation is the Yamabe equation of (S^n x S^n, G_delta)."""
    if n < 2 or not delta > 0:
        raise ParameterError(f'need n >= 2 and delta > 0, got n={n}, delta={delta}')
    a_2n = 4 * (2 * n - 1) / (2 * n - 2)
    return n * (n - 1) * (1 + 1 / delta) / a_2n


def shifted_power(phi: ArrayLike, q: float) -> ArrayLike:
    """(phi + 1)^(q-1), real-valued. Non-integer exponents need phi > -1."""
    u = np.asarray(phi, dtype=float) + 1
    exponent = q - 1
    if not float(exponent).is_integer() and np.any(u <= 0):
        raise DomainError(f'u = phi + 1 must be positive for the power {exponent}',
                          where=np.flatnonzero(np.atleast_1d(u) <= 0))
    return u ** exponent


def reaction(phi: ArrayLike, params: ModelParams) -> ArrayLike:
    """g(phi) = (phi+1)^(q-1) - phi - 1."""
    return shifted_power(phi, params.q) - np.asarray(phi, dtype=float) - 1


def linear_reaction(phi: ArrayLike, params: ModelParams) -> ArrayLike:
    """The linearization (q-2) phi of reaction() at phi = 0."""
    return (params.q - 2) * np.asarray(phi, dtype=float)


def ode_residual(pt: ProfilePoint, lam: float, params: ModelParams,
                 reaction_fn: Callable = reaction) -> ArrayLike:
    """
    (1-t^2) phi'' - n t phi' + mu(lambda) g(phi) at the given point(s).

    Works elementwise when the ProfilePoint fields are arrays.
    """
    t = np.asarray(pt.t, dtype=float)
    return (1 - t * t) * pt.d2phi - params.n * t * pt.dphi + params.mu(lam) * reaction_fn(pt.phi, params)


def endpoint_residual(side: int, phi_end: float, dphi_end: float, lam: float, params: ModelParams,
                      reaction_fn: Callable = reaction) -> float:
    """
    The t -> side limit of ode_residual: +n phi'(-1) + mu g(phi(-1)) and -n phi'(1) + mu g(phi(1)).
    """
    if side not in (-1, 1):
        raise ParameterError(f'side must be -1 or +1, got {side}')
    return -side * params.n * dphi_end + params.mu(lam) * reaction_fn(phi_end, params)


def linearized_potential(u_val: ArrayLike, lam: float, params: ModelParams) -> ArrayLike:
    """lambda (1 - (q-1) u^(q-2)), the zero-order coefficient of the linearization at u."""
    u = np.asarray(u_val, dtype=float)
    if np.any(u <= 0):
        raise DomainError('the linearization is defined for positive u only',
                          where=np.flatnonzero(np.atleast_1d(u) <= 0))
    value = lam * (1 - (params.q - 1) * u ** (params.q - 2))
    return float(value) if np.ndim(value) == 0 else value


def dlambda_ds0(k: int, params: ModelParams) -> float:
    """
    Slope of lambda along the branch born at lambda_k:
    -lambda_k (q-1) int P^3 w / (2 int P^2 w). Zero for odd k by parity.
    """
    if k < 1:
        raise ParameterError(f'mode index must be positive, got {k}')
    if k % 2:
        return 0.0
    lam = lambda_k(k, params)
    return -lam * (params.q - 1) * polyspec.cube_integral(k, params.n) / (2 * polyspec.norm_sq(k, params.n))
