#!/usr/bin/python3
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np
import scipy.linalg
import scipy.stats

import discretize
import model
from abstract import DomainError, ParameterError

l = logging.getLogger(__name__)

# geometry.py - Finite differences on S^n x S^n with the metric g_0 + delta g_0, used to check reduced solutions.
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

# A field on the product takes arrays of shape (..., n+1) for both factors and returns shape (...).
ProductField = Callable[[np.ndarray, np.ndarray], np.ndarray]


def isoparametric(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """f(p, q) = <p, q>."""
    return np.sum(p * q, axis=-1)


@dataclass(frozen=True)
class SpherePair:
    p: np.ndarray = field(repr=False)
    q_vec: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.p.shape != self.q_vec.shape or self.p.ndim != 1 or self.p.size < 3:
            raise ParameterError(f'need two vectors of equal length >= 3, got {self.p.shape} and {self.q_vec.shape}')
        for name, v in (('p', self.p), ('q_vec', self.q_vec)):
            if abs(np.linalg.norm(v) - 1) > 1e-12:
                raise DomainError(f'{name} is not a unit vector', where=name)

    @property
    def n(self) -> int:
        return self.p.size - 1

    @property
    def f(self) -> float:
        return float(np.clip(isoparametric(self.p, self.q_vec), -1.0, 1.0))

    def rotated(self, A: np.ndarray) -> 'SpherePair':
        return SpherePair(A @ self.p, A @ self.q_vec)


@dataclass(frozen=True)
class FDScheme:
    h: float
    order: int = 2

    def __post_init__(self):
        if not 0 < self.h < 0.1:
            raise ParameterError(f'geodesic step must lie in (0, 0.1), got {self.h}')
        if self.order != 2:
            raise ParameterError('only the second order central scheme is implemented')


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def sample_pair(n: int, seed) -> SpherePair:
    """Two independent uniform points of S^n; 'seed' is anything numpy.random.default_rng accepts."""
    if n < 2:
        raise ParameterError(f'sphere dimension must be at least 2, got {n}')
    rng = np.random.default_rng(seed)
    return SpherePair(_unit(rng.standard_normal(n + 1)), _unit(rng.standard_normal(n + 1)))


def sample_pairs(n: int, count: int, seed: int) -> List[SpherePair]:
    """'count' pairs with per-sample seeds spawned from 'seed', so sample i does not depend on count."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [sample_pair(n, child) for child in children]


def pair_at(n: int, f: float, seed) -> SpherePair:
    """A random pair with <p, q> = f."""
    if abs(f) > 1:
        raise DomainError('f must lie in [-1, 1]', where=f)
    rng = np.random.default_rng(seed)
    p = _unit(rng.standard_normal(n + 1))
    v = tangent_frame(p) @ _unit(rng.standard_normal(n))
    return SpherePair(p, _unit(f * p + math.sqrt(1 - f * f) * v))


def random_orthogonal(dim: int, seed) -> np.ndarray:
    return scipy.stats.ortho_group.rvs(dim, random_state=np.random.default_rng(seed))


def tangent_frame(x: np.ndarray) -> np.ndarray:
    """Columns form an orthonormal basis of the tangent space of the sphere at x."""
    return scipy.linalg.null_space(x[None, :])


def _stencil(x: SpherePair, angle1: float, angle2: float):
    """Points one geodesic step away along each frame direction, +/- for factor 1 then factor 2."""
    p, q = x.p, x.q_vec
    E1, E2 = tangent_frame(p).T, tangent_frame(q).T
    n = x.n
    P = np.concatenate([math.cos(angle1) * p + math.sin(angle1) * E1,
                        math.cos(angle1) * p - math.sin(angle1) * E1,
                        np.tile(p, (2 * n, 1))])
    Q = np.concatenate([np.tile(q, (2 * n, 1)),
                        math.cos(angle2) * q + math.sin(angle2) * E2,
                        math.cos(angle2) * q - math.sin(angle2) * E2])
    return P, Q


def laplace_beltrami_fd(u: ProductField, x: SpherePair, h: float, delta: float) -> float:
    """
    Delta_{G_delta} u at x from 2n second central differences along great circles.

    Directions in the second factor move by the ambient angle h / sqrt(delta), which is a step
    of length h for the metric delta g_0.
    """
    FDScheme(h)
    if not delta > 0:
        raise ParameterError(f'delta must be positive, got {delta}')
    n = x.n
    P, Q = _stencil(x, h, h / math.sqrt(delta))
    values = np.asarray(u(P, Q), dtype=float)
    center = float(u(x.p, x.q_vec))
    plus = np.concatenate([values[:n], values[2 * n:3 * n]])
    minus = np.concatenate([values[n:2 * n], values[3 * n:]])
    return float(np.sum(plus - 2 * center + minus) / (h * h))


def gradient_sq_fd(x: SpherePair, h: float, delta: float, u: ProductField = isoparametric) -> float:
    """|grad u|^2 for G_delta from squared first central differences along the same orthonormal directions."""
    FDScheme(h)
    if not delta > 0:
        raise ParameterError(f'delta must be positive, got {delta}')
    n = x.n
    P, Q = _stencil(x, h, h / math.sqrt(delta))
    values = np.asarray(u(P, Q), dtype=float)
    plus = np.concatenate([values[:n], values[2 * n:3 * n]])
    minus = np.concatenate([values[n:2 * n], values[3 * n:]])
    return float(np.sum(((plus - minus) / (2 * h)) ** 2))


def lift(phi: np.ndarray, grid: Optional['discretize.SpectralGrid'] = None) -> ProductField:
    """u = phi(f) + 1 as a field on the product, phi given by its node values."""
    phi = np.asarray(phi, dtype=float)
    grid = grid or discretize.GridCache().get(phi.size - 1)

    def u(p, q):
        t = np.clip(isoparametric(p, q), -1.0, 1.0)
        return discretize.interpolate(phi, t, grid) + 1

    return u


def lifted_residual(phi: np.ndarray, lam: float, params: model.ModelParams, sample_count: int = 200,
                    h: float = 1e-3, seed: int = 0) -> float:
    """max over random pairs of |-Delta_G u + lambda u - lambda u^(q-1)| for u = phi(f) + 1."""
    if sample_count < 1:
        raise ParameterError(f'need at least one sample, got {sample_count}')
    u = lift(phi)
    worst = 0.0
    for i, x in enumerate(sample_pairs(params.n, sample_count, seed)):
        value = float(u(x.p, x.q_vec))
        if value <= 0:
            raise DomainError(f'u = {value:.3e} is not positive at sample {i} (f = {x.f:.6f})', where=i)
        lap = laplace_beltrami_fd(u, x, h, params.delta)
        residual = abs(-lap + lam * value - lam * value ** (params.q - 1))
        worst = max(worst, residual)
    l.debug('Lifted residual over %d samples at h=%g: %.3e', sample_count, h, worst)
    return worst


def isoparametric_check(n: int, delta: float, sample_count: int, h: float, seed: int = 0) -> Dict[str, float]:
    """Largest deviations from Delta f = -n(1+1/delta) f and |grad f|^2 = (1+1/delta)(1-f^2) over random pairs."""
    scale = 1 + 1 / delta
    laplace_err, gradient_err = 0.0, 0.0
    for x in sample_pairs(n, sample_count, seed):
        f = x.f
        laplace_err = max(laplace_err, abs(laplace_beltrami_fd(isoparametric, x, h, delta) + n * scale * f))
        gradient_err = max(gradient_err, abs(gradient_sq_fd(x, h, delta) - scale * (1 - f * f)))
    return {'laplacian': laplace_err, 'gradient': gradient_err}


def observed_order(err_h: float, err_half: float) -> float:
    """Richardson estimate log2(e(h) / e(h/2))."""
    if err_h <= 0 or err_half <= 0:
        raise ParameterError('errors must be positive to estimate an order')
    return math.log2(err_h / err_half)
