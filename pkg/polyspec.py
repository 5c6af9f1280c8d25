#!/usr/bin/python3
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
import scipy.linalg
import scipy.optimize
import scipy.special

from abstract import DomainError, ParameterError

l = logging.getLogger(__name__)

# polyspec.py - Normalized Gegenbauer polynomials, their zeros, Gauss-Jacobi quadrature and linearization coefficients.
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
class JacobiParams:
    alpha: float
    beta: float

    def __post_init__(self):
        if self.alpha <= -1 or self.beta <= -1:
            raise ParameterError(f'Jacobi exponents must exceed -1, got alpha={self.alpha}, beta={self.beta}')

    @classmethod
    def ultraspherical(cls, n: int) -> 'JacobiParams':
        """The exponents of the weight (1-t^2)^((n-2)/2) carried by the sphere S^n."""
        _check_dimension(n)
        return cls((n - 2) / 2, (n - 2) / 2)

    def total_mass(self) -> float:
        """Integral of (1-t)^alpha (1+t)^beta over [-1, 1]."""
        a, b = self.alpha, self.beta
        return math.exp((a + b + 1) * math.log(2) + scipy.special.gammaln(a + 1) + scipy.special.gammaln(b + 1)
                        - scipy.special.gammaln(a + b + 2))

    def recurrence(self, m: int) -> (np.ndarray, np.ndarray):
        """Diagonal and off-diagonal of the Jacobi matrix of the orthonormal recurrence, size m."""
        a, b = self.alpha, self.beta
        j = np.arange(m, dtype=float)
        s = 2 * j + a + b
        with np.errstate(divide='ignore', invalid='ignore'):
            diag = np.where(s * (s + 2) != 0, (b * b - a * a) / (s * (s + 2)), (b - a) / (a + b + 2))
        j = np.arange(1, m, dtype=float)
        s = 2 * j + a + b
        off = np.sqrt(4 * j * (j + a) * (j + b) * (j + a + b) / (s * s * (s + 1) * (s - 1)))
        return diag, off


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    n: int = 2

    def integrate(self, values: np.ndarray) -> float:
        return float(np.dot(self.weights, values))


@dataclass(frozen=True)
class CoeffExpansion:
    k: int
    n: int
    coeffs: np.ndarray = field(repr=False)

    def evaluate(self, t: ArrayLike) -> ArrayLike:
        t = np.asarray(t, dtype=float)
        return sum(g * gegenbauer_eval(j, self.n, t) for j, g in enumerate(self.coeffs))

    def reconstruction_error(self, m: int = None) -> float:
        """Weighted L2 distance between the expansion and R_k^2."""
        m = m or 2 * self.k + 2
        diff = lambda t: self.evaluate(t) - gegenbauer_eval(self.k, self.n, t) ** 2
        return math.sqrt(max(weighted_inner(diff, diff, self.n, m), 0.0))


def _check_dimension(n):
    if n < 2:
        raise ParameterError(f'sphere dimension must be at least 2, got {n}')


def _check_domain(t):
    if np.any(np.abs(t) > 1.0):
        raise DomainError('Gegenbauer polynomials are evaluated on [-1, 1] only', where=t)


def gauss_jacobi_rule(m: int, n: int) -> QuadratureRule:
    """
    Gauss rule of m points for the weight (1-t^2)^((n-2)/2).

    Nodes and weights come from the symmetric tridiagonal eigenproblem of the recurrence
    coefficients (Golub-Welsch); the rule is exact for polynomials of degree 2m-1.
    """
    if m < 1:
        raise ParameterError(f'quadrature needs at least one point, got {m}')
    _check_dimension(n)
    jp = JacobiParams.ultraspherical(n)
    diag, off = jp.recurrence(m)
    if m == 1:
        return QuadratureRule(diag.copy(), np.array([jp.total_mass()]), n)
    try:
        nodes, vectors = scipy.linalg.eigh_tridiagonal(diag, off)
    except np.linalg.LinAlgError as e:
        raise ParameterError(f'Golub-Welsch eigenproblem failed for m={m}, n={n}') from e
    weights = jp.total_mass() * vectors[0, :] ** 2
    # the weight is even, so the rule must be too
    nodes = (nodes - nodes[::-1]) / 2
    weights = (weights + weights[::-1]) / 2
    return QuadratureRule(nodes, weights, n)


def gegenbauer_eval(k: int, n: int, t: ArrayLike) -> ArrayLike:
    """
    P_{k,n}(t), the degree-k zonal eigenfunction on S^n, normalized so that P_{k,n}(1) = 1.

    This is the Jacobi polynomial with alpha = beta = (n-2)/2 divided by its value at 1; the
    division is folded into the three-term recurrence so no large binomials appear.
    """
    if k < 0:
        raise ParameterError(f'mode index must be nonnegative, got {k}')
    _check_dimension(n)
    scalar = np.isscalar(t)
    t = np.asarray(t, dtype=float)
    _check_domain(t)
    prev = np.ones_like(t)
    if k == 0:
        return float(prev) if scalar else prev
    cur = t.copy()
    for j in range(2, k + 1):
        prev, cur = cur, ((2 * j + n - 3) * t * cur - (j - 1) * prev) / (j + n - 2)
    return float(cur) if scalar else cur


def gegenbauer_deriv(k: int, n: int, t: ArrayLike, order: int = 1) -> ArrayLike:
    """
    Derivative of P_{k,n} in t.

    Differentiation moves to the sphere two dimensions up:
    P'_{k,n} = k(k+n-1)/n * P_{k-1,n+2}.
    """
    if order == 0:
        return gegenbauer_eval(k, n, t)
    if k < order:
        _check_domain(np.asarray(t, dtype=float))
        return 0.0 * np.asarray(t, dtype=float) if not np.isscalar(t) else 0.0
    factor = k * (k + n - 1) / n
    return factor * gegenbauer_deriv(k - 1, n + 2, t, order - 1)


def rodrigues_eval(k: int, n: int, t: ArrayLike) -> ArrayLike:
    """
    (1-t^2)^(-(n-2)/2) (-1)^k / (2^k k!) d^k/dt^k (1-t^2)^(k+(n-2)/2), by exact polynomial algebra.

    Only for even n, where the differentiated function is a polynomial. Kept as a
    cross-check of gegenbauer_eval; the two differ by a k-dependent constant.
    """
    if n % 2:
        raise ParameterError('the Rodrigues cross-check is polynomial only for even n')
    a = (n - 2) // 2
    t = np.asarray(t, dtype=float)
    base = np.polynomial.Polynomial([1.0, 0.0, -1.0])
    inner = (base ** (k + a)).deriv(k) * ((-1) ** k / (2 ** k * math.factorial(k)))
    quotient, remainder = divmod(inner, base ** a)
    if np.max(np.abs(remainder.coef)) > 1e-9 * max(1.0, np.max(np.abs(inner.coef))):
        raise ParameterError('Rodrigues numerator is not divisible by the weight')
    return quotient(t)


def gegenbauer_zeros(k: int, n: int) -> np.ndarray:
    """
    The k simple zeros of P_{k,n}, increasing.

    Built up from mode 1: the zeros of mode j-1 bracket exactly one zero of mode j each,
    so every zero is refined by Newton inside its bracket, with Brent's method as fallback.
    """
    if k < 1:
        raise ParameterError(f'P_(k,n) has zeros only for k >= 1, got {k}')
    _check_dimension(n)
    zeros = np.array([0.0])
    for j in range(2, k + 1):
        edges = np.concatenate(([-1.0], zeros, [1.0]))
        zeros = np.array([_refine_zero(j, n, lo, hi) for lo, hi in zip(edges[:-1], edges[1:])])
        zeros = (zeros - zeros[::-1]) / 2
    return zeros


def _refine_zero(k, n, lo, hi, tol=1e-15, max_iter=50):
    x = (lo + hi) / 2
    for _ in range(max_iter):
        step = gegenbauer_eval(k, n, x) / gegenbauer_deriv(k, n, x)
        x -= step
        if not lo < x < hi:
            break
        if abs(step) <= tol * max(1.0, abs(x)):
            return x
    l.debug('Newton left bracket (%.6f, %.6f) for P_(%d,%d), falling back to Brent.', lo, hi, k, n)
    return scipy.optimize.brentq(lambda s: gegenbauer_eval(k, n, s), lo, hi, xtol=1e-16, rtol=4 * np.finfo(float).eps)


def weighted_inner(f: Callable, g: Callable, n: int, m: int) -> float:
    """Integral of f g (1-t^2)^((n-2)/2) over [-1, 1] by an m-point Gauss-Jacobi rule."""
    rule = gauss_jacobi_rule(m, n)
    return rule.integrate(f(rule.nodes) * g(rule.nodes))


def cube_integral(k: int, n: int) -> float:
    """Weighted integral of P_{k,n}^3; zero for odd k, positive for even k."""
    if k < 1:
        raise ParameterError(f'mode index must be positive, got {k}')
    m = (3 * k) // 2 + 2
    rule = gauss_jacobi_rule(m, n)
    return rule.integrate(gegenbauer_eval(k, n, rule.nodes) ** 3)


def norm_sq(k: int, n: int) -> float:
    """Weighted integral of P_{k,n}^2."""
    rule = gauss_jacobi_rule(k + 1, n)
    return rule.integrate(gegenbauer_eval(k, n, rule.nodes) ** 2)


def linearization_coeffs(k: int, n: int) -> CoeffExpansion:
    """
    Coefficients G_j of R_k^2 = sum_j G_j R_j, j = 0..2k, obtained by weighted projection.
    """
    if k < 1:
        raise ParameterError(f'mode index must be positive, got {k}')
    rule = gauss_jacobi_rule(2 * k + 2, n)
    square = gegenbauer_eval(k, n, rule.nodes) ** 2
    coeffs = np.empty(2 * k + 1)
    for j in range(2 * k + 1):
        basis = gegenbauer_eval(j, n, rule.nodes)
        coeffs[j] = rule.integrate(square * basis) / rule.integrate(basis * basis)
    return CoeffExpansion(k, n, coeffs)


@dataclass
class GasperReport:
    k: int
    n: int
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    d: np.ndarray
    d_signs: str
    q_coeffs: np.ndarray
    q_positive_sign_changes: int
    projection: np.ndarray
    projection_even_positive: bool
    consistent: bool

    @property
    def all_d_positive(self) -> bool:
        return bool(np.all(self.d > 0))


def gasper_recurrence_report(k: int, n: int) -> GasperReport:
    """
    Run the auxiliary recurrence A_j d_(j+1) = B_j d_j - C_j d_(j-1) with its printed
    ultraspherical coefficients, and set it beside the projection coefficients.

    Seeds are d_(-1) = 0 and d_0 = G_0. Nothing here overrides linearization_coeffs; any
    disagreement is only reported.
    """
    if k < 1:
        raise ParameterError(f'mode index must be positive, got {k}')
    j = np.arange(2 * k + 1, dtype=float)
    A = (j + 1) * (2 * j + n) * (2 * k + j + 2 * (n - 1)) * (2 * k - j)
    B = j * (2 * k + j - 1 + 2 * (n - 1)) * (2 * k - j + 1) * (2 * j)
    C = (j + n - 2) * (2 * j + n - 2) * (2 * j + n - 1) * (2 * k + j - 1 + 2 * (n - 1)) * (2 * k - j + 1)

    projection = linearization_coeffs(k, n).coeffs
    d = np.zeros(2 * k + 1)
    d[0] = projection[0]
    previous = 0.0
    for i in range(2 * k):
        if A[i] == 0:
            l.info('Recurrence coefficient A_%d vanishes for k=%d, n=%d; stopping early.', i, k, n)
            d[i + 1:] = np.nan
            break
        d[i + 1] = (B[i] * d[i] - C[i] * previous) / A[i]
        previous = d[i]

    J = np.polynomial.Polynomial([0.0, 1.0])
    Q = ((J + 2) ** 2 * (J + 2 * k + 2 * n - 1) * (2 * k - J - 1) * (2 * J + n)
         - (J + 1) ** 2 * (J + 2 * k + 2 * n - 2) * (2 * k - J) * (2 * J + n + 2)).trim(tol=1e-9)
    changes = _positive_sign_changes(Q)

    signs = ''.join('+' if v > 0 else '-' if v < 0 else '0' if v == 0 else '?' for v in d)
    consistent = bool(np.all(np.isfinite(d)) and np.allclose(d, projection, rtol=1e-9, atol=1e-12))
    report = GasperReport(k, n, A, B, C, d, signs, Q.coef, changes, projection,
                          bool(np.all(projection[::2] > 0)), consistent)
    if not consistent:
        l.info('Auxiliary recurrence for k=%d, n=%d disagrees with projection (signs %s).', k, n, signs)
    return report


def _positive_sign_changes(poly: np.polynomial.Polynomial) -> int:
    roots = poly.roots()
    real = np.sort(roots[(np.abs(roots.imag) < 1e-9 * np.maximum(1, np.abs(roots.real)))].real)
    real = real[real > 0]
    count = 0
    stops = np.concatenate(([0.0], real, [real[-1] + 1 if len(real) else 1.0]))
    # a root counts only if the polynomial actually changes sign across it
    for left, right, root in zip(stops[:-2], stops[2:], real):
        if np.sign(poly((left + root) / 2)) != np.sign(poly((root + right) / 2)):
            count += 1
    return count
