#!/usr/bin/python3
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, List, NamedTuple, Optional, Tuple

import numpy as np
import scipy.linalg
import scipy.optimize

import discretize
import model
from abstract import ConvergenceError, DomainError, NodalChangeError, NumericError, ParameterError
from discretize import DiscreteSystem, SolutionPoint

l = logging.getLogger(__name__)

# continuation.py - Newton solves, branch seeding, pseudo-arclength continuation and degenerate point location.
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

EVENT_KINDS = ('fold', 'sigma-zero', 'positivity-loss', 'lambda-floor', 'step-failure')


@dataclass(frozen=True)
class ContinuationSettings:
    newton_tol: float = 1e-10
    max_iter: int = 30
    ds_init: float = 1e-2
    ds_min: float = 1e-6
    ds_max: float = 0.1
    sigma_tol: float = 1e-6
    s0: float = 1e-2
    max_halvings: int = 20
    bisection_steps: int = 60

    def __post_init__(self):
        if not 0 < self.ds_min <= self.ds_init <= self.ds_max:
            raise ParameterError(f'need 0 < ds_min <= ds_init <= ds_max, got {self.ds_min}, {self.ds_init}, {self.ds_max}')
        if self.newton_tol <= 0 or self.max_iter < 1:
            raise ParameterError('newton_tol must be positive and max_iter at least 1')
        if self.sigma_tol <= 0:
            raise ParameterError(f'sigma_tol must be positive, got {self.sigma_tol}')
        if self.s0 == 0:
            raise ParameterError('the seed parameter s0 must be nonzero')


@dataclass(frozen=True)
class StopRule:
    lambda_floor: float
    max_points: int = 400
    s_max: float = 5.0
    stop_on_sigma_zero: bool = False

    @classmethod
    def default(cls, params: model.ModelParams, **kwargs) -> 'StopRule':
        return cls(lambda_floor=1e-3 * model.lambda_k(1, params), **kwargs)


class BranchEvent(NamedTuple):
    index: int
    kind: str


@dataclass
class Branch:
    k: int
    direction: int
    points: List[SolutionPoint] = field(default_factory=list)
    events: List[BranchEvent] = field(default_factory=list)

    @property
    def lambda_min(self) -> float:
        return min(p.lam for p in self.points)

    def add_event(self, kind: str, index: Optional[int] = None):
        assert kind in EVENT_KINDS, kind
        index = len(self.points) - 1 if index is None else index
        l.info('Branch k=%d dir=%+d: %s at point %d', self.k, self.direction, kind, index)
        self.events.append(BranchEvent(index, kind))

    def event_kinds(self) -> List[str]:
        return [e.kind for e in self.events]


@dataclass(frozen=True)
class DegeneracyReport:
    k: int
    lambda_star: float
    phi_star: np.ndarray = field(repr=False)
    sigma_at_star: float
    sigma_check: float
    nodal_count: int
    u_min: float
    bracket_s: Tuple[float, float]
    residual_norm: float
    lambda_min_running: float
    kind: str
    scale: float
    s_star: float = 0.0


def _bordered_newton(phi: np.ndarray, lam: float, sys: DiscreteSystem, row: Optional[np.ndarray], corner: float,
                     rhs: float, tol: float, max_iter: int, max_halvings: int = 20) -> Tuple[np.ndarray, float, int]:
    """
    Newton's method for F(phi, lambda) = 0, either at fixed lambda (row is None) or together with
    the linear constraint row . phi + corner * lambda = rhs.
    Steps that would make u = phi + 1 nonpositive are halved up to 'max_halvings' times.
    """
    phi = np.array(phi, dtype=float)
    sys.check_admissible(phi)
    size = phi.size
    r = math.inf
    for it in range(max_iter + 1):
        F = discretize.assemble_residual(phi, lam, sys)
        c = 0.0 if row is None else float(row @ phi + corner * lam - rhs)
        r = max(float(np.max(np.abs(F))), abs(c))
        l.debug('Newton iteration %d at lambda=%.10f: residual %.3e', it, lam, r)
        if not math.isfinite(r):
            break
        if r < tol:
            return phi, lam, it
        if it == max_iter:
            break
        J = discretize.assemble_jacobian(phi, lam, sys)
        if row is None:
            A, b = J, -F
        else:
            A = np.empty((size + 1, size + 1))
            A[:size, :size] = J
            A[:size, size] = discretize.lambda_derivative(phi, lam, sys)
            A[size, :size] = row
            A[size, size] = corner
            b = -np.append(F, c)
        try:
            step = scipy.linalg.solve(A, b)
        except (np.linalg.LinAlgError, ValueError) as e:
            raise ConvergenceError(f'singular Newton matrix at iteration {it}', residual=r, iterations=it) from e
        d_phi = step[:size]
        d_lam = 0.0 if row is None else float(step[size])
        theta = 1.0
        for _ in range(max_halvings + 1):
            trial = phi + theta * d_phi
            if not sys.requires_positive or np.min(trial) + 1 > 0:
                break
            theta /= 2
        else:
            raise DomainError(f'Newton step lost positivity after {max_halvings} halvings',
                              where=int(np.argmin(phi + d_phi)))
        if theta < 1:
            l.debug('Newton step damped to %g to keep u positive', theta)
        phi = trial
        lam = lam + theta * d_lam
    raise ConvergenceError(f'Newton did not reach {tol:.1e} in {max_iter} iterations (residual {r:.3e})',
                           residual=r, iterations=max_iter)


def newton_solve(phi0: np.ndarray, lam: float, sys: DiscreteSystem, tol: float = 1e-10, max_iter: int = 30,
                 k: Optional[int] = None) -> SolutionPoint:
    """Solve F(phi, lam) = 0 at fixed lambda from phi0. 'k' only selects the s-coordinate reported."""
    phi, lam, it = _bordered_newton(phi0, lam, sys, None, 0.0, 0.0, tol, max_iter)
    l.debug('Newton converged in %d iterations', it)
    return discretize.solution_point(phi, lam, sys, k)


def solve_at_s(k: int, s: float, sys: DiscreteSystem, guess: Tuple[np.ndarray, float],
               settings: ContinuationSettings = ContinuationSettings()) -> SolutionPoint:
    """Solve F = 0 together with <phi, P_k>_w / <P_k, P_k>_w = s, with lambda free."""
    P = sys.mode(k)
    row = sys.gram @ P / sys.inner(P, P)
    phi, lam, it = _bordered_newton(guess[0], guess[1], sys, row, 0.0, s, settings.newton_tol, settings.max_iter,
                                    settings.max_halvings)
    l.debug('Solved at s=%g in %d iterations: lambda=%.10f', s, it, lam)
    return discretize.solution_point(phi, lam, sys, k)


def branch_seed(k: int, s0: float, sys: DiscreteSystem) -> SolutionPoint:
    """The predictor s0 P_k at lambda_k + s0 dlambda/ds(0)."""
    if s0 == 0:
        raise ParameterError('the seed parameter s0 must be nonzero')
    params = sys.params
    lam = model.lambda_k(k, params) + s0 * model.dlambda_ds0(k, params)
    return discretize.solution_point(s0 * sys.mode(k), lam, sys, k)


def compute_tangent(point: SolutionPoint, sys: DiscreteSystem,
                    previous: Tuple[np.ndarray, float]) -> Tuple[np.ndarray, float]:
    """
    Unit tangent (in <.,.>_w plus the plain lambda component) of the solution curve at 'point',
    oriented along 'previous'.
    """
    t_phi, t_lam = previous
    size = point.phi.size
    A = np.empty((size + 1, size + 1))
    A[:size, :size] = discretize.assemble_jacobian(point.phi, point.lam, sys)
    A[:size, size] = discretize.lambda_derivative(point.phi, point.lam, sys)
    A[size, :size] = sys.gram @ t_phi
    A[size, size] = t_lam
    b = np.zeros(size + 1)
    b[size] = 1.0
    try:
        v = scipy.linalg.solve(A, b)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise NumericError('tangent system is singular') from e
    new_phi, new_lam = v[:size], float(v[size])
    norm = math.sqrt(sys.inner(new_phi, new_phi) + new_lam ** 2)
    return new_phi / norm, new_lam / norm


def _arclength_correct(current: SolutionPoint, tangent: Tuple[np.ndarray, float], ds: float, sys: DiscreteSystem,
                       settings: ContinuationSettings, k: Optional[int]) -> Tuple[SolutionPoint, int]:
    t_phi, t_lam = tangent
    row = sys.gram @ t_phi
    rhs = float(row @ current.phi + t_lam * current.lam + ds)
    phi, lam, it = _bordered_newton(current.phi + ds * t_phi, current.lam + ds * t_lam, sys, row, t_lam, rhs,
                                    settings.newton_tol, settings.max_iter, settings.max_halvings)
    point = discretize.solution_point(phi, lam, sys, k, arclength=current.arclength + abs(ds))
    if point.nodal_count != current.nodal_count:
        raise NodalChangeError(current.nodal_count, point.nodal_count)
    if point.u_min <= 0:
        raise DomainError(f'step ended with u_min = {point.u_min:.3e}', where=int(np.argmin(phi)))
    return point, it


def arclength_step(current: SolutionPoint, tangent: Tuple[np.ndarray, float], ds: float, sys: DiscreteSystem,
                   settings: ContinuationSettings = ContinuationSettings(), k: Optional[int] = None) -> SolutionPoint:
    """
    One predictor-corrector step: phi + ds t_phi, lambda + ds t_lambda, then Newton on F = 0 with
    <phi - phi_0, t_phi>_w + (lambda - lambda_0) t_lambda = ds.
    """
    if not settings.ds_min <= abs(ds) <= settings.ds_max:
        raise ParameterError(f'|ds| = {abs(ds)} outside [{settings.ds_min}, {settings.ds_max}]')
    return _arclength_correct(current, tangent, ds, sys, settings, k)[0]


def trace_branch(k: int, direction: int, stop: StopRule, sys: DiscreteSystem,
                 settings: ContinuationSettings = ContinuationSettings(),
                 on_point: Optional[Callable[[int, SolutionPoint], None]] = None) -> Branch:
    """
    Follow the component born at (0, lambda_k) in the direction sign(s) = 'direction'.

    Stops on the lambda floor, max_points, |s| > s_max, a sigma-zero event when the stop rule asks
    for it, or when the step size falls below ds_min (recorded as positivity-loss if the last
    failure was a positivity violation, step-failure otherwise). 'on_point' is called with the
    index and the point for every accepted point.
    """
    if k < 1:
        raise ParameterError(f'mode index must be positive, got {k}')
    if direction not in (1, -1):
        raise ParameterError(f'direction must be +1 or -1, got {direction}')
    branch = Branch(k, direction)
    s0 = direction * abs(settings.s0)
    seed = branch_seed(k, s0, sys)
    first = solve_at_s(k, s0, sys, (seed.phi, seed.lam), settings)
    if first.nodal_count != k:
        l.warning('Seed of branch k=%d has %d sign changes', k, first.nodal_count)

    def accept(point):
        branch.points.append(point)
        if on_point is not None:
            on_point(len(branch.points) - 1, point)

    accept(first)
    slope = model.dlambda_ds0(k, sys.params)
    tangent = (direction * sys.mode(k), direction * slope)
    ds = settings.ds_init
    while len(branch.points) < stop.max_points:
        current = branch.points[-1]
        try:
            tangent = compute_tangent(current, sys, tangent)
        except NumericError:
            branch.add_event('step-failure')
            break
        point, failure = None, None
        while ds >= settings.ds_min:
            try:
                point, it = _arclength_correct(current, tangent, ds, sys, settings, k)
                break
            except (ConvergenceError, NumericError, NodalChangeError) as e:
                failure = 'step-failure'
                l.info('Step of %.3e failed (%s), halving', ds, e)
            except DomainError as e:
                failure = 'positivity-loss'
                l.info('Step of %.3e left the positive cone (%s), halving', ds, e)
            ds /= 2
        if point is None:
            branch.add_event(failure or 'step-failure')
            break
        accept(point)
        index = len(branch.points) - 1
        if it <= 3:
            ds = min(1.5 * ds, settings.ds_max)

        if index >= 2:
            before = branch.points[index - 1].lam - branch.points[index - 2].lam
            after = point.lam - branch.points[index - 1].lam
            if before * after < 0:
                branch.add_event('fold', index - 1)
        sigma_changed = point.n_positive != current.n_positive
        if sigma_changed:
            branch.add_event('sigma-zero', index)
        if point.lam < stop.lambda_floor:
            branch.add_event('lambda-floor', index)
            break
        if sigma_changed and stop.stop_on_sigma_zero:
            break
        if abs(point.s_coord) > stop.s_max:
            l.info('Branch k=%d dir=%+d left |s| <= %g', k, direction, stop.s_max)
            break
    l.info('Branch k=%d dir=%+d finished with %d points, lambda_min=%.6f', k, direction, len(branch.points),
           branch.lambda_min)
    return branch


def trace_trivial(lambda_start: float, lambda_end: float, count: int, sys: DiscreteSystem) -> Branch:
    """The trivial solution phi = 0 sampled at 'count' equally spaced lambdas, with sigma-zero events."""
    if count < 2:
        raise ParameterError(f'need at least two points, got {count}')
    zero = np.zeros(sys.grid.size)
    branch = Branch(0, 1 if lambda_end >= lambda_start else -1)
    for lam in np.linspace(lambda_start, lambda_end, count):
        point = discretize.solution_point(zero, lam, sys, arclength=abs(lam - lambda_start))
        branch.points.append(point)
        if len(branch.points) > 1 and point.n_positive != branch.points[-2].n_positive:
            branch.add_event('sigma-zero')
    return branch


def _chord(a: SolutionPoint, b: SolutionPoint, sys: DiscreteSystem) -> Tuple[Tuple[np.ndarray, float], float]:
    d_phi, d_lam = b.phi - a.phi, b.lam - a.lam
    length = math.sqrt(sys.inner(d_phi, d_phi) + d_lam ** 2)
    return (d_phi / length, d_lam / length), length


def _sigma_target(point: SolutionPoint, sigma_tol: float) -> float:
    return sigma_tol * max(1.0, abs(point.lam))


def _jacobian_scale(point: SolutionPoint, sys: DiscreteSystem) -> float:
    return float(np.linalg.norm(discretize.assemble_jacobian(point.phi, point.lam, sys), 2))


def _bisect_crossing(a: SolutionPoint, b: SolutionPoint, k: Optional[int], sys: DiscreteSystem,
                     settings: ContinuationSettings) -> Optional[Tuple[SolutionPoint, float]]:
    """
    Bisection along the chord a -> b on the inertia of the Jacobian, down to a bracket of ds_min
    in arclength, followed by one secant step on sigma between the bracket ends.
    """
    direction, length = _chord(a, b, sys)
    lo, hi = (0.0, a), (1.0, b)
    visited = []
    for _ in range(settings.bisection_steps):
        if (hi[0] - lo[0]) * length < settings.ds_min:
            break
        theta = (lo[0] + hi[0]) / 2
        point, _ = _arclength_correct(a, direction, theta * length, sys, settings, k)
        visited.append(point)
        if point.sigma_min == 0:
            break
        if point.n_positive == a.n_positive:
            lo = (theta, point)
        else:
            hi = (theta, point)
    (t_lo, p_lo), (t_hi, p_hi) = lo, hi
    if p_lo.sigma_min != p_hi.sigma_min and 0 < t_lo < t_hi < 1:
        theta = t_lo - p_lo.sigma_min * (t_hi - t_lo) / (p_hi.sigma_min - p_lo.sigma_min)
        if t_lo < theta < t_hi:
            visited.append(_arclength_correct(a, direction, theta * length, sys, settings, k)[0])
    if not visited:
        return None
    best = min(visited, key=lambda p: abs(p.sigma_min))
    if abs(best.sigma_min) < _sigma_target(best, settings.sigma_tol):
        return best, _jacobian_scale(best, sys)
    l.warning('Bisection stopped at lambda=%.10f with sigma=%.3e, above %.3e', best.lam, best.sigma_min,
              _sigma_target(best, settings.sigma_tol))
    return None


def _lambda_after_step(a: SolutionPoint, tangent: Tuple[np.ndarray, float], ds: float, sys: DiscreteSystem,
                       settings: ContinuationSettings) -> float:
    """lambda of the corrected point at arclength ds from 'a', or inf if the correction fails."""
    try:
        return _arclength_correct(a, tangent, ds, sys, settings, None)[0].lam
    except (ConvergenceError, DomainError, NumericError, NodalChangeError):
        return math.inf


def _minimize_fold(branch: Branch, index: int, sys: DiscreteSystem,
                   settings: ContinuationSettings) -> Optional[Tuple[SolutionPoint, float]]:
    """Minimum of lambda over the two segments around a fold, parametrized by arclength from the previous point."""
    a = branch.points[index - 1]
    b = branch.points[index + 1]
    prev_dir, _ = _chord(a, branch.points[index], sys)
    tangent = compute_tangent(a, sys, prev_dir)
    span = b.arclength - a.arclength

    result = scipy.optimize.minimize_scalar(lambda ds: _lambda_after_step(a, tangent, ds, sys, settings),
                                            bounds=(0.0, span), method='bounded', options={'xatol': settings.ds_min})
    point, _ = _arclength_correct(a, tangent, float(result.x), sys, settings, None)
    if abs(point.sigma_min) < _sigma_target(point, settings.sigma_tol):
        return point, _jacobian_scale(point, sys)
    l.warning('lambda minimum near the fold has sigma=%.3e, above %.3e', point.sigma_min,
              _sigma_target(point, settings.sigma_tol))
    return None


def locate_degenerate(branch: Branch, sigma_tol: float, sys: DiscreteSystem,
                      settings: ContinuationSettings = ContinuationSettings()) -> Optional[DegeneracyReport]:
    """
    The first point along the branch where the linearization is singular, or None.

    Brackets come from changes of inertia between consecutive points; if there are none, the
    first fold is tried by minimizing lambda. The reported point is re-checked by a fresh
    dense eigendecomposition.
    """
    if len(branch.points) < 3:
        raise ParameterError(f'need at least 3 branch points, got {len(branch.points)}')
    settings = replace(settings, sigma_tol=sigma_tol)
    points = branch.points
    k = branch.k or None
    found, kind, bracket = None, None, None
    for i in range(len(points) - 1):
        if points[i].n_positive != points[i + 1].n_positive:
            l.info('Inertia changes between points %d and %d (lambda %.6f -> %.6f)', i, i + 1,
                   points[i].lam, points[i + 1].lam)
            found = _bisect_crossing(points[i], points[i + 1], k, sys, settings)
            kind, bracket = 'sigma-crossing', (i, i + 1)
            break
    if found is None:
        for i in range(1, len(points) - 1):
            if (points[i].lam - points[i - 1].lam) * (points[i + 1].lam - points[i].lam) < 0:
                l.info('No inertia change; trying the fold at point %d', i)
                found = _minimize_fold(branch, i, sys, settings)
                kind, bracket = 'fold', (i - 1, i + 1)
                break
    if found is None:
        l.info('No degenerate point on branch k=%d dir=%+d', branch.k, branch.direction)
        return None

    point, scale = found
    check = discretize.sigma_min(discretize.assemble_jacobian(point.phi, point.lam, sys))
    if abs(check) >= _sigma_target(point, sigma_tol):
        l.error('Independent eigendecomposition disagrees: sigma=%.3e', check)
        return None
    s_star = sys.s_coordinate(point.phi, k) if k else 0.0
    report = DegeneracyReport(k=branch.k,
                              lambda_star=point.lam,
                              phi_star=point.phi,
                              sigma_at_star=point.sigma_min,
                              sigma_check=check,
                              nodal_count=point.nodal_count,
                              u_min=point.u_min,
                              bracket_s=(points[bracket[0]].s_coord, points[bracket[1]].s_coord),
                              residual_norm=point.residual_norm,
                              lambda_min_running=min(p.lam for p in points[:bracket[1] + 1]),
                              kind=kind,
                              scale=scale,
                              s_star=s_star)
    l.info('Degenerate point (%s): lambda*=%.10f, sigma=%.3e, nodal count %d, u_min=%.6f', kind,
           report.lambda_star, report.sigma_at_star, report.nodal_count, report.u_min)
    return report


def psi_smallness_check(k: int, s_list, sys: DiscreteSystem,
                        settings: ContinuationSettings = ContinuationSettings()) -> List[float]:
    """||w(s) - s P_k||_w / |s| for each s, solving with the s-normalization."""
    P = sys.mode(k)
    lam_k = model.lambda_k(k, sys.params)
    slope = model.dlambda_ds0(k, sys.params)
    ratios = []
    for s in s_list:
        if s == 0:
            raise ParameterError('s must be nonzero')
        point = solve_at_s(k, s, sys, (s * P, lam_k + s * slope), settings)
        ratios.append(sys.norm(point.phi - s * P) / abs(s))
        l.debug('psi ratio at s=%g: %.6e', s, ratios[-1])
    return ratios
