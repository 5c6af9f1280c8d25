import math

import numpy as np
import pytest

import continuation
import discretize
import model
from abstract import ConvergenceError, NodalChangeError, ParameterError
from continuation import Branch, ContinuationSettings, StopRule


@pytest.fixture
def settings():
    return ContinuationSettings(ds_init=1e-2, ds_max=5e-2)


class TestSettings:

    def test_defaults(self):
        s = ContinuationSettings()
        assert s.newton_tol == 1e-10
        assert s.max_halvings == 20

    @pytest.mark.parametrize('kwargs', [dict(ds_min=0.0), dict(ds_init=1.0), dict(ds_init=1e-8),
                                        dict(newton_tol=0.0), dict(max_iter=0), dict(sigma_tol=-1.0),
                                        dict(s0=0.0)])
    def test_rejected(self, kwargs):
        with pytest.raises(ParameterError):
            ContinuationSettings(**kwargs)

    def test_default_stop_rule(self, params):
        stop = StopRule.default(params, max_points=7)
        assert stop.lambda_floor == pytest.approx(4e-3)
        assert stop.max_points == 7
        assert not stop.stop_on_sigma_zero


class TestBranch:

    def test_events(self, system):
        branch = Branch(2, 1)
        branch.points.append(discretize.solution_point(np.zeros(33), 3.0, system))
        branch.add_event('fold')
        branch.add_event('sigma-zero', 5)
        assert branch.events[0] == (0, 'fold')
        assert branch.event_kinds() == ['fold', 'sigma-zero']
        assert branch.lambda_min == 3.0

    def test_unknown_event(self):
        with pytest.raises(AssertionError):
            Branch(1, 1).add_event('explosion', 0)


class TestNewton:

    def test_trivial_stays_trivial(self, system):
        point = continuation.newton_solve(np.zeros(33), 7.0, system)
        assert np.all(point.phi == 0)
        assert point.residual_norm == 0

    def test_nontrivial_solution_near_second_mode(self, system, params):
        s = 0.1 / (24 / 7)
        guess = 1.2 * s * system.mode(2)
        point = continuation.newton_solve(guess, 11.9, system, k=2)
        assert point.residual_norm < 1e-10
        assert point.lam == 11.9
        assert point.nodal_count == 2
        assert 0.5 * s < point.s_coord < 1.5 * s

    def test_gives_up(self, system):
        with pytest.raises(ConvergenceError) as info:
            continuation.newton_solve(np.full(33, 5.0), 12.0, system, max_iter=2)
        assert info.value.iterations == 2
        assert info.value.residual > 1e-10


class TestSeed:

    def test_seed_follows_slope(self, system, params):
        seed = continuation.branch_seed(2, 1e-2, system)
        assert seed.lam == pytest.approx(12 - 1e-2 * 24 / 7)
        assert seed.s_coord == pytest.approx(1e-2, rel=1e-12)

    def test_odd_mode_seed_has_no_slope(self, system, params):
        seed = continuation.branch_seed(1, 1e-2, system)
        assert seed.lam == model.lambda_k(1, params)

    def test_zero_seed(self, system):
        with pytest.raises(ParameterError):
            continuation.branch_seed(2, 0.0, system)

    def test_slope_from_s_normalized_solves(self, system, params):
        s = 1e-3
        guess = lambda s: (s * system.mode(2), 12 + s * model.dlambda_ds0(2, params))
        plus = continuation.solve_at_s(2, s, system, guess(s))
        minus = continuation.solve_at_s(2, -s, system, guess(-s))
        assert plus.s_coord == pytest.approx(s, abs=1e-9)
        assert (plus.lam - minus.lam) / (2 * s) == pytest.approx(-24 / 7, rel=1e-3)

    @pytest.mark.parametrize('k', [1, 3])
    def test_odd_mode_is_symmetric(self, system, params, k):
        s = 1e-3
        lam_k = model.lambda_k(k, params)
        assert abs(model.dlambda_ds0(k, params)) < 1e-3
        plus = continuation.solve_at_s(k, s, system, (s * system.mode(k), lam_k))
        minus = continuation.solve_at_s(k, -s, system, (-s * system.mode(k), lam_k))
        assert abs(plus.lam - minus.lam) / (2 * s) < 1e-3
        assert plus.nodal_count == minus.nodal_count == k

    def test_secant_between_small_s(self, system, params):
        points = [continuation.solve_at_s(2, s, system, (s * system.mode(2), 12 + s * model.dlambda_ds0(2, params)))
                  for s in (2e-3, 4e-3)]
        slope = (points[1].lam - points[0].lam) / (points[1].s_coord - points[0].s_coord)
        assert slope == pytest.approx(-24 / 7, rel=0.03)


class TestPsi:

    def test_correction_is_second_order(self, system):
        big, small = continuation.psi_smallness_check(2, [1e-2, 5e-3], system)
        assert 1.5 <= big / small <= 2.5

    def test_zero_s(self, system):
        with pytest.raises(ParameterError):
            continuation.psi_smallness_check(2, [0.0], system)


class TestArclength:

    def test_tangent_is_unit_and_oriented(self, system, params):
        first = continuation.solve_at_s(2, 1e-2, system, (1e-2 * system.mode(2), 12.0))
        previous = (system.mode(2), model.dlambda_ds0(2, params))
        t_phi, t_lam = continuation.compute_tangent(first, system, previous)
        assert system.inner(t_phi, t_phi) + t_lam ** 2 == pytest.approx(1.0)
        assert system.inner(t_phi, previous[0]) + t_lam * previous[1] > 0
        assert t_lam < 0

    def test_step_satisfies_constraint(self, system, params, settings):
        first = continuation.solve_at_s(2, 1e-2, system, (1e-2 * system.mode(2), 12.0), settings)
        tangent = continuation.compute_tangent(first, system, (system.mode(2), model.dlambda_ds0(2, params)))
        ds = 2e-2
        point = continuation.arclength_step(first, tangent, ds, system, settings, k=2)
        t_phi, t_lam = tangent
        constraint = system.inner(point.phi - first.phi, t_phi) + (point.lam - first.lam) * t_lam
        assert constraint == pytest.approx(ds, abs=1e-8)
        assert point.nodal_count == 2
        assert point.residual_norm < 1e-10
        assert point.arclength == pytest.approx(first.arclength + ds)

    def test_step_size_bounds(self, system, settings):
        first = continuation.branch_seed(2, 1e-2, system)
        tangent = (system.mode(2), 0.0)
        for ds in (1e-9, 1.0):
            with pytest.raises(ParameterError):
                continuation.arclength_step(first, tangent, ds, system, settings)


class TestTrace:

    def test_arguments(self, system, params):
        with pytest.raises(ParameterError):
            continuation.trace_branch(0, 1, StopRule.default(params), system)
        with pytest.raises(ParameterError):
            continuation.trace_branch(2, 0, StopRule.default(params), system)

    @pytest.mark.parametrize('direction', [1, -1])
    def test_short_branch(self, system, params, settings, direction):
        seen = []
        stop = StopRule.default(params, max_points=6)
        branch = continuation.trace_branch(2, direction, stop, system, settings,
                                           on_point=lambda i, p: seen.append(i))
        assert seen == list(range(len(branch.points)))
        assert len(branch.points) == 6
        assert all(p.nodal_count == 2 for p in branch.points)
        assert all(p.residual_norm < 1e-9 for p in branch.points)
        s = [p.s_coord for p in branch.points]
        assert all(direction * (b - a) > 0 for a, b in zip(s, s[1:]))
        assert direction * (branch.points[0].lam - 12) < 0
        arclength = [p.arclength for p in branch.points]
        assert all(b > a for a, b in zip(arclength, arclength[1:]))

    def test_initial_secant_slope(self, system, params, settings):
        branch = continuation.trace_branch(2, 1, StopRule.default(params, max_points=3), system, settings)
        first, second = branch.points[:2]
        slope = (second.lam - first.lam) / (second.s_coord - first.s_coord)
        assert slope == pytest.approx(-24 / 7, rel=0.1)

    def test_even_profiles_are_symmetric(self, system, params, settings):
        branch = continuation.trace_branch(2, 1, StopRule.default(params, max_points=15), system, settings)
        assert len(branch.points) == 15
        for p in branch.points:
            assert np.max(np.abs(p.phi - p.phi[::-1])) < 1e-10

    @pytest.mark.parametrize('k', [1, 3])
    def test_odd_directions_mirror_each_other(self, system, params, settings, k):
        stop = StopRule.default(params, max_points=8)
        plus = continuation.trace_branch(k, 1, stop, system, settings)
        minus = continuation.trace_branch(k, -1, stop, system, settings)
        assert len(plus.points) == len(minus.points) == 8
        for a, b in zip(plus.points, minus.points):
            assert np.max(np.abs(a.phi - b.phi[::-1])) < 1e-9
            assert a.lam == pytest.approx(b.lam, abs=1e-9)
        assert {p.nodal_count for p in plus.points + minus.points} == {k}

    @pytest.mark.slow
    def test_long_branch_keeps_nodal_count(self, system, params):
        stop = StopRule.default(params, max_points=60, s_max=1.0)
        branch = continuation.trace_branch(2, 1, stop, system, ContinuationSettings())
        assert len({p.nodal_count for p in branch.points}) == 1
        assert all(p.u_min > 0 for p in branch.points)
        assert branch.lambda_min < 12


class TestDegenerate:

    @pytest.fixture
    def fine(self, params):
        return discretize.DiscreteSystem(params, 96)

    def test_trivial_branch_crossing(self, system, params):
        branch = continuation.trace_trivial(13.0, 30.0, 9, system)
        assert 'sigma-zero' in branch.event_kinds()
        report = continuation.locate_degenerate(branch, 1e-6, system)
        assert report is not None
        assert report.kind == 'sigma-crossing'
        assert report.lambda_star == pytest.approx(model.lambda_k(3, params), rel=1e-6)
        assert abs(report.sigma_check) < 1e-6 * report.lambda_star
        assert report.scale > report.lambda_star
        assert report.nodal_count == 0
        assert report.u_min == 1.0
        assert report.lambda_min_running == 13.0

    @pytest.mark.parametrize('k', [3, 5])
    def test_crossing_lands_on_the_ladder(self, fine, params, k):
        lam_k = model.lambda_k(k, params)
        branch = continuation.trace_trivial(model.lambda_k(k - 1, params) + 1, lam_k + 1, 9, fine)
        report = continuation.locate_degenerate(branch, 1e-6, fine)
        assert abs(report.lambda_star - lam_k) / lam_k < 1e-6
        assert abs(report.sigma_at_star) < 1e-6 * lam_k

    @pytest.mark.slow
    @pytest.mark.parametrize('k', [2, 4])
    def test_even_branches(self, fine, params, k):
        stop = StopRule.default(params, stop_on_sigma_zero=True)
        branch = continuation.trace_branch(k, 1, stop, fine, ContinuationSettings())
        report = continuation.locate_degenerate(branch, 1e-6, fine)
        assert report is not None
        assert report.lambda_star < model.lambda_k(k, params)
        assert report.nodal_count == k
        assert report.u_min > 0
        assert report.residual_norm < 1e-10
        assert abs(report.sigma_at_star) < 1e-6 * max(1.0, report.lambda_star)
        assert abs(report.sigma_check) < 1e-6 * report.scale
        assert {p.nodal_count for p in branch.points} == {k}

    def test_failed_fold_sample(self, system, monkeypatch):
        def jump(*args):
            raise NodalChangeError(2, 4)

        start = continuation.branch_seed(2, 1e-2, system)
        monkeypatch.setattr(continuation, '_arclength_correct', jump)
        tangent = (system.mode(2), 0.0)
        assert continuation._lambda_after_step(start, tangent, 1e-3, system, ContinuationSettings()) == math.inf

    def test_nothing_in_a_gap(self, system):
        branch = continuation.trace_trivial(13.0, 20.0, 5, system)
        assert branch.events == []
        assert continuation.locate_degenerate(branch, 1e-6, system) is None

    def test_too_short(self, system):
        branch = continuation.trace_trivial(13.0, 20.0, 2, system)
        with pytest.raises(ParameterError):
            continuation.locate_degenerate(branch, 1e-6, system)

    def test_trivial_needs_two_points(self, system):
        with pytest.raises(ParameterError):
            continuation.trace_trivial(1.0, 2.0, 1, system)

    def test_trivial_lambdas(self, system):
        branch = continuation.trace_trivial(1.0, 3.0, 5, system)
        assert [p.lam for p in branch.points] == pytest.approx([1.0, 1.5, 2.0, 2.5, 3.0])
        assert not math.isnan(branch.points[2].sigma_min)