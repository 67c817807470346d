"""Solver building blocks and the composed iteration."""

import numpy as np
import pytest

from zonewton import (
    AdaptiveDirections,
    FixedDirections,
    Oracle,
    RngStream,
    SolverConfig,
    SolverState,
    adaptive_direction_count,
    contraction_gamma,
    eigenvalue_clip,
    iterate,
    make_cubic_box,
    make_quadratic,
    newton_step,
    optimal_stepsize,
    random_spd,
    run,
    update_rate_bound,
    zo_floor_stop,
)
from zonewton.solver import (
    RUNNING,
    STOPPED_BUDGET,
    STOPPED_MAX_ITER,
    STOPPED_ZO_FLOOR,
)


class TestEigenvalueClip:
    def test_diagonal_clamp(self):
        z = eigenvalue_clip(np.diag([5.0, -1.0]), 0.1, 10.0)
        np.testing.assert_allclose(z, np.diag([0.2, 10.0]), atol=1e-12)

    def test_identity_in_range(self):
        np.testing.assert_allclose(eigenvalue_clip(np.eye(3), 0.5, 2.0),
                                   np.eye(3), atol=1e-12)

    def test_exact_inverse_when_spectrum_inside(self):
        h = np.array([[2.0, 1.0], [1.0, 2.0]])  # eigenvalues 1, 3
        z = eigenvalue_clip(h, 0.5, 10.0)
        np.testing.assert_allclose(z, np.array([[2.0, -1.0], [-1.0, 2.0]]) / 3.0,
                                   atol=1e-12)
        assert np.linalg.norm(z @ h - np.eye(2)) <= 1e-8

    def test_spectrum_of_result_is_bracketed(self):
        gen = np.random.default_rng(0)
        for _ in range(100):
            d = int(gen.integers(1, 8))
            h = gen.standard_normal((d, d))
            h = h + h.T
            z = eigenvalue_clip(h, 0.5, 4.0)
            w = np.linalg.eigvalsh(z)
            assert w[0] >= 1.0 / 4.0 - 1e-10
            assert w[-1] <= 1.0 / 0.5 + 1e-10

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError):
            eigenvalue_clip(np.array([[1.0, 1.0], [0.0, 1.0]]), 0.1, 1.0)

    def test_rejects_bad_bounds(self):
        with pytest.raises(ValueError):
            eigenvalue_clip(np.eye(2), 0.0, 1.0)
        with pytest.raises(ValueError):
            eigenvalue_clip(np.eye(2), 2.0, 1.0)

    def test_info_reports_clipping(self):
        _, info = eigenvalue_clip(np.diag([5.0, 1.0]), 0.5, 2.0,
                                  return_info=True)
        assert info["clipped"]
        _, info = eigenvalue_clip(np.eye(2), 0.5, 2.0, return_info=True)
        assert not info["clipped"]


class TestNewtonStep:
    def test_exact_newton_on_isotropic_quadratic(self):
        x = np.array([2.0, -3.0])
        assert np.array_equal(newton_step(x, np.eye(2), x, 1.0), np.zeros(2))

    def test_zero_gradient_keeps_iterate(self):
        x = np.array([1.0, 2.0])
        np.testing.assert_array_equal(
            newton_step(x, np.diag([2.0, 3.0]), np.zeros(2), 0.7), x)

    def test_arithmetic_example(self):
        out = newton_step(np.array([1.0, 0.0]), np.diag([0.5, 1.0]),
                          np.array([2.0, 0.0]), 1.0)
        np.testing.assert_array_equal(out, np.zeros(2))


def test_optimal_stepsize_and_gamma():
    assert optimal_stepsize(1.0, 2.0) == 0.5
    assert contraction_gamma(optimal_stepsize(1.0, 1.0), 1.0, 1.0, 1.0, 1.0) \
        == pytest.approx(1.0)
    alpha = optimal_stepsize(1.0, 2.0)
    assert contraction_gamma(alpha, 0.5, 2.0, 1.0, 4.0) == pytest.approx(0.0625)


class TestZoFloorStop:
    def test_fires_with_guarantee(self):
        bound = zo_floor_stop(3e-4, 4, 6.0, 0.01, 1.0)
        assert bound == pytest.approx(8e-4)

    def test_quadratics_never_stop(self):
        assert zo_floor_stop(1e-15, 4, 0.0, 0.01, 1.0) is None

    def test_above_threshold_no_stop(self):
        assert zo_floor_stop(1.0, 4, 6.0, 0.01, 1.0) is None


class TestAdaptiveDirectionCount:
    def test_accurate_proxy_keeps_minimum(self):
        assert adaptive_direction_count(1.0, 5, 1.0, 0.0, 1e-6,
                                        update_rate_bound(5), 0.05, 500) == 5

    def test_formula_example(self):
        r = adaptive_direction_count(
            g_norm=0.1 * 1.0 + 0.0, d=5, L1=1.0, L2=0.0, mu=1e-6,
            eta=0.94286, error_proxy=1.0, r_max=500)
        assert r == 5 + 79

    def test_clamped_to_r_max(self):
        r = adaptive_direction_count(0.1, 5, 1.0, 0.0, 1e-6, 0.94286, 1.0, 50)
        assert r == 50

    def test_requires_r_max_at_least_d(self):
        with pytest.raises(ValueError):
            adaptive_direction_count(0.1, 5, 1.0, 0.0, 1e-6, 0.9, 1.0, 3)

    def test_monotone_in_error_proxy_and_gradient(self):
        gen = np.random.default_rng(7)
        eta = update_rate_bound(6)
        for _ in range(200):
            g = float(gen.uniform(1e-3, 1.0))
            proxy = float(gen.uniform(1e-4, 10.0))
            r = adaptive_direction_count(g, 6, 2.0, 1.0, 1e-4, eta, proxy, 500)
            assert 6 <= r <= 500
            # a worse Hessian proxy can only ask for more directions
            r_worse = adaptive_direction_count(g, 6, 2.0, 1.0, 1e-4, eta,
                                               2.0 * proxy, 500)
            assert r_worse >= r
            # a larger gradient loosens the accuracy target
            r_easier = adaptive_direction_count(2.0 * g, 6, 2.0, 1.0, 1e-4,
                                                eta, proxy, 500)
            assert r_easier <= r


def make_unit_start(problem, seed):
    stream = RngStream(seed)
    stream.next_draw()
    v = stream.generator.standard_normal(problem.dimension)
    return problem.known.x_star + v / np.linalg.norm(v)


class TestIterate:
    def test_single_iteration_near_exact_newton(self):
        # quadratic + accurate warm Hessian (r = 10 d^2 updates) gives a step
        # that shrinks the error by far more than 100x
        d = 5
        problem = make_quadratic(random_spd(d, 3.0, RngStream(100)), np.zeros(d))
        x0 = make_unit_start(problem, 200)
        config = SolverConfig(mu=1e-3, r_policy=FixedDirections(10 * d * d),
                              alpha=1.0, lambda_min=0.5, lambda_max=6.0,
                              max_iterations=1)
        state, record = iterate(SolverState.initial(x0, d),
                                problem.make_oracle(), config, RngStream(0))
        assert np.linalg.norm(state.x) <= 1e-2
        assert record.r_used == 10 * d * d

    def test_zero_gradient_keeps_iterate(self):
        d = 3
        a = random_spd(d, 2.0, RngStream(101))
        problem = make_quadratic(a, np.zeros(d))  # x* = 0
        config = SolverConfig(mu=1e-4, r_policy=FixedDirections(d),
                              alpha=1.0, lambda_min=0.5, lambda_max=3.0,
                              max_iterations=1)
        state, _ = iterate(SolverState.initial(np.zeros(d), d),
                           problem.make_oracle(), config, RngStream(1))
        np.testing.assert_array_equal(state.x, np.zeros(d))

    def test_fixed_r_equals_d_costs_2d_plus_1(self):
        d = 6
        problem = make_quadratic(np.eye(d), np.zeros(d))
        oracle = problem.make_oracle()
        config = SolverConfig(mu=1e-4, r_policy=FixedDirections(d),
                              alpha=1.0, lambda_min=0.5, lambda_max=2.0,
                              max_iterations=1)
        iterate(SolverState.initial(np.ones(d), d), oracle, config,
                RngStream(2))
        assert oracle.eval_count == 2 * d + 1

    def test_refuses_stopped_state(self):
        d = 2
        problem = make_quadratic(np.eye(d), np.zeros(d))
        config = SolverConfig(mu=1e-4, r_policy=FixedDirections(d),
                              max_iterations=1)
        state = SolverState.initial(np.ones(d), d)
        state.status = STOPPED_MAX_ITER
        with pytest.raises(ValueError):
            iterate(state, problem.make_oracle(), config, RngStream(3))


class TestRun:
    def test_single_iteration_cap(self):
        d = 3
        problem = make_quadratic(np.eye(d), np.zeros(d))
        config = SolverConfig(mu=1e-4, r_policy=FixedDirections(d),
                              max_iterations=1)
        trace = run(np.ones(d), problem.make_oracle(), config, RngStream(4))
        assert len(trace.records) == 1
        assert trace.status == STOPPED_MAX_ITER

    def test_budget_allows_exactly_one_iteration(self):
        d = 4
        problem = make_quadratic(np.eye(d), np.zeros(d))
        config = SolverConfig(mu=1e-4, r_policy=FixedDirections(d),
                              max_iterations=10)
        oracle = problem.make_oracle(budget=2 * d + 1)
        trace = run(np.ones(d), oracle, config, RngStream(5))
        assert len(trace.records) == 1
        assert trace.status == STOPPED_BUDGET
        assert trace.records[0].evals == 2 * d + 1

    def test_fgap_monotone_to_floor_with_optimal_stepsize(self):
        d = 5
        problem = make_quadratic(random_spd(d, 10.0, RngStream(102)),
                                 np.ones(d))
        known = problem.known
        config = SolverConfig(
            mu=1e-6, r_policy=FixedDirections(d),
            lambda_min=known.m, lambda_max=known.L1,
            max_iterations=400, L1=known.L1, L2=0.0, m=known.m)
        assert config.resolved_alpha() == pytest.approx(known.m / known.L1)
        trace = run(make_unit_start(problem, 201), problem.make_oracle(),
                    config, RngStream(6), f_star=known.f_star)
        gaps = np.array([rec.f_gap for rec in trace.records])
        floor_hits = np.nonzero(gaps <= 1e-10)[0]
        assert len(floor_hits) > 0
        until = floor_hits[0]
        assert np.all(np.diff(gaps[:until + 1]) <= 0)

    def test_evals_match_oracle_and_strictly_increase(self):
        d = 4
        problem = make_quadratic(random_spd(d, 4.0, RngStream(103)),
                                 np.zeros(d))
        oracle = problem.make_oracle()
        config = SolverConfig(mu=1e-5, r_policy=FixedDirections(2 * d),
                              max_iterations=8)
        trace = run(np.ones(d), oracle, config, RngStream(7))
        evals = [rec.evals for rec in trace.records]
        assert evals[-1] == oracle.eval_count
        assert all(b > a for a, b in zip(evals, evals[1:]))
        assert all(rec.evals - prev == 2 * rec.r_used + 1
                   for prev, rec in zip([0] + evals, trace.records))

    def test_adaptive_policy_respects_bounds(self):
        d = 4
        problem = make_quadratic(random_spd(d, 6.0, RngStream(104)),
                                 np.zeros(d))
        known = problem.known
        config = SolverConfig(
            mu=1e-5, r_policy=AdaptiveDirections(r_max=30),
            lambda_min=known.m, lambda_max=known.L1,
            max_iterations=12, L1=known.L1, L2=0.0, m=known.m)
        trace = run(np.ones(d), problem.make_oracle(), config, RngStream(8))
        assert all(d <= rec.r_used <= 30 for rec in trace.records)
        # the accounting contract holds for varying r_k too
        evals = [rec.evals for rec in trace.records]
        assert all(rec.evals - prev == 2 * rec.r_used + 1
                   for prev, rec in zip([0] + evals, trace.records))

    def test_zo_floor_stop_on_cubic(self):
        problem = make_cubic_box(4, 0.4)
        known = problem.known
        config = SolverConfig(
            mu=1e-3, r_policy=FixedDirections(4), alpha=1.0,
            lambda_min=known.m, lambda_max=known.L1, max_iterations=50,
            L1=known.L1, L2=known.L2, m=known.m, stop_on_zo_floor=True)
        trace = run(0.3 * np.ones(4), problem.make_oracle(), config,
                    RngStream(9), x_star=known.x_star)
        assert trace.status == STOPPED_ZO_FLOOR
        assert trace.records[-1].zo_bound == pytest.approx(
            4 * known.L2 * 1e-6 / (3 * known.m))

    def test_fixed_r_below_d_rejected(self):
        problem = make_quadratic(np.eye(3), np.zeros(3))
        config = SolverConfig(mu=1e-4, r_policy=FixedDirections(2),
                              max_iterations=1)
        with pytest.raises(ValueError, match="below d"):
            run(np.ones(3), problem.make_oracle(), config, RngStream(10))

    def test_adaptive_requires_l1(self):
        problem = make_quadratic(np.eye(3), np.zeros(3))
        config = SolverConfig(mu=1e-4, r_policy=AdaptiveDirections(r_max=9),
                              max_iterations=1)
        with pytest.raises(ValueError, match="L1"):
            run(np.ones(3), problem.make_oracle(), config, RngStream(11))


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(mu=0.0, r_policy=FixedDirections(3))
    with pytest.raises(ValueError):
        SolverConfig(mu=1e-4, r_policy=FixedDirections(3), lambda_min=2.0,
                     lambda_max=1.0)
    with pytest.raises(ValueError):
        SolverConfig(mu=1e-4, r_policy=FixedDirections(3), max_iterations=0)


def test_alpha_resolution_order():
    base = dict(mu=1e-4, r_policy=FixedDirections(3))
    assert SolverConfig(**base).resolved_alpha() == 1.0
    assert SolverConfig(**base, L1=4.0, lambda_min=1.0).resolved_alpha() == 0.25
    assert SolverConfig(**base, alpha=0.3, L1=4.0).resolved_alpha() == 0.3
