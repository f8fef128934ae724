import json

import numpy as np
import pytest

from oracles import cobb_douglas_ratio, grid_max_2d
from qsum.errors import ConfigurationError, DegenerateDirectionError, DomainError, InvalidArgumentError
from qsum.problem import evaluate_sum
from qsum.problems import (
    DOMAIN_FLOOR,
    MCDPEInstance,
    ball_constraint,
    default_start,
    default_targets,
    estimate_component_maximum,
    estimate_hoelder_constants,
    generate_mcdpe,
    linear_constraint,
    make_example3,
    make_example4,
    make_feasibility_problem,
    mcdpe_ratio,
    mcdpe_ratios,
    random_feasibility_problem,
    ratio_quasi_subgradient,
    sor_direct_problem,
    sor_to_sum_problem,
    total_ratio,
)
from qsum.projections import Box, Polyhedron, WholeSpace
from qsum.solvers import StopCriteria, incsgm_run
from qsum.stepsize import Diminishing


def single_ratio(a, c):
    """One-ratio instance without linear constraints (``B`` is a zero row)."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    c = np.atleast_2d(np.asarray(c, dtype=float))
    n = a.shape[1] - 1
    return MCDPEInstance(a=a, c=c, B=np.zeros((1, n)), p_rhs=np.zeros(1))


class TestExamples:
    def test_example3(self):
        prob = make_example3()
        assert evaluate_sum(prob, [3.0]) == 3.0
        np.testing.assert_array_equal(prob.components[1].direction([-2.0]), [-1.0])
        assert prob.known_solution[0] == 0.0 and prob.optimal_value == 0.0
        assert prob.assumption1_holds and prob.meta().L_max == 1.0

    def test_example4(self):
        prob = make_example4()
        assert evaluate_sum(prob, [0.0]) == 4.0
        assert evaluate_sum(prob, [1.0]) == 3.0
        assert not prob.assumption1_holds
        assert prob.meta().L_max == 2.0


class TestFeasibilityProblems:
    def interval(self):
        return make_feasibility_problem([linear_constraint([-1.0], -1.0), linear_constraint([1.0], 3.0)], WholeSpace(), 1)

    def test_interior_point(self):
        prob = self.interval()
        assert prob.optimal_value == 0.0 and evaluate_sum(prob, [2.0]) == 0.0

    def test_outside(self):
        assert evaluate_sum(self.interval(), [0.0]) == 1.0

    def test_inconsistent_system_min_is_two(self):
        prob = make_feasibility_problem([linear_constraint([-1.0], -3.0), linear_constraint([1.0], 1.0)], WholeSpace(), 1)
        grid = np.linspace(1.0, 3.0, 2001)
        assert min(evaluate_sum(prob, [x]) for x in grid) >= 2.0 - 1e-12

    def test_components_nonnegative(self):
        prob = random_feasibility_problem(n=10, m=5, seed=0)
        rng = np.random.default_rng(0)
        for _ in range(200):
            x = rng.uniform(-10, 10, 10)
            assert all(c(x) >= 0.0 for c in prob.components)
        assert evaluate_sum(prob, prob.known_solution) == 0.0

    def test_solution_set_exposed(self):
        prob = random_feasibility_problem(n=4, m=3, seed=2)
        assert isinstance(prob.solution_set, Polyhedron)
        assert prob.solution_set.contains(prob.known_solution)

    def test_ball_constraint(self):
        con = ball_constraint([0.0, 0.0], 1.0)
        assert con.value(np.array([3.0, 4.0])) == 4.0
        np.testing.assert_allclose(con.direction(np.array([3.0, 4.0])), [0.6, 0.8])
        np.testing.assert_array_equal(con.direction(np.zeros(2)), [1.0, 0.0])

    def test_zero_normal(self):
        with pytest.raises(InvalidArgumentError):
            linear_constraint([0.0, 0.0], 1.0)


class TestGenerator:
    @pytest.mark.parametrize("seed", [0, 1, 12345, 2**40])
    def test_ranges(self, seed):
        inst = generate_mcdpe(5, 8, 4, seed)
        assert np.all((inst.a[:, 0] >= 0) & (inst.a[:, 0] <= 10))
        np.testing.assert_allclose(inst.a[:, 1:].sum(axis=1), 1.0, atol=1e-9)
        assert np.all((inst.c >= 0) & (inst.c <= 1))
        assert np.all((inst.B >= 0) & (inst.B <= 1))
        assert np.all((inst.p_rhs >= 0) & (inst.p_rhs <= 4.0))
        assert (inst.m, inst.n, inst.s) == (5, 8, 4)

    def test_deterministic(self):
        a, b = generate_mcdpe(3, 4, 2, 9), generate_mcdpe(3, 4, 2, 9)
        assert a.to_json() == b.to_json()
        assert generate_mcdpe(3, 4, 2, 10).to_json() != a.to_json()

    def test_json_round_trip(self):
        inst = generate_mcdpe(3, 4, 2, 5)
        back = MCDPEInstance.from_json(inst.to_json())
        for name in ("a", "c", "B", "p_rhs"):
            np.testing.assert_array_equal(getattr(back, name), getattr(inst, name))
        assert set(json.loads(inst.to_json())) == {"m", "n", "s", "a", "c", "B", "p_rhs", "seed"}

    def test_rejects_bad_data(self):
        with pytest.raises(InvalidArgumentError):
            MCDPEInstance(a=[[1.0, 0.5, 0.4]], c=[[0, 1, 1]], B=[[1.0, 1.0]], p_rhs=[0.0])
        with pytest.raises(InvalidArgumentError):
            generate_mcdpe(0, 1, 1, 0)
        data = generate_mcdpe(2, 3, 1, 0).to_dict()
        data["n"] = 4
        with pytest.raises(InvalidArgumentError):
            MCDPEInstance.from_dict(data)


class TestRatios:
    def test_hand_values(self):
        assert mcdpe_ratio(single_ratio([2.0, 1.0], [1.0, 1.0]), 0, [1.0]) == pytest.approx(1.0)
        assert mcdpe_ratio(single_ratio([1.0, 0.5, 0.5], [0.0, 1.0, 1.0]), 0, [4.0, 1.0]) == pytest.approx(0.4)

    def test_scale_invariance(self):
        x = np.array([0.7, 1.3])
        r1 = mcdpe_ratio(single_ratio([1.0, 0.3, 0.7], [0.2, 1.0, 0.5]), 0, x)
        r2 = mcdpe_ratio(single_ratio([2.0, 0.3, 0.7], [0.2, 1.0, 0.5]), 0, x)
        assert r2 == pytest.approx(2 * r1, rel=1e-14)

    def test_matches_direct_formula(self):
        inst = generate_mcdpe(4, 6, 3, 2)
        X = np.random.default_rng(0).uniform(0.1, 3.0, (20, 6))
        for x in X:
            expected = [cobb_douglas_ratio(inst.a[i], inst.c[i], x)[0] for i in range(4)]
            np.testing.assert_allclose(mcdpe_ratios(inst, x), expected, rtol=1e-12)
        assert total_ratio(inst, X[0]) == pytest.approx(sum(mcdpe_ratios(inst, X[0])))

    def test_domain_guard(self):
        inst = single_ratio([2.0, 1.0], [1.0, 1.0])
        with pytest.raises(DomainError):
            mcdpe_ratio(inst, 0, [0.0])
        with pytest.raises(DomainError):
            ratio_quasi_subgradient(inst, 0, [-1.0])

    def test_quasi_concavity(self):
        inst = generate_mcdpe(5, 6, 3, 7)
        rng = np.random.default_rng(1)
        for _ in range(1000):
            x, y = rng.uniform(DOMAIN_FLOOR, 3.0, (2, 6))
            t = rng.uniform()
            z = t * x + (1 - t) * y
            i = rng.integers(5)
            assert mcdpe_ratio(inst, i, z) >= min(mcdpe_ratio(inst, i, x), mcdpe_ratio(inst, i, y)) - 1e-9


class TestRatioSubgradient:
    def test_one_dimensional(self):
        np.testing.assert_allclose(ratio_quasi_subgradient(single_ratio([2.0, 1.0], [1.0, 1.0]), 0, [1.0]), [-1.0])

    def test_symmetric(self):
        # with zero intercept this ratio is constant along the diagonal, so a
        # fixed cost is added to get a nonzero direction there
        g = ratio_quasi_subgradient(single_ratio([1.0, 0.5, 0.5], [1.0, 1.0, 1.0]), 0, [0.8, 0.8])
        assert g[0] == pytest.approx(g[1]) and abs(abs(g[0]) - 2**-0.5) < 1e-12

    def test_symmetric_without_intercept_is_degenerate(self):
        with pytest.raises(DegenerateDirectionError):
            ratio_quasi_subgradient(single_ratio([1.0, 0.5, 0.5], [0.0, 1.0, 1.0]), 0, [0.8, 0.8])

    def test_degenerate(self):
        # R = x / (x) is constant, so the direction vanishes
        with pytest.raises(DegenerateDirectionError):
            ratio_quasi_subgradient(single_ratio([1.0, 1.0], [0.0, 1.0]), 0, [2.0])

    def test_normal_cone(self):
        inst = generate_mcdpe(3, 5, 2, 4)
        rng = np.random.default_rng(2)
        checked = 0
        for _ in range(40):
            x = rng.uniform(0.2, 3.0, 5)
            i = int(rng.integers(3))
            g = ratio_quasi_subgradient(inst, i, x)
            assert abs(np.linalg.norm(g) - 1.0) <= 1e-12
            rx = mcdpe_ratio(inst, i, x)
            for y in rng.uniform(DOMAIN_FLOOR, 4.0, (1000, 5)):
                if mcdpe_ratio(inst, i, y) > rx:
                    checked += 1
                    assert g @ (y - x) <= 1e-9
        assert checked > 1000


class TestReformulations:
    def test_zero_targets_trivially_optimal(self):
        inst = generate_mcdpe(3, 4, 2, 0)
        prob = sor_to_sum_problem(inst, np.zeros(3), np.ones(3))
        assert prob.assumption1_holds and prob.optimal_value == 0.0
        assert evaluate_sum(prob, default_start(inst)) == 0.0

    def test_unattainable_targets_flagged(self):
        inst = generate_mcdpe(3, 4, 2, 0)
        prob = sor_to_sum_problem(inst, np.full(3, 1e6), np.ones(3))
        assert not prob.assumption1_holds and prob.optimal_value is None

    def test_bad_L(self):
        inst = generate_mcdpe(2, 3, 1, 0)
        with pytest.raises(ConfigurationError):
            sor_to_sum_problem(inst, np.zeros(2), [1.0, 0.0])
        with pytest.raises(ConfigurationError):
            sor_direct_problem(inst, [1.0])

    def test_direct_problem_negates(self):
        inst = generate_mcdpe(3, 4, 2, 1)
        prob = sor_direct_problem(inst, np.ones(3))
        x = default_start(inst)
        assert evaluate_sum(prob, x) == pytest.approx(-total_ratio(inst, x))
        assert all(c.optimal_value == -np.inf for c in prob.components)

    def test_feasible_set_floor(self):
        inst = generate_mcdpe(2, 3, 2, 3)
        x = default_start(inst)
        assert np.all(x >= DOMAIN_FLOOR) and inst.feasible_set().contains(x)

    def test_single_ratio_target_reached(self):
        inst = single_ratio([1.0, 0.5, 0.5], [0.5, 1.0, 0.2])
        box = Box(DOMAIN_FLOOR, 2.0)
        r_grid, _ = grid_max_2d(lambda X: cobb_douglas_ratio(inst.a[0], inst.c[0], X), (1e-3, 1e-3), (2.0, 2.0))
        prob = sor_to_sum_problem(inst, [r_grid], [1.0], assumption1_holds=True, projector=box)
        res = incsgm_run(prob, [1.0, 1.0], Diminishing(0.5), StopCriteria(5000))
        assert res.status.value == "target_reached" and res.best_value <= 1e-9


class TestComponentMaximum:
    def test_monotone_ratio(self):
        inst = single_ratio([2.0, 1.0], [1.0, 1.0])
        r = estimate_component_maximum(inst, 0, budget=200, projector=Box(DOMAIN_FLOOR, 10.0))
        assert r == pytest.approx(20.0 / 11.0, abs=1e-9)

    def test_constant_ratio(self):
        inst = single_ratio([3.0, 1.0], [0.0, 2.0])
        assert estimate_component_maximum(inst, 0, budget=5, projector=Box(DOMAIN_FLOOR, 10.0)) == pytest.approx(1.5)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_below_grid_maximum(self, seed):
        inst = generate_mcdpe(2, 2, 1, seed)
        box = Box(DOMAIN_FLOOR, 3.0)
        for i in range(2):
            r_grid, _ = grid_max_2d(
                lambda X: cobb_douglas_ratio(inst.a[i], inst.c[i], X), (DOMAIN_FLOOR, DOMAIN_FLOOR), (3.0, 3.0)
            )
            assert estimate_component_maximum(inst, i, budget=300, projector=box) <= r_grid + 1e-6

    def test_budget(self):
        with pytest.raises(InvalidArgumentError):
            estimate_component_maximum(generate_mcdpe(1, 2, 1, 0), 0, budget=0)

    def test_default_targets_shortfall(self):
        inst = generate_mcdpe(3, 5, 2, 0)
        t = default_targets(inst, budget=50)
        maxima = [estimate_component_maximum(inst, i, 50) for i in range(3)]
        np.testing.assert_allclose(t, (1 - 1e-3) * np.array(maxima), rtol=1e-15)


class TestHoelderEstimates:
    def test_positive_and_seeded(self):
        inst = generate_mcdpe(4, 10, 3, 0)
        L1 = estimate_hoelder_constants(inst, 5, samples=50)
        L2 = estimate_hoelder_constants(inst, 5, samples=50)
        np.testing.assert_array_equal(L1, L2)
        assert L1.shape == (4,) and np.all(L1 > 0)

    def test_bounds_sampled_slopes(self):
        inst = generate_mcdpe(2, 3, 1, 1)
        L = estimate_hoelder_constants(inst, 0, samples=400, box=(0.5, 2.0))
        rng = np.random.default_rng(9)
        worst = 0.0
        for _ in range(200):
            x = rng.uniform(0.5, 2.0, 3)
            y = x + 1e-3 * rng.standard_normal(3)
            ratio = np.abs(mcdpe_ratios(inst, y) - mcdpe_ratios(inst, x)) / np.linalg.norm(y - x)
            worst = max(worst, float(np.max(ratio / L)))
        # sampled estimates are lower bounds on the true modulus but should be close
        assert worst < 1.5
