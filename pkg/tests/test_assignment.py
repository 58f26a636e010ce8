import math

import numpy as np
import pytest

from codedsim import (
    FractionalGreedyConfig,
    GeneratorConfig,
    IteratedGreedyConfig,
    brute_force_fractional,
    compute_values,
    exact_allocate_computation,
    fractional_greedy,
    generate_scenario,
    iterated_greedy,
    opt_time_per_row,
    simple_greedy,
    uniform_assignment,
    unit_delay,
)

from oracles import dedicated_enumeration

# the hand-traceable instance: two masters, three workers
TRACE_VALUES = np.array(
    [
        [1.0, 3.0, 2.0, 1.0],
        [1.0, 2.0, 3.0, 1.0],
    ]
)


def small_scenario(seed=7):
    cfg = GeneratorConfig(
        num_masters=2,
        num_workers=5,
        task_rows=10_000,
        worker_shift_choices=(0.2, 0.25, 0.3),
    )
    return generate_scenario(cfg, seed)


class TestComputeValues:
    def test_general_formula(self):
        s = small_scenario()
        v = compute_values(s, "general")
        assert v.shape == (2, 6)
        for m, row in enumerate(s.links):
            for n, link in enumerate(row):
                assert v[m, n] == pytest.approx(
                    1.0 / (4 * s.task_rows[m] * unit_delay(link)), rel=1e-12
                )

    def test_direct_value(self):
        # L = 1e4 rows and theta = 2 ms/row
        assert 1.0 / (4 * 1e4 * 2.0) == pytest.approx(1.25e-5)

    def test_comp_dominant_value(self):
        s = small_scenario()
        v = compute_values(s, "comp-dominant")
        link = s.links[0][1]
        ratio = opt_time_per_row(link.u, link.a)
        assert v[0, 1] == pytest.approx(
            link.u / (s.task_rows[0] * (1 + link.u * ratio)), rel=1e-12
        )

    def test_comp_dominant_reference(self):
        # u=1, a=1, L=100: value = 1 / (100 * (1 + 2.146193))
        ratio = opt_time_per_row(1.0, 1.0)
        assert 1.0 / (100 * (1 + ratio)) == pytest.approx(3.1787e-3, rel=1e-4)

    def test_doubling_rows_halves_values(self):
        cfg = GeneratorConfig(
            num_masters=2, num_workers=3, task_rows=(1000, 2000),
            worker_shift_choices=(0.25,), master_shift_choices=(0.4,),
        )
        s = generate_scenario(cfg, 0)
        v = compute_values(s, "general")
        assert v[1] == pytest.approx(v[0] / 2, rel=1e-12)

    def test_include_comm_toggle(self):
        s = small_scenario()
        with_comm = compute_values(s, "general", include_comm=True)
        comp_only = compute_values(s, "general", include_comm=False)
        assert (comp_only[:, 1:] > with_comm[:, 1:]).all()
        assert comp_only[:, 0] == pytest.approx(with_comm[:, 0])

    def test_bad_mode(self):
        with pytest.raises(ValueError, match="mode"):
            compute_values(small_scenario(), "exotic")


class TestSimpleGreedy:
    def test_hand_trace(self):
        out = simple_greedy(TRACE_VALUES)
        assert out.assignment.k.tolist() == [[1.0, 0.0, 1.0], [0.0, 1.0, 0.0]]
        assert out.values == pytest.approx([5.0, 4.0])
        assert out.min_value == pytest.approx(4.0)

    def test_trace_is_brute_force_optimal(self):
        best, _ = dedicated_enumeration(TRACE_VALUES)
        assert simple_greedy(TRACE_VALUES).min_value == pytest.approx(best)

    def test_no_workers(self):
        values = np.array([[0.7], [0.9]])
        out = simple_greedy(values)
        assert out.values == pytest.approx([0.7, 0.9])
        assert out.min_value == pytest.approx(0.7)

    def test_single_master_takes_all(self):
        values = np.array([[1.0, 0.5, 0.25, 0.125]])
        out = simple_greedy(values)
        assert out.assignment.k.tolist() == [[1.0, 1.0, 1.0]]
        assert out.min_value == pytest.approx(1.875)


class TestIteratedGreedy:
    def test_hand_instance_reaches_optimum(self):
        best, _ = dedicated_enumeration(TRACE_VALUES)
        out = iterated_greedy(TRACE_VALUES, IteratedGreedyConfig(seed=0))
        assert out.min_value == pytest.approx(best)

    def test_initialization_kept_when_already_optimal(self):
        # one master dominates every worker; the start is already max-min optimal
        values = np.array([[1.0, 5.0, 4.0], [10.0, 1.0, 1.0]])
        out = iterated_greedy(values, IteratedGreedyConfig(seed=1))
        assert out.assignment.k.tolist() == [[1.0, 1.0], [0.0, 0.0]]
        assert out.min_value == pytest.approx(10.0)

    def test_never_below_initialization(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            m = rng.integers(2, 4)
            n = rng.integers(0, 8)
            values = rng.uniform(0.1, 1.0, size=(m, n + 1))
            owner = np.argmax(values[:, 1:], axis=0)
            totals = values[:, 0].copy()
            for worker, master in enumerate(owner):
                totals[master] += values[master, worker + 1]
            out = iterated_greedy(values, IteratedGreedyConfig(seed=3))
            assert out.min_value >= totals.min() - 1e-12

    def test_beats_or_matches_simple_on_random_instances(self):
        rng = np.random.default_rng(11)
        wins = 0
        for _ in range(25):
            m = rng.integers(2, 5)
            n = rng.integers(4, 12)
            values = rng.uniform(0.1, 1.0, size=(m, n + 1))
            simple = simple_greedy(values)
            iterated = iterated_greedy(values, IteratedGreedyConfig(seed=7))
            if iterated.min_value >= simple.min_value - 1e-12:
                wins += 1
        assert wins >= 20

    def test_within_ten_percent_of_enumeration(self):
        rng = np.random.default_rng(13)
        for _ in range(15):
            m = int(rng.integers(2, 4))
            n = int(rng.integers(1, 7))
            values = rng.uniform(0.1, 1.0, size=(m, n + 1))
            best, _ = dedicated_enumeration(values)
            out = iterated_greedy(values, IteratedGreedyConfig(seed=17))
            assert out.min_value >= 0.9 * best

    def test_dedicated_invariants(self):
        values = np.random.default_rng(19).uniform(0.1, 1, size=(3, 9))
        out = iterated_greedy(values, IteratedGreedyConfig(seed=19))
        k = out.assignment.k
        assert np.isin(k, (0.0, 1.0)).all()
        assert (k.sum(axis=0) == 1.0).all()
        assert (out.assignment.b == k).all()

    def test_trace_exposed(self):
        out = iterated_greedy(TRACE_VALUES, IteratedGreedyConfig(seed=0))
        assert len(out.trace) >= 2
        assert out.trace[-1] <= out.min_value + 1e-12


class TestFractionalGreedy:
    def test_single_master_unchanged(self):
        cfg = GeneratorConfig(
            num_masters=1, num_workers=3, task_rows=100, worker_shift_choices=(0.2,)
        )
        s = generate_scenario(cfg, 0)
        init = iterated_greedy(compute_values(s, "general"))
        out = fractional_greedy(s, init)
        assert (out.assignment.k == init.assignment.k).all()

    def test_split_balances_values(self):
        # two masters, one worker worth splitting: full transfer overshoots
        cfg = GeneratorConfig(
            num_masters=2, num_workers=1, task_rows=1000,
            worker_shift_choices=(0.2,), master_shift_choices=(0.4,),
        )
        s = generate_scenario(cfg, 1)
        init = iterated_greedy(compute_values(s, "general"))
        out = fractional_greedy(s, init, FractionalGreedyConfig(balance_tol=1e-9))
        v = out.values
        assert abs(v[0] - v[1]) <= 1e-8 * v.min()
        k = out.assignment.k
        assert k[:, 0].sum() == pytest.approx(1.0)
        assert (k[:, 0] > 0).all()

    def test_split_fraction_matches_scalar_bisection(self):
        cfg = GeneratorConfig(
            num_masters=2, num_workers=1, task_rows=1000,
            worker_shift_choices=(0.2,), master_shift_choices=(0.4, 0.5),
        )
        s = generate_scenario(cfg, 3)
        init = iterated_greedy(compute_values(s, "general"))
        out = fractional_greedy(s, init, FractionalGreedyConfig(balance_tol=1e-9))
        # independent scalar bisection on the transferred fraction
        owner = int(np.argmax(init.assignment.k[:, 0]))
        other = 1 - owner
        theta_owner = unit_delay(s.links[owner][1])
        theta_other = unit_delay(s.links[other][1])
        v_local = np.array(
            [1 / (4 * unit_delay(s.links[m][0]) * s.task_rows[m]) for m in range(2)]
        )
        def gap(x):
            v_o = v_local[owner] + (1 - x) / (4 * theta_owner * s.task_rows[owner])
            v_t = v_local[other] + x / (4 * theta_other * s.task_rows[other])
            return v_o - v_t
        lo, hi = 0.0, 1.0
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if gap(mid) > 0:
                lo = mid
            else:
                hi = mid
        x_oracle = 0.5 * (lo + hi)
        assert out.assignment.k[other, 0] == pytest.approx(x_oracle, abs=1e-6)

    def test_objective_never_below_dedicated_start(self):
        for seed in range(6):
            s = small_scenario(seed)
            init = iterated_greedy(compute_values(s, "general"), IteratedGreedyConfig(seed=seed))
            out = fractional_greedy(s, init)
            init_min = float(
                np.min(
                    [
                        sum(
                            1 / (4 * unit_delay(link)) if (n == 0 or init.assignment.k[m, n - 1]) else 0.0
                            for n, link in enumerate(s.links[m])
                        )
                        / s.task_rows[m]
                        for m in range(s.num_masters)
                    ]
                )
            )
            assert out.min_value >= init_min - 1e-12

    def test_fractional_invariants(self):
        s = small_scenario(4)
        init = iterated_greedy(compute_values(s, "general"))
        out = fractional_greedy(s, init)
        k, b = out.assignment.k, out.assignment.b
        assert (k.sum(axis=0) <= 1 + 1e-9).all()
        assert (b.sum(axis=0) <= 1 + 1e-9).all()
        assert ((k == 0) == (b == 0)).all()

    def test_master_cap_respected(self):
        s = small_scenario(4)
        init = iterated_greedy(compute_values(s, "general"))
        out = fractional_greedy(
            s, init, FractionalGreedyConfig(max_masters_per_worker=1)
        )
        served = (out.assignment.k > 0).sum(axis=0)
        assert (served <= 1).all()

    def test_needs_dedicated_init(self):
        s = small_scenario(4)
        init = iterated_greedy(compute_values(s, "general"))
        frac = fractional_greedy(s, init)
        with pytest.raises(ValueError, match="dedicated"):
            fractional_greedy(s, frac)


class TestBruteForce:
    def test_single_master_full_grant(self):
        cfg = GeneratorConfig(
            num_masters=1, num_workers=2, task_rows=100, worker_shift_choices=(0.25,)
        )
        s = generate_scenario(cfg, 0)
        out = brute_force_fractional(s, step=0.5)
        assert (out.assignment.k == 1.0).all()
        assert (out.assignment.b == 1.0).all()

    def test_step_one_is_dedicated_enumeration(self):
        cfg = GeneratorConfig(
            num_masters=2, num_workers=2, task_rows=500,
            worker_shift_choices=(0.2, 0.3), master_shift_choices=(0.4, 0.5),
        )
        s = generate_scenario(cfg, 9)
        out = brute_force_fractional(s, step=1.0)
        assert np.isin(out.assignment.k, (0.0, 1.0)).all()
        best, _ = dedicated_enumeration(compute_values(s, "general"))
        assert out.min_value == pytest.approx(best, rel=1e-12)

    def test_at_least_as_good_as_fractional_greedy(self):
        cfg = GeneratorConfig(
            num_masters=2, num_workers=2, task_rows=1000,
            worker_shift_choices=(0.2, 0.25, 0.3),
        )
        s = generate_scenario(cfg, 2)
        greedy = fractional_greedy(
            s, iterated_greedy(compute_values(s, "general"))
        )
        brute = brute_force_fractional(s, step=0.05)
        # grid resolution can cost at most a couple of grid cells of value
        assert brute.min_value >= greedy.min_value - 0.1 * greedy.min_value

    def test_scale_guard(self):
        cfg = GeneratorConfig(
            num_masters=2, num_workers=3, task_rows=100, worker_shift_choices=(0.2,)
        )
        s = generate_scenario(cfg, 0)
        with pytest.raises(ValueError, match="grid too large"):
            brute_force_fractional(s, step=0.01)

    def test_bad_step(self):
        s = generate_scenario(
            GeneratorConfig(num_masters=1, num_workers=1, task_rows=10,
                            worker_shift_choices=(0.2,)), 0
        )
        with pytest.raises(ValueError, match="step"):
            brute_force_fractional(s, step=0.0)
        with pytest.raises(ValueError, match="integer"):
            brute_force_fractional(s, step=0.3)


class TestUniform:
    def test_uncoded_equal_split(self):
        cfg = GeneratorConfig(
            num_masters=2, num_workers=4, task_rows=100, worker_shift_choices=(0.2,)
        )
        s = generate_scenario(cfg, 0)
        plan = uniform_assignment(s, coded=False)
        for m in range(2):
            granted = plan.loads[m, 1:][plan.loads[m, 1:] > 0]
            assert granted == pytest.approx([50.0, 50.0])
            assert plan.loads[m, 0] == 0.0
            assert plan.loads[m].sum() == pytest.approx(100.0)

    def test_uncoded_remainder_to_low_masters(self):
        cfg = GeneratorConfig(
            num_masters=2, num_workers=5, task_rows=100, worker_shift_choices=(0.2,)
        )
        s = generate_scenario(cfg, 0)
        plan = uniform_assignment(s, coded=False)
        counts = (plan.assignment.k > 0).sum(axis=1)
        assert counts.tolist() == [3, 2]

    def test_uncoded_needs_enough_workers(self):
        cfg = GeneratorConfig(
            num_masters=3, num_workers=2, task_rows=100, worker_shift_choices=(0.2,)
        )
        s = generate_scenario(cfg, 0)
        with pytest.raises(ValueError, match="worker per master"):
            uniform_assignment(s, coded=False)

    def test_coded_loads_match_exact_allocator(self):
        cfg = GeneratorConfig(
            num_masters=2, num_workers=4, task_rows=1000,
            worker_shift_choices=(0.2, 0.25), master_shift_choices=(0.4,),
        )
        s = generate_scenario(cfg, 3)
        plan = uniform_assignment(s, coded=True)
        for m in range(2):
            granted = [n for n in range(4) if plan.assignment.k[m, n] > 0]
            nodes = [(s.links[m][0].u, s.links[m][0].a)] + [
                (s.links[m][n + 1].u, s.links[m][n + 1].a) for n in granted
            ]
            ref = exact_allocate_computation(nodes, 1000)
            assert plan.loads[m, 0] == pytest.approx(ref.loads[0])
            assert plan.predicted_delay[m] == pytest.approx(ref.t)
            assert plan.loads[m].sum() > 1000  # coded redundancy
