import numpy as np
import pytest

from codedsim import (
    GeneratorConfig,
    build_plan,
    generate_scenario,
    load_plan,
    markov_allocate,
    save_plan,
    unit_delay,
)
from codedsim.planner import allocate_for_assignment, master_channels


def scenario(seed=7, masters=2, workers=5):
    cfg = GeneratorConfig(
        num_masters=masters,
        num_workers=workers,
        task_rows=10_000,
        worker_shift_choices=(0.2, 0.25, 0.3),
    )
    return generate_scenario(cfg, seed)


def test_bad_policy_and_allocation():
    s = scenario()
    with pytest.raises(ValueError, match="policy"):
        build_plan(s, "round-robin")
    with pytest.raises(ValueError, match="allocation"):
        build_plan(s, "dedicated-iter", "genetic")


def test_every_worker_granted_at_most_once_dedicated():
    s = scenario()
    plan = build_plan(s, "dedicated-iter", "markov", seed=2)
    assert (plan.assignment.k.sum(axis=0) <= 1 + 1e-9).all()
    assert np.isin(plan.assignment.k, (0.0, 1.0)).all()


def test_markov_loads_recomputed_per_master():
    s = scenario()
    plan = build_plan(s, "dedicated-iter", "markov", seed=2)
    for m in range(s.num_masters):
        ids, channels = master_channels(s, plan.assignment, m)
        thetas = [
            (0.0 if ch.is_local else 1.0 / ch.comm_rate) + 1.0 / ch.comp_rate + ch.comp_shift
            for ch in channels
        ]
        ref = markov_allocate(thetas, s.task_rows[m])
        assert plan.predicted_delay[m] == pytest.approx(ref.t)
        for node, load in zip(ids, ref.loads):
            assert plan.loads[m, node] == pytest.approx(load)


def test_fractional_loads_follow_stationarity_rule():
    # under the surrogate rule every granted node gets l = t / (2 theta_eff)
    s = scenario()
    plan = build_plan(s, "fractional", "markov", seed=3)
    k, b = plan.assignment.k, plan.assignment.b
    for m in range(s.num_masters):
        t = plan.predicted_delay[m]
        assert plan.loads[m, 0] == pytest.approx(
            t / (2 * unit_delay(s.links[m][0])), rel=1e-9
        )
        for n in range(s.num_workers):
            if k[m, n] > 0:
                theta = unit_delay(s.links[m][n + 1], k[m, n], b[m, n])
                assert plan.loads[m, n + 1] == pytest.approx(t / (2 * theta), rel=1e-9)
            else:
                assert plan.loads[m, n + 1] == 0.0


def test_brute_force_policy_produces_fractional_plan():
    s = scenario(seed=1, masters=2, workers=2)
    plan = build_plan(s, "brute-force", "markov", step=0.25)
    assert plan.assignment.policy_tag == "brute-force"
    assert (plan.assignment.k.sum(axis=0) <= 1 + 1e-9).all()
    assert (plan.loads.sum(axis=1) >= np.asarray(s.task_rows)).all()


def test_exact_comp_ignores_communication():
    s = scenario()
    fast = s.with_gamma_ratio(100.0)
    a = build_plan(s, "dedicated-iter", "exact-comp", seed=4)
    b = build_plan(fast, "dedicated-iter", "exact-comp", seed=4)
    assert a.predicted_delay == pytest.approx(b.predicted_delay)
    assert a.loads == pytest.approx(b.loads)


def test_sca_beats_markov_predictions():
    s = scenario()
    markov_plan = build_plan(s, "dedicated-iter", "markov", seed=5)
    sca_plan = build_plan(s, "dedicated-iter", "sca", seed=5)
    assert (sca_plan.predicted_delay <= markov_plan.predicted_delay * (1 + 1e-9)).all()


def test_comp_only_mode_drops_comm_stage():
    s = scenario()
    plan = build_plan(s, "dedicated-iter", "markov", seed=6, include_comm=False)
    for m in range(s.num_masters):
        _, channels = master_channels(
            s, plan.assignment, m, loads=plan.loads[m], include_comm=False
        )
        assert all(ch.is_local for ch in channels)


def test_allocate_for_assignment_diagnostics():
    s = scenario()
    plan = build_plan(s, "dedicated-simple", "markov", seed=7)
    _, delays, results = allocate_for_assignment(s, plan.assignment, "markov")
    assert delays == pytest.approx(plan.predicted_delay)
    assert all(r.diagnostics["kkt_residual"] < 1e-9 for r in results)


def test_plan_file_round_trip(tmp_path):
    s = scenario()
    plan = build_plan(s, "fractional", "sca", seed=8)
    path = tmp_path / "plan.json"
    save_plan(plan, path)
    again = load_plan(path)
    assert (again.assignment.k == plan.assignment.k).all()
    assert (again.loads == plan.loads).all()
    assert (again.predicted_delay == plan.predicted_delay).all()
    assert again.allocation_tag == plan.allocation_tag
