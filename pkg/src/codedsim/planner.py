"""End-to-end plan construction: policy -> assignment -> loads -> Plan.

A policy picks who serves whom; an allocation rule then sizes the coded loads
per master over the granted nodes (the local node is always available). Plans
serialize to a small JSON document so every experiment can be replayed.
"""

from __future__ import annotations

import json

import numpy as np

from .allocation import (
    AllocationResult,
    ScaConfig,
    exact_allocate_computation,
    markov_allocate,
    sca_refine,
)
from .assignment import (
    AssignmentOutcome,
    FractionalGreedyConfig,
    IteratedGreedyConfig,
    brute_force_fractional,
    compute_values,
    fractional_greedy,
    iterated_greedy,
    simple_greedy,
    uniform_assignment,
)
from .delay_model import EffectiveChannel
from .scenario import Assignment, Plan, Scenario

POLICIES = (
    "dedicated-iter",
    "dedicated-simple",
    "fractional",
    "uniform-uncoded",
    "uniform-coded",
    "brute-force",
)
ALLOCATIONS = ("markov", "exact-comp", "sca")


def master_channels(
    scenario: Scenario,
    assignment: Assignment,
    m: int,
    loads: np.ndarray | None = None,
    include_comm: bool = True,
) -> tuple[list[int], list[EffectiveChannel]]:
    """Active node ids (0 = local) and their effective channels for master m.

    With include_comm=False every channel drops its communication stage, which
    models the computation-dominant regime.
    """
    ids = [0] + [int(n) + 1 for n in np.flatnonzero(assignment.k[m] > 0)]
    channels = []
    for node in ids:
        link = scenario.links[m][node]
        load = 0.0 if loads is None else float(loads[node])
        if node == 0:
            channels.append(EffectiveChannel(None, link.u, link.a, load))
            continue
        k = float(assignment.k[m, node - 1])
        b = float(assignment.b[m, node - 1])
        comm = b * link.gamma if include_comm else None
        channels.append(EffectiveChannel(comm, k * link.u, link.a / k, load))
    return ids, channels


def _channel_theta(ch: EffectiveChannel) -> float:
    comm = 0.0 if ch.is_local else 1.0 / ch.comm_rate
    return comm + 1.0 / ch.comp_rate + ch.comp_shift


def allocate_for_assignment(
    scenario: Scenario,
    assignment: Assignment,
    allocation: str,
    sca_cfg: ScaConfig | None = None,
    include_comm: bool = True,
) -> tuple[np.ndarray, np.ndarray, list[AllocationResult]]:
    """Size loads for every master under the given assignment and rule."""
    if allocation not in ALLOCATIONS:
        raise ValueError(f"allocation must be one of {ALLOCATIONS}, got {allocation!r}")
    num_masters, num_workers = assignment.k.shape
    loads = np.zeros((num_masters, num_workers + 1))
    delays = np.empty(num_masters)
    results = []
    for m in range(num_masters):
        ids, channels = master_channels(scenario, assignment, m, include_comm=include_comm)
        rows = scenario.task_rows[m]
        if allocation == "markov":
            result = markov_allocate([_channel_theta(ch) for ch in channels], rows)
        elif allocation == "exact-comp":
            result = exact_allocate_computation(
                [(ch.comp_rate, ch.comp_shift) for ch in channels], rows
            )
        else:
            init = markov_allocate([_channel_theta(ch) for ch in channels], rows)
            result = sca_refine(channels, rows, init, sca_cfg)
        for node, load in zip(ids, result.loads):
            loads[m, node] = load
        delays[m] = result.t
        results.append(result)
    return loads, delays, results


def build_plan(
    scenario: Scenario,
    policy: str,
    allocation: str = "markov",
    *,
    seed: int = 0,
    sca_cfg: ScaConfig | None = None,
    step: float = 0.01,
    include_comm: bool = True,
    values_mode: str | None = None,
    iter_cfg: IteratedGreedyConfig | None = None,
    frac_cfg: FractionalGreedyConfig | None = None,
) -> Plan:
    """Assign workers under a policy and size their loads under a rule.

    The uniform benchmark policies ignore the allocation argument (uncoded has
    no redundancy to size; coded is fixed to the computation-only closed
    form). For the other policies values_mode picks the assignment metric,
    defaulting to the metric matching the allocation rule.
    """
    if policy not in POLICIES:
        raise ValueError(f"policy must be one of {POLICIES}, got {policy!r}")
    if policy == "uniform-uncoded":
        return uniform_assignment(scenario, coded=False)
    if policy == "uniform-coded":
        return uniform_assignment(scenario, coded=True)

    if values_mode is None:
        values_mode = "comp-dominant" if allocation == "exact-comp" else "general"

    if policy == "brute-force":
        outcome = brute_force_fractional(scenario, step)
    elif policy == "fractional":
        # The rebalancing greedy reasons in surrogate values, so its dedicated
        # starting point is always built from the general metric.
        values = compute_values(scenario, "general", include_comm=include_comm)
        init = iterated_greedy(values, iter_cfg or IteratedGreedyConfig(seed=seed))
        outcome = fractional_greedy(scenario, init, frac_cfg)
    else:
        values = compute_values(scenario, values_mode, include_comm=include_comm)
        if policy == "dedicated-simple":
            outcome = simple_greedy(values)
        else:
            outcome = iterated_greedy(values, iter_cfg or IteratedGreedyConfig(seed=seed))

    loads, delays, _ = allocate_for_assignment(
        scenario, outcome.assignment, allocation, sca_cfg, include_comm
    )
    return Plan(
        assignment=outcome.assignment,
        loads=loads,
        predicted_delay=delays,
        allocation_tag=allocation,
    )


def plan_to_dict(plan: Plan) -> dict:
    return {
        "policy": plan.assignment.policy_tag,
        "allocation": plan.allocation_tag,
        "k": plan.assignment.k.tolist(),
        "b": plan.assignment.b.tolist(),
        "loads": plan.loads.tolist(),
        "predicted_delay_ms": plan.predicted_delay.tolist(),
    }


def plan_from_dict(doc: dict) -> Plan:
    for key in ("policy", "allocation", "k", "b", "loads", "predicted_delay_ms"):
        if key not in doc:
            raise ValueError(f"plan document missing key '{key}'")
    assignment = Assignment(
        k=np.asarray(doc["k"], dtype=float),
        b=np.asarray(doc["b"], dtype=float),
        policy_tag=doc["policy"],
    )
    return Plan(
        assignment=assignment,
        loads=np.asarray(doc["loads"], dtype=float),
        predicted_delay=np.asarray(doc["predicted_delay_ms"], dtype=float),
        allocation_tag=doc["allocation"],
    )


def save_plan(plan: Plan, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(plan_to_dict(plan), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_plan(path) -> Plan:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: not valid JSON: {exc}") from exc
    return plan_from_dict(doc)
