"""Worker-assignment engines.

Dedicated assignment (each worker serves one master) is a max-min value
allocation: worker n is worth v[m][n] to master m, and the goal is to maximize
the smallest per-master total. Two heuristics are provided (a one-pass greedy
and an iterated local search), plus a rebalancing greedy for fractional
assignment, an exhaustive grid search for small fractional instances, and the
uniform benchmark splits.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .allocation import exact_allocate_computation, opt_time_per_row
from .delay_model import unit_delay
from .scenario import Assignment, Plan, Scenario

VALUE_MODES = ("general", "comp-dominant")


@dataclass(frozen=True)
class AssignmentOutcome:
    """An assignment with its per-master total values and their minimum."""

    assignment: Assignment
    values: np.ndarray
    min_value: float
    trace: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))


@dataclass(frozen=True)
class IteratedGreedyConfig:
    max_iters: int = 100
    explore_fraction: float = 0.2
    seed: int = 0
    patience: int = 10

    def __post_init__(self):
        if not 0 <= self.explore_fraction <= 1:
            raise ValueError("explore_fraction must lie in [0, 1]")
        if self.max_iters < 1 or self.patience < 1:
            raise ValueError("max_iters and patience must be >= 1")


@dataclass(frozen=True)
class FractionalGreedyConfig:
    max_iters: int = 1000
    balance_tol: float = 1e-6
    max_masters_per_worker: int | None = None


def compute_values(
    scenario: Scenario, mode: str = "general", include_comm: bool = True
) -> np.ndarray:
    """Per-node values for the max-min assignment problem, shape (M, N+1).

    general mode: v = 1 / (4 * L_m * theta), the reciprocal of the surrogate
    delay a node contributes at full grant. comp-dominant mode: the sharper
    value u / (L_m * (1 + u * ratio)) from the computation-only optimum.
    Column 0 is the master's local node.
    """
    if mode not in VALUE_MODES:
        raise ValueError(f"mode must be one of {VALUE_MODES}, got {mode!r}")
    rows = np.asarray(scenario.task_rows, dtype=float)
    if mode == "comp-dominant":
        u = scenario.u_matrix()
        a = scenario.a_matrix()
        ratio = opt_time_per_row(u, a)
        return u / (rows[:, None] * (1.0 + u * ratio))
    thetas = np.empty((scenario.num_masters, scenario.num_workers + 1))
    for m, row in enumerate(scenario.links):
        for n, link in enumerate(row):
            theta = unit_delay(link)
            if n > 0 and not include_comm:
                theta -= 1.0 / link.gamma
            thetas[m, n] = theta
    return 1.0 / (4.0 * rows[:, None] * thetas)


def _dedicated_outcome(values: np.ndarray, owner: np.ndarray, trace=()) -> AssignmentOutcome:
    num_masters, num_nodes = values.shape
    k = np.zeros((num_masters, num_nodes - 1))
    if owner.size:
        k[owner, np.arange(owner.size)] = 1.0
    totals = values[:, 0] + (values[:, 1:] * k).sum(axis=1)
    assignment = Assignment(k=k, b=k.copy(), policy_tag="dedicated")
    return AssignmentOutcome(assignment, totals, float(totals.min()), tuple(trace))


def simple_greedy(values: np.ndarray) -> AssignmentOutcome:
    """One-pass greedy: repeatedly give the poorest master its best free worker."""
    values = np.asarray(values, dtype=float)
    num_masters, num_nodes = values.shape
    num_workers = num_nodes - 1
    totals = values[:, 0].copy()
    owner = np.zeros(num_workers, dtype=int)
    free = np.ones(num_workers, dtype=bool)
    for _ in range(num_workers):
        m_star = int(np.argmin(totals))
        masked = np.where(free, values[m_star, 1:], -np.inf)
        n_star = int(np.argmax(masked))
        owner[n_star] = m_star
        free[n_star] = False
        totals[m_star] += values[m_star, n_star + 1]
    return _dedicated_outcome(values, owner)


def _totals_from_owner(values: np.ndarray, owner: np.ndarray) -> np.ndarray:
    totals = values[:, 0].copy()
    for n, m in enumerate(owner):
        totals[m] += values[m, n + 1]
    return totals


def iterated_greedy(
    values: np.ndarray, cfg: IteratedGreedyConfig | None = None
) -> AssignmentOutcome:
    """Local-search assignment: greedy start, then insertion, pairwise
    interchange, and randomized partial rebuilds.

    Starts by giving each worker to the master that values it most. Each round
    then (1) moves single workers to the poorest other master whenever that
    raises the global minimum, (2) swaps worker pairs between masters whenever
    the swap raises their combined value without pushing either below the
    pre-swap minimum, and (3) randomly unassigns a fraction of workers and
    reinserts them greedily to escape local optima. The best assignment seen
    after any interchange step is returned; it is never worse than the start.
    """
    cfg = cfg or IteratedGreedyConfig()
    values = np.asarray(values, dtype=float)
    num_masters, num_nodes = values.shape
    num_workers = num_nodes - 1
    rng = np.random.default_rng(cfg.seed)

    owner = (
        np.argmax(values[:, 1:], axis=0) if num_workers else np.zeros(0, dtype=int)
    )
    totals = _totals_from_owner(values, owner)
    best_owner = owner.copy()
    best_min = float(totals.min())
    trace = [best_min]

    stale = 0
    for _ in range(cfg.max_iters):
        if num_masters > 1:
            # Insertion: re-home workers onto the poorest other master.
            for n in range(num_workers):
                m1 = owner[n]
                others = np.where(np.arange(num_masters) != m1, totals, np.inf)
                m2 = int(np.argmin(others))
                new_m1 = totals[m1] - values[m1, n + 1]
                new_m2 = totals[m2] + values[m2, n + 1]
                current_min = totals.min()
                moved_min = min(
                    new_m1,
                    new_m2,
                    min(
                        (totals[m] for m in range(num_masters) if m not in (m1, m2)),
                        default=np.inf,
                    ),
                )
                if moved_min > current_min:
                    totals[m1], totals[m2] = new_m1, new_m2
                    owner[n] = m2

            # Interchange: swap pairs when their combined value improves and
            # neither master drops to the current minimum or below.
            for n1 in range(num_workers):
                for n2 in range(num_workers):
                    if n1 == n2:
                        continue
                    m1, m2 = owner[n1], owner[n2]
                    if m1 == m2:
                        continue
                    if (
                        values[m1, n1 + 1] + values[m2, n2 + 1]
                        >= values[m1, n2 + 1] + values[m2, n1 + 1]
                    ):
                        continue
                    new_m1 = totals[m1] - values[m1, n1 + 1] + values[m1, n2 + 1]
                    new_m2 = totals[m2] - values[m2, n2 + 1] + values[m2, n1 + 1]
                    v_min = totals.min()
                    if new_m1 > v_min and new_m2 > v_min:
                        totals[m1], totals[m2] = new_m1, new_m2
                        owner[n1], owner[n2] = m2, m1

        current_min = float(totals.min())
        trace.append(current_min)
        if current_min > best_min:
            best_min = current_min
            best_owner = owner.copy()
            stale = 0
        else:
            stale += 1
        if stale >= cfg.patience:
            break

        # Exploration: rebuild a random subset greedily by global best value.
        n_remove = int(round(cfg.explore_fraction * num_workers))
        if n_remove and num_workers:
            removed = np.sort(rng.choice(num_workers, size=n_remove, replace=False))
            for n in removed:
                totals[owner[n]] -= values[owner[n], n + 1]
            pool = list(removed)
            while pool:
                sub = values[:, [n + 1 for n in pool]]
                flat = int(np.argmax(sub))
                m_star, idx = divmod(flat, len(pool))
                n_star = pool.pop(idx)
                owner[n_star] = m_star
                totals[m_star] += values[m_star, n_star + 1]

    return _dedicated_outcome(values, best_owner, trace)


def _theta_fractional(link, k: float, b: float) -> float:
    return unit_delay(link, k, b)


def _masters_values(scenario: Scenario, k: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Surrogate rate values V_m = (1/L_m) sum_n 1/(4 theta_mn) under (k, b)."""
    totals = np.empty(scenario.num_masters)
    for m, row in enumerate(scenario.links):
        acc = 1.0 / (4.0 * unit_delay(row[0]))
        for n in range(scenario.num_workers):
            theta = unit_delay(row[n + 1], k[m, n], b[m, n])
            if math.isfinite(theta):
                acc += 1.0 / (4.0 * theta)
        totals[m] = acc / scenario.task_rows[m]
    return totals


def fractional_greedy(
    scenario: Scenario,
    init: AssignmentOutcome,
    cfg: FractionalGreedyConfig | None = None,
) -> AssignmentOutcome:
    """Rebalance a dedicated assignment by splitting workers across masters.

    Repeatedly moves resource from the richest master to the poorest via a
    worker serving the former but not the latter: either the full grant, or a
    single fraction of both the compute and bandwidth shares chosen so the two
    masters' values meet. Stops when values are balanced within balance_tol,
    no transferable worker exists, or max_iters is hit. When
    max_masters_per_worker is set, workers already serving that many masters
    are not considered for further splits.
    """
    cfg = cfg or FractionalGreedyConfig()
    if init.assignment.policy_tag not in ("dedicated",):
        raise ValueError("fractional_greedy needs a dedicated initial assignment")
    k = init.assignment.k.astype(float).copy()
    b = init.assignment.b.astype(float).copy()
    num_masters, num_workers = k.shape
    rows = np.asarray(scenario.task_rows, dtype=float)
    values = _masters_values(scenario, k, b)

    for _ in range(cfg.max_iters):
        if num_masters < 2 or num_workers == 0:
            break
        m1 = int(np.argmax(values))
        m2 = int(np.argmin(values))
        if values[m1] - values[m2] <= cfg.balance_tol * values[m2]:
            break
        candidates = [n for n in range(num_workers) if k[m1, n] > 0 and k[m2, n] == 0]
        if cfg.max_masters_per_worker is not None:
            candidates = [
                n
                for n in candidates
                if np.count_nonzero(k[:, n]) < cfg.max_masters_per_worker
            ]
        if not candidates:
            break
        theta_gain = np.array(
            [unit_delay(scenario.links[m2][n + 1], k[m1, n], b[m1, n]) for n in candidates]
        )
        n1 = candidates[int(np.argmin(theta_gain))]
        loss_full = 1.0 / (4.0 * unit_delay(scenario.links[m1][n1 + 1], k[m1, n1], b[m1, n1]) * rows[m1])
        gain_full = 1.0 / (4.0 * unit_delay(scenario.links[m2][n1 + 1], k[m1, n1], b[m1, n1]) * rows[m2])
        if values[m1] - loss_full <= values[m2] + gain_full:
            # Split: transfer the fraction x of both shares that equalizes the
            # two masters' values (their gap is monotone in x).
            lo_x, hi_x = 0.0, 1.0
            for _ in range(60):
                mid = 0.5 * (lo_x + hi_x)
                gap = (values[m1] - mid * loss_full) - (values[m2] + mid * gain_full)
                if gap > 0:
                    lo_x = mid
                else:
                    hi_x = mid
            x = 0.5 * (lo_x + hi_x)
            k[m2, n1] = x * k[m1, n1]
            b[m2, n1] = x * b[m1, n1]
            k[m1, n1] *= 1.0 - x
            b[m1, n1] *= 1.0 - x
        else:
            k[m2, n1] = k[m1, n1]
            b[m2, n1] = b[m1, n1]
            k[m1, n1] = 0.0
            b[m1, n1] = 0.0
        values = _masters_values(scenario, k, b)

    assignment = Assignment(k=k, b=b, policy_tag="fractional")
    return AssignmentOutcome(assignment, values, float(values.min()))


BRUTE_FORCE_MAX_COMBOS = 1.2e8


def _grid_columns(num_masters: int, steps: int) -> np.ndarray:
    """All per-worker share columns on the grid: first M-1 entries free with
    sum <= 1, the last master takes the remainder. Entries are multiples of
    1/steps, exact by integer construction."""
    free = num_masters - 1
    cols = []
    for combo in itertools.product(range(steps + 1), repeat=free):
        used = sum(combo)
        if used <= steps:
            cols.append(combo + (steps - used,))
    return np.asarray(cols, dtype=float) / steps


def brute_force_fractional(scenario: Scenario, step: float = 0.05) -> AssignmentOutcome:
    """Exhaustive grid search over fractional shares; exact up to grid width.

    Enumerates every per-worker (k, b) column pair on a grid of the given
    step, keeping column sums at 1 (spare share never helps) and zero compute
    and bandwidth entries matched. Intended for tiny instances; raises when
    the grid would exceed a fixed evaluation budget.
    """
    if not 0 < step <= 1:
        raise ValueError(f"step must lie in (0, 1], got {step}")
    steps = round(1.0 / step)
    if abs(steps * step - 1.0) > 1e-9:
        raise ValueError(f"1/step must be an integer, got step={step}")
    num_masters, num_workers = scenario.num_masters, scenario.num_workers
    rows = np.asarray(scenario.task_rows, dtype=float)

    cols = _grid_columns(num_masters, steps)
    masks = cols > 0
    # Pair k and b columns whose zero patterns agree (a share of one resource
    # without the other is dead weight).
    pair_k, pair_b = [], []
    for i, mk in enumerate(masks):
        for j, mb in enumerate(masks):
            if (mk == mb).all():
                pair_k.append(i)
                pair_b.append(j)
    pair_k = np.asarray(pair_k)
    pair_b = np.asarray(pair_b)
    num_pairs = len(pair_k)
    total = float(num_pairs) ** max(num_workers, 1)
    if total > BRUTE_FORCE_MAX_COMBOS:
        raise ValueError(
            f"grid too large: {num_pairs}^{num_workers} = {total:.3g} combinations "
            f"(limit {BRUTE_FORCE_MAX_COMBOS:.3g}); coarsen the step"
        )

    base = np.array(
        [1.0 / (4.0 * unit_delay(row[0]) * rows[m]) for m, row in enumerate(scenario.links)]
    )
    if num_workers == 0:
        k = np.zeros((num_masters, 0))
        assignment = Assignment(k=k, b=k.copy(), policy_tag="brute-force")
        return AssignmentOutcome(assignment, base, float(base.min()))

    # Per-worker value contribution of every candidate pair, shape (P, M).
    contribs = []
    for n in range(num_workers):
        gamma = np.array([scenario.links[m][n + 1].gamma for m in range(num_masters)])
        u = np.array([scenario.links[m][n + 1].u for m in range(num_masters)])
        a = np.array([scenario.links[m][n + 1].a for m in range(num_masters)])
        kk = cols[pair_k]
        bb = cols[pair_b]
        with np.errstate(divide="ignore"):
            theta = 1.0 / (bb * gamma) + 1.0 / (kk * u) + a / kk
        contrib = np.where(kk > 0, 1.0 / (4.0 * theta * rows), 0.0)
        contribs.append(contrib)

    best_min = -np.inf
    best_choice = None
    last = contribs[-1]
    prefix_range = [range(num_pairs)] * (num_workers - 1)
    for prefix in itertools.product(*prefix_range):
        partial = base.copy()
        for n, c in enumerate(prefix):
            partial = partial + contribs[n][c]
        mins = np.min(partial[None, :] + last, axis=1)
        idx = int(np.argmax(mins))
        if mins[idx] > best_min:
            best_min = float(mins[idx])
            best_choice = prefix + (idx,)

    k = np.empty((num_masters, num_workers))
    b = np.empty((num_masters, num_workers))
    for n, c in enumerate(best_choice):
        k[:, n] = cols[pair_k[c]]
        b[:, n] = cols[pair_b[c]]
    assignment = Assignment(k=k, b=b, policy_tag="brute-force")
    values = base.copy()
    for n, c in enumerate(best_choice):
        values = values + contribs[n][c]
    return AssignmentOutcome(assignment, values, float(values.min()))


def uniform_assignment(scenario: Scenario, coded: bool) -> Plan:
    """Benchmark split: equal worker counts per master, in index order.

    Uncoded: the task is partitioned evenly over the assigned workers with no
    redundancy and no local load. Coded: loads come from the computation-only
    closed form over the assigned workers plus the local node. When N is not
    divisible by M, lower-index masters take the extra workers.
    """
    num_masters, num_workers = scenario.num_masters, scenario.num_workers
    base, extra = divmod(num_workers, num_masters)
    counts = [base + (1 if m < extra else 0) for m in range(num_masters)]
    if not coded and min(counts) == 0:
        raise ValueError("uncoded uniform split needs at least one worker per master")

    k = np.zeros((num_masters, num_workers))
    start = 0
    granted = []
    for m, count in enumerate(counts):
        ids = list(range(start, start + count))
        granted.append(ids)
        k[m, ids] = 1.0
        start += count
    tag = "uniform-coded" if coded else "uniform-uncoded"
    assignment = Assignment(k=k, b=k.copy(), policy_tag=tag)

    loads = np.zeros((num_masters, num_workers + 1))
    delays = np.empty(num_masters)
    for m in range(num_masters):
        row = scenario.links[m]
        if coded:
            nodes = [(row[0].u, row[0].a)] + [(row[n + 1].u, row[n + 1].a) for n in granted[m]]
            result = exact_allocate_computation(nodes, scenario.task_rows[m])
            loads[m, 0] = result.loads[0]
            for i, n in enumerate(granted[m]):
                loads[m, n + 1] = result.loads[i + 1]
            delays[m] = result.t
        else:
            share = scenario.task_rows[m] / counts[m]
            expected = 0.0
            for n in granted[m]:
                loads[m, n + 1] = share
                expected = max(expected, share * unit_delay(row[n + 1]))
            delays[m] = expected
    return Plan(
        assignment=assignment,
        loads=loads,
        predicted_delay=delays,
        allocation_tag="exact-comp" if coded else "uniform",
    )
