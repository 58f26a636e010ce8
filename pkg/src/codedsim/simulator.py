"""Monte Carlo evaluation of a plan.

Each trial samples every loaded channel's total delay; a master completes at
the earliest time the loads of its finished nodes cover the task. Randomness
comes from counter-based streams keyed by (seed, trial block, master, node),
so results are bit-identical for any thread count and per-node draws do not
shift when other nodes are added or removed.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .planner import _channel_theta, master_channels
from .scenario import Plan, Scenario

_BLOCK = 1 << 14
_COVER_SLACK = 1e-12


@dataclass(frozen=True)
class DelayStats:
    """Aggregated Monte Carlo output.

    max_samples holds the per-trial maximum completion over masters, sorted
    ascending (the empirical CDF support). per_master_samples is kept in trial
    order only when requested.
    """

    trials: int
    per_master_mean: np.ndarray
    mean_of_max: float
    max_samples: np.ndarray
    per_master_samples: np.ndarray | None = None

    def quantile(self, rho: float) -> float:
        return quantile(self, rho)

    def cdf_pairs(self, points: int = 200) -> list[tuple[float, float]]:
        """Evenly rank-spaced (t, F(t)) pairs of the max-completion CDF."""
        n = self.max_samples.size
        points = min(points, n)
        ranks = np.unique(np.ceil(np.arange(1, points + 1) * n / points).astype(int))
        return [(float(self.max_samples[r - 1]), r / n) for r in ranks]


class _MasterSampler:
    """Per-master sampling setup: active nodes, loads, and delay law params."""

    def __init__(self, scenario, plan, m, include_comm):
        ids, channels = master_channels(
            scenario, plan.assignment, m, loads=plan.loads[m], include_comm=include_comm
        )
        self.node_ids = [node for node, ch in zip(ids, channels) if ch.load > 0]
        active = [ch for ch in channels if ch.load > 0]
        self.loads = np.array([ch.load for ch in active])
        self.comm_scale = np.array(
            [0.0 if ch.is_local else ch.load / ch.comm_rate for ch in active]
        )
        self.is_remote = np.array([not ch.is_local for ch in active])
        self.comp_scale = np.array([ch.load / ch.comp_rate for ch in active])
        self.shift = np.array([ch.shift_total for ch in active])
        self.rows_needed = scenario.task_rows[m] * (1.0 - _COVER_SLACK)
        if self.loads.sum() < self.rows_needed:
            raise ValueError(
                f"master {m}: total load {self.loads.sum():.6g} cannot cover "
                f"{scenario.task_rows[m]} rows"
            )


def _completion(sampler: _MasterSampler, delays: np.ndarray) -> np.ndarray:
    """Completion time per trial row: earliest cover of the needed rows."""
    order = np.argsort(delays, axis=1)
    sorted_delays = np.take_along_axis(delays, order, axis=1)
    covered = np.cumsum(sampler.loads[order], axis=1)
    idx = np.argmax(covered >= sampler.rows_needed, axis=1)
    return sorted_delays[np.arange(delays.shape[0]), idx]


def _stream(seed: int, block: int, master: int, node: int, num_nodes: int) -> np.random.Generator:
    stream_id = master * num_nodes + node
    counter = (stream_id << 128) + (block << 64)
    return np.random.Generator(np.random.Philox(key=seed, counter=counter))


def _run_block(samplers, seed, num_nodes, block, size):
    out = np.empty((size, len(samplers)))
    for m, sampler in enumerate(samplers):
        delays = np.empty((size, len(sampler.node_ids)))
        for j, node in enumerate(sampler.node_ids):
            rng = _stream(seed, block, m, node, num_nodes)
            t = sampler.shift[j] - sampler.comp_scale[j] * np.log1p(-rng.random(size))
            if sampler.is_remote[j]:
                t -= sampler.comm_scale[j] * np.log1p(-rng.random(size))
            delays[:, j] = t
        out[:, m] = _completion(sampler, delays)
    return out


def simulate_once(
    scenario: Scenario,
    plan: Plan,
    rng: np.random.Generator,
    include_comm: bool = True,
) -> np.ndarray:
    """One trial: per-master completion times (ms), drawn from the given rng."""
    samplers = [
        _MasterSampler(scenario, plan, m, include_comm) for m in range(scenario.num_masters)
    ]
    out = np.empty(scenario.num_masters)
    for m, sampler in enumerate(samplers):
        delays = np.empty((1, len(sampler.node_ids)))
        for j in range(len(sampler.node_ids)):
            t = sampler.shift[j] - sampler.comp_scale[j] * math.log1p(-rng.random())
            if sampler.is_remote[j]:
                t -= sampler.comm_scale[j] * math.log1p(-rng.random())
            delays[0, j] = t
        out[m] = _completion(sampler, delays)[0]
    return out


def integer_plan(scenario: Scenario, plan: Plan, include_comm: bool = True) -> Plan:
    """Round a plan to whole rows: floor every load, then hand the lost rows
    to the loaded node with the smallest expected per-row delay."""
    loads = np.floor(plan.loads)
    for m in range(scenario.num_masters):
        deficit = plan.loads[m].sum() - loads[m].sum()
        if deficit <= 0:
            continue
        ids, channels = master_channels(
            scenario, plan.assignment, m, loads=plan.loads[m], include_comm=include_comm
        )
        loaded = [(node, _channel_theta(ch)) for node, ch in zip(ids, channels) if ch.load > 0]
        target = min(loaded, key=lambda pair: pair[1])[0]
        loads[m, target] += math.ceil(deficit)
    return Plan(
        assignment=plan.assignment,
        loads=loads,
        predicted_delay=plan.predicted_delay,
        allocation_tag=plan.allocation_tag,
    )


def monte_carlo(
    scenario: Scenario,
    plan: Plan,
    trials: int,
    seed: int,
    threads: int = 1,
    include_comm: bool = True,
    integer_loads: bool = False,
    keep_trials: bool = False,
) -> DelayStats:
    """Run trials and aggregate.

    Output is bit-identical for fixed (scenario, plan, trials, seed) no matter
    how many threads execute the trial blocks.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if threads < 1:
        raise ValueError(f"threads must be >= 1, got {threads}")
    if integer_loads:
        plan = integer_plan(scenario, plan, include_comm)
    samplers = [
        _MasterSampler(scenario, plan, m, include_comm) for m in range(scenario.num_masters)
    ]
    num_nodes = scenario.num_workers + 1

    blocks = [
        (block, min(_BLOCK, trials - start))
        for block, start in enumerate(range(0, trials, _BLOCK))
    ]

    def job(args):
        block, size = args
        return _run_block(samplers, seed, num_nodes, block, size)

    if threads == 1 or len(blocks) == 1:
        parts = [job(args) for args in blocks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(job, blocks))

    per_trial = np.concatenate(parts, axis=0)
    max_per_trial = per_trial.max(axis=1)
    return DelayStats(
        trials=trials,
        per_master_mean=per_trial.mean(axis=0),
        mean_of_max=float(max_per_trial.mean()),
        max_samples=np.sort(max_per_trial),
        per_master_samples=per_trial if keep_trials else None,
    )


def quantile(stats: DelayStats, rho: float) -> float:
    """Smallest sample whose empirical CDF reaches rho (ceiling rank)."""
    if not 0 < rho < 1:
        raise ValueError(f"rho must lie in (0, 1), got {rho}")
    samples = stats.max_samples
    if samples.size == 0:
        raise ValueError("no samples")
    rank = math.ceil(rho * samples.size)
    return float(samples[rank - 1])
