"""Problem data model, scenario file I/O, and randomized instance generation.

A scenario describes M masters, each owning a matrix-vector task of L_m coded
rows, N shared workers, and the per-link delay parameters. Node index 0 of
every master is its own local processor (no communication link). All times are
milliseconds; all rates are coded rows per millisecond.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

DEDICATED_POLICIES = ("dedicated", "uniform-uncoded", "uniform-coded")
POLICY_TAGS = ("dedicated", "fractional", "uniform-uncoded", "uniform-coded", "brute-force")
ALLOCATION_TAGS = ("markov", "exact-comp", "sca", "uniform")

_COLSUM_TOL = 1e-9


@dataclass(frozen=True)
class LinkParams:
    """Delay parameters of one (master, node) channel.

    gamma: communication rate using the full bandwidth (rows/ms); None for a
        master's local node, where no transmission happens.
    u: computation rate using the full computing power (rows/ms).
    a: deterministic computation shift per coded row (ms/row).
    """

    gamma: float | None
    u: float
    a: float

    def validate(self, where: str, local: bool) -> None:
        if local:
            if self.gamma is not None:
                raise ValueError(f"{where}.gamma must be null for a local node")
        else:
            if self.gamma is None or not self.gamma > 0:
                raise ValueError(f"{where}.gamma must be > 0, got {self.gamma}")
        if not self.u > 0:
            raise ValueError(f"{where}.u must be > 0, got {self.u}")
        if self.a < 0:
            raise ValueError(f"{where}.a must be >= 0, got {self.a}")


@dataclass(frozen=True)
class Scenario:
    """One problem instance: task sizes plus the (M x (N+1)) link matrix.

    links[m][0] is master m's local computation; links[m][n] for n >= 1 is the
    channel between master m and shared worker n.
    """

    num_masters: int
    num_workers: int
    task_rows: tuple[int, ...]
    links: tuple[tuple[LinkParams, ...], ...]
    seed: int | None = None

    def __post_init__(self):
        if self.num_masters < 1:
            raise ValueError(f"num_masters must be >= 1, got {self.num_masters}")
        if self.num_workers < 0:
            raise ValueError(f"num_workers must be >= 0, got {self.num_workers}")
        if len(self.task_rows) != self.num_masters:
            raise ValueError(
                f"task_rows has {len(self.task_rows)} entries, expected {self.num_masters}"
            )
        for m, rows in enumerate(self.task_rows):
            if rows < 1:
                raise ValueError(f"masters[{m}].L must be >= 1, got {rows}")
        if len(self.links) != self.num_masters:
            raise ValueError(f"links has {len(self.links)} rows, expected {self.num_masters}")
        for m, row in enumerate(self.links):
            if len(row) != self.num_workers + 1:
                raise ValueError(
                    f"links[{m}] has {len(row)} entries, expected {self.num_workers + 1}"
                )
            for n, link in enumerate(row):
                link.validate(f"links[{m}][{n}]", local=(n == 0))

    # Convenience array views (column 0 = local node).
    def u_matrix(self) -> np.ndarray:
        return np.array([[link.u for link in row] for row in self.links], dtype=float)

    def a_matrix(self) -> np.ndarray:
        return np.array([[link.a for link in row] for row in self.links], dtype=float)

    def gamma_matrix(self) -> np.ndarray:
        """Worker communication rates, shape (M, N); excludes the local column."""
        return np.array(
            [[link.gamma for link in row[1:]] for row in self.links], dtype=float
        ).reshape(self.num_masters, self.num_workers)

    def with_gamma_ratio(self, ratio: float) -> "Scenario":
        """Return a copy whose worker links have gamma = ratio * u."""
        if not ratio > 0:
            raise ValueError(f"gamma ratio must be > 0, got {ratio}")
        links = tuple(
            tuple(
                link if n == 0 else LinkParams(gamma=ratio * link.u, u=link.u, a=link.a)
                for n, link in enumerate(row)
            )
            for row in self.links
        )
        return Scenario(self.num_masters, self.num_workers, self.task_rows, links, self.seed)


@dataclass(frozen=True)
class Assignment:
    """Worker-to-master grants: compute fractions k and bandwidth fractions b.

    Both are (M x N) matrices. Dedicated policies use binary entries with
    b == k; fractional policies may split a worker across masters, subject to
    per-worker column sums <= 1.
    """

    k: np.ndarray
    b: np.ndarray
    policy_tag: str

    def __post_init__(self):
        object.__setattr__(self, "k", np.asarray(self.k, dtype=float))
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float))
        if self.policy_tag not in POLICY_TAGS:
            raise ValueError(f"unknown policy_tag {self.policy_tag!r}")
        if self.k.shape != self.b.shape:
            raise ValueError(f"k shape {self.k.shape} != b shape {self.b.shape}")
        if self.k.min(initial=0.0) < 0 or self.k.max(initial=0.0) > 1 + _COLSUM_TOL:
            raise ValueError("k entries must lie in [0, 1]")
        if self.b.min(initial=0.0) < 0 or self.b.max(initial=0.0) > 1 + _COLSUM_TOL:
            raise ValueError("b entries must lie in [0, 1]")
        if self.k.size:
            if self.k.sum(axis=0).max() > 1 + _COLSUM_TOL:
                raise ValueError("per-worker compute fractions sum above 1")
            if self.b.sum(axis=0).max() > 1 + _COLSUM_TOL:
                raise ValueError("per-worker bandwidth fractions sum above 1")
            if ((self.k == 0) != (self.b == 0)).any():
                raise ValueError("k and b must be zero on exactly the same entries")
        if self.policy_tag in DEDICATED_POLICIES:
            if self.k.size and not np.isin(self.k, (0.0, 1.0)).all():
                raise ValueError(f"policy {self.policy_tag} requires binary k")
            if self.k.size and (self.k != self.b).any():
                raise ValueError(f"policy {self.policy_tag} requires b == k")

    def granted(self, m: int) -> np.ndarray:
        """Worker indices (1-based node ids) granted to master m."""
        return np.flatnonzero(self.k[m] > 0) + 1


@dataclass(frozen=True)
class Plan:
    """An assignment plus per-node loads and the predicted completion delay.

    loads is (M x (N+1)) with column 0 the local load; predicted_delay is one
    positive value per master (ms).
    """

    assignment: Assignment
    loads: np.ndarray
    predicted_delay: np.ndarray
    allocation_tag: str

    def __post_init__(self):
        object.__setattr__(self, "loads", np.asarray(self.loads, dtype=float))
        object.__setattr__(self, "predicted_delay", np.asarray(self.predicted_delay, dtype=float))
        if self.allocation_tag not in ALLOCATION_TAGS:
            raise ValueError(f"unknown allocation_tag {self.allocation_tag!r}")
        m, n = self.assignment.k.shape
        if self.loads.shape != (m, n + 1):
            raise ValueError(f"loads shape {self.loads.shape}, expected {(m, n + 1)}")
        if self.predicted_delay.shape != (m,):
            raise ValueError(f"predicted_delay shape {self.predicted_delay.shape}, expected ({m},)")
        if (self.loads < 0).any():
            raise ValueError("loads must be non-negative")
        if (self.loads[:, 1:][self.assignment.k == 0] > 0).any():
            raise ValueError("positive load on a worker the assignment does not grant")
        if (self.predicted_delay <= 0).any():
            raise ValueError("predicted_delay must be > 0 for every master")

    def local_load_ratio(self) -> np.ndarray:
        """Per-master ratio of local load to total allocated load."""
        totals = self.loads.sum(axis=1)
        return self.loads[:, 0] / totals


@dataclass(frozen=True)
class GeneratorConfig:
    """Settings for the randomized scenario generator.

    Exactly one of worker_shift_choices / worker_shift_range must be given:
    either a discrete set of shift values or a uniform interval. Worker rates
    follow u = 1/a and gamma = gamma_multiplier * u; master-local shifts are
    drawn from master_shift_choices with u = 1/a.
    """

    num_masters: int
    num_workers: int
    task_rows: int | Sequence[int] = 10_000
    worker_shift_choices: tuple[float, ...] | None = None
    worker_shift_range: tuple[float, float] | None = None
    master_shift_choices: tuple[float, ...] = (0.4, 0.5)
    gamma_multiplier: float = 2.0

    def __post_init__(self):
        if (self.worker_shift_choices is None) == (self.worker_shift_range is None):
            raise ValueError("give exactly one of worker_shift_choices / worker_shift_range")
        if self.worker_shift_choices is not None:
            if not self.worker_shift_choices or min(self.worker_shift_choices) <= 0:
                raise ValueError("worker_shift_choices must be non-empty and positive")
        else:
            lo, hi = self.worker_shift_range
            if not (0 < lo <= hi):
                raise ValueError(f"invalid worker_shift_range ({lo}, {hi})")
        if not self.master_shift_choices or min(self.master_shift_choices) <= 0:
            raise ValueError("master_shift_choices must be non-empty and positive")
        if not self.gamma_multiplier > 0:
            raise ValueError("gamma_multiplier must be > 0")


def generate_scenario(config: GeneratorConfig, seed: int) -> Scenario:
    """Draw a random scenario; identical (config, seed) yields identical output."""
    rng = np.random.default_rng(seed)
    rows = config.task_rows
    if isinstance(rows, (int, np.integer)):
        task_rows = (int(rows),) * config.num_masters
    else:
        task_rows = tuple(int(r) for r in rows)

    def draw_worker_shift() -> float:
        if config.worker_shift_choices is not None:
            return float(rng.choice(config.worker_shift_choices))
        lo, hi = config.worker_shift_range
        return float(rng.uniform(lo, hi))

    links = []
    for _ in range(config.num_masters):
        a0 = float(rng.choice(config.master_shift_choices))
        row = [LinkParams(gamma=None, u=1.0 / a0, a=a0)]
        for _ in range(config.num_workers):
            a = draw_worker_shift()
            u = 1.0 / a
            row.append(LinkParams(gamma=config.gamma_multiplier * u, u=u, a=a))
        links.append(tuple(row))
    return Scenario(config.num_masters, config.num_workers, task_rows, tuple(links), seed=seed)


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ValueError(message)


def scenario_from_dict(doc: dict) -> Scenario:
    _require(isinstance(doc, dict), "scenario document must be a JSON object")
    _require("masters" in doc, "missing top-level key 'masters'")
    _require("workers" in doc, "missing top-level key 'workers'")
    masters = doc["masters"]
    workers = doc["workers"]
    _require(isinstance(masters, list) and masters, "'masters' must be a non-empty list")
    _require(isinstance(workers, list), "'workers' must be a list")
    _require(
        len(workers) == len(masters),
        f"'workers' has {len(workers)} per-master lists, expected {len(masters)}",
    )
    num_masters = len(masters)
    num_workers = len(workers[0]) if workers else 0

    task_rows = []
    links = []
    for m, master in enumerate(masters):
        _require(isinstance(master, dict), f"masters[{m}] must be an object")
        _require("L" in master and "local" in master, f"masters[{m}] needs keys 'L' and 'local'")
        task_rows.append(int(master["L"]))
        local = master["local"]
        _require(isinstance(local, dict), f"masters[{m}].local must be an object")
        for key in ("u", "a"):
            _require(key in local, f"masters[{m}].local missing key '{key}'")
        row = [LinkParams(gamma=None, u=float(local["u"]), a=float(local["a"]))]
        wlist = workers[m]
        _require(
            isinstance(wlist, list) and len(wlist) == num_workers,
            f"workers[{m}] must list {num_workers} links",
        )
        for n, w in enumerate(wlist):
            _require(isinstance(w, dict), f"workers[{m}][{n}] must be an object")
            for key in ("gamma", "u", "a"):
                _require(key in w, f"workers[{m}][{n}] missing key '{key}'")
            row.append(LinkParams(gamma=float(w["gamma"]), u=float(w["u"]), a=float(w["a"])))
        links.append(tuple(row))

    meta = doc.get("meta", {})
    seed = meta.get("seed") if isinstance(meta, dict) else None
    return Scenario(num_masters, num_workers, tuple(task_rows), tuple(links), seed=seed)


def scenario_to_dict(scenario: Scenario) -> dict:
    doc: dict = {
        "masters": [
            {
                "L": rows,
                "local": {"u": row[0].u, "a": row[0].a},
            }
            for rows, row in zip(scenario.task_rows, scenario.links)
        ],
        "workers": [
            [{"gamma": link.gamma, "u": link.u, "a": link.a} for link in row[1:]]
            for row in scenario.links
        ],
    }
    if scenario.seed is not None:
        doc["meta"] = {"seed": scenario.seed}
    return doc


def load_scenario(path) -> Scenario:
    """Parse and validate a scenario file (JSON schema, see README)."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: not valid JSON: {exc}") from exc
    return scenario_from_dict(doc)


def save_scenario(scenario: Scenario, path) -> None:
    """Write a scenario in the same schema load_scenario reads (round-trip exact)."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_dict(scenario), fh, indent=2, sort_keys=True)
        fh.write("\n")
