"""Load allocators: closed forms, the Lambert-W machinery, and SCA refinement.

Three allocation rules are provided for a single master with a fixed node set:

- ``markov_allocate``: minimizes a mean-delay surrogate bound of the coverage
  constraint; closed form, needs only each node's expected per-row delay.
- ``exact_allocate_computation``: exact optimum when communication delay is
  negligible and every node is a shifted exponential; closed form through the
  lower Lambert-W branch.
- ``sca_refine``: iteratively tightens any feasible allocation against the
  true expected-coverage constraint by successive convex approximation of its
  difference-of-convex form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .delay_model import EQUAL_RATE_REL_TOL, EffectiveChannel, total_cdf

_INV_E = math.exp(-1.0)


@dataclass(frozen=True)
class AllocationResult:
    """Per-node loads, the achieved completion delay, and solver diagnostics."""

    loads: np.ndarray
    t: float
    diagnostics: dict

    def __post_init__(self):
        object.__setattr__(self, "loads", np.asarray(self.loads, dtype=float))
        if (self.loads < 0).any():
            raise ValueError("loads must be non-negative")
        if not self.t > 0:
            raise ValueError(f"completion delay must be > 0, got {self.t}")


@dataclass(frozen=True)
class ScaConfig:
    """Knobs for the SCA loop.

    alpha: step-size decrease ratio, step_{r+1} = step_r * (1 - alpha*step_r).
    tol: stop when the relative change of the delay falls below this.
    feasibility_tol: accepted relative slack of the coverage constraint.
    """

    alpha: float = 0.995
    max_iters: int = 500
    tol: float = 1e-6
    feasibility_tol: float = 1e-6

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


def lambert_w_minus1(x):
    """Lower real branch of the Lambert W function.

    Solves w * exp(w) = x for w <= -1, with x in [-1/e, 0). Accepts scalars or
    arrays. Uses a branch-point series or the asymptotic log-log expansion as
    a seed, then guarded Newton iterations on w + log(-w) - log(-x) = 0 with a
    bisection fallback whenever a step leaves the bracketing interval.
    """
    x_arr = np.asarray(x, dtype=float)
    scalar = x_arr.ndim == 0
    x_arr = np.atleast_1d(x_arr)
    if (x_arr < -_INV_E - 1e-15).any() or (x_arr >= 0).any() or not np.isfinite(x_arr).all():
        bad = x_arr[(x_arr < -_INV_E - 1e-15) | (x_arr >= 0) | ~np.isfinite(x_arr)]
        raise ValueError(f"lambert_w_minus1 domain is [-1/e, 0), got {bad[0]}")
    q = np.clip(math.e * x_arr + 1.0, 0.0, None)

    log_neg_x = np.log(-x_arr)
    # Seeds: series around the branch point, log-log expansion elsewhere.
    p = -np.sqrt(2.0 * q)
    series = -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * (11.0 / 72.0 + p * (-43.0 / 540.0))))
    with np.errstate(divide="ignore", invalid="ignore"):
        l2 = np.log(-log_neg_x)
        asym = log_neg_x - l2 + l2 / log_neg_x + l2 * (l2 - 2.0) / (2.0 * log_neg_x**2)
    near = q < 1e-3
    w = np.where(near, series, asym)
    w = np.minimum(w, -1.0)

    # Bracket: h is increasing on (-inf, -1] with h(-1) >= 0.
    lo = 2.0 * (log_neg_x - 1.0)
    hi = np.full_like(w, -1.0)

    def h(v):
        return v + np.log(-v) - log_neg_x

    hw = h(w)
    for _ in range(80):
        lo = np.where(hw < 0, np.maximum(lo, w), lo)
        hi = np.where(hw >= 0, np.minimum(hi, w), hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = hw * w / (w + 1.0)
        cand = w - step
        bad = ~np.isfinite(cand) | (cand <= lo) | (cand >= hi)
        cand = np.where(bad, 0.5 * (lo + hi), cand)
        if np.allclose(cand, w, rtol=1e-16, atol=0.0):
            w = cand
            break
        w = cand
        hw = h(w)

    w = np.where(q <= 0.0, -1.0, w)
    return float(w[0]) if scalar else w


def opt_time_per_row(u, a):
    """Optimal completion-time-per-assigned-row ratio of a shifted-exponential node.

    For a node with computation rate u and per-row shift a > 0, this is the
    ratio t/l at which assigning l rows with target time t is most efficient.
    Always exceeds a. Accepts scalars or arrays.
    """
    u_arr = np.asarray(u, dtype=float)
    a_arr = np.asarray(a, dtype=float)
    if (np.atleast_1d(u_arr) <= 0).any():
        raise ValueError("u must be > 0")
    if (np.atleast_1d(a_arr) <= 0).any():
        raise ValueError("a must be > 0 (the ratio degenerates at a = 0)")
    arg = -np.exp(-u_arr * a_arr - 1.0)
    return (-lambert_w_minus1(arg) - 1.0) / u_arr


def markov_allocate(thetas: Sequence[float], task_rows: float) -> AllocationResult:
    """Allocate rows by the mean-delay surrogate of the coverage constraint.

    thetas are expected per-row delays (ms/row) of every usable node,
    including the local one. The returned loads equalize theta_n * l_n across
    nodes and always sum to exactly twice the task size.
    """
    thetas = np.asarray(thetas, dtype=float)
    if thetas.size == 0:
        raise ValueError("need at least one node")
    if not np.isfinite(thetas).all() or (thetas <= 0).any():
        raise ValueError("every theta must be finite and positive")
    if not task_rows > 0:
        raise ValueError(f"task_rows must be > 0, got {task_rows}")
    half_rate = np.sum(1.0 / (2.0 * thetas))
    loads = task_rows / (thetas * half_rate)
    t = task_rows / np.sum(1.0 / (4.0 * thetas))
    stationarity = np.abs(2.0 * thetas * loads / t - 1.0).max()
    coverage = abs(np.sum(loads * (1.0 - thetas * loads / t)) - task_rows) / task_rows
    return AllocationResult(
        loads=loads,
        t=float(t),
        diagnostics={"kkt_residual": float(max(stationarity, coverage))},
    )


def exact_allocate_computation(
    nodes: Sequence[tuple[float, float]], task_rows: float
) -> AllocationResult:
    """Optimal loads when computation delay dominates (communication ignored).

    nodes lists (u, a) per usable node, local included; every shift a must be
    positive. The optimum satisfies t / l_n = opt_time_per_row(u_n, a_n).
    """
    if len(nodes) == 0:
        raise ValueError("need at least one node")
    if not task_rows > 0:
        raise ValueError(f"task_rows must be > 0, got {task_rows}")
    u = np.asarray([n[0] for n in nodes], dtype=float)
    a = np.asarray([n[1] for n in nodes], dtype=float)
    ratio = opt_time_per_row(u, a)
    denom = np.sum(u / (1.0 + u * ratio))
    t = task_rows / denom
    loads = t / ratio
    stationarity = np.abs(
        (1.0 + u * t / loads) * np.exp(-u * (t - a * loads) / loads) - 1.0
    ).max()
    coverage = (
        abs(np.sum(loads * (1.0 - np.exp(-u * (t - a * loads) / loads))) - task_rows) / task_rows
    )
    return AllocationResult(
        loads=loads,
        t=float(t),
        diagnostics={"kkt_residual": float(max(stationarity, coverage))},
    )


def fractional_optimal_loads(thetas: Sequence[float], t: float) -> np.ndarray:
    """Stationary loads at a given delay: l_n = t / (2 theta_n); 0 where theta = inf."""
    thetas = np.asarray(thetas, dtype=float)
    if not t > 0:
        raise ValueError(f"t must be > 0, got {t}")
    if (thetas <= 0).any():
        raise ValueError("every theta must be positive")
    with np.errstate(divide="ignore"):
        loads = t / (2.0 * thetas)
    return np.where(np.isinf(thetas), 0.0, loads)


# ---------------------------------------------------------------------------
# SCA refinement
# ---------------------------------------------------------------------------


class _ScaProblem:
    """Vectorized per-node machinery for the SCA restriction.

    Remote nodes carry the two-exponential law split into a slow-decay part
    (coefficient a_coef, exponent rate_lo) minus a fast-decay part
    (coefficient b_coef, exponent rate_hi); computation-only nodes use the
    single shifted-exponential law, whose restriction minimizer is always
    load = t / ratio.
    """

    def __init__(self, channels: Sequence[EffectiveChannel], task_rows: float, box: float):
        self.task_rows = task_rows
        self.n = len(channels)
        self.remote = np.array([not ch.is_local for ch in channels])
        comp = np.array([ch.comp_rate for ch in channels])
        comm = np.array([ch.comm_rate if not ch.is_local else np.nan for ch in channels])
        near = self.remote & (np.abs(comm - comp) < EQUAL_RATE_REL_TOL * np.maximum(comm, comp))
        comp = np.where(near, comp * (1.0 + 1e-6), comp)  # the split divides by the gap
        self.shift = np.array([ch.comp_shift for ch in channels])
        self.rate_hi = np.where(self.remote, np.maximum(comm, comp), np.nan)
        self.rate_lo = np.where(self.remote, np.minimum(comm, comp), comp)
        with np.errstate(invalid="ignore"):
            gap = self.rate_hi - self.rate_lo
            self.hi_over_gap = self.rate_hi / gap
            self.lo_over_gap = self.rate_lo / gap
            # rate_lo * shift <= u * a for any grant, so this never overflows
            self.a_coef = self.hi_over_gap * np.exp(self.rate_lo * self.shift)
        self.local_ratio = np.full(self.n, np.nan)
        local = ~self.remote
        if local.any():
            if (self.shift[local] <= 0).any():
                raise ValueError("computation-only channels need a positive shift")
            self.local_ratio[local] = opt_time_per_row(self.rate_lo[local], self.shift[local])
        self.box = box
        with np.errstate(divide="ignore"):
            self.inv_shift = np.where(self.shift > 0, 1.0 / self.shift, np.inf)

    def linearize(self, z_loads: np.ndarray, z_t: float):
        """Gradient data of the subtracted convex part at the current point,
        plus the interior-minimizer slopes of the restriction at any t."""
        safe = np.where(z_loads > 0, z_loads, 1.0)
        with np.errstate(invalid="ignore"):
            # fast part of the split: (lo/gap) * l * exp(hi * (shift - t/l));
            # iterates keep shift <= t/l, so the exponent stays non-positive
            decay = np.where(
                self.remote & (z_loads > 0),
                np.exp(self.rate_hi * (self.shift - z_t / safe)),
                0.0,
            )
            h_val = self.lo_over_gap * z_loads * decay
            g_load = self.lo_over_gap * decay * (1.0 + self.rate_hi * z_t / safe)
            g_time = -self.lo_over_gap * self.rate_hi * decay
        h_val = np.where(self.remote, h_val, 0.0)
        g_load = np.where(self.remote & (z_loads > 0), g_load, 0.0)
        g_time = np.where(self.remote, g_time, 0.0)

        # Interior minimizer of a_coef*l*exp(-lo*t/l) - (1+g)*l is l = lo*t/y
        # with y from the Lambert branch; independent of t up to scale.
        with np.errstate(invalid="ignore"):
            c = (1.0 + g_load) / self.a_coef
        has_interior = self.remote & (c < 1.0)
        y = np.full(self.n, np.nan)
        if has_interior.any():
            y[has_interior] = -lambert_w_minus1(-c[has_interior] * _INV_E) - 1.0
        with np.errstate(invalid="ignore", divide="ignore"):
            slope = np.where(
                has_interior, self.rate_lo * np.where(y > 0, 1.0 / y, np.inf), np.inf
            )
            slope = np.where(self.remote, slope, 1.0 / self.local_ratio)

        const0 = float(np.sum(-h_val + g_load * z_loads + g_time * z_t))
        const1 = float(np.sum(-g_time))
        return g_load, slope, const0, const1

    def shortfall(self, t: float, g_load, slope, const0, const1):
        """Minimized restriction constraint value at delay t, and the loads."""
        caps = np.minimum(self.box, t * self.inv_shift)
        loads = np.minimum(slope * t, caps)
        safe = np.where(loads > 0, loads, 1.0)
        with np.errstate(invalid="ignore"):
            # slow part with the shift folded in: exponent <= 0 within the caps
            decay_lo = np.exp(self.rate_lo * (self.shift - t / safe))
            two_rate = self.hi_over_gap * loads * decay_lo - (1.0 + g_load) * loads
            comp_only = loads * np.expm1(-self.rate_lo * (t - self.shift * loads) / safe)
        surplus = np.where(loads > 0, np.where(self.remote, two_rate, comp_only), 0.0)
        return self.task_rows + float(surplus.sum()) + const0 + const1 * t, loads


def expected_rows(channels: Sequence[EffectiveChannel], loads: Sequence[float], t: float) -> float:
    """Expected rows received by t when the channels carry the given loads."""
    total = 0.0
    for ch, load in zip(channels, loads):
        if load > 0:
            scaled = EffectiveChannel(ch.comm_rate, ch.comp_rate, ch.comp_shift, float(load))
            total += load * total_cdf(scaled, t)
    return total


def sca_refine(
    channels: Sequence[EffectiveChannel],
    task_rows: float,
    init: AllocationResult,
    cfg: ScaConfig | None = None,
) -> AllocationResult:
    """Tighten a feasible allocation against the true coverage constraint.

    Starting from ``init`` (typically the markov_allocate result, which is
    always feasible), repeatedly solves a convex restriction built by
    linearizing the concave part of the constraint at the current point, and
    moves toward its optimum with a diminishing step. Every iterate stays
    feasible, and the delay never increases. Loads never exceed t divided by
    the per-row shift: rows past that line cannot arrive by t, and the split
    exponential form is only a valid bound below it.
    """
    cfg = cfg or ScaConfig()
    if not task_rows > 0:
        raise ValueError(f"task_rows must be > 0, got {task_rows}")
    if len(channels) == 0:
        raise ValueError("need at least one channel")
    loads = np.asarray(init.loads, dtype=float).copy()
    if loads.shape != (len(channels),):
        raise ValueError(f"init.loads shape {loads.shape} does not match {len(channels)} channels")
    t = float(init.t)
    slack0 = expected_rows(channels, loads, t) - task_rows
    if slack0 < -cfg.feasibility_tol * task_rows:
        raise ValueError(f"init is infeasible: expected rows fall short by {-slack0:.6g}")

    thetas = np.array(
        [
            (0.0 if ch.is_local else 1.0 / ch.comm_rate) + 1.0 / ch.comp_rate + ch.comp_shift
            for ch in channels
        ]
    )
    box = max(4.0 * task_rows / thetas.min(), 4.0 * task_rows, 2.0 * loads.max())
    problem = _ScaProblem(channels, task_rows, box)

    step = 1.0
    iterations = 0
    surrogate_value = float("nan")
    for _ in range(cfg.max_iters):
        iterations += 1
        z_loads, z_t = loads, t
        lin = problem.linearize(z_loads, z_t)

        # Smallest feasible delay of the restriction, found by bisection; the
        # current point anchors the feasible end.
        hi_t = z_t
        lo_t = 0.0
        value_hi, loads_hi = problem.shortfall(hi_t, *lin)
        if value_hi > 0:
            break  # numerical drift: current point left the restriction
        for _ in range(100):
            if (hi_t - lo_t) <= 1e-12 * hi_t:
                break
            mid = 0.5 * (lo_t + hi_t)
            value_mid, loads_mid = problem.shortfall(mid, *lin)
            if value_mid <= 0:
                hi_t, value_hi, loads_hi = mid, value_mid, loads_mid
            else:
                lo_t = mid
        surrogate_value = value_hi

        t = z_t + step * (hi_t - z_t)
        loads = z_loads + step * (loads_hi - z_loads)
        step = step * (1.0 - cfg.alpha * step)
        if abs(z_t - t) < cfg.tol * max(t, 1e-300):
            break

    slack = expected_rows(channels, loads, t) - task_rows
    if slack < -cfg.feasibility_tol * task_rows:
        raise ValueError(f"SCA produced an infeasible point (shortfall {-slack:.6g})")
    return AllocationResult(
        loads=loads,
        t=t,
        diagnostics={
            "iterations": iterations,
            "constraint_slack": float(slack),
            "surrogate_value": float(surrogate_value),
        },
    )
