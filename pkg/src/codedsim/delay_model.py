"""Analytic delay laws and samplers for one (master, node) channel.

Communication of l coded rows over a fraction b of a link with full-bandwidth
rate gamma is exponential with rate b*gamma/l. Computation of l rows on a
fraction k of a node with full-power rate u and per-row shift a is shifted
exponential: deterministic shift a*l/k plus an exponential with rate k*u/l.
The total delay is their sum (local nodes skip the communication part).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scenario import LinkParams

# Below this relative rate gap the two-exponential CDF switches to its
# equal-rate limit form; the general expression divides by the gap.
EQUAL_RATE_REL_TOL = 1e-9


@dataclass(frozen=True)
class EffectiveChannel:
    """A channel as seen by one master after fraction scaling.

    comm_rate: b*gamma (rows/ms), or None when the node computes locally.
    comp_rate: k*u (rows/ms).
    comp_shift: a/k (ms/row).
    load: assigned coded rows.
    """

    comm_rate: float | None
    comp_rate: float
    comp_shift: float
    load: float

    def __post_init__(self):
        if self.load < 0:
            raise ValueError(f"load must be >= 0, got {self.load}")
        if self.load > 0:
            if not self.comp_rate > 0:
                raise ValueError("comp_rate must be > 0 on a loaded channel")
            if self.comm_rate is not None and not self.comm_rate > 0:
                raise ValueError("comm_rate must be > 0 on a loaded remote channel")

    @property
    def is_local(self) -> bool:
        return self.comm_rate is None

    @property
    def shift_total(self) -> float:
        """Deterministic part of the total delay (ms)."""
        return self.comp_shift * self.load


def effective_channel(link: LinkParams, k: float, b: float, load: float) -> EffectiveChannel:
    """Scale a link by the granted fractions; local links ignore b and use k=1."""
    if link.gamma is None:
        return EffectiveChannel(None, link.u, link.a, load)
    if not 0 < k <= 1 or not 0 < b <= 1:
        raise ValueError(f"fractions must lie in (0, 1], got k={k}, b={b}")
    return EffectiveChannel(b * link.gamma, k * link.u, link.a / k, load)


def trans_cdf(ch: EffectiveChannel, t: float) -> float:
    """P[communication of the channel's load finishes by t]."""
    if ch.is_local:
        raise ValueError("trans_cdf is undefined on a local channel")
    if ch.load <= 0:
        raise ValueError("trans_cdf needs a positive load")
    if t < 0:
        return 0.0
    return -math.expm1(-(ch.comm_rate / ch.load) * t)


def comp_cdf(ch: EffectiveChannel, t: float) -> float:
    """P[computation of the channel's load finishes by t]."""
    if ch.load <= 0:
        raise ValueError("comp_cdf needs a positive load")
    shift = ch.shift_total
    if t < shift:
        return 0.0
    return -math.expm1(-(ch.comp_rate / ch.load) * (t - shift))


def total_cdf(ch: EffectiveChannel, t: float) -> float:
    """P[communication plus computation of the channel's load finishes by t]."""
    if ch.load <= 0:
        raise ValueError("total_cdf needs a positive load")
    if ch.is_local:
        return comp_cdf(ch, t)
    shift = ch.shift_total
    if t < shift:
        return 0.0
    tau = t - shift
    r1 = ch.comm_rate / ch.load
    r2 = ch.comp_rate / ch.load
    if abs(r1 - r2) < EQUAL_RATE_REL_TOL * max(r1, r2):
        # Limit of the two-rate form as the rates coincide.
        x = r2 * tau
        return 1.0 - (1.0 + x) * math.exp(-x)
    return 1.0 - (r1 * math.exp(-r2 * tau) - r2 * math.exp(-r1 * tau)) / (r1 - r2)


def unit_delay(link: LinkParams, k: float = 1.0, b: float = 1.0) -> float:
    """Expected total delay to handle one coded row (ms/row).

    Returns 1/(b*gamma) + 1/(k*u) + a/k for remote links, 1/u + a for local
    ones, and +inf when a remote link is granted a zero fraction.
    """
    if link.gamma is None:
        return 1.0 / link.u + link.a
    if k <= 0 or b <= 0:
        return math.inf
    return 1.0 / (b * link.gamma) + 1.0 / (k * link.u) + link.a / k


def expected_completed(channels: list[EffectiveChannel], t: float) -> float:
    """Expected number of rows a master has received by time t."""
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    return sum(ch.load * total_cdf(ch, t) for ch in channels if ch.load > 0)


def sample_total_delay(ch: EffectiveChannel, rng: np.random.Generator) -> float:
    """Draw one total delay (ms) by inverse transform on the channel's laws."""
    if ch.load <= 0:
        raise ValueError("sample_total_delay needs a positive load")
    t = ch.shift_total - (ch.load / ch.comp_rate) * math.log1p(-rng.random())
    if not ch.is_local:
        t -= (ch.load / ch.comm_rate) * math.log1p(-rng.random())
    return t
