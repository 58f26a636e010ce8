"""Shifted-exponential parameter estimation from measured per-row delays."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FitResult:
    """Fitted shift (ms), rate (1/ms), and the KS goodness-of-fit distance."""

    a_hat: float
    u_hat: float
    ks_distance: float

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        return self.a_hat - np.log1p(-rng.random(size)) / self.u_hat


def fit_shifted_exponential(samples) -> FitResult:
    """Estimate (shift, rate) of a shifted exponential from samples.

    The rate comes from the moment identity mean - min = 1/u; the shift is the
    sample minimum with the standard 1/(n*u) bias correction subtracted (the
    minimum of n draws sits 1/(n*u) above the true shift on average), clamped
    at zero. Needs at least 10 positive samples with nonzero spread.
    """
    x = np.asarray(samples, dtype=float)
    if x.size < 10:
        raise ValueError(f"need at least 10 samples, got {x.size}")
    if (x <= 0).any():
        raise ValueError("samples must be positive")
    lo = float(x.min())
    mean = float(x.mean())
    if mean <= lo:
        raise ValueError("degenerate samples: mean equals minimum, rate undefined")
    u_hat = 1.0 / (mean - lo)
    a_hat = max(lo - 1.0 / (x.size * u_hat), 0.0)

    sorted_x = np.sort(x)
    fitted = np.where(sorted_x >= a_hat, -np.expm1(-u_hat * (sorted_x - a_hat)), 0.0)
    grid = np.arange(1, x.size + 1) / x.size
    ks = float(np.maximum(np.abs(grid - fitted), np.abs(grid - 1.0 / x.size - fitted)).max())
    return FitResult(a_hat=a_hat, u_hat=u_hat, ks_distance=ks)


def load_samples(path) -> np.ndarray:
    """Read one positive number per line from a CSV-style sample file."""
    values = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.strip()
            if not text:
                continue
            try:
                value = float(text)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: not a number: {text!r}") from exc
            if value <= 0:
                raise ValueError(f"{path}:{lineno}: sample must be positive, got {value}")
            values.append(value)
    if not values:
        raise ValueError(f"{path}: no samples found")
    return np.asarray(values, dtype=float)


def fit_to_dict(fit: FitResult) -> dict:
    """LinkParams-fragment form of a fit, plus the goodness-of-fit statistic."""
    return {"u": fit.u_hat, "a": fit.a_hat, "ks_distance": fit.ks_distance}
