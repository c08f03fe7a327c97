"""Seed aggregation of recorded traces."""

from __future__ import annotations

import math

import numpy as np

from gossip_sim.protocols import Trace


def mean_and_stderr(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column means and standard errors of a ``(seeds, iters)`` array."""
    values = np.asarray(values, dtype=float)
    mu = values.mean(axis=0)
    if values.shape[0] < 2:
        return mu, np.zeros_like(mu)
    return mu, values.std(axis=0, ddof=1) / math.sqrt(values.shape[0])


def average_then_min(trace: Trace, name: str = "L_t") -> tuple[float, int, float]:
    """``min_t E[metric_t]``: average over seeds first, then minimize over t.

    Returns ``(value, iteration, stderr at that iteration)``.
    """
    mu, se = mean_and_stderr(trace.metrics[name])
    r = int(np.argmin(mu))
    return float(mu[r]), int(trace.iters[r]), float(se[r])


def mean_running_min(trace: Trace, name: str = "L_t") -> np.ndarray:
    """Seed average of each run's running minimum."""
    return np.minimum.accumulate(trace.metrics[name], axis=1).mean(axis=0)


def running_average(trace: Trace, name: str = "Delta_t") -> tuple[np.ndarray, np.ndarray]:
    """``(1/k) sum_{t<k} E[metric_t]`` at every recorded ``k >= 1``.

    Exact only when every iteration was recorded (stride 1).
    """
    mu = trace.metrics[name].mean(axis=0)
    its = trace.iters
    csum = np.cumsum(mu)
    # entry r covers recorded iterations 0..r-1, i.e. t < iters[r]
    ks = its[1:]
    return ks, csum[:-1] / ks


def loglinear_slope(
    iters: np.ndarray,
    values: np.ndarray,
    start: int = 0,
    stop: int | None = None,
    floor: float = 1e-24,
) -> float:
    """Least-squares slope of ``log(values)`` against iteration.

    Points before ``start``, after ``stop`` or below ``floor`` are dropped;
    the floor keeps round-off plateaus (near 1e-31 for unit-scale data) out
    of the fit.
    """
    iters = np.asarray(iters, dtype=float)
    values = np.asarray(values, dtype=float)
    keep = (iters >= start) & (values >= floor)
    if stop is not None:
        keep &= iters <= stop
    if keep.sum() < 2:
        raise ValueError("fewer than two points in the fit window")
    slope, _ = np.polyfit(iters[keep], np.log(values[keep]), 1)
    return float(slope)
