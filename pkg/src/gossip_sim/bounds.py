"""Closed-form convergence bounds for the four gossip protocols.

``D_gap`` is always ``D(y*) - D(0) = 1/2 ||c_bar 1 - c||^2``. Functions taking
``k`` accept an int or an integer array and vectorize over it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from gossip_sim.duality import ConsensusProblem
from gossip_sim.graph import Graph, spectral_summary
from gossip_sim.protocols import (
    Adaptive,
    Binary,
    Constant,
    EpsGap,
    FixedHorizonOptimal,
    InverseSqrtT,
    Noise,
    NoiseParams,
    Protocol,
    Standard,
    StepsizeSchedule,
    schedule_sums,
)


def _alpha(g: Graph) -> float:
    return spectral_summary(g).alpha


def _power(base: float, k):
    # one code path for every rho^k so related bounds agree bit for bit
    return np.power(base, np.asarray(k, dtype=float))


def standard_rate(g: Graph) -> float:
    """Per-iteration contraction ``rho = 1 - alpha(G) / 2m``."""
    return 1.0 - _alpha(g) / (2 * g.m)


def standard_bound(p: ConsensusProblem, k):
    return _power(standard_rate(p.graph), k) * p.d_gap


def binary_bound_Uk(D_gap: float, schedule: StepsizeSchedule, k: int) -> float:
    """``U^k = (D_gap + beta^k) / alpha^k`` with stepsize sums over ``t = 0..k``.

    For :class:`FixedHorizonOptimal` evaluated at its own horizon the value is
    ``2 sqrt(R / (k + 1))``, which presumes ``R >= D_gap``.
    """
    if isinstance(schedule, FixedHorizonOptimal) and schedule.k == k:
        if schedule.R < D_gap:
            raise ValueError(f"R={schedule.R} is below the dual gap {D_gap}")
        return 2.0 * math.sqrt(schedule.R / (k + 1))
    if isinstance(schedule, Constant):
        alpha_k = schedule.lam0 * (k + 1)
        beta_k = schedule.lam0**2 * (k + 1)
    else:
        alpha_k, beta_k = schedule_sums(schedule, k)
    if not alpha_k > 0:
        raise ValueError("stepsize sum must be positive")
    return (D_gap + beta_k) / alpha_k


def binary_bound_sqrt_schedule(D_gap: float, a: float, k: int) -> float:
    """Logarithmic upper estimate of ``U^k`` for ``lam_t = a / sqrt(t + 1)``."""
    if k < 1:
        raise ValueError("estimate holds for k >= 1")
    num = D_gap + a * a * (math.log(k + 1.5) + math.log(2))
    return num / (2 * a * (math.sqrt(k + 2) - 1))


def adaptive_binary_bound(p: ConsensusProblem, k):
    """Bound on ``E ||c_bar 1 - x^k||^2`` (not halved) for adaptive stepsizes."""
    g = p.graph
    rate = 1.0 - _alpha(g) / (2 * g.m**2)
    return _power(rate, k) * (2 * p.d_gap)


def eps_gap_bound(D_gap: float, k, eps: float):
    """``4 D_gap / (k eps^2)``, a bound on the running mean of ``Delta^t(eps)``."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    k = np.asarray(k, dtype=float)
    if np.any(k < 1):
        raise ValueError("bound holds for k >= 1")
    return 4.0 * D_gap / (k * eps * eps)


def expected_phi_power(d_i, m: int, phi_i, t):
    """``E[phi_i^(2 t_i)] = (1 - d_i/m (1 - phi_i^2))^t`` after ``t`` steps."""
    return (1.0 - np.asarray(d_i) / m * (1.0 - np.asarray(phi_i) ** 2)) ** np.asarray(t)


def noise_decay_factors(g: Graph, params: NoiseParams) -> np.ndarray:
    return 1.0 - g.degrees / g.m * (1.0 - params.phi**2)


def psi(g: Graph, params: NoiseParams, t):
    """Weighted decay mixture; undefined (nan) when every sigma is zero."""
    w = g.degrees * params.sigma**2
    q = noise_decay_factors(g, params)
    t = np.asarray(t)
    return (w * q ** t[..., None]).sum(axis=-1) / w.sum()


def noise_bound(p: ConsensusProblem, params: NoiseParams, k: int) -> float:
    """``rho^k D_gap + (sum d_i sigma_i^2 / 4m) sum_{t=1..k} rho^(k-t) psi^t``.

    The double sum is evaluated term by term.
    """
    g = p.graph
    if params.n != g.n:
        raise ValueError("noise parameters do not match the graph size")
    rho = standard_rate(g)
    w = g.degrees * params.sigma**2
    q = noise_decay_factors(g, params)
    t = np.arange(1, k + 1)
    lag = rho ** (k - t)
    inserted = 0.0
    for wi, qi in zip(w, q):
        if wi:
            inserted += wi * float(lag @ qi**t)
    return float(_power(rho, k)) * p.d_gap + inserted / (4 * g.m)


def noise_bound_curve(p: ConsensusProblem, params: NoiseParams, iters) -> np.ndarray:
    """:func:`noise_bound` at every entry of ``iters`` (ascending)."""
    iters = np.asarray(iters, dtype=np.int64)
    g = p.graph
    rho = standard_rate(g)
    w = g.degrees * params.sigma**2
    q = noise_decay_factors(g, params)
    out = np.empty(len(iters))
    # I_k = rho I_{k-1} + (1/4m) sum_i w_i q_i^k with I_0 = 0 unrolls the
    # inserted-noise double sum; the D_gap term is kept separate so sigma = 0
    # reproduces standard_bound exactly.
    inserted = 0.0
    k = 0
    for r, target in enumerate(iters):
        while k < target:
            k += 1
            inserted = rho * inserted + float(w @ q**k) / (4 * g.m)
        out[r] = float(_power(rho, target)) * p.d_gap + inserted
    return out


def noise_corollary_bound(p: ConsensusProblem, sigma, gamma: float, k):
    """Simplified rate for ``phi_i = sqrt(1 - gamma/d_i)``."""
    g = p.graph
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), (g.n,))
    rate = 1.0 - min(_alpha(g) / (2 * g.m), gamma / g.m)
    k = np.asarray(k)
    load = float(g.degrees @ sigma**2) / (4 * g.m)
    return rate**k * (p.d_gap + load * k)


def threshold_phi(g: Graph) -> np.ndarray:
    """Largest ``phi_i`` that leaves the standard rate intact."""
    return np.sqrt(1.0 - _alpha(g) / (2 * g.degrees))


@dataclass(frozen=True)
class ThresholdVerdict:
    rho: float
    decay_factors: np.ndarray
    dominates: np.ndarray  # node decay factor >= rho
    at_threshold: np.ndarray
    maximizers: np.ndarray  # the set M of nodes with the largest decay factor

    @property
    def noise_dominated(self) -> bool:
        return bool(np.any(self.dominates & ~self.at_threshold))


def noise_threshold_check(p: ConsensusProblem, params: NoiseParams) -> ThresholdVerdict:
    g = p.graph
    rho = standard_rate(g)
    q = noise_decay_factors(g, params)
    close = np.isclose(q, rho, rtol=0, atol=1e-12)
    return ThresholdVerdict(
        rho=rho,
        decay_factors=q,
        dominates=(q >= rho) | close,
        at_threshold=close,
        maximizers=np.flatnonzero(np.isclose(q, q.max(), rtol=0, atol=1e-15)),
    )


@dataclass
class BoundReport:
    """Theoretical curve for one protocol plus the inputs it was built from."""

    protocol: str
    measure: str
    iters: np.ndarray
    values: np.ndarray
    inputs: dict = field(default_factory=dict)


def bound_report(p: ConsensusProblem, protocol: Protocol, iters) -> BoundReport:
    """Bound curve matched to the measure each theorem controls.

    Measures: ``dual_subopt`` (standard, noise), ``sq_dist`` for adaptive
    binary, ``min_L_t`` for open-loop binary, ``delta_k`` for eps-gap
    (``k >= 1`` only; ``nan`` at ``k = 0``).
    """
    g = p.graph
    iters = np.asarray(iters, dtype=np.int64)
    alpha = _alpha(g)
    inputs = {
        "n": g.n, "m": g.m, "alpha": alpha, "D_gap": p.d_gap,
        "rho": 1.0 - alpha / (2 * g.m),
    }
    if isinstance(protocol, Standard):
        return BoundReport("standard", "dual_subopt", iters, standard_bound(p, iters), inputs)
    if isinstance(protocol, Noise):
        prm = protocol.params
        inputs.update(
            sigma=prm.sigma.tolist(), phi=prm.phi.tolist(), degrees=g.degrees.tolist()
        )
        vals = noise_bound_curve(p, prm, iters)
        return BoundReport("noise", "dual_subopt", iters, vals, inputs)
    if isinstance(protocol, EpsGap):
        inputs["eps"] = protocol.eps
        vals = np.full(len(iters), np.nan)
        pos = iters >= 1
        vals[pos] = eps_gap_bound(p.d_gap, iters[pos], protocol.eps)
        return BoundReport("epsgap", "delta_k", iters, vals, inputs)
    if isinstance(protocol, Binary):
        sched = protocol.schedule
        if isinstance(sched, Adaptive):
            inputs["scale"] = sched.scale
            return BoundReport(
                "binary", "sq_dist", iters, adaptive_binary_bound(p, iters), inputs
            )
        lam = np.array([sched(t) for t in range(int(iters.max(initial=0)) + 1)])
        a_k = np.cumsum(lam)[iters]
        b_k = np.cumsum(lam * lam)[iters]
        inputs["schedule"] = type(sched).__name__
        vals = (p.d_gap + b_k) / a_k
        if isinstance(sched, FixedHorizonOptimal):
            R = sched.R
            inputs["R"] = R
            vals = np.where(
                iters == sched.k, 2.0 * math.sqrt(R / (sched.k + 1)), vals
            )
        if isinstance(sched, InverseSqrtT):
            inputs["a"] = sched.a
        return BoundReport("binary", "min_L_t", iters, vals, inputs)
    raise TypeError(f"unknown protocol {protocol!r}")
