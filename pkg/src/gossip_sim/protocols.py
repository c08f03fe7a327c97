"""Pairwise gossip protocols: standard averaging, binary oracle, eps-gap
oracle and controlled noise insertion.

Each protocol is a transition on a :class:`ProtocolState` triggered by one
sampled edge. The single-step functions (``step_standard`` and friends) are
thin wrappers around array kernels that act on a batch of independent states
of shape ``(S, n)``; :func:`simulate` drives the same kernels for many seeds
at once.

Randomness. Seed ``s`` owns two generators, ``default_rng([s, 0])`` for edge
sampling and ``default_rng([s, 1])`` for Gaussian noise. Edges for a seed are
drawn in blocks; numpy produces the same stream whether integers are drawn one
at a time or in blocks, so a block of ``B`` edges is exactly ``B`` successive
calls to :func:`sample_edge`. Noise draws come in ``(low endpoint, high
endpoint)`` order, two per step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from gossip_sim.duality import (
    ConsensusProblem,
    dual_suboptimality,
    edge_differences,
    edge_gap_measure,
    gap_fraction,
)
from gossip_sim.errors import AlreadyOptimalError
from gossip_sim.graph import Graph

EDGE_STREAM = 0
NOISE_STREAM = 1
BLOCK = 4096

METRICS = ("dual_subopt", "rel_error", "L_t", "Delta_t", "mean_drift", "ledger_residual")
DEFAULT_METRICS = ("dual_subopt", "rel_error", "L_t", "mean_drift")


def edge_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng([seed, EDGE_STREAM])


def noise_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng([seed, NOISE_STREAM])


# -- state and parameters --------------------------------------------------


@dataclass
class ProtocolState:
    """Iterate of one protocol run.

    ``outstanding_noise[i]`` is the noise node ``i`` inserted on its last
    activation and has not yet withdrawn (``phi_i^(t_i-1) v_i^(t_i-1)``).
    """

    x: np.ndarray
    y: np.ndarray | None = None
    t: int = 0
    noise_counters: np.ndarray | None = None
    outstanding_noise: np.ndarray | None = None

    def copy(self) -> ProtocolState:
        return ProtocolState(
            x=self.x.copy(),
            y=None if self.y is None else self.y.copy(),
            t=self.t,
            noise_counters=None if self.noise_counters is None else self.noise_counters.copy(),
            outstanding_noise=None if self.outstanding_noise is None else self.outstanding_noise.copy(),
        )


def initial_state(
    problem: ConsensusProblem, track_dual: bool = False, noise: bool = False
) -> ProtocolState:
    n, m = problem.graph.n, problem.graph.m
    return ProtocolState(
        x=problem.c.copy(),
        y=np.zeros(m) if track_dual else None,
        noise_counters=np.zeros(n, dtype=np.int64) if noise else None,
        outstanding_noise=np.zeros(n) if noise else None,
    )


@dataclass(frozen=True)
class NoiseParams:
    """Per-node noise standard deviations and decay rates."""

    sigma: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        sigma = np.array(self.sigma, dtype=float)
        phi = np.array(self.phi, dtype=float)
        if sigma.ndim != 1 or sigma.shape != phi.shape:
            raise ValueError("sigma and phi must be 1-d arrays of equal length")
        if np.any(sigma < 0) or not np.all(np.isfinite(sigma)):
            raise ValueError("sigma must be finite and nonnegative")
        if np.any(phi < 0) or np.any(phi >= 1):
            raise ValueError("phi must lie in [0, 1)")
        sigma.setflags(write=False)
        phi.setflags(write=False)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "phi", phi)

    @classmethod
    def uniform(cls, n: int, sigma: float, phi: float) -> NoiseParams:
        return cls(np.full(n, float(sigma)), np.full(n, float(phi)))

    @property
    def n(self) -> int:
        return len(self.sigma)


def phi_from_gamma(g: Graph, gamma: float) -> np.ndarray:
    """Degree-scaled decay rates ``phi_i = sqrt(1 - gamma / d_i)``."""
    if not 0 < gamma <= g.d_min:
        raise ValueError(f"gamma must lie in (0, d_min={g.d_min}], got {gamma}")
    return np.sqrt(np.maximum(1.0 - gamma / g.degrees, 0.0))


# -- stepsize schedules ----------------------------------------------------


@dataclass(frozen=True)
class Constant:
    lam0: float

    def __post_init__(self):
        if not self.lam0 > 0:
            raise ValueError("constant stepsize must be positive")

    def __call__(self, t: int) -> float:
        return self.lam0


@dataclass(frozen=True)
class InverseT:
    a: float = 1.0

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("schedule scale must be positive")

    def __call__(self, t: int) -> float:
        return self.a / (t + 1)


@dataclass(frozen=True)
class InverseSqrtT:
    a: float = 1.0

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError("schedule scale must be positive")

    def __call__(self, t: int) -> float:
        return self.a / math.sqrt(t + 1)


@dataclass(frozen=True)
class FixedHorizonOptimal:
    """Constant ``sqrt(R / (k + 1))``, the minimizer of the bound for horizon ``k``."""

    R: float
    k: int

    def __post_init__(self):
        if not self.R > 0:
            raise ValueError("R must be positive")
        if self.k < 0:
            raise ValueError("horizon k must be nonnegative")

    def __call__(self, t: int) -> float:
        return math.sqrt(self.R / (self.k + 1))


@dataclass(frozen=True)
class Adaptive:
    """``scale * sum_e |x_i - x_j|``; needs the full current iterate."""

    scale: float

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("adaptive scale must be positive")

    @classmethod
    def theorem(cls, g: Graph) -> Adaptive:
        return cls(1.0 / (2 * g.m))

    @classmethod
    def experiments(cls, g: Graph) -> Adaptive:
        return cls(1.0 / (4 * g.m))

    def from_state(self, g: Graph, x: np.ndarray):
        return self.scale * np.abs(edge_differences(g, x)).sum(axis=-1)


StepsizeSchedule = Union[Constant, InverseT, InverseSqrtT, FixedHorizonOptimal, Adaptive]


def schedule_sums(schedule: StepsizeSchedule, k: int) -> tuple[float, float]:
    """``(sum_{t<=k} lam_t, sum_{t<=k} lam_t^2)`` for an open-loop schedule."""
    if isinstance(schedule, Adaptive):
        raise TypeError("adaptive stepsizes depend on the trajectory")
    lam = np.array([schedule(t) for t in range(k + 1)])
    return float(lam.sum()), float((lam * lam).sum())


# -- protocol descriptors --------------------------------------------------


@dataclass(frozen=True)
class Standard:
    kind = "standard"


@dataclass(frozen=True)
class Binary:
    schedule: StepsizeSchedule
    kind = "binary"


@dataclass(frozen=True)
class EpsGap:
    eps: float
    kind = "epsgap"

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")


@dataclass(frozen=True)
class Noise:
    params: NoiseParams
    kind = "noise"


Protocol = Union[Standard, Binary, EpsGap, Noise]


# -- array kernels (batch axis first, mutate in place) ---------------------


def _average(X, Y, rows, e, i, j):
    xi = X[rows, i]
    xj = X[rows, j]
    if Y is not None:
        Y[rows, e] += (xj - xi) / 2
    avg = (xi + xj) / 2
    X[rows, i] = avg
    X[rows, j] = avg


def _binary(X, Y, rows, e, i, j, lam):
    xi = X[rows, i]
    xj = X[rows, j]
    # ties take the x_i >= x_j branch: x_i goes down, x_j up
    move = np.where(xi < xj, lam, -lam)
    if Y is not None:
        Y[rows, e] += move
    X[rows, i] = xi + move
    X[rows, j] = xj - move


def _eps_gap(X, Y, rows, e, i, j, eps):
    xi = X[rows, i]
    xj = X[rows, j]
    half = eps / 2
    move = np.where(xi <= xj - eps, half, np.where(xj <= xi - eps, -half, 0.0))
    if Y is not None:
        Y[rows, e] += move
    X[rows, i] = xi + move
    X[rows, j] = xj - move
    return move != 0.0


def _noisy_average(X, T, R, rows, nodes, z, sigma, phi):
    # nodes, z: shape (2, S), low endpoint first
    flat = rows * X.shape[1] + nodes
    xf, tf, rf = X.reshape(-1), T.reshape(-1), R.reshape(-1)
    counts = tf[flat]
    fresh = phi[nodes] ** counts * (sigma[nodes] * z)
    noisy = xf[flat] + (fresh - rf[flat])
    xf[flat] = (noisy[0] + noisy[1]) / 2
    rf[flat] = fresh
    tf[flat] = counts + 1


_ONE = np.zeros(1, dtype=np.intp)


def _single(state: ProtocolState, g: Graph, e: int):
    if not 0 <= e < g.m:
        raise IndexError(f"edge index {e} out of range [0, {g.m})")
    s = state.copy()
    s.t += 1
    i, j = g.edges[e]
    return s, np.array([e]), np.array([i]), np.array([j])


def _view(a):
    return None if a is None else a[None, :]


# -- single steps ----------------------------------------------------------


def sample_edge(g: Graph, rng: np.random.Generator) -> int:
    """Uniform edge index; consumes one integer draw."""
    if g.m < 1:
        raise ValueError("graph has no edges")
    return int(rng.integers(0, g.m))


def step_standard(state: ProtocolState, g: Graph, e: int) -> ProtocolState:
    s, ea, ia, ja = _single(state, g, e)
    _average(_view(s.x), _view(s.y), _ONE, ea, ia, ja)
    return s


def step_binary(state: ProtocolState, g: Graph, e: int, lam: float) -> ProtocolState:
    if not lam > 0:
        raise ValueError(f"stepsize must be positive, got {lam}")
    s, ea, ia, ja = _single(state, g, e)
    _binary(_view(s.x), _view(s.y), _ONE, ea, ia, ja, np.array([lam]))
    return s


def step_eps_gap(state: ProtocolState, g: Graph, e: int, eps: float) -> ProtocolState:
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    s, ea, ia, ja = _single(state, g, e)
    _eps_gap(_view(s.x), _view(s.y), _ONE, ea, ia, ja, eps)
    return s


def step_noise(
    state: ProtocolState,
    g: Graph,
    e: int,
    params: NoiseParams,
    rng: np.random.Generator,
) -> ProtocolState:
    """Noisy averaging on edge ``e``; draws two standard normals (low, high)."""
    if params.n != g.n:
        raise ValueError("noise parameters do not match the graph size")
    if state.noise_counters is None or state.outstanding_noise is None:
        raise ValueError("state was not initialized for the noise protocol")
    s, _, ia, ja = _single(state, g, e)
    z = rng.standard_normal(2)
    _noisy_average(
        _view(s.x), _view(s.noise_counters), _view(s.outstanding_noise),
        _ONE, np.stack([ia, ja]), z[:, None], params.sigma, params.phi,
    )
    return s


# -- batched runner --------------------------------------------------------


@dataclass
class BatchState:
    """Independent iterates stacked along axis 0, one row per seed."""

    x: np.ndarray
    y: np.ndarray | None = None
    t: int = 0
    noise_counters: np.ndarray | None = None
    outstanding_noise: np.ndarray | None = None

    def row(self, s: int) -> ProtocolState:
        pick = lambda a: None if a is None else a[s].copy()  # noqa: E731
        return ProtocolState(
            x=self.x[s].copy(),
            y=pick(self.y),
            t=self.t,
            noise_counters=pick(self.noise_counters),
            outstanding_noise=pick(self.outstanding_noise),
        )

    def copy(self) -> BatchState:
        cp = lambda a: None if a is None else a.copy()  # noqa: E731
        return BatchState(
            self.x.copy(), cp(self.y), self.t, cp(self.noise_counters), cp(self.outstanding_noise)
        )


@dataclass
class Trace:
    """Recorded metrics of a batch of runs.

    ``metrics[name]`` has shape ``(len(seeds), len(iters))``. ``alpha_sum``
    and ``beta_sum`` hold the executed stepsize sums per seed (binary only).
    """

    protocol: Protocol
    seeds: np.ndarray
    iters: np.ndarray
    metrics: dict[str, np.ndarray]
    final: BatchState
    alpha_sum: np.ndarray | None = None
    beta_sum: np.ndarray | None = None
    trajectory: np.ndarray | None = None  # (S, R, n)
    moves: np.ndarray | None = None  # eps-gap: executed moves per seed

    def mean(self, name: str) -> np.ndarray:
        return self.metrics[name].mean(axis=0)

    def stderr(self, name: str) -> np.ndarray:
        v = self.metrics[name]
        if v.shape[0] < 2:
            return np.zeros(v.shape[1])
        return v.std(axis=0, ddof=1) / math.sqrt(v.shape[0])

    def final_state(self, s: int = 0) -> ProtocolState:
        return self.final.row(s)


def default_stride(k: int) -> int:
    return 1 if k <= 10_000 else math.ceil(k / 10_000)


def record_iterations(k: int, stride: int | None = None) -> np.ndarray:
    stride = default_stride(k) if stride is None else stride
    if stride < 1:
        raise ValueError("record stride must be >= 1")
    its = np.arange(0, k + 1, stride)
    if its[-1] != k:
        its = np.append(its, k)
    return its


def _metric_rows(problem, X, R, names, eps, denom):
    g = problem.graph
    out = {}
    for name in names:
        if name == "dual_subopt":
            out[name] = dual_suboptimality(problem, X)
        elif name == "rel_error":
            out[name] = np.sum((X - problem.c_bar) ** 2, axis=-1) / denom
        elif name == "L_t":
            out[name] = edge_gap_measure(g, X)
        elif name == "Delta_t":
            out[name] = gap_fraction(g, X, eps)
        elif name == "mean_drift":
            out[name] = X.mean(axis=-1) - problem.c_bar
        elif name == "ledger_residual":
            resid = X.sum(axis=-1) - problem.c.sum()
            out[name] = resid if R is None else resid - R.sum(axis=-1)
    return out


StepHook = Callable[[int, BatchState, BatchState, np.ndarray], None]


def simulate(
    problem: ConsensusProblem,
    protocol: Protocol,
    k: int,
    seeds: Sequence[int],
    *,
    record: Sequence[str] = DEFAULT_METRICS,
    stride: int | None = None,
    eps: float | None = None,
    track_dual: bool = False,
    trajectory: bool = False,
    on_step: StepHook | None = None,
) -> Trace:
    """Run ``k`` steps of ``protocol`` for every seed.

    Args:
        record: Metric names, any of :data:`METRICS`. ``Delta_t`` needs
            ``eps`` (taken from an :class:`EpsGap` protocol by default).
        stride: Record every ``stride``-th iteration plus the last one;
            defaults to :func:`default_stride`.
        track_dual: Maintain the dual iterate ``y`` (not for :class:`Noise`).
        trajectory: Keep the full node vector at every recorded iteration.
        on_step: Called after each step as ``on_step(t, before, after, e)``
            with the batch before/after step ``t`` and the sampled edges.

    Each seed's result is independent of which other seeds share the batch.
    """
    if k < 0:
        raise ValueError("iteration count must be nonnegative")
    unknown = set(record) - set(METRICS)
    if unknown:
        raise ValueError(f"unknown metrics: {sorted(unknown)}")
    if isinstance(protocol, EpsGap) and eps is None:
        eps = protocol.eps
    if "Delta_t" in record and eps is None:
        raise ValueError("Delta_t needs an eps")
    is_noise = isinstance(protocol, Noise)
    if is_noise and track_dual:
        raise ValueError("the noise protocol has no dual iterate")
    if is_noise and protocol.params.n != problem.graph.n:
        raise ValueError("noise parameters do not match the graph size")
    denom = float(np.sum((problem.c - problem.c_bar) ** 2))
    if "rel_error" in record and denom == 0.0:
        raise AlreadyOptimalError("initial values are already at consensus")

    g = problem.graph
    seeds = np.asarray(list(seeds), dtype=np.int64)
    S = len(seeds)
    rows = np.arange(S)
    state = BatchState(
        x=np.tile(problem.c, (S, 1)),
        y=np.zeros((S, g.m)) if track_dual else None,
        noise_counters=np.zeros((S, g.n), dtype=np.int64) if is_noise else None,
        outstanding_noise=np.zeros((S, g.n)) if is_noise else None,
    )
    its = record_iterations(k, stride)
    rec = {name: np.empty((S, len(its))) for name in record}
    traj = np.empty((S, len(its), g.n)) if trajectory else None
    e_rngs = [edge_rng(int(s)) for s in seeds]
    n_rngs = [noise_rng(int(s)) for s in seeds] if is_noise else None
    binary = isinstance(protocol, Binary)
    schedule = protocol.schedule if binary else None
    alpha_sum = np.zeros(S) if binary else None
    beta_sum = np.zeros(S) if binary else None
    moves = np.zeros(S, dtype=np.int64) if isinstance(protocol, EpsGap) else None

    def snapshot(r):
        vals = _metric_rows(problem, state.x, state.outstanding_noise, record, eps, denom)
        for name, v in vals.items():
            rec[name][:, r] = v
        if traj is not None:
            traj[:, r, :] = state.x

    r = 0
    if its[0] == 0:
        snapshot(0)
        r = 1
    tails, heads = g.tails, g.heads
    t = 0
    while t < k:
        b = min(BLOCK, k - t)
        E = np.stack([rng.integers(0, g.m, size=b) for rng in e_rngs], axis=1)
        if is_noise:
            # (b, 2, S): per step, endpoints/normals in (low, high) order
            Z = np.stack([rng.standard_normal((b, 2)) for rng in n_rngs], axis=2)
            N = np.stack([tails[E], heads[E]], axis=1)
        for o in range(b):
            e = E[o]
            i = tails[e]
            j = heads[e]
            before = state.copy() if on_step is not None else None
            if is_noise:
                p = protocol.params
                _noisy_average(
                    state.x, state.noise_counters, state.outstanding_noise,
                    rows, N[o], Z[o], p.sigma, p.phi,
                )
            elif binary:
                if isinstance(schedule, Adaptive):
                    lam = schedule.from_state(g, state.x)
                else:
                    lam = np.full(S, schedule(t))
                _binary(state.x, state.y, rows, e, i, j, lam)
                alpha_sum += lam
                beta_sum += lam * lam
            elif isinstance(protocol, EpsGap):
                moves += _eps_gap(state.x, state.y, rows, e, i, j, protocol.eps)
            else:
                _average(state.x, state.y, rows, e, i, j)
            t += 1
            state.t = t
            if on_step is not None:
                on_step(t - 1, before, state, e)
            if r < len(its) and its[r] == t:
                snapshot(r)
                r += 1
    return Trace(
        protocol=protocol,
        seeds=seeds,
        iters=its,
        metrics=rec,
        final=state,
        alpha_sum=alpha_sum,
        beta_sum=beta_sum,
        trajectory=traj,
        moves=moves,
    )


def run(
    problem: ConsensusProblem,
    protocol: Protocol,
    k: int,
    seed: int,
    **kwargs,
) -> Trace:
    """Single-seed :func:`simulate`; metric arrays have one row."""
    return simulate(problem, protocol, k, [seed], **kwargs)
