"""Primal/dual objective pair and convergence measures for average consensus.

The primal problem projects ``c`` onto the consensus set ``{A x = 0}``; the
dual is ``D(y) = -(A c)^T y - 1/2 ||A^T y||^2`` and ``x(y) = c + A^T y``.

Measures taking a primal vector also accept a stack of vectors with shape
``(..., n)`` and then return an array over the leading axes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from gossip_sim.errors import AlreadyOptimalError
from gossip_sim.graph import Graph


@dataclass(frozen=True)
class ConsensusProblem:
    """A network plus the private value held at every node."""

    graph: Graph
    c: np.ndarray
    c_bar: float = field(init=False)

    def __post_init__(self):
        c = np.array(self.c, dtype=float)
        if c.shape != (self.graph.n,):
            raise ValueError(
                f"need {self.graph.n} initial values, got shape {c.shape}"
            )
        c.setflags(write=False)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "c_bar", float(c.mean()))

    @property
    def x_star(self) -> np.ndarray:
        return np.full(self.graph.n, self.c_bar)

    @property
    def d_gap(self) -> float:
        """``D(y*) - D(0)``, i.e. the initial dual suboptimality."""
        return float(dual_suboptimality(self, self.c))

    @property
    def is_optimal(self) -> bool:
        return bool(np.all(self.c == self.c_bar))


def _check_primal(p: ConsensusProblem, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (p.graph.n,):
        raise ValueError(f"primal vector must have length {p.graph.n}")
    return x


def _check_dual(p: ConsensusProblem, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.shape != (p.graph.m,):
        raise ValueError(f"dual vector must have length {p.graph.m}")
    return y


def _scalar(v):
    return float(v) if np.ndim(v) == 0 else v


def transpose_apply(g: Graph, y: np.ndarray) -> np.ndarray:
    """``A^T y`` without forming ``A``."""
    out = np.zeros(y.shape[:-1] + (g.n,))
    np.add.at(out, (..., g.tails), y)
    np.subtract.at(out, (..., g.heads), y)
    return out


def edge_differences(g: Graph, x: np.ndarray) -> np.ndarray:
    """``A x``: the signed gap ``x_i - x_j`` on every edge."""
    # fancy indexing on the last axis yields F-order; row sums must not
    # depend on how many seeds share the batch
    return np.ascontiguousarray(x[..., g.tails] - x[..., g.heads])


def dual_value(p: ConsensusProblem, y) -> float:
    y = _check_dual(p, y)
    g = p.graph
    aty = transpose_apply(g, y)
    return float(-(edge_differences(g, p.c) @ y) - 0.5 * (aty @ aty))


def map_to_primal(p: ConsensusProblem, y) -> np.ndarray:
    y = _check_dual(p, y)
    return p.c + transpose_apply(p.graph, y)


def dual_suboptimality(p: ConsensusProblem, x):
    """``D(y*) - D(y) = 1/2 ||c_bar 1 - x||^2`` for ``x = x(y)``."""
    x = _check_primal(p, x)
    return _scalar(0.5 * np.sum((p.c_bar - x) ** 2, axis=-1))


def optimal_dual_value(p: ConsensusProblem) -> float:
    # D(0) = 0, so D(y*) equals the suboptimality at the origin.
    return p.d_gap


def edge_gap_measure(g: Graph, x):
    """Mean absolute edge gap ``(1/m) sum_e |x_i - x_j|``."""
    x = np.asarray(x, dtype=float)
    return _scalar(np.abs(edge_differences(g, x)).mean(axis=-1))


def gap_fraction(g: Graph, x, eps: float):
    """Fraction of edges whose endpoint gap is at least ``eps``."""
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    x = np.asarray(x, dtype=float)
    return _scalar((np.abs(edge_differences(g, x)) >= eps).mean(axis=-1))


def relative_error(p: ConsensusProblem, x):
    """``||x - x*||^2 / ||c - x*||^2``.

    Raises:
        AlreadyOptimalError: ``c`` is already at consensus.
    """
    x = _check_primal(p, x)
    denom = float(np.sum((p.c - p.c_bar) ** 2))
    if denom == 0.0:
        raise AlreadyOptimalError("initial values are already at consensus")
    return _scalar(np.sum((x - p.c_bar) ** 2, axis=-1) / denom)


def dual_increment(p: ConsensusProblem, x, e: int, lam: float) -> float:
    """Closed-form ``D(y + lam f_e) - D(y)`` where ``x = x(y)``."""
    g = p.graph
    if not 0 <= e < g.m:
        raise IndexError(f"edge index {e} out of range [0, {g.m})")
    x = _check_primal(p, x)
    i, j = g.edges[e]
    return float(-lam * (x[i] - x[j]) - lam * lam)
