"""Undirected consensus networks: construction, incidence rows, spectra, I/O.

Edges are stored as ``(i, j)`` with ``i < j``. The incidence row of edge
``e = (i, j)`` carries ``+1`` at ``i`` and ``-1`` at ``j``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import coo_array
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import pdist

from gossip_sim.errors import (
    DisconnectedGraphError,
    InvalidTopologyError,
    UnconnectedGraphError,
)

RGG_MAX_ATTEMPTS = 100
ALPHA_TOL = 1e-9


@dataclass(frozen=True, eq=False, init=False)
class Graph:
    """Simple undirected graph on nodes ``0..n-1``.

    Args:
        n: Number of nodes.
        edges: Unordered pairs; each is normalized to ``(min, max)`` and the
            list keeps the caller's order.
        coords: Optional node positions (kept for reproducibility of RGGs).
        check_connected: Reject disconnected graphs at construction.
    """

    n: int
    edges: np.ndarray
    coords: np.ndarray | None = None
    degrees: np.ndarray = field(init=False, repr=False)

    def __init__(
        self,
        n: int,
        edges: Iterable[Sequence[int]],
        coords: np.ndarray | None = None,
        check_connected: bool = True,
    ):
        n = int(n)
        if n < 1:
            raise InvalidTopologyError(f"node count must be positive, got {n}")
        arr = np.array([tuple(e) for e in edges], dtype=np.int64).reshape(-1, 2)
        if arr.size and (arr.min() < 0 or arr.max() >= n):
            raise InvalidTopologyError(f"edge endpoint outside [0, {n})")
        if np.any(arr[:, 0] == arr[:, 1]):
            raise InvalidTopologyError("self-loops are not allowed")
        arr = np.sort(arr, axis=1)
        if len({(int(i), int(j)) for i, j in arr}) != len(arr):
            raise InvalidTopologyError("duplicate edges")
        arr.setflags(write=False)
        degrees = np.bincount(arr.ravel(), minlength=n)
        degrees.setflags(write=False)
        if coords is not None:
            coords = np.array(coords, dtype=float)
            if coords.shape != (n, 2):
                raise InvalidTopologyError("coords must have shape (n, 2)")
            coords.setflags(write=False)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "edges", arr)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "degrees", degrees)
        if check_connected and not self.is_connected():
            raise DisconnectedGraphError(
                f"graph with n={n}, m={self.m} is not connected"
            )

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def d_min(self) -> int:
        return int(self.degrees.min())

    @property
    def tails(self) -> np.ndarray:
        """Lower endpoint of every edge (the ``+1`` side)."""
        return self.edges[:, 0]

    @property
    def heads(self) -> np.ndarray:
        """Higher endpoint of every edge (the ``-1`` side)."""
        return self.edges[:, 1]

    def is_connected(self) -> bool:
        if self.n == 1:
            return True
        adj = coo_array(
            (np.ones(self.m), (self.tails, self.heads)), shape=(self.n, self.n)
        )
        ncomp, _ = connected_components(adj, directed=False)
        return ncomp == 1

    def edge_list(self) -> list[tuple[int, int]]:
        return [(int(i), int(j)) for i, j in self.edges]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.edges, other.edges)

    def __hash__(self) -> int:
        return hash((self.n, self.edges.tobytes()))


@dataclass(frozen=True)
class SpectralSummary:
    alpha: float
    beta: float
    laplacian_eigenvalues: np.ndarray  # descending


def build_cycle(n: int) -> Graph:
    """Cycle ``C(n)`` with edges ``(i, i+1 mod n)``."""
    if n < 3:
        raise InvalidTopologyError(f"a cycle needs at least 3 nodes, got {n}")
    return Graph(n, [(i, (i + 1) % n) for i in range(n)])


def default_rgg_radius(n: int) -> float:
    """Connectivity radius ``sqrt(ln n / n)``."""
    return math.sqrt(math.log(n) / n)


def build_random_geometric(
    n: int,
    r: float | None = None,
    seed: int | np.random.Generator | None = 0,
    max_attempts: int = RGG_MAX_ATTEMPTS,
) -> Graph:
    """Random geometric graph on the unit square, resampled until connected.

    Nodes are drawn uniformly in ``[0, 1]^2``; ``(i, j)`` is an edge iff the
    Euclidean distance is strictly below ``r``. Every attempt draws fresh
    coordinates from the same generator, so the result is a pure function of
    ``(n, r, seed)``.

    Raises:
        InvalidTopologyError: ``n < 2`` or ``r`` outside ``(0, sqrt(2)]``.
        UnconnectedGraphError: no connected sample in ``max_attempts`` draws.
    """
    if n < 2:
        raise InvalidTopologyError(f"RGG needs n >= 2, got {n}")
    if r is None:
        r = default_rgg_radius(n)
    if not 0 < r <= math.sqrt(2):
        raise InvalidTopologyError(f"radius must lie in (0, sqrt(2)], got {r}")
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    for _ in range(max_attempts):
        coords = rng.random((n, 2))
        close = pdist(coords) < r  # condensed order matches triu_indices
        g = Graph(
            n,
            np.column_stack([iu[close], ju[close]]),
            coords=coords,
            check_connected=False,
        )
        if g.is_connected():
            return g
    raise UnconnectedGraphError(max_attempts, n, r)


def incidence_row(g: Graph, e: int) -> np.ndarray:
    """Row ``e`` of the incidence matrix as a length-``n`` vector."""
    if not 0 <= e < g.m:
        raise IndexError(f"edge index {e} out of range [0, {g.m})")
    row = np.zeros(g.n)
    i, j = g.edges[e]
    row[i] = 1.0
    row[j] = -1.0
    return row


def incidence_matrix(g: Graph) -> np.ndarray:
    A = np.zeros((g.m, g.n))
    rows = np.arange(g.m)
    A[rows, g.tails] = 1.0
    A[rows, g.heads] = -1.0
    return A


def laplacian(g: Graph) -> np.ndarray:
    A = incidence_matrix(g)
    return A.T @ A


def spectral_summary(g: Graph) -> SpectralSummary:
    """Dense eigendecomposition of ``L = A^T A``.

    Raises:
        DisconnectedGraphError: the second-smallest eigenvalue is below 1e-9.
    """
    if g.n < 2:
        raise InvalidTopologyError("spectral summary needs at least 2 nodes")
    eig = np.linalg.eigvalsh(laplacian(g))  # ascending
    alpha = float(eig[1])
    if alpha < ALPHA_TOL:
        raise DisconnectedGraphError(
            f"algebraic connectivity {alpha:.3e} below {ALPHA_TOL:g}"
        )
    desc = eig[::-1].copy()
    desc[-1] = 0.0  # exact null vector 1
    desc.setflags(write=False)
    return SpectralSummary(alpha=alpha, beta=g.n / alpha, laplacian_eigenvalues=desc)


# -- serialization ---------------------------------------------------------


def to_text(g: Graph) -> str:
    lines = [f"{g.n} {g.m}"]
    lines.extend(f"{i} {j}" for i, j in g.edge_list())
    return "\n".join(lines) + "\n"


def from_text(text: str) -> Graph:
    rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not rows or len(rows[0]) != 2:
        raise InvalidTopologyError("missing 'n m' header")
    try:
        n, m = int(rows[0][0]), int(rows[0][1])
        edges = [(int(a), int(b)) for a, b in rows[1:]]
    except ValueError as exc:
        raise InvalidTopologyError(f"malformed graph text: {exc}") from None
    if len(edges) != m:
        raise InvalidTopologyError(f"header says {m} edges, found {len(edges)}")
    return Graph(n, edges)


def to_dict(g: Graph) -> dict:
    doc = {"n": g.n, "m": g.m, "edges": [list(e) for e in g.edge_list()]}
    if g.coords is not None:
        doc["coords"] = [[float(a), float(b)] for a, b in g.coords]
    return doc


def from_dict(doc: dict) -> Graph:
    try:
        g = Graph(doc["n"], doc["edges"], coords=doc.get("coords"))
    except (KeyError, TypeError) as exc:
        raise InvalidTopologyError(f"malformed graph document: {exc}") from None
    if "m" in doc and doc["m"] != g.m:
        raise InvalidTopologyError(f"document says m={doc['m']}, found {g.m}")
    return g


def save_graph(g: Graph, path: str | Path) -> Path:
    """Write ``.json`` as a document, anything else in the ``n m`` text form."""
    path = Path(path)
    if path.suffix == ".json":
        path.write_text(json.dumps(to_dict(g), indent=1) + "\n")
    else:
        path.write_text(to_text(g))
    return path


def load_graph(path: str | Path) -> Graph:
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        return from_dict(json.loads(text))
    return from_text(text)
