"""Graph structure, difference operators, Laplacian pseudoinverse powers, and I/O.

The incidence matrix orientation is fixed deterministically: each edge row
carries -1 at the smaller node index and +1 at the larger one.  The sign
convention never affects the Laplacian ``D.T @ D``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


class GraphError(ValueError):
    """Raised on invalid graph structure or malformed graph/signal files."""


@dataclass(frozen=True)
class Graph:
    """Immutable undirected graph with an optional node embedding.

    Parameters
    ----------
    node_count : int
        Number of nodes ``n``; node indices live in ``[0, n)``.
    edges : ndarray of shape (p, 2)
        One row per edge.  Order is stable and defines the row order of the
        first-order difference operator.
    coords : ndarray of shape (n, d), optional
        Per-node coordinates (used by grid graphs and trend generation).
    """

    node_count: int
    edges: np.ndarray
    coords: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        n = self.node_count
        if n < 1:
            raise GraphError(f"node_count must be positive, got {n}")
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        object.__setattr__(self, "edges", edges)
        if edges.size:
            if edges.min() < 0 or edges.max() >= n:
                raise GraphError("edge endpoint out of range")
            if np.any(edges[:, 0] == edges[:, 1]):
                raise GraphError("self-loops are not allowed")
            canon = np.sort(edges, axis=1)
            if len(np.unique(canon, axis=0)) != len(canon):
                raise GraphError("duplicate edges (regardless of orientation)")
        if self.coords is not None:
            coords = np.asarray(self.coords, dtype=float)
            if coords.ndim == 1:
                coords = coords[:, None]
            if coords.shape[0] != n:
                raise GraphError("coords row count must equal node_count")
            object.__setattr__(self, "coords", coords)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.node_count, dtype=np.int64)
        if self.edges.size:
            np.add.at(deg, self.edges[:, 0], 1)
            np.add.at(deg, self.edges[:, 1], 1)
        return deg


@dataclass(frozen=True)
class NodeSignal:
    """Observation vector over the nodes of a graph.

    ``kind`` is either ``"continuous"`` (real values) or ``"count"``
    (nonnegative integers).
    """

    values: np.ndarray
    kind: str = "continuous"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).ravel()
        object.__setattr__(self, "values", values)
        if self.kind not in ("continuous", "count"):
            raise GraphError(f"unknown signal kind {self.kind!r}")
        if self.kind == "count":
            if np.any(values < 0) or np.any(values != np.round(values)):
                raise GraphError("count signal must hold nonnegative integers")

    def __len__(self) -> int:
        return len(self.values)

    def check_length(self, graph: Graph) -> None:
        if len(self.values) != graph.node_count:
            raise GraphError(
                f"signal length {len(self.values)} != node count {graph.node_count}"
            )


@dataclass(frozen=True)
class DifferenceOperator:
    """Graph difference operator of a given order.

    ``order`` is the ``k`` of the penalty: the stored ``matrix`` is the
    operator conventionally written with superscript ``k+1``.  Row count is
    the edge count for even ``k`` and the node count for odd ``k``.
    """

    order: int
    matrix: sp.csr_matrix

    @property
    def shape(self):
        return self.matrix.shape


def incidence(graph: Graph) -> DifferenceOperator:
    """Oriented edge incidence matrix (order-0 difference operator).

    Row v for edge (i, j) holds -1 at min(i, j) and +1 at max(i, j).
    """
    p, n = graph.edge_count, graph.node_count
    if p == 0:
        mat = sp.csr_matrix((0, n))
        return DifferenceOperator(order=0, matrix=mat)
    lo = graph.edges.min(axis=1)
    hi = graph.edges.max(axis=1)
    rows = np.repeat(np.arange(p), 2)
    cols = np.column_stack([lo, hi]).ravel()
    vals = np.tile([-1.0, 1.0], p)
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(p, n))
    return DifferenceOperator(order=0, matrix=mat)


def laplacian(graph: Graph) -> sp.csr_matrix:
    """Graph Laplacian ``L = D.T @ D`` with ``D`` the incidence matrix."""
    if "laplacian" not in graph._cache:
        d = incidence(graph).matrix
        graph._cache["laplacian"] = (d.T @ d).tocsr()
    return graph._cache["laplacian"]


def difference_operator(graph: Graph, k: int) -> DifferenceOperator:
    """Difference operator of order ``k`` via the Laplacian-power recursion.

    Odd ``k`` yields ``L^((k+1)/2)`` (node rows); even ``k`` yields
    ``D @ L^(k/2)`` (edge rows).  ``k = 0`` is the incidence matrix itself.
    """
    if k < 0:
        raise ValueError(f"difference operator order must be >= 0, got {k}")
    key = ("diffop", k)
    if key not in graph._cache:
        if k == 0:
            graph._cache[key] = incidence(graph)
        else:
            prev = difference_operator(graph, k - 1).matrix
            d1 = incidence(graph).matrix
            mat = (d1.T @ prev) if k % 2 == 1 else (d1 @ prev)
            graph._cache[key] = DifferenceOperator(order=k, matrix=mat.tocsr())
    return graph._cache[key]


def _laplacian_eig(graph: Graph):
    if "eig" not in graph._cache:
        L = laplacian(graph).toarray()
        w, v = np.linalg.eigh(L)
        graph._cache["eig"] = (w, v)
    return graph._cache["eig"]


def laplacian_pinv_power(
    graph: Graph, p: int, allow_disconnected: bool = True
) -> np.ndarray:
    """Dense ``p``-th power of the Moore-Penrose pseudoinverse of the Laplacian.

    Uses a symmetric eigendecomposition with relative eigenvalue cutoff
    ``1e-10 * lambda_max``.  For disconnected graphs the cutoff drops one zero
    eigenvalue per component, which matches the block-diagonal per-component
    assembly; set ``allow_disconnected=False`` to reject such inputs.
    """
    if p < 1:
        raise ValueError("pseudoinverse power must be >= 1")
    key = ("pinvpow", p)
    if key not in graph._cache:
        w, v = _laplacian_eig(graph)
        lam_max = max(w[-1], 0.0)
        cutoff = 1e-10 * lam_max if lam_max > 0 else np.inf
        keep = w > cutoff
        n_null = int(np.sum(~keep))
        if n_null > 1 and not allow_disconnected:
            raise GraphError(
                f"graph is disconnected ({n_null} components); "
                "per-component assembly disabled"
            )
        vk = v[:, keep]
        graph._cache[key] = (vk * w[keep] ** (-float(p))) @ vk.T
    elif not allow_disconnected and len(connected_components(graph)) > 1:
        raise GraphError("graph is disconnected; per-component assembly disabled")
    return graph._cache[key]


def grid_graph(rows: int, cols: int) -> Graph:
    """Grid graph joining nodes at Manhattan distance 1, with coordinates."""
    if rows < 1 or cols < 1:
        raise GraphError("grid dimensions must be >= 1")
    idx = np.arange(rows * cols).reshape(rows, cols)
    horiz = np.column_stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()])
    vert = np.column_stack([idx[:-1, :].ravel(), idx[1:, :].ravel()])
    edges = np.vstack([horiz, vert]) if horiz.size or vert.size else np.empty((0, 2), int)
    rr, cc = np.divmod(np.arange(rows * cols), cols)
    coords = np.column_stack([rr, cc]).astype(float)
    return Graph(node_count=rows * cols, edges=edges, coords=coords)


def connected_components(
    graph: Graph,
    removed_edges=None,
    removed_nodes=None,
) -> list[np.ndarray]:
    """Connected components after removing the given edges and/or nodes.

    Returns the partition of the remaining nodes as sorted index arrays,
    ordered by each component's smallest node index.
    """
    n = graph.node_count
    edge_mask = np.ones(graph.edge_count, dtype=bool)
    if removed_edges is not None:
        removed_edges = np.asarray(removed_edges, dtype=np.int64)
        if removed_edges.size and (
            removed_edges.min() < 0 or removed_edges.max() >= graph.edge_count
        ):
            raise GraphError("removed edge index out of range")
        edge_mask[removed_edges] = False
    node_mask = np.ones(n, dtype=bool)
    if removed_nodes is not None:
        removed_nodes = np.asarray(removed_nodes, dtype=np.int64)
        if removed_nodes.size and (
            removed_nodes.min() < 0 or removed_nodes.max() >= n
        ):
            raise GraphError("removed node index out of range")
        node_mask[removed_nodes] = False

    edges = graph.edges[edge_mask]
    if edges.size:
        keep = node_mask[edges[:, 0]] & node_mask[edges[:, 1]]
        edges = edges[keep]
    if edges.size:
        data = np.ones(len(edges))
        adj = sp.csr_matrix(
            (data, (edges[:, 0], edges[:, 1])), shape=(n, n)
        )
    else:
        adj = sp.csr_matrix((n, n))
    _, labels = sp.csgraph.connected_components(adj, directed=False)
    out = []
    remaining = np.flatnonzero(node_mask)
    for lab in np.unique(labels[remaining]):
        comp = remaining[labels[remaining] == lab]
        out.append(comp)
    out.sort(key=lambda c: c[0])
    return out


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def read_graph(path) -> Graph:
    """Read an edge-list file.

    Format: optional first line ``n <count>``, then one ``u v`` pair per line
    (0-indexed, whitespace-separated).  Lines starting with ``#`` are ignored.
    Without a header, ``n`` is inferred as ``max index + 1``.
    """
    n = None
    edges = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if parts[0] == "n":
                if n is not None or edges:
                    raise GraphError(f"{path}:{lineno}: misplaced header")
                try:
                    n = int(parts[1])
                except (IndexError, ValueError):
                    raise GraphError(f"{path}:{lineno}: malformed header") from None
                continue
            if len(parts) != 2:
                raise GraphError(f"{path}:{lineno}: expected 'u v'")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise GraphError(f"{path}:{lineno}: non-integer node index") from None
            edges.append((u, v))
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if n is None:
        n = int(edges.max()) + 1 if edges.size else 1
    return Graph(node_count=n, edges=edges)


def write_graph(graph: Graph, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"n {graph.node_count}\n")
        for u, v in graph.edges:
            fh.write(f"{u} {v}\n")


def read_signal(path, kind: str = "continuous", node_count: int | None = None) -> NodeSignal:
    """Read a signal file: CSV with ``node,value`` header, or one value per line."""
    with open(path) as fh:
        text = fh.read()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise GraphError(f"{path}: empty signal file")
    values = []
    if lines[0].replace(" ", "").lower().startswith("node,value"):
        reader = csv.reader(io.StringIO(text))
        next(reader)
        for i, row in enumerate(reader):
            if not row:
                continue
            if len(row) != 2:
                raise GraphError(f"{path}: malformed CSV row {row!r}")
            if int(row[0]) != i:
                raise GraphError(f"{path}: nodes must appear in order 0..n-1")
            values.append(float(row[1]))
    else:
        for ln in lines:
            try:
                values.append(float(ln))
            except ValueError:
                raise GraphError(f"{path}: non-numeric line {ln!r}") from None
    values = np.asarray(values)
    if node_count is not None and len(values) != node_count:
        raise GraphError(
            f"{path}: signal has {len(values)} rows, expected {node_count}"
        )
    return NodeSignal(values=values, kind=kind)


def write_signal(signal: NodeSignal, path) -> None:
    with open(path, "w") as fh:
        fh.write("node,value\n")
        for i, v in enumerate(signal.values):
            fh.write(f"{i},{float(v)!r}\n")
