"""Selected-basis extraction from L1 trend fits.

For an order-``k`` L1 fit the fitted trend lies in a low-dimensional span
determined by the zero pattern of its graph differences: for even ``k`` the
nodes group by shared values of ``L^(k/2) beta``, for odd ``k`` the active
rows of ``L^((k+1)/2) beta`` index columns of the Laplacian pseudoinverse
power.  The basis always carries an all-ones intercept as its first column.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphs import Graph, NodeSignal, laplacian, laplacian_pinv_power

# Two values share a plateau when they differ by at most this times
# max(1, ||C||_inf); the active-row threshold mirrors the solver's.
GROUP_TOL = 1e-6
ACTIVE_TOL = 1e-8


@dataclass(frozen=True)
class SelectedBasis:
    """Dense basis ``B`` with intercept first, plus the selection metadata.

    ``active_set`` indexes edges (even ``k``, via the node grouping) or nodes
    (odd ``k``).  ``grouping`` is the node partition for even ``k``, else None.
    ``unpruned_dim`` counts the extracted columns before redundancy pruning
    and is the model's degrees of freedom.
    """

    matrix: np.ndarray
    order: int
    active_set: np.ndarray
    grouping: tuple | None
    unpruned_dim: int

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]


def _group_values(c: np.ndarray) -> list[np.ndarray]:
    """Partition indices of ``c`` into near-equal plateaus (sort and split)."""
    tol = GROUP_TOL * max(1.0, np.max(np.abs(c)) if len(c) else 1.0)
    order = np.argsort(c, kind="stable")
    sorted_c = c[order]
    breaks = np.flatnonzero(np.diff(sorted_c) > tol)
    groups = np.split(order, breaks + 1)
    groups = [np.sort(g) for g in groups]
    groups.sort(key=lambda g: g[0])
    return groups


def _prune_columns(B: np.ndarray, tol: float = 1e-7) -> np.ndarray:
    """Keep a maximal left-to-right independent subset of columns.

    Gram-Schmidt with a relative residual threshold; earlier columns win, so
    the intercept is always retained and a redundant trailing indicator drops.
    """
    n, q = B.shape
    keep = []
    Q = np.empty((n, 0))
    for j in range(q):
        col = B[:, j]
        norm = np.linalg.norm(col)
        if norm == 0:
            continue
        r = col - Q @ (Q.T @ col)
        # second orthogonalization pass for numerical safety
        r = r - Q @ (Q.T @ r)
        rnorm = np.linalg.norm(r)
        if rnorm > tol * norm:
            keep.append(j)
            Q = np.column_stack([Q, r / rnorm])
    return B[:, keep]


def basis_dimension(graph: Graph, beta: np.ndarray, k: int) -> int:
    """Selected-basis column count (intercept included), without pruning."""
    beta = np.asarray(beta, dtype=float)
    L = laplacian(graph)
    if k % 2 == 0:
        c = beta.copy()
        for _ in range(k // 2):
            c = L @ c
        dim = len(_group_values(c)) + 1
    else:
        c = beta.copy()
        for _ in range((k + 1) // 2):
            c = L @ c
        thresh = ACTIVE_TOL * max(1.0, np.max(np.abs(c)) if len(c) else 1.0)
        dim = int(np.sum(np.abs(c) > thresh)) + 1
    return min(dim, graph.node_count)


def construct_basis(fit, graph: Graph, k: int | None = None) -> SelectedBasis:
    """Extract the selected basis from a trend fit (or a raw coefficient vector).

    Even ``k``: group nodes by shared values of ``L^(k/2) beta``, emit one
    indicator per group, left-multiply by ``(L^+)^(k/2)``, prepend the
    intercept.  Odd ``k``: take the columns of ``(L^+)^((k+1)/2)`` indexed by
    the active rows of ``L^((k+1)/2) beta``, prepend the intercept.  Exactly
    redundant columns are pruned so the result has full column rank.
    """
    if hasattr(fit, "beta"):
        beta = np.asarray(fit.beta, dtype=float)
        if k is None:
            k = fit.penalty.order
    else:
        beta = np.asarray(fit, dtype=float)
        if k is None:
            raise ValueError("k is required when passing a raw coefficient vector")
    n = graph.node_count
    L = laplacian(graph)
    ones = np.ones((n, 1))

    if k % 2 == 0:
        c = beta.copy()
        for _ in range(k // 2):
            c = L @ c
        groups = _group_values(c)
        ind = np.zeros((n, len(groups)))
        for t, g in enumerate(groups):
            ind[g, t] = 1.0
        cols = ind if k == 0 else laplacian_pinv_power(graph, k // 2) @ ind
        unpruned = len(groups) + 1
        # Active edges: those joining nodes in different groups.
        labels = np.empty(n, dtype=int)
        for t, g in enumerate(groups):
            labels[g] = t
        if graph.edge_count:
            active = np.flatnonzero(
                labels[graph.edges[:, 0]] != labels[graph.edges[:, 1]]
            )
        else:
            active = np.empty(0, dtype=int)
        grouping = tuple(groups)
    else:
        c = beta.copy()
        for _ in range((k + 1) // 2):
            c = L @ c
        thresh = ACTIVE_TOL * max(1.0, np.max(np.abs(c)) if len(c) else 1.0)
        active = np.flatnonzero(np.abs(c) > thresh)
        pinv = laplacian_pinv_power(graph, (k + 1) // 2)
        cols = pinv[:, active]
        unpruned = len(active) + 1
        grouping = None

    B = _prune_columns(np.column_stack([ones, cols]))
    return SelectedBasis(
        matrix=B,
        order=k,
        active_set=active,
        grouping=grouping,
        unpruned_dim=min(unpruned, n),
    )


def project_onto_basis(basis: SelectedBasis, y) -> tuple[np.ndarray, NodeSignal]:
    """Least-squares projection of a signal onto the basis columns.

    Returns the coefficient vector and the fitted signal ``B gamma``.
    """
    yv = y.values if isinstance(y, NodeSignal) else np.asarray(y, dtype=float)
    B = basis.matrix
    q, r = np.linalg.qr(B)
    diag = np.abs(np.diag(r))
    if diag.min() < 1e-10 * max(diag.max(), 1.0):
        raise np.linalg.LinAlgError("basis is rank deficient after pruning")
    gamma = np.linalg.solve(r, q.T @ yv)
    fitted = B @ gamma
    return gamma, NodeSignal(values=fitted)


def projection_matrix(basis: SelectedBasis) -> np.ndarray:
    """Hat matrix ``B (B.T B)^-1 B.T`` of the basis."""
    q, _ = np.linalg.qr(basis.matrix)
    return q @ q.T


def export_basis_csv(basis: SelectedBasis, path) -> None:
    """Write the basis as CSV: one row per node, one column per basis vector."""
    np.savetxt(path, basis.matrix, delimiter=",")
