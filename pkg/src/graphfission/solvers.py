"""Penalized trend solvers over graphs.

Minimizes ``loss(y, beta) + penalty(D beta)`` where ``D`` is the graph
difference operator of order ``k``.  Square loss uses the ``1/n`` scaling
throughout so penalty weights are comparable with the ``sqrt(log n / n)``
recipe.  L1 and elastic-net problems are solved by ADMM with residual
balancing; the L2 problem has a closed-form SPD solve.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import lsq_linear

from .graphs import Graph, NodeSignal, difference_operator

# Rows of D @ beta with absolute value below this (times max(1, scale)) are
# treated as zero when detecting the active set.
ZERO_THRESHOLD = 1e-8


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class PenaltySpec:
    """Penalty on the order-``k`` graph differences.

    ``form`` is one of ``"l1"``, ``"l2"``, ``"elastic"``.  ``lam`` is the L1
    (or L2, for form ``"l2"``) weight; ``lam2`` is the quadratic weight of the
    elastic net.
    """

    order: int
    form: str
    lam: float = 0.0
    lam2: float = 0.0

    def __post_init__(self):
        if self.order < 0:
            raise ValueError("penalty order must be >= 0")
        if self.form not in ("l1", "l2", "elastic"):
            raise ValueError(f"unknown penalty form {self.form!r}")
        if self.lam < 0 or self.lam2 < 0:
            raise ValueError("penalty weights must be nonnegative")


@dataclass(frozen=True)
class TrendFit:
    """Solution of the penalized trend problem with solver diagnostics."""

    beta: np.ndarray
    penalty: PenaltySpec
    loss: str
    iterations: int
    kkt_residual: float
    df: int
    objective: float
    converged: bool = True
    primal_residual: float = 0.0
    dual_residual: float = 0.0
    clipped: bool = False
    objective_trace: np.ndarray | None = field(default=None, repr=False)


def _diffmat(graph: Graph, k: int) -> sp.csr_matrix:
    return difference_operator(graph, k).matrix


def _square_objective(y, beta, D, lam1, lam2):
    n = len(y)
    r = y - beta
    db = D @ beta
    return (r @ r) / n + lam1 * np.abs(db).sum() + lam2 * (db @ db)


def _count_df(graph: Graph, beta: np.ndarray, k: int) -> int:
    # Column count of the selected basis; imported lazily to avoid a cycle.
    from .basis import basis_dimension

    return basis_dimension(graph, beta, k)


def solve_l2(graph: Graph, y: NodeSignal, k: int, lam: float) -> TrendFit:
    """Closed-form ridge trend fit ``(I + n lam D.T D)^-1 y``."""
    y.check_length(graph)
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    n = graph.node_count
    yv = y.values
    D = _diffmat(graph, k)
    A = (sp.identity(n, format="csc") + (n * lam) * (D.T @ D)).tocsc()
    beta = spla.spsolve(A, yv) if n > 1 else yv / A.toarray().ravel()
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    resid = np.linalg.norm(A @ beta - yv)
    # scale-aware backward-error check: the matrix norm grows like n*lam
    scale = max(1.0, np.linalg.norm(yv), spla.norm(A, 1) * np.linalg.norm(beta))
    if resid > 1e-10 * scale:
        raise SolverError(f"L2 linear solve residual {resid:.2e} too large")
    # Effective dimension of the linear smoother from the Laplacian spectrum:
    # D.T D = L^(k+1), so df = sum_i 1 / (1 + n lam w_i^(k+1)).
    from .graphs import _laplacian_eig

    w, _ = _laplacian_eig(graph)
    df = int(round(np.sum(1.0 / (1.0 + n * lam * np.clip(w, 0.0, None) ** (k + 1)))))
    df = min(max(df, 1), n)
    obj = _square_objective(yv, beta, D, 0.0, lam)
    return TrendFit(
        beta=beta,
        penalty=PenaltySpec(order=k, form="l2", lam=lam),
        loss="square",
        iterations=1,
        kkt_residual=float(resid),
        df=df,
        objective=obj,
    )


def _admm_square(yv, D, lam1, lam2, tol, max_iter, beta0=None):
    """Scaled ADMM for (1/n)||y - b||^2 + lam1 ||Db||_1 + lam2 ||Db||_2^2."""
    n = len(yv)
    p = D.shape[0]
    DT = D.T.tocsr()
    DTD = (DT @ D).tocsc()
    eye = sp.identity(n, format="csc")

    rho = 1.0
    factor_cache = {}

    def get_factor(r):
        if r not in factor_cache:
            factor_cache[r] = spla.splu((2.0 / n) * eye + r * DTD)
        return factor_cache[r]

    beta = yv.copy() if beta0 is None else beta0.copy()
    z = D @ beta
    u = np.zeros(p)
    obj_trace = []
    pri = dua = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        rhs = (2.0 / n) * yv + rho * (DT @ (z - u))
        beta = get_factor(rho).solve(rhs)
        db = D @ beta
        z_old = z
        v = db + u
        z = np.sign(rho * v) * np.maximum(np.abs(rho * v) - lam1, 0.0) / (rho + 2.0 * lam2)
        u = u + db - z
        pri = np.linalg.norm(db - z)
        dua = rho * np.linalg.norm(DT @ (z - z_old))
        obj_trace.append(_square_objective(yv, beta, D, lam1, lam2))
        scale_p = max(1.0, np.linalg.norm(db), np.linalg.norm(z))
        scale_d = max(1.0, np.linalg.norm(rho * (DT @ u)))
        if pri <= tol * scale_p and dua <= tol * scale_d:
            break
        # Residual balancing: factor-2 updates past a 10x imbalance.
        if it % 10 == 0:
            if pri > 10.0 * dua:
                rho *= 2.0
                u /= 2.0
            elif dua > 10.0 * pri:
                rho /= 2.0
                u *= 2.0
    converged = pri <= tol * max(1.0, np.linalg.norm(D @ beta), np.linalg.norm(z))
    return beta, z, it, float(pri), float(dua), converged, np.asarray(obj_trace)


def _polish_l1(yv, D, lam1, beta, z, max_dense=4000):
    """Refine an ADMM iterate using the exact sparsity pattern of ``z``.

    On the fixed pattern the problem is an equality-constrained quadratic:
    minimize (1/n)||y - b||^2 + lam1 * s.T (D b)_A subject to (D b)_I = 0,
    solved by projecting onto the null space of the inactive rows.  The
    refined point is kept only when it does not increase the objective.
    """
    n = len(yv)
    if n > max_dense:
        return beta
    active = z != 0.0
    s = np.sign(z[active])
    target = yv - (n * lam1 / 2.0) * np.asarray(
        D[active].T @ s
    ).ravel() if active.any() else yv.copy()
    inactive = ~active
    if inactive.any():
        from scipy.linalg import null_space

        N = null_space(D[inactive].toarray())
        if N.shape[1] == 0:
            candidate = np.zeros(n)
        else:
            candidate = N @ (N.T @ target)
    else:
        candidate = target
    tol = 1e-12 * max(1.0, abs(_square_objective(yv, beta, D, lam1, 0.0)))
    if (
        _square_objective(yv, candidate, D, lam1, 0.0)
        <= _square_objective(yv, beta, D, lam1, 0.0) + tol
    ):
        return candidate
    return beta


def solve_l1(
    graph: Graph,
    y: NodeSignal,
    k: int,
    lam: float,
    tol: float = 1e-6,
    max_iter: int = 20000,
    beta0: np.ndarray | None = None,
    compute_kkt: bool = True,
) -> TrendFit:
    """L1 graph trend filtering by ADMM operator splitting.

    Solves ``(1/n)||y - beta||^2 + lam ||D beta||_1``.  Non-convergence is not
    raised; the returned fit carries ``converged=False`` plus the last
    residuals so the caller can decide.
    """
    y.check_length(graph)
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    yv = y.values
    D = _diffmat(graph, k)
    pen = PenaltySpec(order=k, form="l1", lam=lam)
    if lam == 0 or D.shape[0] == 0:
        beta = yv.copy()
        return TrendFit(
            beta=beta, penalty=pen, loss="square", iterations=0,
            kkt_residual=0.0, df=_count_df(graph, beta, k),
            objective=_square_objective(yv, beta, D, lam, 0.0),
        )
    beta, z, it, pri, dua, conv, trace = _admm_square(
        yv, D, lam, 0.0, tol, max_iter, beta0=beta0
    )
    if conv:
        beta = _polish_l1(yv, D, lam, beta, z)
    kkt = kkt_residual(graph, yv, k, lam, beta) if compute_kkt else float(pri)
    return TrendFit(
        beta=beta, penalty=pen, loss="square", iterations=it,
        kkt_residual=kkt, df=_count_df(graph, beta, k),
        objective=_square_objective(yv, beta, D, lam, 0.0),
        converged=conv, primal_residual=pri, dual_residual=dua,
        objective_trace=trace,
    )


def solve_elastic(
    graph: Graph,
    y: NodeSignal,
    k: int,
    lam1: float,
    lam2: float,
    tol: float = 1e-6,
    max_iter: int = 20000,
) -> TrendFit:
    """Elastic-net graph trend fit: L1 plus squared-L2 penalties on ``D beta``."""
    y.check_length(graph)
    if lam1 < 0 or lam2 < 0:
        raise ValueError("penalty weights must be >= 0")
    pen = PenaltySpec(order=k, form="elastic", lam=lam1, lam2=lam2)
    if lam1 == 0:
        fit = solve_l2(graph, y, k, lam2)
        return replace(fit, penalty=pen)
    if lam2 == 0:
        fit = solve_l1(graph, y, k, lam1, tol=tol, max_iter=max_iter)
        return replace(fit, penalty=pen)
    yv = y.values
    D = _diffmat(graph, k)
    beta, _, it, pri, dua, conv, trace = _admm_square(yv, D, lam1, lam2, tol, max_iter)
    return TrendFit(
        beta=beta, penalty=pen, loss="square", iterations=it,
        kkt_residual=float(pri), df=_count_df(graph, beta, k),
        objective=_square_objective(yv, beta, D, lam1, lam2),
        converged=conv, primal_residual=pri, dual_residual=dua,
        objective_trace=trace,
    )


def kkt_residual(graph: Graph, y, k: int, lam: float, beta) -> float:
    """Optimality certificate for the square-loss L1 problem.

    Minimizes over admissible subgradients ``u`` (``|u_i| <= 1`` everywhere,
    ``u_i = sign((D beta)_i)`` on the active rows) the sup norm of
    ``(2/n)(beta - y) + lam D.T u``.  The free ``u`` entries are chosen by a
    box-constrained least-squares fit.
    """
    yv = y.values if isinstance(y, NodeSignal) else np.asarray(y, dtype=float)
    beta = np.asarray(beta, dtype=float)
    n = len(yv)
    D = _diffmat(graph, k)
    if lam == 0 or D.shape[0] == 0:
        return float(np.max(np.abs((2.0 / n) * (beta - yv)))) if n else 0.0
    db = D @ beta
    active = np.abs(db) > ZERO_THRESHOLD
    g = (2.0 / n) * (beta - yv)
    DT = D.T.tocsc()
    r = g + lam * (DT[:, active] @ np.sign(db[active]))
    free = ~active
    n_free = int(free.sum())
    if n_free == 0:
        return float(np.max(np.abs(r)))
    A = lam * DT[:, free].toarray()
    sol = lsq_linear(A, -r, bounds=(-1.0, 1.0), tol=1e-12)
    return float(np.max(np.abs(r + A @ sol.x)))


def _poisson_objective(yv, beta, D, lam):
    n = len(yv)
    return (np.exp(beta) - yv * beta).sum() / n + lam * np.abs(D @ beta).sum()


def _polish_poisson(yv, D, lam, beta, z, max_dense=4000):
    """Refine a Poisson ADMM iterate on the exact sparsity pattern of ``z``.

    Newton steps on the reduced problem b = N c with N spanning the null
    space of the inactive rows, smooth objective
    (1/n) sum(exp(b) - y b) + lam * s.T (D b)_A.  Kept only when the full
    objective does not increase.
    """
    n = len(yv)
    if n > max_dense:
        return beta
    active = z != 0.0
    s = np.sign(z[active])
    inactive = ~active
    if inactive.any():
        from scipy.linalg import null_space

        N = null_space(D[inactive].toarray())
        if N.shape[1] == 0:
            return beta
    else:
        N = np.eye(n)
    lin_term = (
        lam * (N.T @ np.asarray(D[active].T @ s).ravel()) if active.any() else 0.0
    )
    c = np.linalg.lstsq(N, beta, rcond=None)[0]
    for _ in range(50):
        b = np.clip(N @ c, -50.0, 50.0)
        ex = np.exp(b)
        grad = N.T @ ((ex - yv) / n) + lin_term
        if np.linalg.norm(grad, np.inf) < 1e-12:
            break
        H = N.T @ ((ex / n)[:, None] * N)
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            return beta
        ns = np.linalg.norm(step, np.inf)
        if ns > 5.0:
            step *= 5.0 / ns
        c = c - step
    candidate = np.clip(N @ c, -50.0, 50.0)
    tol = 1e-12 * max(1.0, abs(_poisson_objective(yv, beta, D, lam)))
    if (
        _poisson_objective(yv, candidate, D, lam)
        <= _poisson_objective(yv, beta, D, lam) + tol
    ):
        return candidate
    return beta


def solve_poisson_l1(
    graph: Graph,
    y: NodeSignal,
    k: int,
    lam: float,
    tol: float = 1e-6,
    max_iter: int = 5000,
) -> TrendFit:
    """Poisson-loss L1 graph trend fit by ADMM with inner Newton steps.

    Minimizes ``(1/n) sum(-y_i b_i + exp(b_i)) + lam ||D b||_1``.  Iterates
    are clipped at 50 as an overflow guard; the fit flags when the clip was
    ever hit.
    """
    if y.kind != "count":
        raise ValueError("Poisson loss expects a count signal")
    y.check_length(graph)
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    yv = y.values
    n = graph.node_count
    D = _diffmat(graph, k)
    pen = PenaltySpec(order=k, form="l1", lam=lam)
    beta = np.log(np.maximum(yv, 0.5))
    clipped = False

    if lam == 0 or D.shape[0] == 0:
        # Separable: per-node stationarity exp(b) = y (b -> -inf at y = 0,
        # represented by the clip floor).
        beta = np.where(yv > 0, np.log(np.maximum(yv, 1e-300)), -50.0)
        return TrendFit(
            beta=beta, penalty=pen, loss="poisson", iterations=0,
            kkt_residual=0.0, df=_count_df(graph, beta, k),
            objective=_poisson_objective(yv, beta, D, lam),
        )

    p = D.shape[0]
    DT = D.T.tocsr()
    DTD = (DT @ D).tocsc()
    rho = 1.0
    z = D @ beta
    u = np.zeros(p)
    pri = dua = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        # beta update: Newton on (1/n)(exp(b) - y b) + (rho/2)||D b - z + u||^2
        target = z - u
        for _ in range(30):
            ex = np.exp(beta)
            grad = (ex - yv) / n + rho * (DT @ (D @ beta - target))
            if np.linalg.norm(grad, np.inf) < 0.1 * tol:
                break
            H = sp.diags(ex / n, format="csc") + rho * DTD
            step = spla.spsolve(H, grad)
            beta = beta - step
            if np.any(beta > 50.0):
                beta = np.minimum(beta, 50.0)
                clipped = True
        db = D @ beta
        z_old = z
        v = db + u
        z = np.sign(v) * np.maximum(np.abs(v) - lam / rho, 0.0)
        u = u + db - z
        pri = np.linalg.norm(db - z)
        dua = rho * np.linalg.norm(DT @ (z - z_old))
        scale_p = max(1.0, np.linalg.norm(db), np.linalg.norm(z))
        scale_d = max(1.0, np.linalg.norm(rho * (DT @ u)))
        if pri <= tol * scale_p and dua <= tol * scale_d:
            break
        if it % 10 == 0:
            if pri > 10.0 * dua:
                rho *= 2.0
                u /= 2.0
            elif dua > 10.0 * pri:
                rho /= 2.0
                u *= 2.0
    conv = pri <= tol * max(1.0, np.linalg.norm(D @ beta), np.linalg.norm(z))
    if conv:
        beta = _polish_poisson(yv, D, lam, beta, z)
    return TrendFit(
        beta=beta, penalty=pen, loss="poisson", iterations=it,
        kkt_residual=float(pri), df=_count_df(graph, beta, k),
        objective=_poisson_objective(yv, beta, D, lam),
        converged=conv, primal_residual=float(pri), dual_residual=float(dua),
        clipped=clipped,
    )


def degrees_of_freedom(fit: TrendFit, graph: Graph) -> int:
    """Dimension of the selected basis built from ``fit.beta`` (intercept included)."""
    return _count_df(graph, fit.beta, fit.penalty.order)
