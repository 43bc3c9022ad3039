"""Graph cross-validation by thinning, plus the ordinary structured-CV baseline.

Graph CV thins the observed signal into ``m`` independent copies, fits on the
aggregate of ``m - 1`` and scores on the held-out copy.  The ordinary
baseline holds out random node subsets and imputes each held-out node from
its training neighbors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphs import Graph, NodeSignal
from .solvers import solve_elastic, solve_l1, solve_l2, solve_poisson_l1
from .thinning import thin_gaussian, thin_poisson


class CvError(RuntimeError):
    pass


@dataclass(frozen=True)
class CvReport:
    """Per-fold errors over a descending lambda grid plus the selected values.

    ``lambda_1se`` is the largest grid value whose mean error stays within
    one standard error of the minimum.
    """

    lambda_grid: np.ndarray
    fold_errors: np.ndarray
    mean_error: np.ndarray
    se_error: np.ndarray
    lambda_min: float
    lambda_1se: float
    method: str
    sigma_hat: float | None = None


def default_lambda_grid(n: int, num: int = 50, lo: float = 1e-3, hi: float = 1e2):
    """Descending log-spaced grid spanning ``[lo, hi] * sqrt(log n / n)``."""
    base = np.sqrt(np.log(n) / n)
    return base * np.logspace(np.log10(hi), np.log10(lo), num)


def _fit_square(graph, y, k, form, lam, lam2_ratio, tol, max_iter, beta0):
    if form == "l1":
        return solve_l1(
            graph, y, k, lam, tol=tol, max_iter=max_iter, beta0=beta0,
            compute_kkt=False,
        )
    if form == "l2":
        return solve_l2(graph, y, k, lam)
    if form == "elastic":
        return solve_elastic(
            graph, y, k, lam, lam2_ratio * lam, tol=tol, max_iter=max_iter
        )
    raise ValueError(f"unknown penalty form {form!r}")


def _poisson_deviance(counts: np.ndarray, rate: np.ndarray) -> float:
    rate = np.maximum(rate, 1e-12)
    with np.errstate(divide="ignore", invalid="ignore"):
        term = np.where(counts > 0, counts * np.log(counts / rate), 0.0)
    return float(2.0 * np.mean(term - (counts - rate)))


def _build_report(grid, fold_errors, method, sigma_hat=None):
    mean_error = fold_errors.mean(axis=0)
    m = fold_errors.shape[0]
    se_error = fold_errors.std(axis=0, ddof=1) / np.sqrt(m)
    imin = int(np.argmin(mean_error))
    cutoff = mean_error[imin] + se_error[imin]
    # grid is descending, so the first qualifying index is the largest lambda
    i1se = int(np.flatnonzero(mean_error <= cutoff)[0])
    return CvReport(
        lambda_grid=grid,
        fold_errors=fold_errors,
        mean_error=mean_error,
        se_error=se_error,
        lambda_min=float(grid[imin]),
        lambda_1se=float(grid[i1se]),
        method=method,
        sigma_hat=sigma_hat,
    )


def graph_cv(
    graph: Graph,
    y: NodeSignal,
    family: str,
    m: int,
    k: int,
    penalty_form: str = "l1",
    lambda_grid=None,
    seed=None,
    sigma: float | None = None,
    lam2_ratio: float = 1.0,
    tol: float = 1e-5,
    max_iter: int = 5000,
) -> CvReport:
    """m-fold cross-validation by thinning the signal into independent copies.

    Gaussian folds: the training aggregate is the average of ``m - 1`` copies
    (same mean as ``y``) and the held-out copy is scored by mean squared
    error.  Poisson folds: the training aggregate is the sum, the fitted rate
    is rescaled by ``m / (m - 1)``, the held-out counts by ``m``, and scoring
    is mean Poisson deviance.  ``sigma`` (Gaussian) is estimated via the
    fixed-lambda heuristic when not supplied.
    """
    y.check_length(graph)
    if m < 2:
        raise CvError("graph CV needs m >= 2 folds")
    n = graph.node_count
    if lambda_grid is None:
        lambda_grid = default_lambda_grid(n)
    grid = np.asarray(lambda_grid, dtype=float)

    sigma_hat = None
    if family == "gaussian":
        if sigma is None:
            sigma = estimate_sigma_fixed_lambda(graph, y, k)
            sigma_hat = sigma
        fam = thin_gaussian(y, sigma, m, seed=seed)
    elif family == "poisson":
        fam = thin_poisson(y, m, seed=seed)
    else:
        raise CvError(f"unknown family {family!r}")

    stack = np.stack([c.values for c in fam.copies])
    fold_errors = np.empty((m, len(grid)))
    for j in range(m):
        others = np.delete(stack, j, axis=0)
        test = stack[j]
        if family == "gaussian":
            train = NodeSignal(values=others.mean(axis=0))
            beta0 = None
            for gi, lam in enumerate(grid):
                fit = _fit_square(
                    graph, train, k, penalty_form, lam, lam2_ratio,
                    tol, max_iter, beta0,
                )
                beta0 = fit.beta
                fold_errors[j, gi] = np.mean((test - fit.beta) ** 2)
        else:
            train = NodeSignal(values=others.sum(axis=0), kind="count")
            for gi, lam in enumerate(grid):
                fit = solve_poisson_l1(
                    graph, train, k, lam, tol=tol, max_iter=max_iter
                )
                rate = np.exp(np.clip(fit.beta, -700, 700)) * m / (m - 1.0)
                fold_errors[j, gi] = _poisson_deviance(m * test, rate)
    return _build_report(grid, fold_errors, "graph_cv", sigma_hat)


def ordinary_cv(
    graph: Graph,
    y: NodeSignal,
    m: int,
    k: int,
    penalty_form: str = "l1",
    lambda_grid=None,
    seed=None,
    lam2_ratio: float = 1.0,
    tol: float = 1e-5,
    max_iter: int = 5000,
) -> CvReport:
    """Structured CV baseline: hold out random node subsets and impute.

    Each held-out node's prediction is the mean fitted value of its training
    neighbors (the global training mean when isolated); the fold error is
    the held-out mean squared error.
    """
    y.check_length(graph)
    if m < 2:
        raise CvError("ordinary CV needs m >= 2 folds")
    n = graph.node_count
    if lambda_grid is None:
        lambda_grid = default_lambda_grid(n)
    grid = np.asarray(lambda_grid, dtype=float)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    folds = np.array_split(perm, m)

    # adjacency lists for imputation
    nbrs = [[] for _ in range(n)]
    for u, v in graph.edges:
        nbrs[u].append(v)
        nbrs[v].append(u)

    fold_errors = np.empty((m, len(grid)))
    for j, held in enumerate(folds):
        held_mask = np.zeros(n, dtype=bool)
        held_mask[held] = True
        train_nodes = np.flatnonzero(~held_mask)
        remap = -np.ones(n, dtype=int)
        remap[train_nodes] = np.arange(len(train_nodes))
        if graph.edge_count:
            keep = ~held_mask[graph.edges[:, 0]] & ~held_mask[graph.edges[:, 1]]
            sub_edges = remap[graph.edges[keep]]
        else:
            sub_edges = np.empty((0, 2), int)
        sub = Graph(node_count=len(train_nodes), edges=sub_edges)
        y_train = NodeSignal(values=y.values[train_nodes])
        beta0 = None
        for gi, lam in enumerate(grid):
            fit = _fit_square(
                sub, y_train, k, penalty_form, lam, lam2_ratio,
                tol, max_iter, beta0,
            )
            beta0 = fit.beta
            global_mean = float(np.mean(fit.beta))
            err = 0.0
            for v in held:
                train_nbrs = [remap[w] for w in nbrs[v] if not held_mask[w]]
                pred = (
                    float(np.mean(fit.beta[train_nbrs]))
                    if train_nbrs
                    else global_mean
                )
                err += (y.values[v] - pred) ** 2
            fold_errors[j, gi] = err / len(held)
    return _build_report(grid, fold_errors, "ordinary_cv")


def estimate_sigma_fixed_lambda(
    graph: Graph, y: NodeSignal, k: int, tol: float = 1e-6
) -> float:
    """Residual-variance heuristic at the fixed penalty ``sqrt(log n / n)``.

    Fits the L1 trend at that lambda and returns
    ``sqrt(||y - beta||^2 / (n - df))``.
    """
    y.check_length(graph)
    if y.kind != "continuous":
        raise CvError("sigma estimation expects a continuous signal")
    n = graph.node_count
    lam = np.sqrt(np.log(n) / n) if n > 1 else 1.0
    fit = solve_l1(graph, y, k, lam, tol=tol, compute_kkt=False)
    if n <= fit.df:
        raise CvError(
            f"degenerate variance estimate: n = {n} <= df = {fit.df}"
        )
    rss = float(np.sum((y.values - fit.beta) ** 2))
    return float(np.sqrt(rss / (n - fit.df)))
