"""Post-selection inference after graph trend estimation.

Gaussian case: additive fission splits the signal into a selection copy and
an inference copy; conditionally on the selection copy the recentered linear
statistic is exactly normal, which gives a pivot, a plug-in interval, and a
robust interval that only needs lower/upper variance bounds instead of a
consistent variance estimate.  Poisson case: thin, select a basis, then fit
a GLM on the inference copy with sandwich covariance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm as ndist

from .basis import SelectedBasis, construct_basis, project_onto_basis
from .cv import CvError, estimate_sigma_fixed_lambda, graph_cv
from .graphs import Graph, NodeSignal
from .solvers import solve_l1, solve_poisson_l1
from .thinning import thin_poisson


class InferenceError(RuntimeError):
    pass


def information_fraction(sigma: float, sigma0: float) -> float:
    """Share of Fisher information spent on selection: sigma^2/(sigma^2+sigma0^2)."""
    return sigma**2 / (sigma**2 + sigma0**2)


@dataclass(frozen=True)
class SigmaBounds:
    """Lower/upper noise-level bounds bracketing the unknown sigma."""

    sigma_low: float
    sigma_high: float
    method_low: str = "recipe"
    method_high: str = "recipe"
    swapped: bool = False
    degenerate: bool = False

    def __post_init__(self):
        if self.sigma_low < 0 or self.sigma_high < self.sigma_low:
            raise ValueError("need 0 <= sigma_low <= sigma_high")

    def taus(self, sigma0: float) -> tuple[float, float]:
        return (
            information_fraction(self.sigma_low, sigma0),
            information_fraction(self.sigma_high, sigma0),
        )


@dataclass(frozen=True)
class RobustInterval:
    """Variance-bound-robust confidence interval for one projection coordinate."""

    index: int
    eta: np.ndarray
    a1: float
    a2: float
    lower: float
    upper: float
    alpha: float
    tau_low: float
    tau_high: float
    z_crit: float


def _as_values(y):
    return y.values if isinstance(y, NodeSignal) else np.asarray(y, dtype=float)


def _recentered(y, y_sel, eta, tau):
    return (eta @ y - tau * (eta @ y_sel)) / (1.0 - tau)


def pivot(y, y_sel, eta, sigma: float, sigma0: float, eta_mu: float | None = None):
    """Selection-conditional pivot; exactly N(0, 1) at the true sigma.

    With ``eta_mu`` supplied (simulation use) the pivot is centered at the
    projection target; without it the centering term is dropped.
    """
    if sigma <= 0 or sigma0 <= 0:
        raise ValueError("sigma and sigma0 must be positive")
    yv, sv = _as_values(y), _as_values(y_sel)
    eta = np.asarray(eta, dtype=float)
    nrm = np.linalg.norm(eta)
    if nrm == 0:
        raise ValueError("eta must be nonzero")
    tau = information_fraction(sigma, sigma0)
    center = _recentered(yv, sv, eta, tau)
    shift = 0.0 if eta_mu is None else eta_mu
    return float(np.sqrt(1.0 - tau) / (sigma * nrm) * (center - shift))


def naive_ci(y, y_sel, eta, sigma_hat: float, sigma0: float, alpha: float):
    """Plug-in interval assuming ``sigma_hat`` is correct; returns (lower, upper)."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must be in (0, 1)")
    if sigma_hat <= 0 or sigma0 <= 0:
        raise ValueError("sigma_hat and sigma0 must be positive")
    yv, sv = _as_values(y), _as_values(y_sel)
    eta = np.asarray(eta, dtype=float)
    tau = information_fraction(sigma_hat, sigma0)
    center = _recentered(yv, sv, eta, tau)
    z = float(ndist.ppf(1.0 - alpha / 2.0))
    half = z * sigma_hat * np.linalg.norm(eta) / np.sqrt(1.0 - tau)
    return float(center - half), float(center + half)


def robust_ci(
    y, y_sel, eta, bounds: SigmaBounds, sigma0: float, alpha: float, index: int = 0
) -> RobustInterval:
    """Interval that stays valid for any sigma inside the given bounds.

    The recentered statistic is evaluated at both bound-implied information
    fractions; the interval spans their range widened by the conservative
    half-width at the upper bound.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must be in (0, 1)")
    if sigma0 <= 0:
        raise ValueError("sigma0 must be positive")
    yv, sv = _as_values(y), _as_values(y_sel)
    eta = np.asarray(eta, dtype=float)
    tau_low, tau_high = bounds.taus(sigma0)
    c_low = _recentered(yv, sv, eta, tau_low)
    c_high = _recentered(yv, sv, eta, tau_high)
    a1, a2 = min(c_low, c_high), max(c_low, c_high)
    z = float(ndist.ppf(1.0 - alpha / 2.0))
    half = z * np.linalg.norm(eta) * bounds.sigma_high / np.sqrt(1.0 - tau_high)
    return RobustInterval(
        index=index,
        eta=eta,
        a1=float(a1),
        a2=float(a2),
        lower=float(a1 - half),
        upper=float(a2 + half),
        alpha=alpha,
        tau_low=tau_low,
        tau_high=tau_high,
        z_crit=z,
    )


def robust_ci_all(y, y_sel, hat: np.ndarray, bounds: SigmaBounds, sigma0, alpha):
    """Vectorized robust intervals for every row of a hat matrix.

    Returns ``(a1, a2, lower, upper)`` arrays of length ``n``.
    """
    yv, sv = _as_values(y), _as_values(y_sel)
    tau_low, tau_high = bounds.taus(sigma0)
    c_low = (hat @ yv - tau_low * (hat @ sv)) / (1.0 - tau_low)
    c_high = (hat @ yv - tau_high * (hat @ sv)) / (1.0 - tau_high)
    a1 = np.minimum(c_low, c_high)
    a2 = np.maximum(c_low, c_high)
    z = float(ndist.ppf(1.0 - alpha / 2.0))
    norms = np.sqrt(np.maximum(np.einsum("ij,ij->i", hat, hat), 0.0))
    half = z * norms * bounds.sigma_high / np.sqrt(1.0 - tau_high)
    return a1, a2, a1 - half, a2 + half


def ci_length_limit(
    eta_mu: float, sigma: float, sigma_low: float, sigma_high: float, sigma0: float
) -> float:
    """Stated large-sample limit of the robust interval's inner length."""
    if sigma <= 0 or sigma0 <= 0:
        raise ValueError("sigma and sigma0 must be positive")
    gap = sigma_high**2 - sigma_low**2
    return float(
        eta_mu * (gap / sigma**2 + gap / sigma0**2 - gap / (sigma**2 + sigma0**2))
    )


@dataclass(frozen=True)
class RecipeSelection:
    """Selection-stage artifacts shared by the variance-bound recipe."""

    bounds: SigmaBounds
    fit: object
    basis: SelectedBasis
    cv_report: object
    lambda_sel: float


def estimate_sigma_bounds(
    graph: Graph,
    y: NodeSignal,
    y_sel: NodeSignal,
    sigma0: float,
    k: int,
    mode: str = "recipe",
    m: int = 5,
    lambda_grid=None,
    seed=None,
    cv_tol: float = 1e-4,
    fit_tol: float = 1e-6,
) -> SigmaBounds:
    """Conservative and anti-conservative noise-level estimates.

    Recipe mode: the overestimate is the fixed-form residual variance of the
    one-SE-rule fit from a graph-CV run on the selection copy (with the user
    noise variance subtracted out); the underestimate is the residual
    standard error of an OLS fit of the same selection copy on the selected
    basis, which is biased low because it does not adjust for the selection
    step.  Fallback mode: zero and the sample standard deviation.
    """
    return _recipe_selection(
        graph, y, y_sel, sigma0, k, mode, m, lambda_grid, seed, cv_tol, fit_tol
    ).bounds


def _recipe_selection(
    graph, y, y_sel, sigma0, k, mode="recipe", m=5, lambda_grid=None, seed=None,
    cv_tol=1e-4, fit_tol=1e-6,
) -> RecipeSelection:
    n = graph.node_count
    if mode == "fallback":
        sd = float(np.std(y.values, ddof=1))
        degenerate = sd == 0.0
        bounds = SigmaBounds(
            sigma_low=0.0, sigma_high=sd,
            method_low="zero", method_high="sample_sd",
            degenerate=degenerate,
        )
        return RecipeSelection(bounds, None, None, None, float("nan"))
    if mode != "recipe":
        raise ValueError(f"unknown mode {mode!r}")

    report = graph_cv(
        graph, y_sel, "gaussian", m, k,
        penalty_form="l1", lambda_grid=lambda_grid, seed=seed, tol=cv_tol,
    )
    lam = report.lambda_1se
    fit = solve_l1(graph, y_sel, k, lam, tol=fit_tol, compute_kkt=False)
    if n <= fit.df:
        raise CvError(f"degenerate bounds: n = {n} <= df = {fit.df}")
    rss_sel = float(np.sum((y_sel.values - fit.beta) ** 2))
    var_high = rss_sel / (n - fit.df) - sigma0**2

    basis = construct_basis(fit, graph, k)
    # Underestimate: basis from the min-rule fit (richer than the one-SE
    # model), then OLS of the same data on that basis; the residual standard
    # error is downward biased because it does not adjust for selection.
    fit_min = solve_l1(
        graph, y_sel, k, report.lambda_min, tol=fit_tol, compute_kkt=False
    )
    basis_min = construct_basis(fit_min, graph, k)
    q = basis_min.unpruned_dim
    if n <= q:
        raise CvError(f"degenerate bounds: n = {n} <= basis dim = {q}")
    _, fitted = project_onto_basis(basis_min, y_sel)
    rss_ols = float(np.sum((y_sel.values - fitted.values) ** 2))
    var_low = rss_ols / (n - q) - sigma0**2

    lo = float(np.sqrt(max(var_low, 0.0)))
    hi = float(np.sqrt(max(var_high, 0.0)))
    swapped = lo > hi
    if swapped:
        lo, hi = hi, lo
    degenerate = hi == 0.0
    bounds = SigmaBounds(
        sigma_low=lo, sigma_high=hi,
        method_low="post_selection_rse", method_high="cv_1se_residual",
        swapped=swapped, degenerate=degenerate,
    )
    return RecipeSelection(bounds, fit, basis, report, float(lam))


# ---------------------------------------------------------------------------
# Poisson pipeline
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GlmFit:
    """Poisson GLM on the scaled basis with model-robust covariance."""

    gamma_hat: np.ndarray
    cov_sandwich: np.ndarray
    basis: SelectedBasis
    tau: float
    iterations: int
    converged: bool


def _poisson_newton(X, counts, gamma0, tol=1e-8, max_iter=100):
    gamma = gamma0.copy()
    it = 0
    for it in range(1, max_iter + 1):
        lin = np.clip(X @ gamma, -700, 700)
        mu = np.exp(lin)
        grad = X.T @ (counts - mu)
        if np.linalg.norm(grad, np.inf) < tol:
            return gamma, it, True
        H = X.T @ (mu[:, None] * X)
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError as exc:
            raise InferenceError("rank-deficient design in Poisson GLM") from exc
        # dampen overly aggressive steps
        ns = np.linalg.norm(step, np.inf)
        if ns > 5.0:
            step *= 5.0 / ns
        gamma = gamma + step
    return gamma, it, False


def fit_poisson_glm(
    basis: SelectedBasis, y_inf: NodeSignal, tau: float = 0.5
) -> GlmFit:
    """Newton fit of the Poisson working model on the thinned inference copy.

    The natural parameter is ``(1 - tau) * gamma @ b_i`` per node, folding the
    thinning fraction into the design.  The covariance is the sandwich
    ``H^-1 M H^-1``.
    """
    if y_inf.kind != "count":
        raise InferenceError("Poisson GLM expects a count signal")
    if not 0 < tau < 1:
        raise ValueError("tau must be in (0, 1)")
    counts = y_inf.values
    X = (1.0 - tau) * basis.matrix
    gamma0 = np.linalg.lstsq(
        X, np.log(np.maximum(counts, 0.5)), rcond=None
    )[0]
    gamma, it, conv = _poisson_newton(X, counts, gamma0)
    if not conv:
        raise InferenceError("Poisson GLM Newton iterations did not converge")
    lin = X @ gamma
    mu = np.exp(lin)
    H = X.T @ (mu[:, None] * X)
    M = X.T @ (((counts - mu) ** 2)[:, None] * X)
    Hinv = np.linalg.inv(H)
    cov = Hinv @ M @ Hinv
    cov = 0.5 * (cov + cov.T)
    return GlmFit(
        gamma_hat=gamma, cov_sandwich=cov, basis=basis, tau=tau,
        iterations=it, converged=conv,
    )


def poisson_projection_parameter(
    basis: SelectedBasis, mean_inf: np.ndarray, tau: float = 0.5
) -> np.ndarray:
    """Population coefficient the sandwich intervals target (simulation use).

    Solves the same working-model score equations with the observed counts
    replaced by their expectation under the true rates.
    """
    X = (1.0 - tau) * basis.matrix
    gamma0 = np.linalg.lstsq(
        X, np.log(np.maximum(mean_inf, 1e-8)), rcond=None
    )[0]
    gamma, _, conv = _poisson_newton(X, np.asarray(mean_inf, float), gamma0)
    if not conv:
        raise InferenceError("projection parameter solve did not converge")
    return gamma


@dataclass(frozen=True)
class PoissonCiResult:
    """Per-coordinate Wald intervals from the thin/select/refit pipeline."""

    basis: SelectedBasis
    glm: GlmFit
    gamma_hat: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    alpha: float
    y_sel: NodeSignal
    y_inf: NodeSignal


def poisson_ci_pipeline(
    graph: Graph,
    y: NodeSignal,
    k: int,
    lam: float,
    alpha: float,
    seed=None,
    solver_tol: float = 1e-6,
) -> PoissonCiResult:
    """Thin (m=2), select a trend basis on one copy, refit a GLM on the other.

    Returns sandwich-based Wald intervals for each basis coefficient.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must be in (0, 1)")
    fam = thin_poisson(y, m=2, seed=seed)
    y_sel, y_inf = fam.copies
    fit = solve_poisson_l1(graph, y_sel, k, lam, tol=solver_tol)
    basis = construct_basis(fit, graph, k)
    glm = fit_poisson_glm(basis, y_inf, tau=0.5)
    z = float(ndist.ppf(1.0 - alpha / 2.0))
    se = np.sqrt(np.maximum(np.diag(glm.cov_sandwich), 0.0))
    return PoissonCiResult(
        basis=basis,
        glm=glm,
        gamma_hat=glm.gamma_hat,
        lower=glm.gamma_hat - z * se,
        upper=glm.gamma_hat + z * se,
        alpha=alpha,
        y_sel=y_sel,
        y_inf=y_inf,
    )
