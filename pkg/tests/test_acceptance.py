"""End-to-end acceptance checks.

Each test covers one numbered behavior contract and emits a single
``PASS``/``FAIL`` line (written past the capture plugin so it always shows).
Tolerances and runtime budgets are part of the contract and asserted.
"""

import sys
import time

import numpy as np
import pytest
from scipy.stats import kstest, norm

from graphfission import (
    Graph,
    NodeSignal,
    SigmaBounds,
    SimConfig,
    ci_length_limit,
    connected_components,
    construct_basis,
    cv_error_curves,
    difference_operator,
    fission_gaussian,
    generate_trend,
    grid_graph,
    naive_ci,
    pivot,
    projection_matrix,
    robust_ci,
    run_ci_experiment,
    run_cv_experiment,
    run_poisson_experiment,
    solve_l1,
    solve_l2,
    thin_gaussian,
    thin_poisson,
)


@pytest.fixture
def report(capsys):
    """Emit one PASS/FAIL line per criterion, bypassing output capture."""

    def _report(num: int, ok: bool, detail: str, elapsed: float) -> None:
        status = "PASS" if ok else "FAIL"
        with capsys.disabled():
            sys.stdout.write(
                f"{status} criterion {num:2d}: {detail} [{elapsed:.1f}s]\n"
            )
            sys.stdout.flush()

    return _report


def test_criterion_01_thinning_reconstruction(report):
    t0 = time.time()
    rng = np.random.default_rng(0)
    n = 10_000
    counts = NodeSignal(values=rng.poisson(7.0, n).astype(float), kind="count")
    fam_p = thin_poisson(counts, m=4, seed=1)
    poisson_exact = bool(
        np.array_equal(fam_p.recombined().values, counts.values)
    )
    y = NodeSignal(values=rng.standard_normal(n) * 3.0 + 1.0)
    fam_g = thin_gaussian(y, 1.3, m=3, seed=2)
    rel = np.max(np.abs(fam_g.recombined().values - y.values)) / max(
        1.0, np.max(np.abs(y.values))
    )
    gaussian_close = rel <= 1e-9
    elapsed = time.time() - t0
    ok = poisson_exact and gaussian_close and elapsed < 10
    report(
        1, ok,
        f"poisson sums exact={poisson_exact}, gaussian rel dev={rel:.2e}",
        elapsed,
    )
    assert poisson_exact
    assert gaussian_close
    assert elapsed < 10


def test_criterion_02_thinning_marginals_independence(report):
    t0 = time.time()
    # 1e5 replicates of a single coordinate, each with a fresh draw of y so
    # the marginal law (variance m sigma^2) is the unconditional one
    n = 100_000
    rng = np.random.default_rng(3)
    y = NodeSignal(values=1.5 + rng.standard_normal(n))
    fam = thin_gaussian(y, 1.0, m=3, seed=4)
    stack = np.stack([c.values for c in fam.copies])
    variances = stack.var(axis=1)
    var_ok = bool(np.all(np.abs(variances - 3.0) / 3.0 < 0.05))
    corrs = [
        abs(np.corrcoef(stack[a], stack[b])[0, 1])
        for a in range(3)
        for b in range(a + 1, 3)
    ]
    corr_ok = max(corrs) < 0.02
    elapsed = time.time() - t0
    ok = var_ok and corr_ok and elapsed < 30
    report(
        2, ok,
        f"variances={np.round(variances, 3).tolist()}, "
        f"max |corr|={max(corrs):.4f}",
        elapsed,
    )
    assert var_ok
    assert corr_ok
    assert elapsed < 30


def test_criterion_03_selected_basis_span(report):
    t0 = time.time()
    g = grid_graph(10, 10)
    lam = float(np.sqrt(np.log(100) / 100))
    worst = 0.0
    for k in (0, 1, 2):
        for s in range(50):
            mu = generate_trend(g, k, 0.2, 2.0, seed=1000 * k + s)
            rng = np.random.default_rng(2000 * k + s)
            y = NodeSignal(values=mu.values + rng.standard_normal(100))
            fit = solve_l1(g, y, k, lam, compute_kkt=False)
            P = projection_matrix(construct_basis(fit, g))
            resid = np.max(np.abs(fit.beta - P @ fit.beta))
            worst = max(worst, resid / (1.0 + np.max(np.abs(fit.beta))))
    elapsed = time.time() - t0
    ok = worst <= 1e-6 and elapsed < 120
    report(3, ok, f"worst relative span residual={worst:.2e}", elapsed)
    assert worst <= 1e-6
    assert elapsed < 120


def test_criterion_04_ridge_closed_form(report):
    t0 = time.time()
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(20):
        rows = int(rng.integers(2, 8))
        cols = int(rng.integers(2, 8))
        g = grid_graph(rows, cols)
        n = g.node_count
        k = int(rng.integers(0, 3))
        lam = float(rng.uniform(0.01, 2.0))
        y = NodeSignal(values=rng.standard_normal(n))
        fit = solve_l2(g, y, k, lam)
        D = difference_operator(g, k).matrix.toarray()
        oracle = np.linalg.solve(np.eye(n) + n * lam * D.T @ D, y.values)
        worst = max(worst, float(np.max(np.abs(fit.beta - oracle))))
    elapsed = time.time() - t0
    ok = worst <= 1e-8 and elapsed < 30
    report(4, ok, f"worst deviation from dense solve={worst:.2e}", elapsed)
    assert worst <= 1e-8
    assert elapsed < 30


def test_criterion_05_l1_optimality(report):
    t0 = time.time()
    g = grid_graph(10, 10)
    rng = np.random.default_rng(6)

    worst_kkt, all_converged = 0.0, True
    for k in (0, 1):
        for lam in (0.05, 0.2, 1.0):
            for s in range(5):
                mu = generate_trend(g, k, 0.2, 3.0, seed=100 * k + s)
                y = NodeSignal(values=mu.values + rng.standard_normal(100))
                fit = solve_l1(g, y, k, lam)
                all_converged &= bool(fit.converged)
                worst_kkt = max(worst_kkt, fit.kkt_residual)
    kkt_ok = all_converged and worst_kkt < 1e-5

    y = NodeSignal(values=rng.standard_normal(100))
    identity_ok = bool(
        np.array_equal(solve_l1(g, y, 0, 0.0).beta, y.values)
    )

    g2 = Graph(node_count=6, edges=[(0, 1), (1, 2), (3, 4), (4, 5)])
    y2 = NodeSignal(values=np.array([1.0, 2.0, 3.0, 8.0, 9.0, 10.0]))
    fit2 = solve_l1(g2, y2, 0, 1e6)
    const_dev = max(
        float(np.max(np.abs(fit2.beta[comp] - np.mean(y2.values[comp]))))
        for comp in connected_components(g2)
    )
    const_ok = const_dev <= 1e-4
    elapsed = time.time() - t0
    ok = kkt_ok and identity_ok and const_ok and elapsed < 60
    report(
        5, ok,
        f"worst KKT={worst_kkt:.2e}, lam=0 exact={identity_ok}, "
        f"component-constant dev={const_dev:.2e}",
        elapsed,
    )
    assert kkt_ok
    assert identity_ok
    assert const_ok
    assert elapsed < 60


def test_criterion_06_pivot_normality_selected_eta(report):
    t0 = time.time()
    # small path so 1e4 independent select-then-pivot replicates stay cheap;
    # eta is the hat-matrix row of a basis selected from the fission copy,
    # so it depends on the data only through the selection stage
    g = Graph(node_count=8, edges=[(i, i + 1) for i in range(7)])
    mu = np.array([0.0, 0.0, 0.0, 0.0, 2.0, 2.0, 2.0, 2.0])
    sigma, sigma0, lam = 1.0, 0.7, 0.4
    rng = np.random.default_rng(7)
    pivots = np.empty(10_000)
    for r in range(10_000):
        y = NodeSignal(values=mu + sigma * rng.standard_normal(8))
        pair = fission_gaussian(y, sigma0, seed=rng.integers(2**32))
        fit = solve_l1(g, pair.y_sel, 0, lam, tol=1e-6, compute_kkt=False)
        eta = projection_matrix(construct_basis(fit, g))[2]
        pivots[r] = pivot(
            y, pair.y_sel, eta, sigma, sigma0, eta_mu=float(eta @ mu)
        )
    ks = kstest(pivots, norm.cdf).statistic
    elapsed = time.time() - t0
    ok = ks < 0.02 and elapsed < 60
    report(6, ok, f"KS distance={ks:.4f} over 10^4 pivots", elapsed)
    assert ks < 0.02
    assert elapsed < 60


def test_criterion_07_robust_coverage_beats_naive(report):
    t0 = time.time()
    cfg = SimConfig(
        rows=10, cols=10, k=1, sigma=1.0, alpha=0.1,
        trials=500, folds=5, lambda_grid_size=15, seed=17,
    )
    rows = run_ci_experiment(cfg)
    robust = np.mean([r["covered"] for r in rows if r["method"] == "robust"])
    naive = np.mean([r["covered"] for r in rows if r["method"] == "naive"])
    elapsed = time.time() - t0
    ok = robust >= 0.88 and naive < robust and elapsed < 600
    report(
        7, ok,
        f"robust coverage={robust:.3f}, naive coverage={naive:.3f}",
        elapsed,
    )
    assert robust >= 0.88
    assert naive < robust
    assert elapsed < 600


def test_criterion_08_collapse_identity(report):
    t0 = time.time()
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(3, 12))
        mu = rng.standard_normal(n) * 2.0
        sigma = float(rng.uniform(0.3, 2.0))
        sigma0 = float(rng.uniform(0.3, 2.0))
        alpha = float(rng.uniform(0.02, 0.3))
        y = NodeSignal(values=mu + sigma * rng.standard_normal(n))
        y_sel = NodeSignal(values=y.values + sigma0 * rng.standard_normal(n))
        eta = rng.standard_normal(n)
        bounds = SigmaBounds(sigma_low=sigma, sigma_high=sigma)
        iv = robust_ci(y, y_sel, eta, bounds, sigma0, alpha)
        lo, hi = naive_ci(y, y_sel, eta, sigma, sigma0, alpha)
        worst = max(worst, abs(iv.lower - lo), abs(iv.upper - hi))
    elapsed = time.time() - t0
    ok = worst <= 1e-12
    report(8, ok, f"worst collapse deviation={worst:.2e}", elapsed)
    assert worst <= 1e-12


def test_criterion_09_interval_length_limit(report):
    # Implemented faithfully against the stated limit formula.  The observed
    # center spread |A2 - A1| equals (sigma_high^2 - sigma_low^2)/sigma0^2
    # times |eta' z|, whose mean scales with ||eta||, while the stated limit
    # scales with eta' mu; for projection rows ||eta|| shrinks as the grid
    # grows, so the ratio does not approach 1.  This check is expected to
    # fail and is retained as an honest record of that gap.
    t0 = time.time()
    sigma, sigma0 = 1.0, 1.0
    ratios = {}
    for side in (10, 20, 30):
        g = grid_graph(side, side)
        n = g.node_count
        mu = np.where(np.arange(n) % side < side // 2, 1.0, 4.0)
        # fixed bounds converging to sigma as n grows
        delta = 1.0 / np.sqrt(n)
        bounds = SigmaBounds(
            sigma_low=float(np.sqrt(sigma**2 - delta)),
            sigma_high=float(np.sqrt(sigma**2 + delta)),
        )
        basis = construct_basis(mu, g, 0)
        eta = projection_matrix(basis)[0]
        eta_mu = float(eta @ mu)
        rng = np.random.default_rng(side)
        spreads = np.empty(300)
        for r in range(300):
            y = NodeSignal(values=mu + sigma * rng.standard_normal(n))
            y_sel = NodeSignal(
                values=y.values + sigma0 * rng.standard_normal(n)
            )
            iv = robust_ci(y, y_sel, eta, bounds, sigma0, 0.1)
            spreads[r] = iv.a2 - iv.a1
        limit = ci_length_limit(
            eta_mu, sigma, bounds.sigma_low, bounds.sigma_high, sigma0
        )
        ratios[n] = float(np.mean(spreads) / limit)
    final_dev = abs(ratios[900] - 1.0)
    elapsed = time.time() - t0
    ok = final_dev <= 0.10 and elapsed < 600
    report(
        9, ok,
        "mean|A2-A1| / limit by n: "
        + ", ".join(f"{n}: {r:.3f}" for n, r in ratios.items()),
        elapsed,
    )
    assert final_dev <= 0.10, (
        "empirical center spread does not approach the stated limit; see the "
        "printed ratios"
    )
    assert elapsed < 600


def test_criterion_10_poisson_pipeline_coverage(report):
    t0 = time.time()
    coverages = {}
    for k in (0, 1):
        cfg = SimConfig(
            rows=10, cols=10, k=k, alpha=0.2, trials=500,
            jump_size=1.0, seed=23 + k,
        )
        rows = run_poisson_experiment(cfg, theta_scales=[1.0])
        coverages[k] = float(np.mean([r["covered"] for r in rows]))
    cov_ok = all(c >= 0.78 for c in coverages.values())

    cfg_w = SimConfig(
        rows=10, cols=10, k=0, alpha=0.2, trials=150, jump_size=1.0, seed=29
    )
    rows_w = run_poisson_experiment(cfg_w, theta_scales=[0.5, 1.0, 1.5])
    widths = [
        float(np.mean([
            r["length"] for r in rows_w if r["theta_scale"] == s
        ]))
        for s in (0.5, 1.0, 1.5)
    ]
    width_ok = bool(np.all(np.diff(widths) >= 0))
    elapsed = time.time() - t0
    ok = cov_ok and width_ok and elapsed < 600
    report(
        10, ok,
        f"coverage k=0: {coverages[0]:.3f}, k=1: {coverages[1]:.3f}; "
        f"widths by theta scale: {np.round(widths, 3).tolist()}",
        elapsed,
    )
    assert cov_ok
    assert width_ok
    assert elapsed < 600


def test_criterion_11_cv_direction(report):
    t0 = time.time()

    def one_se_means(jump, active, seed):
        cfg = SimConfig(
            rows=10, cols=10, k=0, trials=100, folds=5,
            lambda_grid_size=15, seed=seed,
        )
        rows = run_cv_experiment(
            cfg, jump_sizes=[jump], active_fractions=[active]
        )
        out = {}
        for method in ("graph_cv", "ordinary_cv"):
            out[method] = float(np.mean([
                r["oracle_risk"] for r in rows
                if r["method"] == method and r["rule"] == "one_se"
            ]))
        return out

    strong = one_se_means(4.0, 0.2, 31)
    weak = one_se_means(0.5, 0.02, 37)
    direction_ok = strong["graph_cv"] <= strong["ordinary_cv"]
    rel = abs(weak["graph_cv"] - weak["ordinary_cv"]) / max(
        weak["ordinary_cv"], 1e-12
    )
    agree_ok = rel <= 0.20
    elapsed = time.time() - t0
    ok = direction_ok and agree_ok and elapsed < 600
    report(
        11, ok,
        f"jump 4: graph {strong['graph_cv']:.3f} vs ordinary "
        f"{strong['ordinary_cv']:.3f}; jump 0.5 rel gap={rel:.3f}",
        elapsed,
    )
    assert direction_ok
    assert agree_ok
    assert elapsed < 600


def test_criterion_12_error_law_robustness(report):
    t0 = time.time()
    cfg = SimConfig(
        rows=10, cols=10, k=0, trials=15, folds=5,
        lambda_grid_size=15, jump_size=2.0, seed=41,
    )
    curves = cv_error_curves(cfg)
    base = curves["gaussian"]
    worst = 0.0
    for dist in ("laplace", "student_t", "skew_normal"):
        rel = np.max(np.abs(curves[dist] - base) / np.abs(base))
        worst = max(worst, float(rel))
    elapsed = time.time() - t0
    ok = worst <= 0.15 and elapsed < 600
    report(
        12, ok, f"worst pointwise relative deviation={worst:.3f}", elapsed
    )
    assert worst <= 0.15
    assert elapsed < 600
