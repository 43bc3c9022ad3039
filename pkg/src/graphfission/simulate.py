"""Experiment harness: synthetic trends, error laws, and coverage/risk sweeps.

Everything is deterministic under the configured seed: per-trial generators
are spawned from one seed sequence, so trial order and parallelism cannot
change results.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .basis import projection_matrix
from .cv import default_lambda_grid, estimate_sigma_fixed_lambda, graph_cv, ordinary_cv
from .graphs import Graph, NodeSignal, connected_components, grid_graph
from .inference import (
    _recipe_selection,
    poisson_ci_pipeline,
    poisson_projection_parameter,
    robust_ci_all,
)
from .solvers import solve_l1
from .thinning import fission_gaussian

ERROR_DISTS = ("gaussian", "laplace", "skew_normal", "student_t")


@dataclass(frozen=True)
class SimConfig:
    """Configuration shared by the simulation experiments."""

    rows: int = 10
    cols: int = 10
    k: int = 0
    penalty_form: str = "l1"
    active_fraction: float = 0.2
    jump_size: float = 2.0
    sigma: float = 1.0
    error_dist: str = "gaussian"
    trials: int = 100
    folds: int = 10
    alpha: float = 0.1
    seed: int = 0
    theta_scale: float = 1.0
    lambda_grid_size: int = 20

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0.0 <= self.active_fraction <= 1.0:
            raise ValueError("active_fraction must be in [0, 1]")
        if self.error_dist not in ERROR_DISTS:
            raise ValueError(f"unknown error_dist {self.error_dist!r}")

    @classmethod
    def from_json(cls, path) -> "SimConfig":
        with open(path) as fh:
            return cls(**json.load(fh))

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=2)

    def graph(self) -> Graph:
        return grid_graph(self.rows, self.cols)


def sample_errors(dist: str, size: int, rng) -> np.ndarray:
    """Draw errors standardized to mean 0 and unit variance."""
    if dist == "gaussian":
        return rng.standard_normal(size)
    if dist == "laplace":
        return rng.laplace(0.0, 1.0 / np.sqrt(2.0), size)
    if dist == "student_t":
        # t with 5 dof has variance 5/3
        return rng.standard_t(5, size) / np.sqrt(5.0 / 3.0)
    if dist == "skew_normal":
        # shape 5, scale 1, via the two-normal representation, then
        # standardized with the closed-form mean and variance
        a = 5.0
        delta = a / np.sqrt(1.0 + a**2)
        z0 = rng.standard_normal(size)
        z1 = rng.standard_normal(size)
        x = delta * np.abs(z0) + np.sqrt(1.0 - delta**2) * z1
        mean = delta * np.sqrt(2.0 / np.pi)
        var = 1.0 - 2.0 * delta**2 / np.pi
        return (x - mean) / np.sqrt(var)
    raise ValueError(f"unknown error distribution {dist!r}")


def _monomial_exponents(dim: int, degree: int):
    if dim == 1:
        return [(d,) for d in range(degree + 1)]
    out = []
    for d in range(degree + 1):
        for rest in _monomial_exponents(dim - 1, degree - d):
            out.append((d,) + rest)
    return out


def generate_trend(
    graph: Graph, k: int, active_fraction: float, jump_size: float, seed=None
) -> NodeSignal:
    """Piecewise-polynomial ground truth trend over the graph.

    A random node subset is marked active; the inactive induced subgraph's
    components each receive a degree-``k`` polynomial in the (rescaled) node
    coordinates with coefficients uniform in ``[-jump_size, jump_size]``;
    active nodes get free uniform levels in the same range.
    """
    if graph.coords is None:
        raise ValueError("trend generation needs node coordinates")
    rng = np.random.default_rng(seed)
    n = graph.node_count
    coords = graph.coords
    # rescale each coordinate to [0, 1] so higher-degree terms stay bounded
    span = coords.max(axis=0) - coords.min(axis=0)
    span[span == 0] = 1.0
    x = (coords - coords.min(axis=0)) / span

    n_active = math.ceil(active_fraction * n)
    active = rng.choice(n, size=n_active, replace=False) if n_active else np.empty(0, int)
    mu = np.zeros(n)
    exps = _monomial_exponents(x.shape[1], k)
    for comp in connected_components(graph, removed_nodes=active):
        coefs = rng.uniform(-jump_size, jump_size, size=len(exps))
        vals = np.zeros(len(comp))
        for c, e in zip(coefs, exps):
            vals += c * np.prod(x[comp] ** np.asarray(e), axis=1)
        mu[comp] = vals
    mu[active] = rng.uniform(-jump_size, jump_size, size=n_active)
    return NodeSignal(values=mu)


def _spawn(seed, n):
    return np.random.SeedSequence(seed).spawn(n)


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------

def run_cv_experiment(
    config: SimConfig,
    jump_sizes=None,
    active_fractions=None,
) -> list[dict]:
    """Risk of CV-selected penalties: graph CV vs the node-holdout baseline.

    Sweeps jump sizes and active fractions; for each trial both methods pick
    a penalty (min rule and one-SE rule), the trend is refit on the full
    signal, and the oracle risk against the known truth is recorded.
    """
    graph = config.graph()
    n = graph.node_count
    grid = default_lambda_grid(n, num=config.lambda_grid_size)
    jumps = list(jump_sizes) if jump_sizes is not None else [config.jump_size]
    actives = (
        list(active_fractions) if active_fractions is not None
        else [config.active_fraction]
    )
    rows = []
    cells = [(j, a) for j in jumps for a in actives]
    cell_seeds = _spawn(config.seed, len(cells))
    for (jump, active), cell_seed in zip(cells, cell_seeds):
        for trial, tseed in enumerate(cell_seed.spawn(config.trials)):
            s_mu, s_err, s_cv, s_ocv = tseed.spawn(4)
            mu = generate_trend(graph, config.k, active, jump, seed=s_mu)
            err = sample_errors(config.error_dist, n, np.random.default_rng(s_err))
            y = NodeSignal(values=mu.values + config.sigma * err)
            reports = {
                "graph_cv": graph_cv(
                    graph, y, "gaussian", config.folds, config.k,
                    penalty_form=config.penalty_form, lambda_grid=grid,
                    seed=s_cv, sigma=config.sigma,
                ),
                "ordinary_cv": ordinary_cv(
                    graph, y, config.folds, config.k,
                    penalty_form=config.penalty_form, lambda_grid=grid,
                    seed=s_ocv,
                ),
            }
            for method, rep in reports.items():
                for rule, lam in (
                    ("min", rep.lambda_min), ("one_se", rep.lambda_1se)
                ):
                    fit = solve_l1(
                        graph, y, config.k, lam, tol=1e-5, compute_kkt=False
                    )
                    risk = float(np.mean((fit.beta - mu.values) ** 2))
                    rows.append({
                        "jump": jump,
                        "active_fraction": active,
                        "error_dist": config.error_dist,
                        "trial": trial,
                        "method": method,
                        "rule": rule,
                        "lambda": float(lam),
                        "oracle_risk": risk,
                        "df": fit.df,
                    })
    return rows


def cv_error_curves(config: SimConfig, dists=ERROR_DISTS) -> dict:
    """Mean graph-CV error curve per error law, on a shared penalty grid.

    Trends and seeds are matched across the laws so curve differences isolate
    the error distribution.
    """
    graph = config.graph()
    n = graph.node_count
    grid = default_lambda_grid(n, num=config.lambda_grid_size)
    curves = {dist: np.zeros(len(grid)) for dist in dists}
    for tseed in _spawn(config.seed, config.trials):
        s_mu, s_err, s_cv = tseed.spawn(3)
        mu = generate_trend(
            graph, config.k, config.active_fraction, config.jump_size, seed=s_mu
        )
        for dist in dists:
            err = sample_errors(dist, n, np.random.default_rng(s_err))
            y = NodeSignal(values=mu.values + config.sigma * err)
            rep = graph_cv(
                graph, y, "gaussian", config.folds, config.k,
                penalty_form=config.penalty_form, lambda_grid=grid,
                seed=s_cv, sigma=config.sigma,
            )
            curves[dist] += rep.mean_error
    return {
        "lambda_grid": grid,
        **{d: c / config.trials for d, c in curves.items()},
    }


def run_ci_experiment(config: SimConfig) -> list[dict]:
    """Coverage/length of robust vs naive intervals under Gaussian fission."""
    graph = config.graph()
    n = graph.node_count
    grid = default_lambda_grid(n, num=config.lambda_grid_size)
    rows = []
    from scipy.stats import norm as ndist

    z = float(ndist.ppf(1.0 - config.alpha / 2.0))
    for trial, tseed in enumerate(_spawn(config.seed, config.trials)):
        s_mu, s_err, s_fis, s_cv = tseed.spawn(4)
        mu = generate_trend(
            graph, config.k, config.active_fraction, config.jump_size, seed=s_mu
        )
        err = sample_errors(config.error_dist, n, np.random.default_rng(s_err))
        y = NodeSignal(values=mu.values + config.sigma * err)
        sigma0 = estimate_sigma_fixed_lambda(graph, y, config.k)
        pair = fission_gaussian(y, sigma0, seed=s_fis)
        sel = _recipe_selection(
            graph, y, pair.y_sel, sigma0, config.k,
            m=config.folds, lambda_grid=grid, seed=s_cv,
        )
        bounds = sel.bounds
        hat = projection_matrix(sel.basis)
        targets = hat @ mu.values
        norms = np.sqrt(np.maximum(np.einsum("ij,ij->i", hat, hat), 0.0))
        _, _, lo_r, hi_r = robust_ci_all(
            y, pair.y_sel, hat, bounds, sigma0, config.alpha
        )
        # naive intervals plug in the anti-conservative estimate
        s_lo = max(bounds.sigma_low, 1e-8)
        tau_n = s_lo**2 / (s_lo**2 + sigma0**2)
        centers = (hat @ y.values - tau_n * (hat @ pair.y_sel.values)) / (1 - tau_n)
        half_n = z * s_lo * norms / np.sqrt(1.0 - tau_n)
        for name, lo, hi in (
            ("robust", lo_r, hi_r),
            ("naive", centers - half_n, centers + half_n),
        ):
            covered = (lo <= targets) & (targets <= hi)
            for j in range(n):
                rows.append({
                    "trial": trial,
                    "coord": j,
                    "method": name,
                    "covered": int(covered[j]),
                    "length": float(hi[j] - lo[j]),
                    "target": float(targets[j]),
                    "sigma_low": bounds.sigma_low,
                    "sigma_high": bounds.sigma_high,
                })
    return rows


def run_poisson_experiment(config: SimConfig, theta_scales=None) -> list[dict]:
    """Coverage/length of the Poisson thin-select-refit sandwich intervals."""
    graph = config.graph()
    n = graph.node_count
    scales = list(theta_scales) if theta_scales is not None else [config.theta_scale]
    lam = float(np.sqrt(np.log(n) / n))
    rows = []
    scale_seeds = _spawn(config.seed, len(scales))
    for scale, sseed in zip(scales, scale_seeds):
        for trial, tseed in enumerate(sseed.spawn(config.trials)):
            s_mu, s_y, s_thin = tseed.spawn(3)
            base = generate_trend(
                graph, config.k, config.active_fraction, 1.0, seed=s_mu
            )
            theta = 2.0 + scale * base.values
            rates = np.exp(theta)
            counts = np.random.default_rng(s_y).poisson(rates)
            y = NodeSignal(values=counts.astype(float), kind="count")
            res = poisson_ci_pipeline(
                graph, y, config.k, lam, config.alpha, seed=s_thin
            )
            gamma_star = poisson_projection_parameter(
                res.basis, rates / 2.0, tau=0.5
            )
            covered = (res.lower <= gamma_star) & (gamma_star <= res.upper)
            for j in range(len(gamma_star)):
                rows.append({
                    "theta_scale": scale,
                    "k": config.k,
                    "trial": trial,
                    "coord": j,
                    "covered": int(covered[j]),
                    "length": float(res.upper[j] - res.lower[j]),
                })
    return rows


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

def write_rows_csv(rows: list[dict], path) -> None:
    if not rows:
        raise ValueError("no rows to write")
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


def emit_plotdata(csv_path, out_dir, svg: bool = False) -> list[str]:
    """Aggregate an experiment CSV into gnuplot-style .dat files.

    Rows are grouped by their non-numeric columns; each group file holds the
    mean of every numeric column.  Optionally also renders a simple SVG.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(csv_path) as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    if not rows:
        raise ValueError(f"{csv_path}: empty experiment CSV")

    def is_number(s):
        try:
            float(s)
            return True
        except ValueError:
            return False

    cols = list(rows[0].keys())
    tag_cols = [c for c in cols if not all(is_number(r[c]) for r in rows)]
    num_cols = [c for c in cols if c not in tag_cols and c not in ("trial", "coord")]
    groups: dict[tuple, list] = {}
    for r in rows:
        key = tuple(r[c] for c in tag_cols)
        groups.setdefault(key, []).append(r)

    stem = Path(csv_path).stem
    out_path = out_dir / f"{stem}_summary.dat"
    written = [str(out_path)]
    with open(out_path, "w") as fh:
        fh.write("# " + " ".join(tag_cols + [f"mean_{c}" for c in num_cols]) + "\n")
        for key in sorted(groups):
            grp = groups[key]
            means = [
                sum(float(r[c]) for r in grp) / len(grp) for c in num_cols
            ]
            fh.write(
                " ".join(list(key) + [f"{v:.6g}" for v in means]) + "\n"
            )
    if svg:
        try:
            import matplotlib

            matplotlib.use("Agg")
            import matplotlib.pyplot as plt
        except ImportError:
            return written
        fig, ax = plt.subplots()
        keys = sorted(groups)
        for ci, c in enumerate(num_cols):
            vals = [
                sum(float(r[c]) for r in groups[k]) / len(groups[k]) for k in keys
            ]
            ax.plot(range(len(keys)), vals, marker="o", label=f"mean {c}")
        ax.set_xticks(range(len(keys)))
        ax.set_xticklabels(["/".join(k) for k in keys], rotation=45, ha="right")
        ax.legend()
        fig.tight_layout()
        svg_path = out_dir / f"{stem}_summary.svg"
        fig.savefig(svg_path)
        plt.close(fig)
        written.append(str(svg_path))
    return written
