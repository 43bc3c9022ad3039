"""Command-line interface: thin, tf, cv, ci, and simulate subcommands."""

from __future__ import annotations

import argparse
import json
from pathlib import Path

from .basis import construct_basis, projection_matrix
from .cv import default_lambda_grid, estimate_sigma_fixed_lambda, graph_cv, ordinary_cv
from .graphs import Graph, NodeSignal, grid_graph, read_graph, read_signal, write_signal
from .inference import _recipe_selection, robust_ci_all
from .simulate import (
    SimConfig,
    emit_plotdata,
    run_ci_experiment,
    run_cv_experiment,
    run_poisson_experiment,
    write_rows_csv,
)
from .solvers import solve_elastic, solve_l1, solve_l2, solve_poisson_l1
from .thinning import fission_gaussian, thin_gaussian, thin_poisson


def _add_graph_args(p):
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--graph", help="edge list file")
    g.add_argument("--grid", metavar="ROWSxCOLS", help="grid graph, e.g. 10x10")
    p.add_argument("--signal", required=True, help="signal file (CSV or one per line)")


def _load_graph(args) -> Graph:
    if args.grid:
        rows, cols = (int(v) for v in args.grid.lower().split("x"))
        return grid_graph(rows, cols)
    return read_graph(args.graph)


def _load_signal(args, graph, kind="continuous") -> NodeSignal:
    return read_signal(args.signal, kind=kind, node_count=graph.node_count)


def _cmd_thin(args):
    graph = _load_graph(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.family == "gaussian":
        y = _load_signal(args, graph)
        if args.sigma0 is not None:
            pair = fission_gaussian(y, args.sigma0, seed=args.seed)
            write_signal(pair.y_sel, out / "copy_sel.csv")
            write_signal(pair.y_inf, out / "copy_inf.csv")
            manifest = {
                "family": "gaussian_fission",
                "sigma0": args.sigma0,
                "files": ["copy_sel.csv", "copy_inf.csv"],
            }
        else:
            if args.sigma is None:
                raise SystemExit("gaussian thinning needs --sigma (or --sigma0)")
            fam = thin_gaussian(y, args.sigma, args.m, seed=args.seed)
            files = []
            for j, c in enumerate(fam.copies):
                name = f"copy_{j}.csv"
                write_signal(c, out / name)
                files.append(name)
            manifest = {
                "family": fam.family,
                "weights": fam.weights.tolist(),
                "recombine": fam.recombine,
                "files": files,
            }
    else:
        y = _load_signal(args, graph, kind="count")
        fam = thin_poisson(y, args.m, seed=args.seed)
        files = []
        for j, c in enumerate(fam.copies):
            name = f"copy_{j}.csv"
            write_signal(c, out / name)
            files.append(name)
        manifest = {
            "family": fam.family,
            "weights": fam.weights.tolist(),
            "recombine": fam.recombine,
            "files": files,
        }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
    print(f"wrote {len(manifest['files'])} copies to {out}")


def _cmd_tf(args):
    graph = _load_graph(args)
    kind = "count" if args.loss == "poisson" else "continuous"
    y = _load_signal(args, graph, kind=kind)
    if args.loss == "poisson":
        fit = solve_poisson_l1(graph, y, args.k, args.lam, tol=args.tol)
    elif args.penalty == "l1":
        fit = solve_l1(graph, y, args.k, args.lam, tol=args.tol)
    elif args.penalty == "l2":
        fit = solve_l2(graph, y, args.k, args.lam)
    else:
        fit = solve_elastic(graph, y, args.k, args.lam, args.lam2, tol=args.tol)
    write_signal(NodeSignal(values=fit.beta), args.out)
    diag = {
        "iterations": int(fit.iterations),
        "kkt_residual": float(fit.kkt_residual),
        "df": int(fit.df),
        "objective": float(fit.objective),
        "converged": bool(fit.converged),
    }
    with open(str(args.out) + ".json", "w") as fh:
        json.dump(diag, fh, indent=2)
    print(json.dumps(diag))


def _cmd_cv(args):
    graph = _load_graph(args)
    kind = "count" if args.family == "poisson" else "continuous"
    y = _load_signal(args, graph, kind=kind)
    grid = default_lambda_grid(graph.node_count, num=args.grid_size)
    if args.method == "graph":
        rep = graph_cv(
            graph, y, args.family, args.m, args.k,
            penalty_form=args.penalty, lambda_grid=grid,
            seed=args.seed, sigma=args.sigma,
        )
    else:
        rep = ordinary_cv(
            graph, y, args.m, args.k,
            penalty_form=args.penalty, lambda_grid=grid, seed=args.seed,
        )
    with open(args.out, "w") as fh:
        fh.write("lambda,fold,error\n")
        for j in range(rep.fold_errors.shape[0]):
            for gi, lam in enumerate(rep.lambda_grid):
                fh.write(f"{float(lam)!r},{j},{float(rep.fold_errors[j, gi])!r}\n")
    summary = {
        "lambda_min": rep.lambda_min,
        "lambda_1se": rep.lambda_1se,
        "sigma_hat": rep.sigma_hat,
    }
    with open(str(args.out) + ".json", "w") as fh:
        json.dump(summary, fh, indent=2)
    print(json.dumps(summary))


def _cmd_ci(args):
    graph = _load_graph(args)
    y = _load_signal(args, graph)
    if args.sigma0 == "auto":
        sigma0 = estimate_sigma_fixed_lambda(graph, y, args.k)
    else:
        sigma0 = float(args.sigma0)
    pair = fission_gaussian(y, sigma0, seed=args.seed)
    sel = _recipe_selection(
        graph, y, pair.y_sel, sigma0, args.k, mode=args.bounds, seed=args.seed
    )
    if args.bounds == "fallback":
        # fallback mode carries no selection fit; select on the fly
        rep = graph_cv(graph, pair.y_sel, "gaussian", 5, args.k, seed=args.seed)
        fit = solve_l1(graph, pair.y_sel, args.k, rep.lambda_1se, compute_kkt=False)
        basis = construct_basis(fit, graph, args.k)
    else:
        basis = sel.basis
    hat = projection_matrix(basis)
    _, _, lower, upper = robust_ci_all(
        y, pair.y_sel, hat, sel.bounds, sigma0, args.alpha
    )
    fitted = hat @ y.values
    with open(args.out, "w") as fh:
        fh.write("node,fitted,lower,upper\n")
        for i in range(graph.node_count):
            fh.write(
                f"{i},{float(fitted[i])!r},{float(lower[i])!r},{float(upper[i])!r}\n"
            )
    tau_low, tau_high = sel.bounds.taus(sigma0)
    summary = {
        "sigma_low": sel.bounds.sigma_low,
        "sigma_high": sel.bounds.sigma_high,
        "sigma0": sigma0,
        "tau_low": tau_low,
        "tau_high": tau_high,
        "alpha": args.alpha,
    }
    with open(str(args.out) + ".json", "w") as fh:
        json.dump(summary, fh, indent=2)
    print(json.dumps(summary))


def _cmd_simulate(args):
    config = SimConfig.from_json(args.config) if args.config else SimConfig()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.experiment == "cv":
        rows = run_cv_experiment(config)
    elif args.experiment == "ci":
        rows = run_ci_experiment(config)
    else:
        rows = run_poisson_experiment(config)
    csv_path = out / f"{args.experiment}_experiment.csv"
    write_rows_csv(rows, csv_path)
    files = emit_plotdata(csv_path, out, svg=args.svg)
    summary = {"rows": len(rows), "csv": str(csv_path), "plotdata": files}
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
    print(json.dumps(summary))


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="graphfission",
        description="Thin graph signals, fit trends, tune by graph CV, "
        "and build post-selection confidence intervals.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("thin", help="split a signal into synthetic copies")
    _add_graph_args(p)
    p.add_argument("--family", choices=["gaussian", "poisson"], required=True)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--sigma0", type=float, default=None,
                   help="use additive fission instead of m-way thinning")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="thinned")
    p.set_defaults(func=_cmd_thin)

    p = sub.add_parser("tf", help="fit a penalized structural trend")
    _add_graph_args(p)
    p.add_argument("--k", type=int, default=0)
    p.add_argument("--penalty", choices=["l1", "l2", "elastic"], default="l1")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--lambda2", dest="lam2", type=float, default=0.0)
    p.add_argument("--loss", choices=["square", "poisson"], default="square")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--out", default="trend.csv")
    p.set_defaults(func=_cmd_tf)

    p = sub.add_parser("cv", help="cross-validate the penalty weight")
    _add_graph_args(p)
    p.add_argument("--method", choices=["graph", "ordinary"], default="graph")
    p.add_argument("--family", choices=["gaussian", "poisson"], default="gaussian")
    p.add_argument("--m", type=int, default=10)
    p.add_argument("--k", type=int, default=0)
    p.add_argument("--penalty", choices=["l1", "l2", "elastic"], default="l1")
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--grid-size", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="cv_report.csv")
    p.set_defaults(func=_cmd_cv)

    p = sub.add_parser("ci", help="post-selection confidence intervals")
    _add_graph_args(p)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--k", type=int, default=0)
    p.add_argument("--sigma0", default="auto")
    p.add_argument("--bounds", choices=["recipe", "fallback"], default="recipe")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="intervals.csv")
    p.set_defaults(func=_cmd_ci)

    p = sub.add_parser("simulate", help="run a simulation experiment")
    p.add_argument("--experiment", choices=["cv", "ci", "poisson"], required=True)
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--out", default="simout")
    p.add_argument("--svg", action="store_true")
    p.set_defaults(func=_cmd_simulate)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    args.func(args)


if __name__ == "__main__":
    main()
