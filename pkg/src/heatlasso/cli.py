"""Command-line interface.

Subcommands: simulate, fit, cv, estimate-graph, levelset, verify.
Exit codes: 0 success, 1 usage/config error, 2 numerical failure.
"""

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import __version__
from .diagnostics import verify_spectral_bounds
from .errors import HeatLassoError, NonFiniteObjective
from .experiments import (
    _derived_seed,
    _estimated_graph,
    fit_with_config,
    run_experiment,
)
from .figures import write_levelset_svg
from .graphs import Graph, read_graph, write_graph
from .heatflow import (
    exact_heat_kernel,
    heatflow_apply,
    load_heatflow,
    save_heatflow,
    simulate_heat_flow,
)
from .optimize import threshold_kmeans


class CliError(Exception):
    """Usage or input-format error; maps to exit code 1."""


def read_dataset_csv(path):
    """Header row, first column the response y, remaining columns X."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or len(header) < 2:
                raise CliError(f"{path}: need a header row with y plus at "
                               f"least one covariate column")
            rows = []
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != len(header):
                    raise CliError(f"{path}: row {lineno} has {len(row)} "
                                   f"fields, header has {len(header)}")
                try:
                    rows.append([float(v) for v in row])
                except ValueError as exc:
                    raise CliError(f"{path}: row {lineno}: {exc}") from exc
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}") from exc
    if len(rows) < 2:
        raise CliError(f"{path}: need at least 2 data rows, got {len(rows)}")
    data = np.asarray(rows, dtype=np.float64)
    return data[:, 0], data[:, 1:]


def _fit_section_from_args(args):
    section = {}
    for attr, key in (("lam", "lam"), ("t", "t"), ("walks", "B"),
                      ("alpha0", "alpha0"), ("rate", "rate_protocol"),
                      ("eps_tol", "eps_tol"), ("max_iters", "max_iters"),
                      ("block_size", "block_size")):
        value = getattr(args, attr, None)
        if value is not None:
            section[key] = value
    section["loss"] = {"squared": "squared_error",
                       "logistic": "logistic"}[args.loss]
    return section


def _graph_for_fit(args, X):
    if args.graph and args.estimate_graph is not None:
        raise CliError("give either a graph file or --estimate-graph, not both")
    if args.graph:
        try:
            return read_graph(args.graph)
        except (OSError, ValueError) as exc:
            raise CliError(f"cannot load graph {args.graph}: {exc}") from exc
    alpha = 0.75 if args.estimate_graph is None else args.estimate_graph
    return _estimated_graph(X, alpha)


def _write_fit_outputs(out_dir, name, result, lam, t, graph_edges):
    os.makedirs(out_dir, exist_ok=True)
    fit_path = os.path.join(out_dir, f"{name}.json")
    with open(fit_path, "w", encoding="utf-8") as fh:
        fh.write(result.to_json())
    beta_path = os.path.join(out_dir, f"{name}_beta.csv")
    with open(beta_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["beta_thresholded"])
        for v in result.beta_thresholded:
            writer.writerow([repr(float(v))])
    manifest = {
        "version": __version__,
        "lam": lam, "t": t,
        "graph_edges": graph_edges,
        "iterations": result.iterations,
        "converged": result.converged,
    }
    with open(os.path.join(out_dir, f"{name}_manifest.json"), "w",
              encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
    return fit_path


def cmd_simulate(args):
    try:
        with open(args.config, encoding="utf-8") as fh:
            config = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot load config {args.config}: {exc}") from exc
    if "config" in config and "config_hash" in config:
        config = config["config"]  # a manifest was passed; re-run it
    if args.seed is not None:
        config.setdefault("design", {})["seed"] = args.seed
    out_dir = args.out or config.get("output", "out")
    summary = run_experiment(config, out_dir, threads=args.threads)
    for name, metrics in summary.items():
        print(f"{name}: prediction={metrics.prediction_error:.4f} "
              f"estimation={metrics.estimation_error:.4f} "
              f"sensitivity={metrics.sensitivity:.3f} "
              f"specificity={metrics.specificity:.3f}")
    print(f"outputs in {out_dir}")
    return 0


def cmd_fit(args):
    y, X = read_dataset_csv(args.data)
    g = _graph_for_fit(args, X)
    section = _fit_section_from_args(args)
    flow = None
    if args.flow and os.path.exists(args.flow):
        flow = load_heatflow(args.flow)
        if flow.p != X.shape[1]:
            raise CliError(f"{args.flow}: walk table is for p={flow.p}, "
                           f"data has p={X.shape[1]}")
    result, lam, t, _ = fit_with_config(X, y, g, section, args.seed,
                                        args.optimizer, flow=flow)
    if args.flow and flow is None:
        # store the table this fit used so later invocations can reuse it
        rebuilt = simulate_heat_flow(g, t, section.get("B", 100),
                                     seed=_derived_seed(args.seed, 0x4EA7))
        save_heatflow(rebuilt, args.flow)
    out_dir = args.out or "."
    fit_path = _write_fit_outputs(out_dir, f"fit_{args.optimizer}", result,
                                  lam, t, g.edge_count)
    print(f"fit written to {fit_path} ({result.iterations} iterations, "
          f"converged={result.converged})")
    return 0


def cmd_cv(args):
    y, X = read_dataset_csv(args.data)
    g = _graph_for_fit(args, X)
    section = _fit_section_from_args(args)
    section["cv"] = {
        "lambda_grid": [float(v) for v in args.lambdas.split(",")],
        "t_grid": [float(v) for v in args.ts.split(",")],
        "folds": args.folds,
    }
    result, lam, t, table = fit_with_config(X, y, g, section, args.seed,
                                            args.optimizer)
    out_dir = args.out or "."
    os.makedirs(out_dir, exist_ok=True)
    cv_path = os.path.join(out_dir, "cv.json")
    with open(cv_path, "w", encoding="utf-8") as fh:
        json.dump({"best_lam": lam, "best_t": t, "table": table}, fh, indent=2)
    _write_fit_outputs(out_dir, f"cv_fit_{args.optimizer}", result, lam, t,
                       g.edge_count)
    print(f"best lam={lam:g} t={t:g}; table in {cv_path}")
    return 0


def cmd_estimate_graph(args):
    if args.corr:
        from .graphs import estimate_graph, read_correlation_csv
        corr = read_correlation_csv(args.corr)
        g = estimate_graph(corr, args.alpha)
    elif args.data:
        _, X = read_dataset_csv(args.data)
        g = _estimated_graph(X, args.alpha)
    else:
        raise CliError("give a dataset CSV or --corr matrix")
    write_graph(g, args.out)
    print(f"estimated graph: {g.p} vertices, {g.edge_count} edges -> {args.out}")
    return 0


def cmd_levelset(args):
    t_values = [float(v) for v in args.t.split(",")]
    if any(v < 0 for v in t_values):
        raise CliError("levelset flow times must be >= 0")
    write_levelset_svg(t_values, args.out, grid_n=args.grid)
    print(f"level-set montage with {len(t_values)} panels -> {args.out}")
    return 0


def cmd_verify(args):
    """Quick diagnostics battery; exit 0 only if every check passes."""
    rng = np.random.default_rng(args.seed)
    failures = 0

    def report(name, ok, detail=""):
        nonlocal failures
        print(f"[{'PASS' if ok else 'FAIL'}] {name}" + (f" ({detail})" if detail else ""))
        failures += 0 if ok else 1

    # spectral bounds on random graphs
    bad = 0
    for _ in range(20):
        p = int(rng.integers(2, 11))
        mask = rng.random((p, p)) < 0.4
        edges = [(i, j) for i in range(p) for j in range(i + 1, p) if mask[i, j]]
        rep = verify_spectral_bounds(Graph(p, edges=edges))
        bad += 0 if rep.all_ok else 1
    report("spectral bounds on 20 random graphs", bad == 0, f"{bad} failures")

    # Monte Carlo semigroup fidelity on a few small graphs
    worst = 0.0
    for trial in range(5):
        p = int(rng.integers(3, 9))
        mask = rng.random((p, p)) < 0.5
        edges = [(i, j) for i in range(p) for j in range(i + 1, p) if mask[i, j]]
        g = Graph(p, edges=edges)
        f = rng.random(p)
        H = simulate_heat_flow(g, 0.5, B=4000, seed=int(rng.integers(2 ** 31)))
        err = np.abs(heatflow_apply(H, f) - exact_heat_kernel(g, 0.5) @ f).max()
        worst = max(worst, err)
    report("semigroup fidelity (B=4000, 5 graphs)", worst < 0.05,
           f"max err {worst:.4f}")

    # thresholding is sane on a known vector
    thr = threshold_kmeans(np.array([0.6, 0.01, -0.55, 0.02]))
    report("2-means thresholding", np.array_equal(thr, [0.6, 0.0, -0.55, 0.0]))

    return 0 if failures == 0 else 2


def build_parser():
    parser = argparse.ArgumentParser(
        prog="heatlasso",
        description="Latent-group-sparse regression via a heat-flow penalty "
                    "computed by random walks on a variable graph.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a synthetic experiment config")
    sim.add_argument("--config", required=True, help="config (or manifest) JSON")
    sim.add_argument("--out", help="output directory (overrides config)")
    sim.add_argument("--seed", type=int, help="override design seed")
    sim.add_argument("--threads", type=int, default=1)
    sim.set_defaults(func=cmd_simulate)

    def add_fit_flags(p):
        p.add_argument("data", help="CSV: header row, first column y")
        p.add_argument("--graph", help="edge-list graph file")
        p.add_argument("--estimate-graph", type=float, metavar="ALPHA",
                       nargs="?", const=0.75, default=None,
                       help="estimate the graph from |corr| at this quantile")
        p.add_argument("--lambda", dest="lam", type=float, help="penalty weight")
        p.add_argument("--t", type=float, help="flow time")
        p.add_argument("--walks", type=int, help="walks per vertex (B)")
        p.add_argument("--alpha0", type=float, help="base learning rate")
        p.add_argument("--rate", choices=("constant", "inv_sqrt"))
        p.add_argument("--eps-tol", dest="eps_tol", type=float)
        p.add_argument("--max-iters", dest="max_iters", type=int)
        p.add_argument("--block-size", dest="block_size", type=int)
        p.add_argument("--loss", choices=("squared", "logistic"),
                       default="squared")
        p.add_argument("--optimizer", choices=("sd", "cd"), default="sd")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", help="output directory")

    fit = sub.add_parser("fit", help="fit one dataset")
    add_fit_flags(fit)
    fit.add_argument("--flow", metavar="PATH",
                     help="walk-table file: reuse it if present, else save "
                          "the simulated one there")
    fit.set_defaults(func=cmd_fit)

    cv = sub.add_parser("cv", help="cross-validate (lambda, t) then refit")
    add_fit_flags(cv)
    cv.add_argument("--lambdas", required=True, help="comma-separated grid")
    cv.add_argument("--ts", required=True, help="comma-separated grid")
    cv.add_argument("--folds", type=int, default=5)
    cv.set_defaults(func=cmd_cv)

    est = sub.add_parser("estimate-graph", help="threshold a correlation matrix")
    est.add_argument("data", nargs="?", help="dataset CSV (y column ignored)")
    est.add_argument("--corr", help="read a dense correlation CSV instead")
    est.add_argument("--alpha", type=float, default=0.75)
    est.add_argument("--out", required=True, help="output graph file")
    est.set_defaults(func=cmd_estimate_graph)

    lvl = sub.add_parser("levelset", help="render penalty unit-ball panels")
    lvl.add_argument("--t", required=True, help="comma-separated flow times")
    lvl.add_argument("--out", required=True, help="output SVG path")
    lvl.add_argument("--grid", type=int, default=201)
    lvl.set_defaults(func=cmd_levelset)

    ver = sub.add_parser("verify", help="run the quick diagnostics battery")
    ver.add_argument("--seed", type=int, default=0)
    ver.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NonFiniteObjective, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except HeatLassoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (KeyError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
