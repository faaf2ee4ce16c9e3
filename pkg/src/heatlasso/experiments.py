"""Batch experiment runner: designs -> heat flow -> optimization -> metrics.

A JSON config drives everything. Sections:

  design   DesignSpec fields; for gff designs a "graph" subsection gives
           either {"path": ...} or SBM parameters to sample per repeat, and
           "theta" may be the string "auto" for the canonical mass.
  fit      FitConfig fields plus "optimizer" ("sd", "cd" or "both") and an
           optional "cv" block {"lambda_grid", "t_grid", "folds"}; without
           "cv" the fixed lam/t of the config are used.
  graph    the graph driving the penalty: "from-design", "estimate"
           (optionally {"estimate": alpha}), or {"path": ...}.
  repeats  number of independent repetitions (derived seeds).
  output   output directory (CLI --out overrides).

Every run writes per-repeat dataset CSVs and fit JSONs, a metrics CSV with
one row per (repeat, optimizer) plus aggregate mean rows, and a manifest
capturing the resolved config, its hash, and all derived seeds. Re-running
a manifest's config reproduces the metrics CSV byte for byte.
"""

import csv
import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from . import __version__
from .designs import (
    DesignSpec,
    default_gff_mass,
    sample_design_and_response,
    write_dataset_csv,
    write_dataset_sidecar,
)
from .diagnostics import MetricsReport, evaluate_fit
from .graphs import Graph, estimate_graph, group_clique_graph, read_graph, sample_block_graph
from .heatflow import simulate_heat_flow
from .optimize import FitConfig, block_cd, cross_validate, subgradient_descent

_OPTIMIZERS = {"sd": subgradient_descent, "cd": block_cd}
_OPTIMIZER_TAG = {"sd": 1, "cd": 2}


def _derived_seed(*parts):
    return int(np.random.SeedSequence([p & 0xFFFFFFFF for p in parts])
               .generate_state(1)[0])


def config_hash(config: dict) -> str:
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def design_spec_from_config(section: dict, seed: int) -> DesignSpec:
    theta = section.get("theta")
    return DesignSpec(
        kind=section["kind"],
        sizes=tuple(int(s) for s in section["sizes"]),
        n=int(section["n"]),
        noise_sigma=float(section.get("noise_sigma", 0.0)),
        seed=seed,
        rhos=tuple(section["rhos"]) if "rhos" in section else None,
        theta=None if theta in (None, "auto") else float(theta),
        a=float(section["a"]) if "a" in section else None,
        b=float(section["b"]) if "b" in section else None,
        beta_scheme=tuple(tuple(s) for s in section["beta_scheme"])
        if "beta_scheme" in section else None,
    )


def fit_config_from_config(section: dict, seed: int) -> FitConfig:
    cfg = FitConfig(seed=seed)
    for key in ("lam", "t", "B", "alpha0", "rate_protocol", "eps_tol",
                "max_iters", "block_size", "eps_den", "loss"):
        if key in section:
            setattr(cfg, key, section[key])
    cfg.validate()
    return cfg


def _design_graph(section: dict, spec: DesignSpec, repeat_seed: int):
    """The graph underlying the design itself (needed for gff covariances)."""
    graph_section = section.get("graph")
    if graph_section is None:
        return None
    if "path" in graph_section:
        return read_graph(graph_section["path"])
    return sample_block_graph(
        sizes=[int(s) for s in graph_section.get("sizes", spec.sizes)],
        a=float(graph_section["a"]),
        b=float(graph_section["b"]),
        self_loops=bool(graph_section.get("self_loops", False)),
        seed=_derived_seed(repeat_seed, 0x6AF),
    )


def resolve_design(section: dict, repeat_seed: int):
    """DesignSpec plus its underlying graph (with auto mass filled in)."""
    spec = design_spec_from_config(section, repeat_seed)
    g = _design_graph(section, spec, repeat_seed)
    if spec.kind == "gff":
        if g is None:
            raise ValueError("gff design config needs a 'graph' subsection")
        if spec.theta is None:
            spec = replace(spec, theta=default_gff_mass(g, spec.k))
    return spec, g


def penalty_graph(graph_section, X, spec: DesignSpec, design_graph):
    """The graph the penalty walks on, per the config's graph section."""
    if isinstance(graph_section, dict):
        if "path" in graph_section:
            return read_graph(graph_section["path"])
        if "estimate" in graph_section:
            return _estimated_graph(X, float(graph_section["estimate"]))
        raise ValueError(f"unrecognized graph section {graph_section!r}")
    if graph_section in (None, "estimate"):
        return _estimated_graph(X, 0.75)
    if graph_section == "from-design":
        if design_graph is not None:
            return design_graph
        return group_clique_graph(spec.sizes)
    return read_graph(graph_section)


def _estimated_graph(X, alpha):
    corr = np.corrcoef(np.asarray(X, dtype=np.float64), rowvar=False)
    # guard against degenerate columns producing NaN correlations
    corr = np.nan_to_num(corr, nan=0.0)
    np.fill_diagonal(corr, 1.0)
    corr = np.clip(corr, -1.0, 1.0)
    return estimate_graph(corr, alpha)


def fit_with_config(X, y, g: Graph, fit_section: dict, seed: int,
                    optimizer: str, flow=None):
    """CV-tune (lam, t) if a cv block is present, then fit on all data.

    The section may carry "sd" / "cd" subsections whose keys override the
    shared ones for that optimizer; the cv block may set its own (cheaper)
    max_iters used only while ranking grid points. A pre-simulated walk
    table may be passed as `flow` (its t and B then apply); ignored when a
    cv block selects t itself.

    Returns (FitResult, chosen lam, chosen t, cv table or None).
    """
    merged = dict(fit_section)
    per_opt = fit_section.get(optimizer)
    if isinstance(per_opt, dict):
        merged.update(per_opt)
    cfg = fit_config_from_config(merged, seed)
    cv_section = merged.get("cv")
    table = None
    if cv_section:
        cv_cfg = replace(cfg, max_iters=int(cv_section.get("max_iters",
                                                           cfg.max_iters)))
        lam, t, table = cross_validate(
            X, y, g,
            lambda_grid=cv_section["lambda_grid"],
            t_grid=cv_section["t_grid"],
            folds=int(cv_section.get("folds", 5)),
            cfg=cv_cfg,
            optimizer=optimizer,
        )
        cfg = replace(cfg, lam=lam, t=t)
        flow = None  # the stored table's t no longer applies
    if flow is not None:
        cfg = replace(cfg, t=flow.t, B=flow.B)
        H = flow
    else:
        H = simulate_heat_flow(g, cfg.t, cfg.B, seed=_derived_seed(seed, 0x4EA7))
    result = _OPTIMIZERS[optimizer](X, y, H, cfg)
    return result, cfg.lam, cfg.t, table


def _run_repeat(config, repeat, base_seed):
    repeat_seed = _derived_seed(base_seed, 0xD5, repeat)
    spec, design_graph = resolve_design(config["design"], repeat_seed)
    X, y, beta_star, groups = sample_design_and_response(spec, design_graph)
    g = penalty_graph(config.get("graph", "estimate"), X, spec, design_graph)

    fit_section = config.get("fit", {})
    optimizers = fit_section.get("optimizer", "sd")
    optimizers = ("sd", "cd") if optimizers == "both" else (optimizers,)
    fits = {}
    for name in optimizers:
        fit_seed = _derived_seed(repeat_seed, 0xF17, _OPTIMIZER_TAG[name])
        result, lam, t, table = fit_with_config(X, y, g, fit_section,
                                                fit_seed, name)
        metrics = evaluate_fit(result.beta_thresholded, beta_star, X)
        fits[name] = {"result": result, "lam": lam, "t": t,
                      "cv_table": table, "metrics": metrics}
    return {
        "repeat": repeat,
        "seed": repeat_seed,
        "spec": spec,
        "X": X, "y": y, "beta_star": beta_star, "groups": groups,
        "graph_edges": g.edge_count,
        "fits": fits,
    }


def run_experiment(config: dict, out_dir: str, threads: int = 1) -> dict:
    """Execute all repeats of a config and write every artifact to out_dir.

    Returns a summary dict with per-optimizer mean metrics. On error, any
    partially written outputs are removed before the exception propagates.
    """
    repeats = int(config.get("repeats", 1))
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    base_seed = int(config.get("design", {}).get("seed", 0))
    os.makedirs(out_dir, exist_ok=True)
    written = []
    try:
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                outcomes = list(pool.map(
                    lambda r: _run_repeat(config, r, base_seed), range(repeats)))
        else:
            outcomes = [_run_repeat(config, r, base_seed) for r in range(repeats)]

        metrics_rows = []
        for out in outcomes:
            r = out["repeat"]
            data_path = os.path.join(out_dir, f"dataset_{r:03d}.csv")
            write_dataset_csv(data_path, out["X"], out["y"])
            written.append(data_path)
            sidecar = os.path.join(out_dir, f"dataset_{r:03d}.json")
            write_dataset_sidecar(sidecar, out["spec"], out["beta_star"],
                                  out["groups"])
            written.append(sidecar)
            for name, fit in out["fits"].items():
                fit_path = os.path.join(out_dir, f"fit_{r:03d}_{name}.json")
                with open(fit_path, "w", encoding="utf-8") as fh:
                    fh.write(fit["result"].to_json())
                written.append(fit_path)
                metrics_rows.append(
                    [str(r), name, repr(float(fit["lam"])), repr(float(fit["t"]))]
                    + [repr(float(v)) for v in fit["metrics"].csv_row()])

        summary = {}
        for name in outcomes[0]["fits"]:
            stack = np.array([out["fits"][name]["metrics"].csv_row()
                              for out in outcomes])
            mean = stack.mean(axis=0)
            metrics_rows.append(["mean", name, "", ""]
                                + [repr(float(v)) for v in mean])
            summary[name] = MetricsReport(*[float(v) for v in mean])

        metrics_path = os.path.join(out_dir, "metrics.csv")
        with open(metrics_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["repeat", "optimizer", "lam", "t"]
                            + MetricsReport.CSV_HEADER)
            writer.writerows(metrics_rows)
        written.append(metrics_path)

        manifest = {
            "version": __version__,
            "config": config,
            "config_hash": config_hash(config),
            "seeds": {
                "base": base_seed,
                "repeats": [out["seed"] for out in outcomes],
            },
        }
        manifest_path = os.path.join(out_dir, "manifest.json")
        with open(manifest_path, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2)
        written.append(manifest_path)
        return summary
    except Exception:
        for path in written:
            try:
                os.remove(path)
            except OSError:
                pass
        raise
