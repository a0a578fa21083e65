"""Batch command line: ``agw {dist,align,hda,sweep,prep}``.

Exit codes: 0 success, 2 invalid input, 3 solver did not converge (outputs
are still written).
"""

from __future__ import annotations

import argparse
import concurrent.futures as cf
import itertools
import json
import logging
import multiprocessing
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .core import SolverConfig, product_coupling, uniform_hist
from .matrixio import MatrixFileError, read_matrix, read_vector, write_matrix
from .preprocess import distance_matrix, parse_metric, unit_normalize
from .quad import coot_linearized_for_samples
from .solvers import solve_agw, solve_coot, solve_gw
from .tasks import (SupervisionSpec, as_labels, barycentric_project,
                    build_supervision_cost, foscttm, label_propagation,
                    matching_accuracy)

log = logging.getLogger("agw")

EXIT_OK, EXIT_INVALID, EXIT_NOT_CONVERGED = 0, 2, 3
RNG_NAME = "numpy.random.default_rng (PCG64)"
# keys of a --config file that name files, resolved against the file's directory
PATH_KEYS = {"x", "y", "mu", "nu", "muf", "nuf", "out", "correspondence",
             "labels_x", "labels_y", "source_labels", "target_labels"}


REQUIRED = {"dist": ("x", "y", "out"), "align": ("x", "y", "out"),
            "hda": ("x", "y", "out", "source_labels", "target_labels"),
            "sweep": ("x", "y", "out"), "prep": ("x", "out")}


class InputError(ValueError):
    pass


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

def _fmt(value):
    if isinstance(value, bool) or isinstance(value, np.bool_):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (list, tuple, np.ndarray)):
        return ", ".join(_fmt(v) for v in value)
    return str(value)


def write_report(path, items) -> None:
    """``key = value`` lines in the given order; ``None`` values are skipped."""
    lines = [f"{k} = {_fmt(v)}" for k, v in items if v is not None]
    Path(path).write_text("\n".join(lines) + "\n")


def read_report(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        key, _, value = line.partition(" = ")
        out[key] = value
    return out


# ---------------------------------------------------------------------------
# shared pipeline
# ---------------------------------------------------------------------------

def _config(args) -> SolverConfig:
    return SolverConfig(
        alpha=args.alpha, eps_s=args.eps_s, eps_v=args.eps_v,
        max_bcd_iters=args.max_bcd_iters, max_inner_iters=args.max_inner_iters,
        tol_abs=args.tol_abs, tol_rel=args.tol_rel, seed=args.seed,
        sinkhorn_max_iter=args.sinkhorn_max_iter, sinkhorn_tol=args.sinkhorn_tol,
    )


def _hist_arg(path, n, name):
    if path is None:
        return uniform_hist(n)
    w = read_vector(path)
    if w.size != n:
        raise InputError(f"--{name} has {w.size} entries, expected {n}")
    return w


def load_problem(args) -> dict:
    X = read_matrix(args.x, args.header)
    Y = read_matrix(args.y, args.header)
    if args.normalize == "unit":
        X, Y = unit_normalize(X), unit_normalize(Y)
    parse_metric(args.metric)
    return dict(
        X=np.asarray(X), Y=np.asarray(Y),
        mu=_hist_arg(args.mu, X.shape[0], "mu"), nu=_hist_arg(args.nu, Y.shape[0], "nu"),
        muf=_hist_arg(args.muf, X.shape[1], "muf"), nuf=_hist_arg(args.nuf, Y.shape[1], "nuf"),
    )


def add_distances(problem, method, metric):
    if method in ("gw", "agw") and "DX" not in problem:
        problem["DX"] = distance_matrix(problem["X"], metric)
        problem["DY"] = distance_matrix(problem["Y"], metric)
    return problem


def solve(method, problem, cfg, supervision=None):
    p = problem
    if supervision is not None and method == "gw":
        raise InputError("supervision needs --method coot or agw")
    if method == "gw":
        return solve_gw(p["DX"], p["DY"], p["mu"], p["nu"], cfg)
    if method == "coot" and supervision is None:
        return solve_coot(p["X"], p["Y"], p["mu"], p["nu"], p["muf"], p["nuf"], cfg)
    if method == "coot":
        # COOT with a supervision cost is AGW at alpha = 0
        cfg = replace(cfg, alpha=0.0)
        n, m = p["X"].shape[0], p["Y"].shape[0]
        return solve_agw(np.zeros((n, n)), np.zeros((m, m)), p["X"], p["Y"], p["mu"], p["nu"],
                         p["muf"], p["nuf"], cfg, supervision=supervision)
    return solve_agw(p["DX"], p["DY"], p["X"], p["Y"], p["mu"], p["nu"], p["muf"], p["nuf"],
                     cfg, supervision=supervision)


def _report_items(args, report, problem):
    X, Y = problem["X"], problem["Y"]
    return [
        ("command", args.command),
        ("method", args.method),
        ("alpha", args.alpha if args.method == "agw" else None),
        ("eps_s", args.eps_s),
        ("eps_v", args.eps_v if args.method != "gw" else None),
        ("metric", args.metric if args.method != "coot" else None),
        ("normalize", args.normalize),
        ("seed", args.seed),
        ("n_x", X.shape[0]), ("d_x", X.shape[1]),
        ("n_y", Y.shape[0]), ("d_y", Y.shape[1]),
        ("converged", report.converged),
        ("bcd_iterations", report.bcd_iterations),
        ("final_objective", report.final_objective),
        ("supervision_term", report.supervision_term if report.supervision_term else None),
        ("objective_trajectory", report.objective_trajectory),
        ("message", report.message),
    ]


def _write_couplings(out, report, fmt):
    suffix = ".bin" if fmt == "bin" else ".csv"
    write_matrix(out / f"sample_coupling{suffix}", report.sample_coupling.values)
    if report.feature_coupling is not None:
        write_matrix(out / f"feature_coupling{suffix}", report.feature_coupling.values)


def _finish(args, out, items, report, started):
    if args.timing:
        items.append(("wall_time_seconds", time.perf_counter() - started))
    write_report(out / "report.txt", items)
    log.info("wrote %s (%.2fs)", out / "report.txt", time.perf_counter() - started)
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# alignment and HDA metrics, shared with the sweep
# ---------------------------------------------------------------------------

def load_correspondence(path, n, m):
    if path is None:
        if n != m:
            raise InputError("identity correspondence needs equally many samples; "
                             "pass --correspondence")
        return np.arange(n)
    corr = as_labels(read_vector(path), allow_unlabeled=False)
    if corr.size != n:
        raise InputError(f"correspondence has {corr.size} entries for {n} samples")
    if corr.max() >= m:
        raise InputError(f"correspondence index {corr.max()} out of range for {m} samples")
    return corr


def alignment_metrics(G, Y, corr, labels=None):
    projected = barycentric_project(G, Y)
    metrics = {
        "foscttm": foscttm(projected, Y[corr]),
        "matching_accuracy": matching_accuracy(G, corr, np.arange(Y.shape[0])),
    }
    if labels is not None:
        metrics["label_matching_accuracy"] = matching_accuracy(G, *labels)
    return projected, metrics


def load_hda_labels(args, n, m):
    ys = as_labels(read_vector(args.source_labels), allow_unlabeled=False)
    yt = as_labels(read_vector(args.target_labels), allow_unlabeled=False)
    if ys.size != n or yt.size != m:
        raise InputError(f"label files have {ys.size} and {yt.size} entries for "
                         f"{n} source and {m} target samples")
    if ys.max() != yt.max():
        raise InputError(f"source labels have K = {ys.max() + 1} classes, "
                         f"target labels K = {yt.max() + 1}")
    return ys, yt, int(ys.max()) + 1


def choose_supervised(yt, per_class, seed):
    """``per_class`` random target indices from every class (all if fewer)."""
    rng = np.random.default_rng(seed)
    chosen = []
    for k in np.unique(yt):
        idx = np.flatnonzero(yt == k)
        take = min(per_class, idx.size)
        chosen.extend(rng.choice(idx, size=take, replace=False).tolist())
    return np.array(sorted(chosen), dtype=np.int64)


def hda_supervision(problem, ys, yt, chosen, penalty):
    """Penalize moving source mass onto a labeled target of another class."""
    n, m = ys.size, yt.size
    if chosen.size == 0:
        return None
    # pairs are (target, source): each labeled target row is penalized
    # everywhere except at the sources of its own class
    pairs = [(int(j), int(i)) for j in chosen for i in np.flatnonzero(ys == yt[j])]
    base = float(np.abs(coot_linearized_for_samples(
        problem["X"], problem["Y"], product_coupling(problem["muf"], problem["nuf"]))).mean())
    spec = SupervisionSpec(pairs=pairs, mode="penalize_mismatch", penalty=penalty)
    return build_supervision_cost(m, n, spec, base_scale=base).T


def hda_metrics(G, ys, yt, K, chosen):
    pred = label_propagation(G, ys, K)
    unlabeled = np.setdiff1d(np.arange(yt.size), chosen)
    metrics = {"accuracy_all": float(np.mean(pred == yt)), "n_unlabeled": int(unlabeled.size)}
    if unlabeled.size:
        metrics["accuracy_unlabeled"] = float(np.mean(pred[unlabeled] == yt[unlabeled]))
    return pred, metrics


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_dist(args) -> int:
    started = time.perf_counter()
    out = _outdir(args)
    problem = add_distances(load_problem(args), args.method, args.metric)
    report = solve(args.method, problem, _config(args))
    _write_couplings(out, report, args.format)
    return _finish(args, out, _report_items(args, report, problem), report, started)


def cmd_align(args) -> int:
    started = time.perf_counter()
    out = _outdir(args)
    problem = add_distances(load_problem(args), args.method, args.metric)
    X, Y = problem["X"], problem["Y"]
    corr = load_correspondence(args.correspondence, X.shape[0], Y.shape[0])
    labels = None
    if args.labels_x is not None and args.labels_y is not None:
        labels = (read_vector(args.labels_x), read_vector(args.labels_y))
    report = solve(args.method, problem, _config(args))
    projected, metrics = alignment_metrics(report.sample_coupling.values, Y, corr, labels)
    _write_couplings(out, report, args.format)
    write_matrix(out / ("projected.bin" if args.format == "bin" else "projected.csv"), projected)
    items = _report_items(args, report, problem) + list(metrics.items())
    return _finish(args, out, items, report, started)


def cmd_hda(args) -> int:
    started = time.perf_counter()
    out = _outdir(args)
    problem = add_distances(load_problem(args), args.method, args.metric)
    ys, yt, K = load_hda_labels(args, problem["X"].shape[0], problem["Y"].shape[0])
    chosen = choose_supervised(yt, args.supervised_per_class, args.seed)
    supervision = hda_supervision(problem, ys, yt, chosen, args.penalty)
    report = solve(args.method, problem, _config(args), supervision)
    pred, metrics = hda_metrics(report.sample_coupling.values, ys, yt, K, chosen)
    _write_couplings(out, report, args.format)
    write_matrix(out / "predictions.csv", pred[:, None])
    items = _report_items(args, report, problem) + [
        ("supervised_per_class", args.supervised_per_class),
        ("supervision_generator", RNG_NAME if args.supervised_per_class else None),
        ("supervised_targets", chosen.tolist() if chosen.size else None),
    ] + list(metrics.items())
    return _finish(args, out, items, report, started)


def _parse_grid(text, name):
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InputError(f"--{name}: cannot parse {text!r}") from None
    if not values:
        raise InputError(f"--{name} is empty")
    return values


def _sweep_row(job):
    """One grid point; runs in a worker process when ``--workers > 1``."""
    task, method, problem, cfg, extra, threads = job
    with threadpool_limits(limits=threads):
        supervision = extra.get("supervision")
        report = solve(method, problem, cfg, supervision)
        row = {"final_objective": report.final_objective,
               "converged": report.converged,
               "bcd_iterations": report.bcd_iterations}
        G = report.sample_coupling.values
        if task == "align":
            row.update(alignment_metrics(G, problem["Y"], extra["corr"])[1])
        elif task == "hda":
            metrics = hda_metrics(G, extra["ys"], extra["yt"], extra["K"], extra["chosen"])[1]
            row["accuracy_all"] = metrics["accuracy_all"]
            row["accuracy_unlabeled"] = metrics.get("accuracy_unlabeled")
    return row


SELECT = {"objective": ("final_objective", min), "foscttm": ("foscttm", min),
          "matching_accuracy": ("matching_accuracy", max),
          "accuracy": ("accuracy_all", max), "accuracy_unlabeled": ("accuracy_unlabeled", max)}


def cmd_sweep(args) -> int:
    out = _outdir(args)
    alphas = _parse_grid(args.alphas, "alphas") if args.method == "agw" else [args.alpha]
    eps_s = _parse_grid(args.eps_s_grid, "eps-s-grid")
    eps_v = _parse_grid(args.eps_v_grid, "eps-v-grid") if args.method != "gw" else [0.0]
    problem = add_distances(load_problem(args), args.method, args.metric)
    n, m = problem["X"].shape[0], problem["Y"].shape[0]

    extra = {}
    if args.task == "align":
        extra["corr"] = load_correspondence(args.correspondence, n, m)
    elif args.task == "hda":
        if args.source_labels is None or args.target_labels is None:
            raise InputError("--task hda needs --source-labels and --target-labels")
        ys, yt, K = load_hda_labels(args, n, m)
        chosen = choose_supervised(yt, args.supervised_per_class, args.seed)
        extra.update(ys=ys, yt=yt, K=K, chosen=chosen,
                     supervision=hda_supervision(problem, ys, yt, chosen, args.penalty))
    metric_key, better = SELECT[args.select]
    if args.select != "objective" and not (
            (args.task == "align" and metric_key in ("foscttm", "matching_accuracy"))
            or (args.task == "hda" and metric_key.startswith("accuracy"))):
        raise InputError(f"--select {args.select} is not produced by --task {args.task}")

    threads = int(os.environ.get("AGW_THREADS", "1"))
    base = _config(args)
    grid = list(itertools.product(alphas, eps_s, eps_v))
    jobs = [(args.task, args.method, problem, replace(base, alpha=a, eps_s=es, eps_v=ev),
             extra, threads) for a, es, ev in grid]
    if args.workers > 1:
        ctx = multiprocessing.get_context("spawn")
        with cf.ProcessPoolExecutor(max_workers=args.workers, mp_context=ctx) as pool:
            rows = list(pool.map(_sweep_row, jobs))
    else:
        rows = [_sweep_row(job) for job in jobs]

    columns = ["alpha", "eps_s", "eps_v", "final_objective", "converged", "bcd_iterations"]
    columns += [k for k in rows[0] if k not in columns]
    lines = [",".join(columns)]
    for (a, es, ev), row in zip(grid, rows):
        row.update(alpha=a, eps_s=es, eps_v=ev)
        lines.append(",".join("" if row.get(c) is None else _fmt(row[c]) for c in columns))
    (out / "sweep.csv").write_text("\n".join(lines) + "\n")

    scored = [(i, row[metric_key]) for i, row in enumerate(rows) if row.get(metric_key) is not None]
    if scored:
        best_value = better(v for _, v in scored)
        best = next(i for i, v in scored if v == best_value)
        write_report(out / "best.txt", [("select", args.select), ("row", best)]
                     + [(c, rows[best].get(c)) for c in columns])
    return EXIT_OK


def cmd_prep(args) -> int:
    M = read_matrix(args.x, args.header)
    if args.normalize == "unit":
        M = unit_normalize(M)
    if args.metric is not None:
        M = distance_matrix(M, args.metric)
    binary = {"auto": None, "text": False, "bin": True}[args.format]
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_matrix(out, M, binary=binary)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _solver_args(p, with_method=True):
    p.add_argument("--x", help="source matrix file")
    p.add_argument("--y", help="target matrix file")
    p.add_argument("--header", action="store_true", help="skip the first line of text files")
    if with_method:
        p.add_argument("--method", choices=("gw", "coot", "agw"), default="agw")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--eps-s", type=float, default=0.0)
    p.add_argument("--eps-v", type=float, default=0.0)
    p.add_argument("--metric", default="euclidean", help="euclidean, cosine or knn:<k>[:<base>]")
    p.add_argument("--normalize", choices=("none", "unit"), default="none")
    for name in ("mu", "nu", "muf", "nuf"):
        p.add_argument(f"--{name}", default=None, help="histogram file (default uniform)")
    p.add_argument("--max-bcd-iters", type=int, default=200)
    p.add_argument("--max-inner-iters", type=int, default=500)
    p.add_argument("--tol-abs", type=float, default=1e-9)
    p.add_argument("--tol-rel", type=float, default=1e-9)
    p.add_argument("--sinkhorn-max-iter", type=int, default=10000)
    p.add_argument("--sinkhorn-tol", type=float, default=1e-9)
    p.add_argument("--seed", type=int, default=1976)
    p.add_argument("--format", choices=("text", "bin"), default="text",
                   help="format of written matrices")
    p.add_argument("--timing", action="store_true", help="add wall time to the report")
    p.add_argument("--out", help="output directory")
    p.add_argument("--config", default=None, help="JSON run configuration")


def _align_args(p):
    p.add_argument("--correspondence", default=None,
                   help="file with the index of each source sample's true match")
    p.add_argument("--labels-x", default=None)
    p.add_argument("--labels-y", default=None)


def _hda_args(p):
    p.add_argument("--source-labels")
    p.add_argument("--target-labels")
    p.add_argument("--supervised-per-class", type=int, default=0)
    p.add_argument("--penalty", type=float, default=None,
                   help="mismatch penalty (default 100 x mean COOT sample cost)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="agw",
                                     description="Batch GW / COOT / AGW runs on matrix files.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dist", help="solve GW / COOT / AGW and write couplings")
    _solver_args(p)
    p.set_defaults(func=cmd_dist)

    p = sub.add_parser("align", help="solve, project barycentrically, score FOSCTTM")
    _solver_args(p)
    _align_args(p)
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("hda", help="label propagation through the sample coupling")
    _solver_args(p)
    _hda_args(p)
    p.set_defaults(func=cmd_hda)

    p = sub.add_parser("sweep", help="grid over alpha and entropic strengths")
    _solver_args(p)
    _align_args(p)
    _hda_args(p)
    p.add_argument("--task", choices=("dist", "align", "hda"), default="dist")
    p.add_argument("--alphas", default="0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")
    p.add_argument("--eps-s-grid", default="0")
    p.add_argument("--eps-v-grid", default="0")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--select", choices=tuple(SELECT), default="objective")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("prep", help="normalize rows and/or build a distance matrix")
    p.add_argument("--x")
    p.add_argument("--header", action="store_true")
    p.add_argument("--normalize", choices=("none", "unit"), default="none")
    p.add_argument("--metric", default=None)
    p.add_argument("--format", choices=("auto", "text", "bin"), default="auto")
    p.add_argument("--out", help="output matrix file")
    p.add_argument("--config", default=None, help="JSON run configuration")
    p.set_defaults(func=cmd_prep)
    return parser


def _apply_config(parser, argv):
    """Parse ``argv``; a JSON ``--config`` file supplies defaults that
    explicit flags override."""
    args = parser.parse_args(argv)
    if args.config is not None:
        path = Path(args.config)
        try:
            data = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"{path}: cannot read run configuration: {exc}") from None
        if not isinstance(data, dict):
            raise InputError(f"{path}: run configuration must be a JSON object")
        allowed = set(vars(args)) - {"func", "command", "config", "verbose"}
        unknown = sorted(set(data) - allowed)
        if unknown:
            raise InputError(f"{path}: unknown configuration keys: {', '.join(unknown)}")
        sub = parser._subparsers._group_actions[0].choices[args.command]
        given = {tok.split("=")[0] for tok in argv if tok.startswith("--")}
        explicit = {a.dest for a in sub._actions if given & set(a.option_strings)}
        for key, value in data.items():
            if key in explicit:
                continue
            if key in PATH_KEYS and value is not None:
                value = str((path.parent / value).resolve())
            setattr(args, key, value)
    for key in REQUIRED[args.command]:
        if getattr(args, key) is None:
            raise InputError(f"missing --{key.replace('_', '-')}")
    return args


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
    except InputError as exc:
        print(f"agw: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    threads = os.environ.get("AGW_THREADS")
    try:
        with threadpool_limits(limits=int(threads) if threads else None):
            return args.func(args)
    except (InputError, MatrixFileError, ValueError) as exc:
        print(f"agw: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
