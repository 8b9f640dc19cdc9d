"""Command-line entry point: ``dtclust <subcommand> [options]``.

Exit codes: 0 success, 2 configuration or validation error, 1 runtime error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from dtclust import __version__
from dtclust.cluster import clustering_error, dtc, gap_statistic
from dtclust.harness import DEFAULT_GRID, Design, run_design, summarize
from dtclust.ingest import (
    MalformedFile,
    WindowSpec,
    ZeroVarianceWarning,
    import_matrix_csv,
    read_tensor,
    sliding_corr,
    write_tensor,
)
from dtclust.proxops import DegenerateVector
from dtclust.stf import ConstraintSpec, InvalidSpec, stf_decompose
from dtclust.tuning import TuneGrid, select_model

log = logging.getLogger("dtclust")


class ConfigError(Exception):
    """Bad user input; maps to exit code 2."""


# -- argument helpers ------------------------------------------------------

def _number(tok: str):
    tok = tok.strip()
    if tok.lower() in ("none", "off", "-"):
        return None
    try:
        return int(tok)
    except ValueError:
        pass
    try:
        return float(tok)
    except ValueError:
        raise ConfigError(f"not a number: {tok!r}") from None


def _list(text: str | None):
    if text is None:
        return None
    return [_number(t) for t in text.split(",") if t.strip()]


def _per_mode(values, m: int, name: str, default):
    """A single value applies to every mode but the last; a full list is per-mode."""
    if values is None:
        return [default] * m
    if len(values) == 1:
        return [values[0]] * (m - 1) + [default]
    if len(values) != m:
        raise ConfigError(f"--{name} needs 1 or {m} values, got {len(values)}")
    return values


def _sparsity(values, dims):
    out = []
    for v, d in zip(values, dims):
        if v is None:
            out.append(None)
        elif isinstance(v, float):
            if not 0.0 < v <= 1.0:
                raise ConfigError(f"sparsity fraction {v} outside (0, 1]")
            out.append(max(1, int(round(v * d))))
        else:
            out.append(v)
    return out


def _ties(text: str | None):
    if not text:
        return ()
    groups = []
    for grp in text.split(";"):
        try:
            groups.append(tuple(int(g) for g in grp.split(",") if g.strip()))
        except ValueError:
            raise ConfigError(f"bad --tie-modes group {grp!r}") from None
    return tuple(g for g in groups if g)


def _load_tensor(path: str | None):
    if not path:
        raise ConfigError("--input is required")
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"input file not found: {p}")
    try:
        return read_tensor(p)
    except MalformedFile as exc:
        raise ConfigError(str(exc)) from None


def _spec_from_args(args, dims) -> ConstraintSpec:
    m = len(dims)
    s = _sparsity(_per_mode(_list(args.sparsity), m, "sparsity", None), dims)
    lam = [0.0 if v is None else float(v) for v in _per_mode(_list(args.lam), m, "lambda", 0.0)]
    spec = ConstraintSpec(sparsity=s, fusion=lam, tied_modes=_ties(args.tie_modes),
                          max_iters=args.max_iters, n_restarts=args.restarts, rng_seed=args.seed)
    try:
        spec.resolve(dims)
    except InvalidSpec as exc:
        raise ConfigError(str(exc)) from None
    return spec


def _outdir(args) -> Path:
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_matrix(path: Path, M) -> None:
    np.savetxt(path, np.atleast_2d(M), delimiter=",", fmt="%.17g")


def _write_table(path_stem: Path, rows: list[dict], emit: str) -> Path:
    if emit == "json":
        path = path_stem.with_suffix(".json")
        path.write_text(json.dumps(rows, indent=2, default=_json_default))
        return path
    path = path_stem.with_suffix(".csv")
    keys = list(rows[0].keys()) if rows else []
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys)
        w.writeheader()
        w.writerows(rows)
    return path


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


def _sidecar(out: Path, args, **resolved) -> None:
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    cfg.update(resolved)
    cfg["version"] = __version__
    (out / "config.json").write_text(json.dumps(cfg, indent=2, default=_json_default))


def _read_labels(path: str) -> np.ndarray:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"truth file not found: {p}")
    try:
        vals = np.loadtxt(p, delimiter=",", ndmin=1)
    except ValueError as exc:
        raise ConfigError(f"{p}: {exc}") from None
    return vals.astype(int).reshape(-1)


def _k_arg(text):
    if text is None or str(text).lower() == "auto":
        return None
    try:
        k = int(text)
    except ValueError:
        raise ConfigError(f"--k must be an integer or 'auto', got {text!r}") from None
    if k < 1:
        raise ConfigError("--k must be >= 1")
    return k


def _write_factors(out: Path, F) -> None:
    _write_matrix(out / "weights.csv", F.weights[None, :])
    for j, f in enumerate(F.factors):
        _write_matrix(out / f"factor_mode{j}.csv", f)


# -- subcommands -----------------------------------------------------------

def cmd_decompose(args) -> int:
    T = _load_tensor(args.input)
    spec = _spec_from_args(args, T.dims)
    if args.rank < 1:
        raise ConfigError("--rank must be >= 1")
    F, report = stf_decompose(T, args.rank, spec)
    out = _outdir(args)
    _write_factors(out, F)
    (out / "report.json").write_text(json.dumps(report.to_dict(), indent=2))
    _sidecar(out, args, dims=T.dims, sparsity_resolved=spec.sparsity, fusion_resolved=spec.fusion)
    print(f"residual_norm={report.residual_norm:.6g} objective={report.objective:.6g}")
    return 0


def cmd_cluster(args) -> int:
    T = _load_tensor(args.input)
    spec = _spec_from_args(args, T.dims)
    truth = _read_labels(args.truth) if args.truth else None
    if truth is not None and truth.shape[0] != T.dims[args.mode]:
        raise ConfigError(f"truth has {truth.shape[0]} labels, mode {args.mode} has "
                          f"{T.dims[args.mode]} entries")
    K = _k_arg(args.k)
    if K is None:
        raise ConfigError("cluster needs an explicit --k (use 'tune' to select K)")
    if K > T.dims[args.mode]:
        raise ConfigError(f"--k {K} exceeds the {T.dims[args.mode]} items to cluster")
    res, F = dtc(T, K, args.rank, spec, mode=args.mode)
    out = _outdir(args)
    _write_matrix(out / "assignment.csv", res.assignment[:, None])
    _write_matrix(out / "centers.csv", res.centers)
    _write_factors(out, F)
    metrics = {"K": K, "within_dispersion": res.within_dispersion}
    if truth is not None:
        metrics["clustering_error"] = clustering_error(res.assignment, truth)
    _write_table(out / "metrics", [metrics], args.emit)
    _sidecar(out, args, dims=T.dims)
    if "clustering_error" in metrics:
        print(f"clustering_error={metrics['clustering_error']:.3f}")
    return 0


def _grid_from_args(args) -> TuneGrid:
    ranks = _list(args.rank_grid) or list(DEFAULT_GRID.ranks)
    sparsity = _list(args.sparsity) or list(DEFAULT_GRID.sparsity)
    lambdas = _list(args.lam) or list(DEFAULT_GRID.lambdas)
    if any(r is None or not isinstance(r, int) or r < 1 for r in ranks):
        raise ConfigError(f"bad rank grid {ranks}")
    if any(s is None for s in sparsity) or any(l is None or l < 0 for l in lambdas):
        raise ConfigError("bad sparsity or lambda grid")
    return TuneGrid(ranks=tuple(ranks), sparsity=tuple(sparsity),
                    lambdas=tuple(float(l) for l in lambdas))


def _design_from_args(args) -> Design:
    ratios = tuple(float(r) for r in _list(args.ratios)) if args.ratios else None
    d = args.d
    return Design(kind=args.design, N=args.n, d=d, mu=args.mu, cov=args.cov, rho=args.rho,
                  cluster_ratios=ratios, rank=args.true_rank)


def cmd_simulate(args) -> int:
    if args.reps < 1:
        raise ConfigError("--reps must be >= 1")
    design = _design_from_args(args)
    try:
        design.generate(args.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    grid = _grid_from_args(args)
    K = _k_arg(args.k)
    out = _outdir(args)
    if args.export_data:
        for rep in range(args.reps):
            ds = design.generate(args.seed + rep)
            write_tensor(ds.stacked(), out / f"data_rep{rep}.dtns")
            _write_matrix(out / f"truth_rep{rep}.csv", ds.truth_assignment[:, None])
    results = run_design(design, args.reps, base_seed=args.seed, workers=args.workers, grid=grid,
                         K=K, k_max=args.kmax, gap_b=args.gap_b)
    rows = [r.as_row() for r in results]
    _write_table(out / "replications", rows, args.emit)
    summary = summarize(results)
    _write_table(out / "summary", [summary], args.emit)
    _sidecar(out, args, grid=grid.__dict__)
    print("recovery_error={:.3f} ({:.3f})  clustering_error={:.3f} ({:.3f})".format(
        summary["recovery_error"], summary["recovery_error_se"],
        summary["clustering_error"], summary["clustering_error_se"]))
    return 0


def cmd_tune(args) -> int:
    T = _load_tensor(args.input)
    grid = _grid_from_args(args)
    try:
        for R, s, lam in grid.points():
            grid.spec_for(T.dims, s, lam, ConstraintSpec()).resolve(T.dims)
    except InvalidSpec as exc:
        raise ConfigError(str(exc)) from None
    if args.kmax < 1 or args.kmax > T.dims[-1]:
        raise ConfigError(f"--kmax must lie in [1, {T.dims[-1]}]")
    if args.gap_b < 1:
        raise ConfigError("--gap-b must be >= 1")
    base = ConstraintSpec(rng_seed=args.seed, n_restarts=args.restarts, max_iters=args.max_iters)
    best, scores = select_model(T, grid, base)
    out = _outdir(args)
    _write_table(out / "bic_grid", [g.as_row() for g in scores], args.emit)
    reduced = best.factors.factors[-1]
    k, gaps, ses = gap_statistic(reduced, args.kmax, args.gap_b, seed=args.seed)
    _write_table(out / "gap", [{"k": i + 1, "gap": g, "se": s}
                               for i, (g, s) in enumerate(zip(gaps, ses))], args.emit)
    chosen = {"R": best.R, "s": best.s, "lambda": best.lam, "bic": best.bic, "K": k}
    (out / "chosen.json").write_text(json.dumps(chosen, indent=2, default=_json_default))
    _write_factors(out, best.factors)
    _sidecar(out, args, grid=grid.__dict__)
    print(f"R={best.R} s={best.s} lambda={best.lam} K={k}")
    return 0


def cmd_connect(args) -> int:
    p = Path(args.input) if args.input else None
    if p is None or not p.is_file():
        raise ConfigError(f"input file not found: {p}")
    try:
        ts = import_matrix_csv(p)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    spec_w = WindowSpec(args.width, args.step)
    try:
        spec_w.validate(ts.shape[1])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out = _outdir(args)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ZeroVarianceWarning)
        T, flags = sliding_corr(ts, spec_w, return_flags=True)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    write_tensor(T, out / "corr.dtns")
    resolved = {"windows": T.dims[2], "flagged_windows": np.flatnonzero(flags).tolist()}
    if args.k is not None:
        K = _k_arg(args.k)
        if K is None or K > T.dims[2]:
            raise ConfigError(f"--k must be an integer in [1, {T.dims[2]}]")
        p_dim = T.dims[0]
        s_vals = _list(args.sparsity)
        s = s_vals[0] if s_vals else None
        if isinstance(s, float):
            s = max(1, int(round(s * p_dim)))
        if s is not None and not 1 <= s <= p_dim:
            raise ConfigError(f"sparsity {s} outside [1, {p_dim}]")
        lam_vals = _list(args.lam)
        lam = float(lam_vals[0]) if lam_vals and lam_vals[0] is not None else 0.0
        spec = ConstraintSpec(sparsity=[s, s, None], fusion=[0.0, 0.0, lam],
                              tied_modes=((0, 1),), max_iters=args.max_iters,
                              n_restarts=args.restarts, rng_seed=args.seed)
        res, F = dtc(T, K, args.rank, spec)
        _write_matrix(out / "assignment.csv", res.assignment[:, None])
        _write_matrix(out / "centers.csv", res.centers)
        _write_factors(out, F)
        resolved["assignment"] = res.assignment.tolist()
    _sidecar(out, args, **resolved)
    print(f"windows={T.dims[2]}")
    return 0


# Table cells reproduced by ``replicate-tables``: (table, design, N, mu).
TABLE_CELLS = [
    ("table1", "2d", 50, 1.0), ("table1", "2d", 50, 1.2),
    ("table1", "2d", 100, 1.0), ("table1", "2d", 100, 1.2),
    ("table2", "3d", 50, 0.6), ("table2", "3d", 50, 0.8),
    ("table2", "3d", 100, 0.6), ("table2", "3d", 100, 0.8),
]


def cmd_replicate(args) -> int:
    if args.reps < 1:
        raise ConfigError("--reps must be >= 1")
    wanted = set(args.tables.split(","))
    out = _outdir(args)
    rows = []
    for table, kind, N, mu in TABLE_CELLS:
        if table not in wanted:
            continue
        design = Design(kind=kind, N=N, d=20, mu=mu)
        res = run_design(design, args.reps, base_seed=args.seed, workers=args.workers)
        row = {"table": table, "design": kind, "d": 20, "N": N, "mu": mu}
        row.update(summarize(res))
        rows.append(row)
        print("{table} d=20 N={N} mu={mu}: rec {recovery_error:.3f} ({recovery_error_se:.3f}) "
              "clu {clustering_error:.3f} ({clustering_error_se:.3f})".format(**row), flush=True)
    if not rows:
        raise ConfigError(f"no table cells match {args.tables!r}")
    _write_table(out / "tables", rows, args.emit)
    _sidecar(out, args)
    return 0


# -- parser ----------------------------------------------------------------

def _common(p, *, rank_default=2):
    p.add_argument("--input")
    p.add_argument("--output-dir", default="dtclust_out")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--emit", choices=("csv", "json"), default="csv")
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--max-iters", type=int, default=20)


def _constraints(p):
    p.add_argument("--sparsity", help="one value (all but the last mode) or one per mode; "
                   "ints are cardinalities, floats in (0,1] fractions, 'none' disables")
    p.add_argument("--lambda", dest="lam", help="fusion weight(s), same convention as --sparsity")
    p.add_argument("--tie-modes", help="tied mode groups, e.g. '0,1' or '0,1;2,3'")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dtclust", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", help="structured CP factorization of a tensor file")
    _common(p)
    _constraints(p)
    p.add_argument("--rank", type=int, default=2)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("cluster", help="factorize a stacked tensor and cluster one mode")
    _common(p)
    _constraints(p)
    p.add_argument("--rank", type=int, default=2)
    p.add_argument("--k", default=None)
    p.add_argument("--mode", type=int, default=-1, help="mode to cluster (default: last)")
    p.add_argument("--truth", help="CSV of true labels for the clustered mode")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("simulate", help="seeded replications of a simulation design")
    _common(p)
    p.add_argument("--design", choices=("2d", "3d"), default="3d")
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--d", type=int, default=20)
    p.add_argument("--mu", type=float, default=0.8)
    p.add_argument("--cov", choices=("identity", "ar", "exchangeable"), default="identity")
    p.add_argument("--rho", type=float, default=0.0)
    p.add_argument("--ratios", help="cluster size ratios, e.g. '1,2,3,4'")
    p.add_argument("--true-rank", type=int, default=2)
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--k", default="4", help="cluster count or 'auto' for the gap statistic")
    p.add_argument("--kmax", type=int, default=8)
    p.add_argument("--gap-b", type=int, default=50)
    p.add_argument("--rank", dest="rank_grid", help="candidate ranks, e.g. '1,2,3'")
    p.add_argument("--sparsity", help="candidate sparsity levels")
    p.add_argument("--lambda", dest="lam", help="candidate fusion weights")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--export-data", action="store_true",
                   help="also write each replication's tensor and truth labels")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("tune", help="BIC grid search, then gap-statistic choice of K")
    _common(p)
    p.add_argument("--rank", dest="rank_grid", help="candidate ranks")
    p.add_argument("--sparsity", help="candidate sparsity levels")
    p.add_argument("--lambda", dest="lam", help="candidate fusion weights")
    p.add_argument("--kmax", type=int, default=8)
    p.add_argument("--gap-b", type=int, default=50)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("connect", help="sliding-window correlation tensor from a CSV series")
    _common(p)
    _constraints(p)
    p.add_argument("--width", type=int, default=20)
    p.add_argument("--step", type=int, default=1)
    p.add_argument("--rank", type=int, default=2)
    p.add_argument("--k", default=None, help="cluster the windows into K groups")
    p.set_defaults(func=cmd_connect)

    p = sub.add_parser("replicate-tables", help="rerun the simulation table cells")
    _common(p)
    p.add_argument("--tables", default="table1,table2")
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_replicate)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"dtclust: error: {exc}", file=sys.stderr)
        return 2
    except (DegenerateVector, ValueError, OSError) as exc:
        print(f"dtclust: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
