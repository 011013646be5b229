"""Command-line entry point: ``sparsetune <command> ...``.

Commands
--------
solve      recover x from a matrix file and a measurement file
run-grid   run a phase-transition grid, resumable, one CSV row per cell
fit        fit logistic transitions to a cells CSV
tune       pick the best configuration (or the maximin one over suites)
time       time solvers at growing problem sizes
report     turn estimate files into per-curve TSV data and an ordering line
"""

import argparse
import hashlib
import json
import os
import sys
import time
from collections import OrderedDict
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    default_config,
    grid_from_config,
    load_config,
    suites_from_config,
    theta_grid_from_config,
)
from .exceptions import (
    ConfigError,
    DimensionError,
    EstimateUndefinedError,
    NormalizationError,
    SparseTuneError,
    TuningFailedError,
)
from .operators import SensingOperator
from .recommended import recommended_config
from .solvers import TIMING_RESIDUAL_STOP, Algorithm, solve
from .suites import ProblemSuite, generate_instance
from .transition import (
    CSV_FIELDS,
    Recommended,
    cell_dimensions,
    cell_to_row,
    default_workers,
    fit_logistic,
    format_rows,
    maximin_tune,
    read_cells_csv,
    resolve_config,
    row_to_cell,
    run_grid,
    tune,
)
from .validation import check_measurements, check_unit_columns

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4
EXIT_PARTIAL = 5

OUT_ENV = "SPARSETUNE_OUT"

CELLS_CSV = "cells.csv"
CONFIG_JSON = "config.json"
MANIFEST_JSON = "manifest.json"


class CLIError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


def _out_root():
    return Path(os.environ.get(OUT_ENV, "."))


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _dump_json(path, doc):
    text = json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"
    Path(path).write_text(text)
    return text


# ---------------------------------------------------------------- solve

def read_matrix_file(path):
    """Read ``n N`` then ``n*N`` column-major reals (whitespace separated)."""
    tokens = Path(path).read_text().split()
    if len(tokens) < 2:
        raise DimensionError(f"{path}: missing 'n N' header")
    n, N = int(tokens[0]), int(tokens[1])
    values = np.array(tokens[2:], dtype=float)
    if values.size != n * N:
        raise DimensionError(f"{path}: header says {n}x{N} = {n * N} entries, found {values.size}")
    return values.reshape((n, N), order="F")


def write_matrix_file(path, matrix):
    matrix = np.asarray(matrix, dtype=float)
    n, N = matrix.shape
    body = "\n".join(repr(float(v)) for v in matrix.ravel(order="F"))
    Path(path).write_text(f"{n} {N}\n{body}\n")


def read_vector_file(path):
    return np.array(Path(path).read_text().split(), dtype=float)


def write_vector_file(path, x):
    Path(path).write_text("".join(f"{float(v)!r}\n" for v in x))


def cmd_solve(args):
    try:
        A = read_matrix_file(args.matrix)
        y = read_vector_file(args.y)
    except OSError as exc:
        raise CLIError(f"cannot read input: {exc}", EXIT_IO)
    except ValueError as exc:
        raise CLIError(f"cannot parse input: {exc}", EXIT_IO)
    n, N = A.shape
    if not 1 <= n <= N:
        raise CLIError(f"matrix must be n x N with 1 <= n <= N, got {n} x {N}", EXIT_NUMERIC)
    try:
        check_unit_columns(A, args.column_tol)
        op = SensingOperator.from_dense(A)
        y = check_measurements(op, y)
    except NormalizationError as exc:
        raise CLIError(str(exc), EXIT_NUMERIC)
    except DimensionError as exc:
        raise CLIError(f"dimension mismatch: {exc}", EXIT_NUMERIC)
    delta = args.delta if args.delta is not None else n / N
    cfg = recommended_config(Algorithm(args.algo.upper()), delta, args.fast_ops)
    try:
        res = solve(op, y, cfg)
    except SparseTuneError as exc:
        raise CLIError(f"solver failed: {exc}", EXIT_NUMERIC)
    out = Path(args.out) if args.out else _out_root() / "xhat.txt"
    try:
        write_vector_file(out, res.xhat)
    except OSError as exc:
        raise CLIError(f"cannot write {out}: {exc}", EXIT_IO)
    print(f"algo={cfg.algo.value} delta={delta:.4g} iterations={res.iterations} "
          f"relative_residual={res.final_relative_residual:.3e} converged={res.converged} -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------- run-grid

def _load_doc(args):
    if args.config:
        try:
            doc = load_config(args.config)
        except OSError as exc:
            raise CLIError(f"cannot read config: {exc}", EXIT_IO)
    else:
        doc = default_config()
    if getattr(args, "seed", None) is not None:
        doc["base_seed"] = args.seed
    if getattr(args, "algo", None):
        doc["config"] = Recommended(Algorithm(args.algo.upper()), bool(args.fast_ops)).to_dict()
    return doc


def _existing_rows(csv_path, expected_keys):
    """Return how many leading rows of ``csv_path`` are valid, repairing a torn tail."""
    if not csv_path.exists():
        return 0
    text = csv_path.read_text()
    lines = text.split("\n")
    complete = lines[:-1]  # anything after the last newline is a torn write
    if not complete or complete[0] != ",".join(CSV_FIELDS):
        raise CLIError(f"{csv_path}: unexpected content; refusing to overwrite", EXIT_IO)
    good = 0
    for line, key in zip(complete[1:], expected_keys):
        parts = line.split(",")
        if len(parts) != len(CSV_FIELDS) or (float(parts[0]), float(parts[1])) != key:
            break
        good += 1
    kept = "\n".join(complete[: good + 1]) + "\n"
    if kept != text:
        csv_path.write_text(kept)
    return good


def cmd_run_grid(args):
    doc = _load_doc(args)
    try:
        grid = grid_from_config(doc)
    except ConfigError as exc:
        raise CLIError(_config_message(exc), EXIT_CONFIG)
    out = Path(args.out) if args.out else _out_root() / "grid"
    out.mkdir(parents=True, exist_ok=True)
    canonical = grid.canonical_json()
    fingerprint = hashlib.sha256(canonical.encode()).hexdigest()
    cfg_path = out / CONFIG_JSON
    if cfg_path.exists() and cfg_path.read_text() != canonical:
        raise CLIError(f"{out} holds results for a different grid; use a fresh --out", EXIT_CONFIG)
    cfg_path.write_text(canonical)

    cells = grid.cells()
    csv_path = out / CELLS_CSV
    done = _existing_rows(csv_path, [(d, r) for _, _, d, r in cells])
    todo = cells[done:]
    if args.max_cells is not None:
        todo = todo[: args.max_cells]
    manifest = {
        "config_path": str(args.config) if args.config else None,
        "output_dir": str(out),
        "tool_version": __version__,
        "grid_fingerprint": fingerprint,
        "started": _now(),
        "finished": None,
        "cells_total": len(cells),
        "cells_completed": done,
    }
    _dump_json(out / MANIFEST_JSON, manifest)
    workers = args.workers if args.workers else default_workers()
    with open(csv_path, "a", newline="") as fh:
        if done == 0:
            fh.write(format_rows([], header=True))
            fh.flush()
        for cell in run_grid(grid, workers=workers, cells=todo):
            row = cell_to_row(cell, resolve_config(grid.config, cell.delta), grid)
            fh.write(format_rows([row]))
            fh.flush()
            manifest["cells_completed"] += 1
    manifest["finished"] = _now()
    _dump_json(out / MANIFEST_JSON, manifest)
    ran = manifest["cells_completed"] - done
    print(f"cells run: {ran}, skipped: {done}, remaining: {len(cells) - manifest['cells_completed']} "
          f"-> {csv_path}")
    return EXIT_OK


# ---------------------------------------------------------------- fit

def _group_rows(rows):
    groups = OrderedDict()
    for row in rows:
        key = (row["N"], row["algo"], row["policy"], row["kappa"],
               row["suite_matrix"], row["suite_coeff"], row["delta"])
        groups.setdefault(key, []).append(row)
    return groups


def fit_rows(rows):
    """Fit one estimate per group of rows; returns (estimates, undefined)."""
    estimates, undefined = [], []
    for key, group in _group_rows(rows).items():
        N, algo, policy, kappa, matrix, coeff, delta = key
        meta = {"N": N, "delta": delta, "config": {"algo": algo, "policy": policy, "kappa": kappa},
                "suite": {"matrix": matrix, "coeff": coeff}}
        try:
            est = fit_logistic([row_to_cell(r) for r in group])
        except EstimateUndefinedError as exc:
            undefined.append(dict(meta, error="estimate-undefined", detail=str(exc)))
            continue
        d = est.to_dict()
        d.update(meta)
        estimates.append(d)
    return estimates, undefined


def _sibling_json(csv_path, name):
    p = Path(csv_path).parent / name
    if p.exists():
        try:
            return json.loads(p.read_text())
        except json.JSONDecodeError:
            return None
    return None


def cmd_fit(args):
    try:
        rows = read_cells_csv(args.cells)
        raw = Path(args.cells).read_bytes()
    except OSError as exc:
        raise CLIError(f"cannot read {args.cells}: {exc}", EXIT_IO)
    except ValueError as exc:
        raise CLIError(f"parse error: {exc}", EXIT_CONFIG)
    manifest = _sibling_json(args.cells, MANIFEST_JSON) or {}
    grid_doc = _sibling_json(args.cells, CONFIG_JSON) or {}
    estimates, undefined = fit_rows(rows)
    doc = {
        "tool_version": __version__,
        "grid_fingerprint": manifest.get("grid_fingerprint"),
        "source_sha256": hashlib.sha256(raw).hexdigest(),
        "tol": grid_doc.get("tol"),
        "estimates": estimates,
        "undefined": undefined,
    }
    out = Path(args.out) if args.out else Path(args.cells).with_name("estimates.json")
    _dump_json(out, doc)
    for e in estimates:
        print(f"delta={e['delta']:g} {e['config']['algo']} {e['suite']['matrix']}/{e['suite']['coeff']}: "
              f"rho*={e['rho_star']:.4f} ({e['method']})")
    for u in undefined:
        print(f"delta={u['delta']:g} {u['config']['algo']}: estimate undefined ({u['detail']})")
    return EXIT_PARTIAL if undefined else EXIT_OK


# ---------------------------------------------------------------- tune

def cmd_tune(args):
    doc = _load_doc(args)
    try:
        theta_grid = theta_grid_from_config(doc)
        if not theta_grid:
            raise ConfigError("tune needs a nonempty theta_grid", ["theta_grid: missing or empty"])
        suites = suites_from_config(doc) if args.maximin else []
        if args.maximin and len(suites) < 2:
            raise ConfigError("--maximin needs at least two suites", ["suites: need >= 2 entries"])
        grids = [grid_from_config(doc, s) for s in suites] or [grid_from_config(doc)]
    except ConfigError as exc:
        raise CLIError(_config_message(exc), EXIT_CONFIG)
    out = Path(args.out) if args.out else _out_root() / "tune"
    out.mkdir(parents=True, exist_ok=True)
    workers = args.workers if args.workers else default_workers()
    winners, audit, rows = [], [], []
    failed = False
    for delta in grids[0].deltas:
        try:
            if args.maximin:
                result = maximin_tune(grids, delta, theta_grid, workers=workers)
                matrix = result.matrix
            else:
                result = tune(grids[0], delta, theta_grid, workers=workers)
                matrix = [[e] for e in result.estimates]
        except TuningFailedError as exc:
            failed = True
            winners.append({"delta": delta, "error": "tuning-failed", "detail": str(exc)})
            continue
        for ti, row in enumerate(matrix):
            cfg = resolve_config(theta_grid[ti], delta)
            entry = {"delta": delta, "theta_index": ti, "config": cfg.to_dict(), "per_suite": []}
            values = []
            for si, est in enumerate(row):
                suite = grids[si].suite.to_dict()
                if isinstance(est, Exception):
                    entry["per_suite"].append({"suite": suite, "error": "estimate-undefined",
                                               "detail": str(est)})
                    continue
                entry["per_suite"].append(est.to_dict())
                values.append((est.rho_star, si))
                rows.extend(cell_to_row(c, cfg, grids[si]) for c in est.cells)
            if args.maximin and len(values) == len(row):
                entry["least_favorable"] = grids[min(values)[1]].suite.to_dict()
            audit.append(entry)
        winner_est = result.estimates if args.maximin else [result.estimate]
        winners.append({
            "delta": delta,
            "config": resolve_config(result.config, delta).to_dict(),
            "theta_index": theta_grid.index(result.config),
            "rho_star": min(e.rho_star for e in winner_est),
        })
    doc_out = {
        "tool_version": __version__,
        "grid_fingerprint": grids[0].fingerprint(),
        "tol": grids[0].tol,
        "N": grids[0].N,
        "maximin": bool(args.maximin),
        "winners": winners,
        "estimates": audit,
    }
    _dump_json(out / "winners.json", doc_out)
    (out / CELLS_CSV).write_text(format_rows(rows, header=True))
    for w in winners:
        if "error" in w:
            print(f"delta={w['delta']:g}: {w['detail']}")
        else:
            print(f"delta={w['delta']:g}: winner theta[{w['theta_index']}] {w['config']} "
                  f"rho*={w['rho_star']:.4f}")
    return EXIT_PARTIAL if failed else EXIT_OK


# ---------------------------------------------------------------- time

TIME_FIELDS = ("N", "delta", "rho", "algo", "suite", "mean_seconds", "mean_iterations")


def time_solver(algo, suite, N, delta, rho, reps, fast_ops=False, seed=0):
    """Mean wall time and iterations over ``reps`` runs with residual stop 1e-3."""
    n, k = cell_dimensions(N, delta, rho)
    cfg = recommended_config(algo, delta, fast_ops, residual_stop=TIMING_RESIDUAL_STOP)
    seconds, iterations = [], []
    for rep in range(reps):
        inst = generate_instance(suite, n, N, k, seed + rep)
        t0 = time.perf_counter()
        res = solve(inst.op, inst.y, cfg)
        seconds.append(time.perf_counter() - t0)
        iterations.append(res.iterations)
    return float(np.mean(seconds)), float(np.mean(iterations))


def cmd_time(args):
    timing = {}
    suite = ProblemSuite()
    if args.config:
        try:
            doc = load_config(args.config)
        except OSError as exc:
            raise CLIError(f"cannot read config: {exc}", EXIT_IO)
        except ConfigError as exc:
            raise CLIError(_config_message(exc), EXIT_CONFIG)
        timing = doc.get("timing", {})
        if "suite" in doc:
            suite = ProblemSuite.from_dict(doc["suite"])
    if args.suite:
        matrix, _, coeff = args.suite.partition("/")
        suite = ProblemSuite(matrix, coeff or "CARS")
    sizes = [int(s) for s in args.sizes.split(",")] if args.sizes else timing.get("sizes", [2000])
    delta = args.delta if args.delta is not None else timing.get("delta", 0.5)
    rho = args.rho if args.rho is not None else timing.get("rho", 0.2)
    reps = args.reps if args.reps is not None else timing.get("reps", 10)
    algo = Algorithm((args.algo or "IHT").upper())
    fast_ops = bool(args.fast_ops or suite.matrix.is_fast)
    lines = [",".join(TIME_FIELDS)]
    for N in sizes:
        secs, its = time_solver(algo, suite, N, delta, rho, reps, fast_ops, seed=args.seed or 0)
        lines.append(f"{N},{delta!r},{rho!r},{algo.value},{suite.matrix.value}/{suite.coeff.value},"
                     f"{secs!r},{its!r}")
        print(f"N={N} {algo.value} mean {secs:.4f}s, {its:.1f} iterations")
    out = Path(args.out) if args.out else _out_root() / "timing.csv"
    out.write_text("\n".join(lines) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------- report

def _load_estimates(path):
    doc = json.loads(Path(path).read_text())
    if "winners" in doc:
        ests = []
        for w in doc["estimates"]:
            for e in w["per_suite"]:
                if "error" not in e:
                    ests.append(e)
        return doc, ests
    return doc, doc.get("estimates", [])


def ordering_lines(curves):
    """One line per suite ordering algorithms by mean rho* over shared deltas."""
    by_suite = OrderedDict()
    for (algo, suite), pts in curves.items():
        by_suite.setdefault(suite, {})[algo] = pts
    lines = []
    for suite, algos in by_suite.items():
        shared = set.intersection(*(set(p) for p in algos.values()))
        if not shared:
            lines.append(f"ordering at {suite}: no shared delta")
            continue
        means = {a: float(np.mean([p[d] for d in shared])) for a, p in algos.items()}
        ranked = sorted(means, key=lambda a: (-means[a], a))
        deltas = ",".join(f"{d:g}" for d in sorted(shared))
        lines.append(f"ordering at {suite} over delta=[{deltas}]: " + " > ".join(ranked))
    return lines


def cmd_report(args):
    curves = OrderedDict()
    Ns, tols = set(), set()
    for path in args.estimates:
        try:
            doc, ests = _load_estimates(path)
        except (OSError, json.JSONDecodeError) as exc:
            raise CLIError(f"cannot read {path}: {exc}", EXIT_IO)
        tols.add(doc.get("tol"))
        for e in ests:
            Ns.add(e.get("N"))
            suite = f"{e['suite']['matrix']}/{e['suite']['coeff']}"
            key = (e["config"]["algo"], suite)
            if e["delta"] in curves.get(key, {}) and curves[key][e["delta"]] != e["rho_star"]:
                # same algorithm under another configuration: label it by its source file
                key = (f"{e['config']['algo']}:{Path(path).stem}", suite)
            pts = curves.setdefault(key, {})
            if e["delta"] in pts and pts[e["delta"]] != e["rho_star"]:
                raise CLIError(f"conflicting estimates for {key[0]} at delta={e['delta']:g} in {path}",
                               EXIT_CONFIG)
            pts[e["delta"]] = e["rho_star"]
    if len(Ns) > 1 or len(tols) > 1:
        raise CLIError(
            f"refusing to merge estimates with different problem sizes or tolerances "
            f"(N values {sorted(Ns, key=str)}, tol values {sorted(tols, key=str)})", EXIT_CONFIG)
    out = Path(args.out) if args.out else _out_root() / "report"
    out.mkdir(parents=True, exist_ok=True)
    for (algo, suite), pts in curves.items():
        name = f"curve_{algo}_{suite.replace('/', '_')}.tsv"
        body = "".join(f"{d!r}\t{pts[d]!r}\n" for d in sorted(pts))
        (out / name).write_text("delta\trho_star\n" + body)
    lines = ordering_lines(curves)
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    for line in lines:
        print(line)
    return EXIT_OK


# ---------------------------------------------------------------- main

def _config_message(exc):
    problems = getattr(exc, "problems", None)
    if problems:
        return str(exc) + "\n" + "\n".join(f"  - {p}" for p in problems)
    return str(exc)


def build_parser():
    parser = argparse.ArgumentParser(prog="sparsetune", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="recover a sparse x from A and y")
    p.add_argument("matrix", help="matrix file: 'n N' header then column-major reals")
    p.add_argument("y", help="measurement file: one real per line")
    p.add_argument("--algo", default="tst", choices=["ist", "iht", "tst"])
    p.add_argument("--delta", type=float, help="override n/N for the table lookup")
    p.add_argument("--fast-ops", action="store_true")
    p.add_argument("--out", help="solution file (default $SPARSETUNE_OUT/xhat.txt)")
    p.add_argument("--column-tol", type=float, default=1e-6)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("run-grid", help="run a phase-transition grid")
    p.add_argument("--config", help="JSON experiment config (default: desk-scale grid)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--workers", type=int, help="worker processes (default: all CPUs)")
    p.add_argument("--seed", type=int, help="override base_seed")
    p.add_argument("--algo", choices=["ist", "iht", "tst"], help="use the recommended config for ALGO")
    p.add_argument("--fast-ops", action="store_true")
    p.add_argument("--max-cells", type=int, help="stop after this many new cells")
    p.set_defaults(func=cmd_run_grid)

    p = sub.add_parser("fit", help="fit transitions to a cells CSV")
    p.add_argument("cells")
    p.add_argument("--out", help="estimates JSON (default: next to the CSV)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("tune", help="choose the configuration with the highest transition")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--workers", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--maximin", action="store_true", help="maximize the worst transition over suites")
    p.set_defaults(func=cmd_tune, algo=None, fast_ops=False)

    p = sub.add_parser("time", help="time solvers across problem sizes")
    p.add_argument("--config")
    p.add_argument("--sizes", help="comma-separated N values")
    p.add_argument("--algo", choices=["ist", "iht", "tst"])
    p.add_argument("--suite", help="MATRIX/COEFF, e.g. PartialFourier1D/CARS")
    p.add_argument("--delta", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--fast-ops", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_time)

    p = sub.add_parser("report", help="emit curve data from estimate files")
    p.add_argument("estimates", nargs="+")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CLIError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except ConfigError as exc:
        print(f"config error: {_config_message(exc)}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (SparseTuneError, ArithmeticError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
