"""Monte Carlo phase-transition measurement, logistic fitting and tuning.

A grid of ``(delta, rho)`` cells is run with ``M`` random instances each;
per ``delta`` the success counts are fitted with a binomial GLM
``logit(pi) = a + b * rho`` and the transition is read off as ``-a / b``.
"""

import csv
import hashlib
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.special import expit

from ._seeding import ROLE_INSTANCE, ROLE_SHARED_OPERATOR, derive_seed
from .exceptions import (
    ConfigError,
    DimensionError,
    EstimateUndefinedError,
    SparseTuneError,
    TuningFailedError,
)
from .recommended import recommended_config
from .solvers import Algorithm, SolverConfig, solve
from .suites import DEFAULT_TOL, STANDARD_SUITE, ProblemSuite, generate_instance, success

__all__ = [
    "Recommended",
    "ExperimentGrid",
    "TransitionCell",
    "TransitionEstimate",
    "TuningResult",
    "MaximinResult",
    "cell_dimensions",
    "run_cell",
    "run_grid",
    "fit_logistic",
    "estimate_transition",
    "tune",
    "maximin_tune",
    "CSV_FIELDS",
    "cell_to_row",
    "write_cells_csv",
    "read_cells_csv",
]

LOGISTIC = "logistic"
BRACKET = "bracket-fallback"

IRLS_MAX_ITER = 100
IRLS_TOL = 1e-8
SEPARATION_SLOPE = 1e3
_EPS_COUNT = 1e-9

CSV_FIELDS = (
    "delta", "rho", "n", "N", "k", "M", "S", "mean_iterations",
    "algo", "policy", "kappa", "suite_matrix", "suite_coeff", "seed",
)


@dataclass(frozen=True)
class Recommended:
    """Config template that resolves to the tuned configuration at each delta."""

    algo: Algorithm
    fast_ops: bool = False
    max_iter: int = 300
    residual_stop: float = 1e-6

    def __post_init__(self):
        object.__setattr__(self, "algo", Algorithm(self.algo))

    def resolve(self, delta):
        return recommended_config(self.algo, delta, self.fast_ops, self.max_iter, self.residual_stop)

    def to_dict(self):
        return {"recommended": {"algo": self.algo.value, "fast_ops": self.fast_ops,
                                "max_iter": self.max_iter, "residual_stop": self.residual_stop}}


def resolve_config(template, delta):
    return template.resolve(delta) if isinstance(template, Recommended) else template


def config_from_dict(d):
    if "recommended" in d:
        r = d["recommended"]
        return Recommended(Algorithm(r["algo"]), bool(r.get("fast_ops", False)),
                           int(r.get("max_iter", 300)), float(r.get("residual_stop", 1e-6)))
    return SolverConfig.from_dict(d)


def cell_dimensions(N, delta, rho):
    """``n = ceil(delta * N)`` and ``k = ceil(rho * n)``."""
    n = int(math.ceil(delta * N - _EPS_COUNT))
    k = int(math.ceil(rho * n - _EPS_COUNT))
    return n, k


@dataclass(frozen=True)
class ExperimentGrid:
    """A phase-space grid plus everything needed to regenerate its instances.

    ``rhos`` is either one shared sequence or a sequence of per-delta
    sequences aligned with ``deltas``.
    """

    N: int = 200
    deltas: tuple = tuple(round(0.1 * i, 10) for i in range(1, 11))
    rhos: tuple = (0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4)
    M: int = 20
    tol: float = DEFAULT_TOL
    base_seed: int = 0
    suite: ProblemSuite = STANDARD_SUITE
    config: object = Recommended(Algorithm.IHT)
    fresh_operator: bool = True

    def __post_init__(self):
        deltas = tuple(float(d) for d in self.deltas)
        rhos = self.rhos
        if len(rhos) and isinstance(rhos[0], (list, tuple)):
            rhos = tuple(tuple(float(r) for r in row) for row in rhos)
        else:
            rhos = tuple(float(r) for r in rhos)
        object.__setattr__(self, "deltas", deltas)
        object.__setattr__(self, "rhos", rhos)
        problems = self.validate()
        if problems:
            raise ConfigError("invalid experiment grid: " + "; ".join(problems), problems)

    @property
    def per_delta(self):
        return len(self.rhos) > 0 and isinstance(self.rhos[0], tuple)

    def rhos_for(self, delta_index):
        return self.rhos[delta_index] if self.per_delta else self.rhos

    def validate(self):
        problems = []
        if int(self.N) < 1:
            problems.append(f"N: must be >= 1, got {self.N}")
        if int(self.M) < 1:
            problems.append(f"M: must be >= 1, got {self.M}")
        if not self.tol > 0:
            problems.append(f"tol: must be > 0, got {self.tol}")
        if not self.deltas:
            problems.append("deltas: must be nonempty")
        if list(self.deltas) != sorted(self.deltas) or len(set(self.deltas)) != len(self.deltas):
            problems.append("deltas: must be strictly increasing")
        if self.per_delta and len(self.rhos) != len(self.deltas):
            problems.append("rhos: per-delta lists must align with deltas")
        for di, delta in enumerate(self.deltas):
            if not 0.0 < delta <= 1.0:
                problems.append(f"deltas[{di}]: {delta} is outside (0, 1]")
                continue
            rhos = self.rhos_for(di) if (not self.per_delta or di < len(self.rhos)) else ()
            if not rhos:
                problems.append(f"rhos for delta={delta}: must be nonempty")
            if list(rhos) != sorted(rhos) or len(set(rhos)) != len(rhos):
                problems.append(f"rhos for delta={delta}: must be strictly increasing")
            for rho in rhos:
                if not 0.0 < rho < 1.0:
                    problems.append(f"rho={rho} at delta={delta}: outside (0, 1)")
                    continue
                n, k = cell_dimensions(self.N, delta, rho)
                if not (1 <= k <= n <= self.N):
                    problems.append(f"cell (delta={delta}, rho={rho}): k={k}, n={n} invalid for N={self.N}")
        return problems

    def cells(self):
        """Canonical cell order: ``(delta_index, rho_index, delta, rho)``."""
        return [(di, ri, delta, rho)
                for di, delta in enumerate(self.deltas)
                for ri, rho in enumerate(self.rhos_for(di))]

    def index_of(self, delta, rho):
        for di, ri, d, r in self.cells():
            if math.isclose(d, delta, abs_tol=1e-12) and math.isclose(r, rho, abs_tol=1e-12):
                return di, ri
        raise DimensionError(f"cell (delta={delta}, rho={rho}) is not on the grid")

    def to_dict(self):
        return {
            "N": int(self.N),
            "deltas": list(self.deltas),
            "rhos": [list(r) for r in self.rhos] if self.per_delta else list(self.rhos),
            "M": int(self.M),
            "tol": self.tol,
            "base_seed": int(self.base_seed),
            "suite": self.suite.to_dict(),
            "config": self.config.to_dict(),
            "fresh_operator": bool(self.fresh_operator),
        }

    @classmethod
    def from_dict(cls, d):
        default = cls()
        return cls(
            N=int(d.get("N", default.N)),
            deltas=tuple(d.get("deltas", default.deltas)),
            rhos=tuple(tuple(r) if isinstance(r, list) else r for r in d.get("rhos", default.rhos)),
            M=int(d.get("M", default.M)),
            tol=float(d.get("tol", default.tol)),
            base_seed=int(d.get("base_seed", default.base_seed)),
            suite=ProblemSuite.from_dict(d["suite"]) if "suite" in d else default.suite,
            config=config_from_dict(d["config"]) if "config" in d else default.config,
            fresh_operator=bool(d.get("fresh_operator", True)),
        )

    def canonical_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def fingerprint(self):
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


@dataclass
class TransitionCell:
    delta: float
    rho: float
    n: int
    N: int
    k: int
    M: int
    S: int
    mean_iterations: float
    failures: int = 0  # instances whose solve raised (counted as unsuccessful)


def run_cell(grid, delta, rho, config=None):
    """Run the ``M`` instances of one grid cell and count successes.

    Instance ``i`` is seeded from ``(base_seed, delta_index, rho_index, i)``,
    so results depend only on the grid and the configuration. Solver errors
    on an instance (divergence, rank deficiency) count as failures.
    """
    di, ri = grid.index_of(delta, rho)
    n, k = cell_dimensions(grid.N, delta, rho)
    cfg = resolve_config(grid.config if config is None else config, delta)
    cfg = cfg.with_true_sparsity(k)
    shared = None if grid.fresh_operator else derive_seed(grid.base_seed, ROLE_SHARED_OPERATOR, di)
    S = 0
    failures = 0
    iterations = 0
    for i in range(int(grid.M)):
        seed = derive_seed(grid.base_seed, ROLE_INSTANCE, di, ri, i)
        inst = generate_instance(grid.suite, n, grid.N, k, seed, operator_seed=shared)
        try:
            res = solve(inst.op, inst.y, cfg)
        except ConfigError:
            raise
        except (SparseTuneError, ArithmeticError, np.linalg.LinAlgError):
            failures += 1
            iterations += cfg.max_iter
            continue
        iterations += res.iterations
        S += success(inst.x0, res.xhat, grid.tol)
    return TransitionCell(delta, rho, n, grid.N, k, int(grid.M), S, iterations / grid.M, failures)


def _cell_task(args):
    grid, delta, rho, config = args
    return run_cell(grid, delta, rho, config)


def default_workers():
    return os.cpu_count() or 1


def run_grid(grid, config=None, workers=1, skip=(), cells=None):
    """Yield ``TransitionCell`` results in canonical grid order.

    ``skip`` holds ``(delta_index, rho_index)`` keys to leave out (resume);
    ``cells`` optionally restricts the run to a subset of grid cells. With
    ``workers > 1`` cells run in a process pool, but results are still
    yielded in order, so the output never depends on the worker count.
    """
    todo = [(di, ri, d, r) for di, ri, d, r in (cells if cells is not None else grid.cells())
            if (di, ri) not in set(skip)]
    tasks = [(grid, d, r, config) for _, _, d, r in todo]
    if workers <= 1 or len(tasks) <= 1:
        for task in tasks:
            yield _cell_task(task)
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        yield from pool.map(_cell_task, tasks)


@dataclass
class TransitionEstimate:
    delta: float
    a_hat: float
    b_hat: float
    rho_star: float
    method: str
    cells_used: int
    extrapolated: bool = False
    N: int = None
    config: dict = None
    suite: dict = None
    cells: list = field(default_factory=list, repr=False)

    def to_dict(self):
        d = asdict(self)
        d.pop("cells")
        for key in ("a_hat", "b_hat"):
            if d[key] is not None and not math.isfinite(d[key]):
                d[key] = None
        return d


def _bracket(rhos, frac):
    above = rhos[frac > 0.5]
    below = rhos[frac <= 0.5]
    if above.size == 0 or below.size == 0:
        return None
    return 0.5 * (above.max() + below.min())


def _irls(rhos, S, M, start_rho):
    X = np.column_stack([np.ones_like(rhos), rhos])
    beta = np.array([10.0 * start_rho, -10.0])
    for _ in range(IRLS_MAX_ITER):
        p = expit(X @ beta)
        W = M * p * (1.0 - p)
        grad = X.T @ (S - M * p)
        H = X.T @ (W[:, None] * X)
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            return None
        beta = beta + step
        if not np.all(np.isfinite(beta)) or abs(beta[1]) > SEPARATION_SLOPE:
            return None
        if np.max(np.abs(step)) <= IRLS_TOL:
            return beta
    return None


def fit_logistic(cells):
    """Fit ``logit(pi) = a + b * rho`` to cells sharing one delta.

    Uses Newton/IRLS on the binomial likelihood. Falls back to the midpoint
    between the last rho with success rate above 1/2 and the first rho at or
    below 1/2 when the fit diverges (separated data) or has a nonnegative
    slope.

    Raises
    ------
    EstimateUndefinedError
        If neither the fit nor the bracket exists, e.g. all cells succeed.
    """
    cells = sorted(cells, key=lambda c: c.rho)
    if len({c.delta for c in cells}) > 1:
        raise DimensionError("fit_logistic needs cells that share one delta")
    if len({c.rho for c in cells}) < 2:
        raise EstimateUndefinedError("need at least two distinct rho values")
    delta = cells[0].delta
    rhos = np.array([c.rho for c in cells], dtype=float)
    S = np.array([c.S for c in cells], dtype=float)
    M = np.array([c.M for c in cells], dtype=float)
    frac = S / M
    mid = _bracket(rhos, frac)

    beta = None
    if np.any(S > 0) and np.any(S < M):
        beta = _irls(rhos, S, M, mid if mid is not None else float(rhos.mean()))
    if beta is not None and beta[1] < 0:
        a, b = float(beta[0]), float(beta[1])
        raw, method = -a / b, LOGISTIC
    elif mid is not None:
        a = b = math.nan
        raw, method = float(mid), BRACKET
    else:
        what = "success" if np.all(frac > 0.5) else "failure"
        raise EstimateUndefinedError(
            f"delta={delta:g}: all cells are {what}; widen the rho grid")

    uniq = np.unique(rhos)
    step = float(np.min(np.diff(uniq)))
    lo = max(0.0, float(uniq[0]) - step)
    hi = min(1.0, float(uniq[-1]) + step)
    rho_star = min(max(raw, lo), hi)
    return TransitionEstimate(
        delta=float(delta), a_hat=a, b_hat=b, rho_star=float(rho_star), method=method,
        cells_used=len(cells), extrapolated=bool(rho_star != raw),
        N=int(cells[0].N), cells=list(cells),
    )


def _annotate(est, grid, cfg):
    est.config = cfg.to_dict()
    est.suite = grid.suite.to_dict()
    return est


def estimate_transition(grid, delta, config=None, workers=1):
    """Run every cell of ``delta``'s row and fit the transition.

    The cells are attached to the returned estimate as ``estimate.cells``.
    """
    di = grid.deltas.index(float(delta))
    row = [(di, ri, grid.deltas[di], rho) for ri, rho in enumerate(grid.rhos_for(di))]
    cells = list(run_grid(grid, config=config, workers=workers, cells=row))
    est = fit_logistic(cells)
    return _annotate(est, grid, resolve_config(grid.config if config is None else config, delta))


@dataclass
class TuningResult:
    config: SolverConfig
    estimate: TransitionEstimate
    estimates: list  # one TransitionEstimate, or the EstimateUndefinedError, per candidate


def tune(grid, delta, theta_grid, workers=1):
    """Pick the candidate configuration with the highest fitted transition.

    Ties go to the earliest candidate. Every per-candidate outcome is kept
    in ``result.estimates``.
    """
    theta_grid = list(theta_grid)
    if not theta_grid:
        raise ConfigError("theta_grid must be nonempty")
    estimates = []
    best = None
    for idx, cfg in enumerate(theta_grid):
        try:
            est = estimate_transition(grid, delta, cfg, workers=workers)
        except EstimateUndefinedError as exc:
            estimates.append(exc)
            continue
        estimates.append(est)
        if best is None or est.rho_star > estimates[best].rho_star:
            best = idx
    if best is None:
        raise TuningFailedError(f"every candidate gave an undefined transition at delta={delta:g}")
    return TuningResult(theta_grid[best], estimates[best], estimates)


@dataclass
class MaximinResult:
    config: SolverConfig
    estimates: list          # per suite, for the winning candidate
    matrix: list             # [candidate][suite] -> estimate or error
    least_favorable: list    # per candidate: suite index attaining the minimum, or None


def maximin_tune(grids, delta, theta_grid, workers=1):
    """Maximize, over candidates, the minimum transition across suites.

    ``grids`` holds one ``ExperimentGrid`` per problem suite. A candidate
    with an undefined transition at any suite is not eligible.
    """
    grids = list(grids)
    theta_grid = list(theta_grid)
    if not grids:
        raise ConfigError("maximin_tune needs at least one suite")
    if not theta_grid:
        raise ConfigError("theta_grid must be nonempty")
    matrix = []
    least = []
    best, best_value = None, -math.inf
    for idx, cfg in enumerate(theta_grid):
        row = []
        for g in grids:
            try:
                row.append(estimate_transition(g, delta, cfg, workers=workers))
            except EstimateUndefinedError as exc:
                row.append(exc)
        matrix.append(row)
        if any(isinstance(e, Exception) for e in row):
            least.append(None)
            continue
        values = [e.rho_star for e in row]
        worst = int(np.argmin(values))
        least.append(worst)
        if values[worst] > best_value:
            best, best_value = idx, values[worst]
    if best is None:
        raise TuningFailedError(f"no candidate has a defined transition on every suite at delta={delta:g}")
    return MaximinResult(theta_grid[best], matrix[best], matrix, least)


def cell_to_row(cell, cfg, grid):
    return {
        "delta": repr(float(cell.delta)),
        "rho": repr(float(cell.rho)),
        "n": cell.n,
        "N": cell.N,
        "k": cell.k,
        "M": cell.M,
        "S": cell.S,
        "mean_iterations": repr(float(cell.mean_iterations)),
        "algo": cfg.algo.value,
        "policy": str(cfg.policy),
        "kappa": repr(float(cfg.kappa)),
        "suite_matrix": grid.suite.matrix.value,
        "suite_coeff": grid.suite.coeff.value,
        "seed": int(grid.base_seed),
    }


def format_rows(rows, header=False):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    if header:
        writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def write_cells_csv(path, cells, grid, config=None):
    template = grid.config if config is None else config
    rows = [cell_to_row(c, resolve_config(template, c.delta), grid) for c in cells]
    with open(path, "w", newline="") as fh:
        fh.write(format_rows(rows, header=True))


def read_cells_csv(path):
    """Parse a cells CSV into a list of row dicts with typed numeric fields.

    Raises ``ValueError`` naming the offending line on malformed input.
    """
    with open(path, newline="") as fh:
        text = fh.read()
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or tuple(reader.fieldnames) != CSV_FIELDS:
        raise ValueError(f"{path}: line 1: header does not match {','.join(CSV_FIELDS)}")
    rows = []
    for row in reader:
        line = reader.line_num
        try:
            if None in row or any(v is None for v in row.values()):
                raise ValueError("wrong number of fields")
            typed = dict(row)
            for key in ("delta", "rho", "mean_iterations", "kappa"):
                typed[key] = float(row[key])
            for key in ("n", "N", "k", "M", "S", "seed"):
                typed[key] = int(row[key])
            if not 0 <= typed["S"] <= typed["M"]:
                raise ValueError("S must lie in [0, M]")
        except ValueError as exc:
            raise ValueError(f"{path}: line {line}: {exc}") from None
        rows.append(typed)
    return rows


def row_to_cell(row):
    return TransitionCell(row["delta"], row["rho"], row["n"], row["N"], row["k"],
                          row["M"], row["S"], row["mean_iterations"])
