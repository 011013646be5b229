"""Iterative thresholding solvers: IST, IHT and two-stage thresholding (TST)."""

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .exceptions import ConfigError, DivergenceError, RankError
from .operators import least_squares_on_support
from .thresholding import (
    FAR,
    SINGLE,
    TST_STAGE1,
    TST_STAGE2,
    FixedRho,
    OracleK,
    hard_threshold,
    keep_count,
    keep_largest,
    policy_from_dict,
    select_threshold,
    soft_threshold,
)

__all__ = ["Algorithm", "SolverConfig", "SolveResult", "run_ist_iht", "run_tst", "solve"]

DEFAULT_MAX_ITER = 300
DEFAULT_RESIDUAL_STOP = 1e-6
TIMING_RESIDUAL_STOP = 1e-3


class Algorithm(str, Enum):
    IST = "IST"
    IHT = "IHT"
    TST = "TST"


@dataclass(frozen=True)
class SolverConfig:
    """Fully specified solver parameters ``(algo, kappa, policy)`` plus stopping rules."""

    algo: Algorithm
    kappa: float
    policy: object
    max_iter: int = DEFAULT_MAX_ITER
    residual_stop: float = DEFAULT_RESIDUAL_STOP

    def __post_init__(self):
        object.__setattr__(self, "algo", Algorithm(self.algo))
        if not 0.0 < self.kappa <= 1.0:
            raise ConfigError(f"kappa must lie in (0, 1], got {self.kappa}")
        if int(self.max_iter) < 1:
            raise ConfigError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.residual_stop < 0:
            raise ConfigError(f"residual_stop must be >= 0, got {self.residual_stop}")
        if not isinstance(self.policy, (FAR, OracleK, FixedRho)):
            raise ConfigError(f"unsupported threshold policy {self.policy!r}")

    def with_true_sparsity(self, k):
        """Fill in a deferred ``OracleK(k=None)`` with the instance sparsity."""
        if isinstance(self.policy, OracleK) and self.policy.k is None:
            return replace(self, policy=replace(self.policy, k=int(k)))
        return self

    def to_dict(self):
        return {
            "algo": self.algo.value,
            "kappa": self.kappa,
            "policy": self.policy.to_dict(),
            "max_iter": int(self.max_iter),
            "residual_stop": self.residual_stop,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            algo=Algorithm(d["algo"]),
            kappa=float(d["kappa"]),
            policy=policy_from_dict(d["policy"]),
            max_iter=int(d.get("max_iter", DEFAULT_MAX_ITER)),
            residual_stop=float(d.get("residual_stop", DEFAULT_RESIDUAL_STOP)),
        )

    def label(self):
        return f"{self.algo.value}[kappa={self.kappa:g};{self.policy}]"


@dataclass
class SolveResult:
    xhat: np.ndarray
    iterations: int
    final_relative_residual: float
    converged: bool
    history: list = field(default_factory=list, repr=False)


def _relative(rnorm, ynorm):
    if ynorm > 0:
        return rnorm / ynorm
    return 0.0 if rnorm == 0 else np.inf


def _check_finite(x, iteration):
    if not np.all(np.isfinite(x)):
        raise DivergenceError(f"iterate became non-finite at iteration {iteration}", iteration=iteration)


def run_ist_iht(op, y, cfg, record_history=False):
    """Iterative soft (IST) or hard (IHT) thresholding.

    Starting from ``x = 0`` each iteration forms ``c = x + kappa * A'(y - A x)``
    and thresholds it, soft for IST and hard for IHT. Under a FAR policy the
    noise scale is estimated from ``kappa * A'r`` alone, so the current
    nonzeros of ``x`` do not inflate it. Stops after
    ``cfg.max_iter`` iterations or once ``||y - A x|| / ||y||`` drops to
    ``cfg.residual_stop``.
    """
    if cfg.algo not in (Algorithm.IST, Algorithm.IHT):
        raise ConfigError(f"run_ist_iht cannot run {cfg.algo.value}")
    y = np.asarray(y)
    ynorm = float(np.linalg.norm(y))
    soft = cfg.algo is Algorithm.IST
    count_based = not isinstance(cfg.policy, FAR)
    if count_based:
        m = keep_count(cfg.policy, SINGLE, op.n)
        if not 1 <= m < op.N:
            raise ConfigError(f"keep count {m} is degenerate for N={op.N}")

    x = np.zeros(op.N)
    r = y.copy()
    history = []
    rel = _relative(ynorm, ynorm)
    converged = False
    iteration = 0
    for iteration in range(1, int(cfg.max_iter) + 1):
        step = cfg.kappa * op.adjoint(r)
        c = x + step
        if count_based and not soft:
            x = keep_largest(c, m)
        else:
            t = select_threshold(cfg.policy, SINGLE, c, op.n, noise=step)
            x = soft_threshold(c, t) if soft else hard_threshold(c, t)
        _check_finite(x, iteration)
        r = y - op.forward(x)
        rel = _relative(float(np.linalg.norm(r)), ynorm)
        if record_history:
            history.append(x.copy())
        if rel <= cfg.residual_stop:
            converged = True
            break
    return SolveResult(x, iteration, float(rel), converged, history)


def _merged_support(v, x, c, n):
    support = np.union1d(np.flatnonzero(v), np.flatnonzero(x))
    if support.size > n:
        # keep the n entries of the merged set with the largest |c|
        order = np.argsort(-np.abs(c[support]), kind="stable")[:n]
        support = np.sort(support[order])
    return support


def run_tst(op, y, cfg, record_history=False):
    """Two-stage thresholding.

    Each iteration screens the residual correlations ``kappa * A'(y - A x)``
    down to ``ceil(alpha * k)`` entries, solves least squares on the union
    of that set with the current support, and keeps the ``ceil(beta * k)``
    largest coefficients of the solution. ``alpha = beta = 1`` is subspace
    pursuit; ``alpha = 1, beta = 2`` is the CoSaMP variant.

    Screening the correlations rather than ``x + kappa * A'r`` matters: the
    current nonzeros of ``x`` would otherwise dominate the top entries and
    the merged support would rarely grow past ``supp(x)``.
    """
    if cfg.algo is not Algorithm.TST:
        raise ConfigError(f"run_tst cannot run {cfg.algo.value}")
    y = np.asarray(y)
    ynorm = float(np.linalg.norm(y))
    policy = cfg.policy
    count_based = not isinstance(policy, FAR)
    if count_based:
        m1 = keep_count(policy, TST_STAGE1, op.n)
        m2 = keep_count(policy, TST_STAGE2, op.n)
        if not (1 <= m1 < op.N and 1 <= m2 < op.N):
            raise ConfigError(f"keep counts ({m1}, {m2}) are degenerate for N={op.N}")
        if m2 > op.n:
            raise ConfigError(f"stage-2 keep count {m2} exceeds n={op.n}")

    x = np.zeros(op.N)
    r = y.copy()
    history = []
    rel = _relative(ynorm, ynorm)
    converged = False
    iteration = 0
    for iteration in range(1, int(cfg.max_iter) + 1):
        step = cfg.kappa * op.adjoint(r)
        c = x + step
        if count_based:
            v = keep_largest(step, m1)
        else:
            v = hard_threshold(step, select_threshold(policy, TST_STAGE1, step, op.n))
        support = _merged_support(v, x, c, op.n)
        z = np.zeros(op.N)
        if support.size:
            try:
                z[support] = least_squares_on_support(op, support, y)
            except RankError as exc:
                raise RankError(str(exc), support_size=exc.support_size, iteration=iteration) from exc
        if count_based:
            x = keep_largest(z, m2)
        else:
            x = hard_threshold(z, select_threshold(policy, TST_STAGE2, z, op.n))
        _check_finite(x, iteration)
        r = y - op.forward(x)
        rel = _relative(float(np.linalg.norm(r)), ynorm)
        if record_history:
            history.append(x.copy())
        if rel <= cfg.residual_stop:
            converged = True
            break
    return SolveResult(x, iteration, float(rel), converged, history)


def solve(op, y, cfg, record_history=False):
    """Dispatch on ``cfg.algo``."""
    if cfg.algo is Algorithm.TST:
        return run_tst(op, y, cfg, record_history=record_history)
    return run_ist_iht(op, y, cfg, record_history=record_history)
