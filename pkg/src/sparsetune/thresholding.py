"""Scalar nonlinearities and threshold selection rules."""

from dataclasses import dataclass
from statistics import NormalDist
import math

import numpy as np

from .exceptions import ConfigError, DegenerateThresholdError

__all__ = [
    "soft_threshold",
    "hard_threshold",
    "keep_largest",
    "far_to_lambda",
    "robust_sigma",
    "FAR",
    "OracleK",
    "FixedRho",
    "policy_from_dict",
    "keep_count",
    "select_threshold",
    "SINGLE",
    "TST_STAGE1",
    "TST_STAGE2",
]

SINGLE = "single"
TST_STAGE1 = "tst_stage1"
TST_STAGE2 = "tst_stage2"
_STAGES = (SINGLE, TST_STAGE1, TST_STAGE2)

MAD_TO_SIGMA = 0.6745
_EPS_COUNT = 1e-9  # guards floor/ceil of products like 0.33 * 100 against rounding


def soft_threshold(v, t):
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def hard_threshold(v, t):
    """Zero every entry with ``|v_j| <= t`` (the comparison is strict)."""
    v = np.asarray(v, dtype=float)
    return np.where(np.abs(v) > t, v, 0.0)


def _top_indices(v, m):
    # magnitude descending, index ascending on ties
    return np.argsort(-np.abs(v), kind="stable")[:m]


def keep_largest(v, m):
    """Keep the ``m`` largest-magnitude entries of ``v`` and zero the rest.

    Ties at the cutoff go to the lower index.
    """
    v = np.asarray(v, dtype=float)
    out = np.zeros_like(v)
    idx = _top_indices(v, m)
    out[idx] = v[idx]
    return out


def far_to_lambda(far):
    """Threshold multiplier ``lam`` solving ``far = 2 * Phi(-lam)``."""
    far = float(far)
    if not 0.0 < far <= 1.0:
        raise ValueError(f"false-alarm rate must lie in (0, 1], got {far}")
    if far == 1.0:
        return 0.0
    return -NormalDist().inv_cdf(far / 2.0)


def robust_sigma(v):
    """Normal-consistent median absolute deviation, ``MAD / 0.6745``."""
    v = np.asarray(v, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("robust_sigma needs a nonempty vector")
    return float(np.median(np.abs(v - np.median(v))) / MAD_TO_SIGMA)


@dataclass(frozen=True)
class FAR:
    """Interference heuristic: ``t = far_to_lambda(far) * sigma_hat``."""

    far: float

    def __post_init__(self):
        if not 0.0 < self.far < 1.0:
            raise ConfigError(f"FAR must lie in (0, 1), got {self.far}")

    def to_dict(self):
        return {"type": "FAR", "far": self.far}

    def __str__(self):
        return f"FAR({self.far:g})"


@dataclass(frozen=True)
class OracleK:
    """Order-statistic thresholds from a known sparsity ``k``.

    ``k=None`` defers the choice to the experiment runner, which substitutes
    each instance's true sparsity.
    """

    k: int = None
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if self.k is not None and int(self.k) < 1:
            raise ConfigError(f"OracleK needs k >= 1, got {self.k}")
        if self.alpha < 1 or self.beta < 1:
            raise ConfigError(f"alpha and beta must be >= 1, got {self.alpha}, {self.beta}")

    def to_dict(self):
        return {"type": "OracleK", "k": self.k, "alpha": self.alpha, "beta": self.beta}

    def __str__(self):
        k = "true" if self.k is None else self.k
        return f"OracleK(k={k};a={self.alpha:g};b={self.beta:g})"


@dataclass(frozen=True)
class FixedRho:
    """Assumed transition fraction: ``k_eff = floor(rho_star * n)``."""

    rho_star: float
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.rho_star < 1.0:
            raise ConfigError(f"rho_star must lie in (0, 1), got {self.rho_star}")
        if self.alpha < 1 or self.beta < 1:
            raise ConfigError(f"alpha and beta must be >= 1, got {self.alpha}, {self.beta}")

    def to_dict(self):
        return {"type": "FixedRho", "rho_star": self.rho_star, "alpha": self.alpha, "beta": self.beta}

    def __str__(self):
        return f"FixedRho({self.rho_star:g};a={self.alpha:g};b={self.beta:g})"


def policy_from_dict(d):
    kind = d.get("type")
    if kind == "FAR":
        return FAR(float(d["far"]))
    if kind == "OracleK":
        k = d.get("k")
        return OracleK(None if k is None else int(k), float(d.get("alpha", 1)), float(d.get("beta", 1)))
    if kind == "FixedRho":
        return FixedRho(float(d["rho_star"]), float(d.get("alpha", 1)), float(d.get("beta", 1)))
    raise ConfigError(f"unknown threshold policy type {kind!r}")


def effective_sparsity(policy, n):
    if isinstance(policy, OracleK):
        if policy.k is None:
            raise ConfigError("OracleK policy has no k; substitute the true sparsity first")
        return int(policy.k)
    return int(math.floor(policy.rho_star * n + _EPS_COUNT))


def keep_count(policy, stage, n):
    """Number of entries an order-statistic policy keeps at ``stage``.

    Returns ``None`` for the FAR policy, which has no fixed count.
    """
    if stage not in _STAGES:
        raise ValueError(f"unknown stage {stage!r}")
    if isinstance(policy, FAR):
        return None
    k_eff = effective_sparsity(policy, n)
    if stage == TST_STAGE1:
        return int(math.ceil(policy.alpha * k_eff - _EPS_COUNT))
    if stage == TST_STAGE2:
        return int(math.ceil(policy.beta * k_eff - _EPS_COUNT))
    return k_eff


def select_threshold(policy, stage, candidate, n, noise=None):
    """Threshold for ``candidate`` under ``policy`` at ``stage``.

    For FAR this is ``lambda * sigma_hat``, with ``sigma_hat`` the robust
    scale of ``noise`` when given (the solvers pass the interference term
    ``kappa * A'r``) and of ``candidate`` otherwise. For the order-statistic
    policies it is the ``(m+1)``-th largest magnitude, where ``m`` is the
    keep count.
    """
    candidate = np.asarray(candidate, dtype=float)
    if candidate.size == 0:
        raise ValueError("candidate vector is empty")
    if isinstance(policy, FAR):
        return far_to_lambda(policy.far) * robust_sigma(candidate if noise is None else noise)
    m = keep_count(policy, stage, n)
    if m < 1:
        raise DegenerateThresholdError(f"policy {policy} keeps no entries at n={n}")
    if m >= candidate.size:
        raise DegenerateThresholdError(
            f"keep count {m} is not smaller than the candidate length {candidate.size}"
        )
    mags = np.sort(np.abs(candidate))[::-1]
    return float(mags[m])
