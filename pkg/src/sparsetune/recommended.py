"""Embedded tuning tables and the no-free-parameter configurations built from them.

Each table maps the undersampling ratio ``delta = n / N`` to the tuned
false-alarm rate (IST, IHT) or the assumed transition fraction (TST), and
records the measured transition ``rho`` for reference. Values between grid
points are linearly interpolated; outside the grid the endpoint is used.
"""

import numpy as np

from .solvers import DEFAULT_MAX_ITER, DEFAULT_RESIDUAL_STOP, Algorithm, SolverConfig
from .thresholding import FAR, FixedRho

__all__ = ["TABLES", "recommended_config", "table_value"]

# dense random ensembles, kappa = 0.6
IST_DENSE = {
    "delta": (0.05, 0.11, 0.21, 0.31, 0.41, 0.5, 0.6, 0.7, 0.8, 0.93),
    "rho": (0.124, 0.13, 0.16, 0.18, 0.2, 0.22, 0.23, 0.25, 0.27, 0.29),
    "far": (0.02, 0.037, 0.07, 0.12, 0.16, 0.2, 0.25, 0.32, 0.37, 0.42),
}

# dense random ensembles, kappa = 0.65; source values given as 100 * FAR
IHT_DENSE = {
    "delta": (0.05, 0.11, 0.21, 0.41, 0.5, 0.6, 0.7, 0.8, 0.93),
    "rho": (0.12, 0.16, 0.18, 0.25, 0.28, 0.31, 0.34, 0.38, 0.41),
    "far": tuple(v / 100 for v in (0.15, 0.2, 0.4, 1.1, 1.5, 2, 2.7, 3.5, 4.3)),
}

# alpha = beta = 1, kappa = 1
TST_DENSE = {
    "delta": (0.05, 0.11, 0.21, 0.31, 0.41, 0.5, 0.6, 0.7, 0.8, 0.93),
    "rho": (0.124, 0.17, 0.22, 0.26, 0.30, 0.33, 0.368, 0.4, 0.44, 0.48),
}

# partial Fourier, kappa = 1
IST_FAST = {
    "delta": (0.11, 0.21, 0.31, 0.41, 0.5, 0.6, 0.7, 0.8, 0.9),
    "rho": (0.092, 0.16, 0.21, 0.26, 0.31, 0.37, 0.41, 0.44, 0.48),
    "far": (0.0209, 0.0736, 0.13, 0.19, 0.26, 0.32, 0.32, 0.32, 0.32),
}

# partial Fourier, kappa = 1; source values given as 1000 * FAR
IHT_FAST = {
    "delta": (0.05, 0.11, 0.21, 0.31, 0.41, 0.5, 0.6, 0.7, 0.8),
    "rho": (0.056, 0.14, 0.2, 0.24, 0.27, 0.3, 0.32, 0.34, 0.38),
    "far": tuple(v / 1000 for v in (0.3, 0.4, 1.8, 2.9, 3.8, 5, 5, 5, 5)),
}

TABLES = {
    ("IST", False): IST_DENSE,
    ("IHT", False): IHT_DENSE,
    ("TST", False): TST_DENSE,
    ("IST", True): IST_FAST,
    ("IHT", True): IHT_FAST,
    # there is no fast-operator TST table; the dense one is reused
    ("TST", True): TST_DENSE,
}

KAPPA = {
    ("IST", False): 0.6,
    ("IHT", False): 0.65,
    ("TST", False): 1.0,
    ("IST", True): 1.0,
    ("IHT", True): 1.0,
    ("TST", True): 1.0,
}


def table_value(table, column, delta):
    """Piecewise-linear lookup of ``column`` at ``delta``, clamped to the grid."""
    return float(np.interp(delta, table["delta"], table[column]))


def recommended_config(algo, delta, fast_ops=False, max_iter=DEFAULT_MAX_ITER,
                       residual_stop=DEFAULT_RESIDUAL_STOP):
    """Tuned configuration for ``algo`` at undersampling ratio ``delta``.

    Nothing about the unknown signal is required: IST and IHT get a tuned
    false-alarm rate, TST gets the tabulated transition fraction as its
    assumed sparsity with ``alpha = beta = 1``.
    """
    algo = Algorithm(algo)
    key = (algo.value, bool(fast_ops))
    table = TABLES[key]
    if algo is Algorithm.TST:
        policy = FixedRho(table_value(table, "rho", delta), 1.0, 1.0)
    else:
        policy = FAR(table_value(table, "far", delta))
    return SolverConfig(algo, KAPPA[key], policy, max_iter=max_iter, residual_stop=residual_stop)
