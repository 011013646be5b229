"""Problem suites: coefficient ensembles, instance generation, success rule."""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from ._seeding import (
    ROLE_AMPLITUDES,
    ROLE_COEFFICIENTS,
    ROLE_OPERATOR,
    ROLE_SUPPORT,
    derive_seed,
    make_rng,
)
from .exceptions import DimensionError
from .operators import MatrixEnsemble, SensingOperator, sample_operator

__all__ = [
    "CoefficientEnsemble",
    "ProblemSuite",
    "ProblemInstance",
    "STANDARD_SUITE",
    "sample_sparse_vector",
    "generate_instance",
    "relative_error",
    "success",
]

DEFAULT_TOL = 1e-2


class CoefficientEnsemble(str, Enum):
    CARS = "CARS"
    DOUBLE_EXPONENTIAL = "DoubleExponential"
    CAUCHY = "Cauchy"
    UNIFORM_SYM = "UniformSym"


@dataclass(frozen=True)
class ProblemSuite:
    matrix: MatrixEnsemble = MatrixEnsemble.USE
    coeff: CoefficientEnsemble = CoefficientEnsemble.CARS

    def __post_init__(self):
        object.__setattr__(self, "matrix", MatrixEnsemble(self.matrix))
        object.__setattr__(self, "coeff", CoefficientEnsemble(self.coeff))

    def to_dict(self):
        return {"matrix": self.matrix.value, "coeff": self.coeff.value}

    @classmethod
    def from_dict(cls, d):
        return cls(MatrixEnsemble(d["matrix"]), CoefficientEnsemble(d["coeff"]))

    def __str__(self):
        return f"({self.matrix.value}, {self.coeff.value})"


STANDARD_SUITE = ProblemSuite(MatrixEnsemble.USE, CoefficientEnsemble.CARS)


@dataclass(frozen=True)
class ProblemInstance:
    op: SensingOperator
    x0: np.ndarray
    y: np.ndarray
    k: int
    seed: int


def _draw_amplitudes(coeff, k, rng):
    if coeff is CoefficientEnsemble.CARS:
        return rng.integers(0, 2, size=k) * 2.0 - 1.0
    if coeff is CoefficientEnsemble.DOUBLE_EXPONENTIAL:
        draw = lambda m: rng.laplace(size=m)
    elif coeff is CoefficientEnsemble.CAUCHY:
        draw = lambda m: rng.standard_cauchy(size=m)
    else:
        draw = lambda m: rng.uniform(-1.0, 1.0, size=m)
    values = draw(k)
    # zero draws have probability zero but would break the k-sparsity invariant
    zeros = np.flatnonzero(values == 0.0)
    while zeros.size:
        values[zeros] = draw(zeros.size)
        zeros = np.flatnonzero(values == 0.0)
    return values


def sample_sparse_vector(N, k, coeff, seed):
    """Return a length-``N`` vector with exactly ``k`` nonzeros.

    The support is a uniformly random ``k``-subset; amplitudes are iid from
    ``coeff`` (CARS gives +-1 with fair random signs).
    """
    N, k = int(N), int(k)
    coeff = CoefficientEnsemble(coeff)
    if not 0 <= k <= N:
        raise DimensionError(f"need 0 <= k <= N, got k={k}, N={N}")
    x = np.zeros(N)
    if k == 0:
        return x
    support = make_rng(seed, ROLE_SUPPORT).choice(N, size=k, replace=False)
    x[support] = _draw_amplitudes(coeff, k, make_rng(seed, ROLE_AMPLITUDES))
    return x


def generate_instance(suite, n, N, k, seed, operator_seed=None):
    """Draw ``(A, x0, y = A x0)`` from ``suite``.

    The operator and coefficient streams are derived independently from
    ``seed``. Pass ``operator_seed`` to reuse one operator across instances.
    """
    n, N, k = int(n), int(N), int(k)
    if not 1 <= k <= n <= N:
        raise DimensionError(f"need 1 <= k <= n <= N, got k={k}, n={n}, N={N}")
    if operator_seed is None:
        operator_seed = derive_seed(seed, ROLE_OPERATOR)
    op = sample_operator(suite.matrix, n, N, operator_seed)
    x0 = sample_sparse_vector(N, k, suite.coeff, derive_seed(seed, ROLE_COEFFICIENTS))
    return ProblemInstance(op=op, x0=x0, y=op.forward(x0), k=k, seed=int(seed))


def relative_error(x0, xhat):
    x0 = np.asarray(x0, dtype=float)
    xhat = np.asarray(xhat, dtype=float)
    if x0.shape != xhat.shape:
        raise DimensionError(f"shape mismatch: {x0.shape} vs {xhat.shape}")
    denom = np.linalg.norm(x0)
    if denom == 0.0:
        raise ZeroDivisionError("relative error is undefined for an all-zero x0")
    return float(np.linalg.norm(x0 - xhat) / denom)


def success(x0, xhat, tol=DEFAULT_TOL):
    """True iff ``||x0 - xhat|| / ||x0|| <= tol``."""
    err = relative_error(x0, xhat)
    return bool(err <= tol)
