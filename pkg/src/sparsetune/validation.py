"""Input validation shared by the estimators and the command line."""

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import DimensionError, NormalizationError
from .operators import SensingOperator

COLUMN_TOL = 1e-6


def check_unit_columns(matrix, tol=COLUMN_TOL):
    """Raise ``NormalizationError`` unless every column has norm ``1 +- tol``."""
    norms = np.linalg.norm(matrix, axis=0)
    dev = np.abs(norms - 1.0)
    worst = int(np.argmax(dev))
    if dev[worst] > tol:
        raise NormalizationError(
            f"columns must have unit Euclidean norm; column {worst} has norm {norms[worst]:.6g} "
            f"(tolerance {tol:g}). Normalize A before solving."
        )
    return norms


def check_operator(X, column_tol=COLUMN_TOL):
    """Coerce ``X`` into a ``SensingOperator`` with unit-norm columns."""
    if isinstance(X, SensingOperator):
        if X.kind == "dense":
            check_unit_columns(X.matrix, column_tol)
        return X
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    n, N = X.shape
    if n > N:
        raise DimensionError(f"expected an underdetermined system (n <= N), got shape {X.shape}")
    check_unit_columns(X, column_tol)
    return SensingOperator.from_dense(X)


def check_measurements(op, y):
    """Return ``y`` as a 1-D array of length ``op.n``."""
    y = np.asarray(y)
    if y.ndim == 2 and 1 in y.shape:
        y = y.ravel()
    if y.ndim != 1 or y.shape[0] != op.n:
        raise DimensionError(f"y must be a vector of length {op.n}, got shape {y.shape}")
    if np.iscomplexobj(y) and not op.is_complex:
        raise DimensionError("complex measurements need a partial Fourier operator")
    if not np.all(np.isfinite(y)):
        raise ValueError("y contains NaN or infinity")
    return y.astype(complex if op.is_complex else float)
