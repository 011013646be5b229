"""Sensing operators: random dense ensembles and partial fast transforms.

All operators map R^N to R^n (or C^n for the partial Fourier ensemble) and
have unit-norm columns. Dense ensembles store the matrix explicitly; the fast
ensembles store only the sorted subset of transform rows and apply the
transform in O(N log N).
"""

from enum import Enum

import numpy as np
from scipy.linalg import solve_triangular

from ._seeding import make_rng
from .exceptions import DimensionError, EnsembleConstraintError, RankError

__all__ = [
    "MatrixEnsemble",
    "SensingOperator",
    "sample_operator",
    "apply_forward",
    "apply_adjoint",
    "least_squares_on_support",
    "fwht",
]


class MatrixEnsemble(str, Enum):
    USE = "USE"
    RSE = "RSE"
    URP = "URP"
    PARTIAL_FOURIER = "PartialFourier1D"
    PARTIAL_HADAMARD = "PartialHadamard1D"

    @property
    def is_fast(self):
        return self in (MatrixEnsemble.PARTIAL_FOURIER, MatrixEnsemble.PARTIAL_HADAMARD)


DENSE = "dense"
PARTIAL_FOURIER = "partial-fourier"
PARTIAL_HADAMARD = "partial-hadamard"
_KINDS = (DENSE, PARTIAL_FOURIER, PARTIAL_HADAMARD)


def _is_power_of_two(N):
    return N >= 1 and (N & (N - 1)) == 0


def fwht(x):
    """Orthonormal fast Walsh-Hadamard transform (Sylvester ordering).

    The transform is its own inverse. ``len(x)`` must be a power of two.
    """
    x = np.asarray(x, dtype=float)
    N = x.shape[0]
    if not _is_power_of_two(N):
        raise EnsembleConstraintError(f"Hadamard transform needs a power-of-two length, got {N}")
    y = x.copy()
    h = 1
    while h < N:
        y = y.reshape(-1, 2, h)
        y = np.stack((y[:, 0, :] + y[:, 1, :], y[:, 0, :] - y[:, 1, :]), axis=1)
        h *= 2
    return y.reshape(N) / np.sqrt(N)


class SensingOperator:
    """An ``n x N`` linear map with unit-norm columns.

    Instances are immutable; the stored arrays are flagged read-only.

    Parameters
    ----------
    n, N : int
        Number of measurements and signal length.
    kind : {"dense", "partial-fourier", "partial-hadamard"}
    matrix : ndarray of shape (n, N), optional
        Explicit matrix for ``kind="dense"``.
    rows : ndarray of int, optional
        Sorted distinct transform rows for the fast kinds.
    """

    __slots__ = ("n", "N", "kind", "matrix", "rows", "_scale")

    def __init__(self, n, N, kind, matrix=None, rows=None):
        n, N = int(n), int(N)
        if not 1 <= n <= N:
            raise DimensionError(f"need 1 <= n <= N, got n={n}, N={N}")
        if kind not in _KINDS:
            raise ValueError(f"unknown operator kind {kind!r}")
        if kind == DENSE:
            matrix = np.array(matrix, dtype=float, copy=True)
            if matrix.shape != (n, N):
                raise DimensionError(f"matrix has shape {matrix.shape}, expected {(n, N)}")
            matrix.setflags(write=False)
            rows = None
        else:
            rows = np.array(rows, dtype=np.int64, copy=True)
            if rows.shape != (n,) or len(np.unique(rows)) != n:
                raise DimensionError("fast operators need exactly n distinct rows")
            if rows.min() < 0 or rows.max() >= N:
                raise DimensionError(f"row indices must lie in [0, {N})")
            if kind == PARTIAL_HADAMARD and not _is_power_of_two(N):
                raise EnsembleConstraintError(f"partial Hadamard needs N a power of two, got {N}")
            rows = np.sort(rows)
            rows.setflags(write=False)
            matrix = None
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "N", N)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "_scale", np.sqrt(N / n))

    def __setattr__(self, name, value):
        raise AttributeError("SensingOperator is immutable")

    def __repr__(self):
        return f"SensingOperator(n={self.n}, N={self.N}, kind={self.kind!r})"

    @classmethod
    def from_dense(cls, matrix):
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim != 2:
            raise DimensionError("a dense operator needs a 2-D matrix")
        return cls(matrix.shape[0], matrix.shape[1], DENSE, matrix=matrix)

    @property
    def shape(self):
        return (self.n, self.N)

    @property
    def is_fast(self):
        return self.kind != DENSE

    @property
    def is_complex(self):
        """Whether measurements are complex (partial Fourier only)."""
        return self.kind == PARTIAL_FOURIER

    def forward(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.N,):
            raise DimensionError(f"expected a vector of length {self.N}, got shape {x.shape}")
        if self.kind == DENSE:
            return self.matrix @ x
        if self.kind == PARTIAL_FOURIER:
            return np.fft.fft(x, norm="ortho")[self.rows] * self._scale
        return fwht(x)[self.rows] * self._scale

    def adjoint(self, r):
        r = np.asarray(r)
        if r.shape != (self.n,):
            raise DimensionError(f"expected a vector of length {self.n}, got shape {r.shape}")
        if self.kind == DENSE:
            if np.iscomplexobj(r):
                raise DimensionError("dense operators take real measurement vectors")
            return self.matrix.T @ r
        if self.kind == PARTIAL_FOURIER:
            z = np.zeros(self.N, dtype=complex)
            z[self.rows] = r
            return np.fft.ifft(z, norm="ortho").real * self._scale
        if np.iscomplexobj(r):
            raise DimensionError("partial Hadamard operators take real measurement vectors")
        z = np.zeros(self.N)
        z[self.rows] = r
        return fwht(z) * self._scale

    def todense(self):
        """Materialize the operator by applying it to every basis vector."""
        if self.kind == DENSE:
            return np.array(self.matrix)
        out = np.empty((self.n, self.N), dtype=complex if self.is_complex else float)
        e = np.zeros(self.N)
        for j in range(self.N):
            e[j] = 1.0
            out[:, j] = self.forward(e)
            e[j] = 0.0
        return out


def _normalize_columns(M):
    return M / np.linalg.norm(M, axis=0, keepdims=True)


def sample_operator(ensemble, n, N, seed):
    """Draw an operator from ``ensemble``; bit-identical for equal arguments.

    USE columns are normalized Gaussian vectors. RSE entries are +-1/sqrt(n).
    URP orthonormalizes the rows of a Gaussian matrix and then rescales the
    columns to unit length. The fast ensembles keep a uniformly random
    n-subset of the rows of the unitary transform, scaled by sqrt(N/n).
    """
    ensemble = MatrixEnsemble(ensemble)
    n, N = int(n), int(N)
    if not 1 <= n <= N:
        raise DimensionError(f"need 1 <= n <= N, got n={n}, N={N}")
    rng = make_rng(seed)
    if ensemble is MatrixEnsemble.USE:
        return SensingOperator(n, N, DENSE, matrix=_normalize_columns(rng.standard_normal((n, N))))
    if ensemble is MatrixEnsemble.RSE:
        signs = rng.integers(0, 2, size=(n, N)) * 2.0 - 1.0
        return SensingOperator(n, N, DENSE, matrix=signs / np.sqrt(n))
    if ensemble is MatrixEnsemble.URP:
        G = rng.standard_normal((N, n))
        Q, _ = np.linalg.qr(G)
        return SensingOperator(n, N, DENSE, matrix=_normalize_columns(Q.T))
    if ensemble is MatrixEnsemble.PARTIAL_FOURIER:
        if N < 2:
            raise EnsembleConstraintError("partial Fourier needs N >= 2")
        rows = np.sort(rng.choice(N, size=n, replace=False))
        return SensingOperator(n, N, PARTIAL_FOURIER, rows=rows)
    if not _is_power_of_two(N):
        raise EnsembleConstraintError(f"partial Hadamard needs N a power of two, got {N}")
    rows = np.sort(rng.choice(N, size=n, replace=False))
    return SensingOperator(n, N, PARTIAL_HADAMARD, rows=rows)


def apply_forward(op, x):
    """Return ``A @ x``."""
    return op.forward(x)


def apply_adjoint(op, r):
    """Return ``A' r`` (real part of ``A^H r`` for partial Fourier)."""
    return op.adjoint(r)


def _check_support(op, support):
    support = np.asarray(support, dtype=np.int64).ravel()
    if support.size < 1:
        raise DimensionError("support must be nonempty")
    if support.size > op.n:
        raise DimensionError(
            f"support of size {support.size} exceeds n={op.n}; shrink it before solving"
        )
    if len(np.unique(support)) != support.size:
        raise DimensionError("support indices must be distinct")
    if support.min() < 0 or support.max() >= op.N:
        raise DimensionError(f"support indices must lie in [0, {op.N})")
    return support


def _cg_normal_equations(op, support, y, tol, max_iter):
    # Conjugate gradients on Re(A_I^H A_I) w = Re(A_I^H y).
    buf = np.zeros(op.N)

    def gram(w):
        buf[:] = 0.0
        buf[support] = w
        return op.adjoint(op.forward(buf))[support]

    b = op.adjoint(y)[support]
    bnorm = np.linalg.norm(b)
    w = np.zeros(support.size)
    if bnorm == 0.0:
        return w
    r = b.copy()
    p = r.copy()
    rr = r @ r
    for _ in range(max_iter):
        Gp = gram(p)
        curv = p @ Gp
        if not curv > 1e-14 * (p @ p):
            raise RankError(
                f"normal equations are singular on a support of size {support.size}",
                support_size=int(support.size),
            )
        step = rr / curv
        w += step * p
        r -= step * Gp
        rr_new = r @ r
        if np.sqrt(rr_new) <= tol * bnorm:
            break
        p = r + (rr_new / rr) * p
        rr = rr_new
    return w


def least_squares_on_support(op, support, y, tol=1e-10):
    """Minimize ``||A_I w - y||`` over real ``w`` for the columns ``I = support``.

    Dense operators use a QR factorization of the submatrix. Fast operators
    run conjugate gradients on the normal equations, stopping once the
    normal-equation residual falls below ``tol`` relative to the right-hand
    side, or after ``4 * |I|`` iterations.

    Returns
    -------
    w : ndarray of shape (len(support),)
        Coefficients in the order of ``support``.

    Raises
    ------
    DimensionError
        If the support is empty, has repeats, or is larger than ``n``.
    RankError
        If the restricted system is numerically rank deficient.
    """
    support = _check_support(op, support)
    y = np.asarray(y)
    if y.shape != (op.n,):
        raise DimensionError(f"expected y of length {op.n}, got shape {y.shape}")
    if op.is_fast:
        return _cg_normal_equations(op, support, y, tol, 4 * support.size)
    Q, R = np.linalg.qr(op.matrix[:, support])
    diag = np.abs(np.diag(R))
    if diag.min() <= 1e-10 * max(diag.max(), 1.0):
        raise RankError(
            f"submatrix on a support of size {support.size} is numerically singular",
            support_size=int(support.size),
        )
    return solve_triangular(R, Q.T @ y)
