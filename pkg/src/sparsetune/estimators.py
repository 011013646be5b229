"""scikit-learn style wrappers around the thresholding solvers.

The sensing matrix plays the role of ``X`` (shape ``(n, N)``, one row per
measurement) and the sparse solution is stored in ``coef_``, in the same
way as sklearn's linear models. ``X`` may also be a ``SensingOperator``,
which lets the fast partial Fourier/Hadamard operators go through the same
interface.
"""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .recommended import recommended_config
from .solvers import DEFAULT_MAX_ITER, DEFAULT_RESIDUAL_STOP, Algorithm, SolverConfig, solve
from .thresholding import FAR, FixedRho, OracleK
from .validation import COLUMN_TOL, check_measurements, check_operator

__all__ = ["IterativeThresholding", "TwoStageThresholding"]


class _ThresholdingRegressor(RegressorMixin, BaseEstimator):

    def _make_config(self, delta):
        raise NotImplementedError

    def fit(self, X, y):
        op = check_operator(X, self.column_tol)
        y = check_measurements(op, y)
        self.delta_ = op.n / op.N
        self.config_ = self._make_config(self.delta_)
        result = solve(op, y, self.config_)
        self.coef_ = result.xhat
        self.n_iter_ = result.iterations
        self.residual_ = result.final_relative_residual
        self.converged_ = result.converged
        self.n_features_in_ = op.N
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        op = check_operator(X, np.inf)
        return op.forward(self.coef_)

    @property
    def support_(self):
        check_is_fitted(self, "coef_")
        return np.flatnonzero(self.coef_)


class IterativeThresholding(_ThresholdingRegressor):
    """Iterative soft (IST) or hard (IHT) thresholding.

    Parameters left at ``None`` are taken from the tuned tables at
    ``delta = n / N``, so ``IterativeThresholding().fit(A, y)`` needs no
    tuning at all.

    Parameters
    ----------
    algo : {"IHT", "IST"}
    kappa : float, optional
        Relaxation parameter in (0, 1].
    far : float, optional
        False-alarm rate controlling the threshold.
    fast_ops : bool
        Use the tables tuned for partial Fourier operators.
    max_iter : int
    residual_stop : float
        Stop once ``||y - A x|| / ||y||`` falls to this value.
    column_tol : float
        Allowed deviation of the column norms of ``X`` from 1.

    Attributes
    ----------
    coef_ : ndarray of shape (N,)
    n_iter_ : int
    residual_ : float
    converged_ : bool
    config_ : SolverConfig
    """

    def __init__(self, algo="IHT", kappa=None, far=None, fast_ops=False,
                 max_iter=DEFAULT_MAX_ITER, residual_stop=DEFAULT_RESIDUAL_STOP,
                 column_tol=COLUMN_TOL):
        self.algo = algo
        self.kappa = kappa
        self.far = far
        self.fast_ops = fast_ops
        self.max_iter = max_iter
        self.residual_stop = residual_stop
        self.column_tol = column_tol

    def _make_config(self, delta):
        algo = Algorithm(self.algo)
        if algo is Algorithm.TST:
            raise ValueError("use TwoStageThresholding for TST")
        base = recommended_config(algo, delta, self.fast_ops)
        kappa = base.kappa if self.kappa is None else self.kappa
        policy = base.policy if self.far is None else FAR(self.far)
        return SolverConfig(algo, kappa, policy, self.max_iter, self.residual_stop)


class TwoStageThresholding(_ThresholdingRegressor):
    """Two-stage thresholding (subspace pursuit / CoSaMP family).

    Without ``sparsity`` or ``rho_star`` the assumed sparsity is
    ``floor(rho * n)`` with ``rho`` read from the tuned table at ``n / N``.
    Passing ``sparsity`` gives the oracle variant with a known ``k``.
    """

    def __init__(self, alpha=1.0, beta=1.0, rho_star=None, sparsity=None, kappa=1.0,
                 max_iter=DEFAULT_MAX_ITER, residual_stop=DEFAULT_RESIDUAL_STOP,
                 column_tol=COLUMN_TOL):
        self.alpha = alpha
        self.beta = beta
        self.rho_star = rho_star
        self.sparsity = sparsity
        self.kappa = kappa
        self.max_iter = max_iter
        self.residual_stop = residual_stop
        self.column_tol = column_tol

    def _make_config(self, delta):
        if self.sparsity is not None:
            policy = OracleK(int(self.sparsity), self.alpha, self.beta)
        else:
            rho = self.rho_star
            if rho is None:
                rho = recommended_config(Algorithm.TST, delta).policy.rho_star
            policy = FixedRho(rho, self.alpha, self.beta)
        return SolverConfig(Algorithm.TST, self.kappa, policy, self.max_iter, self.residual_stop)
