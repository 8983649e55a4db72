"""Maximum-likelihood fit of the base-2 logistic transition profile.

``ThresholdLogistic`` follows the scikit-learn estimator protocol so it can
be cloned, grid-searched and inspected with ``get_params``. The model is

    P(SAT | c) = 1 / (1 + 2 ** (gamma * (c - c_hat)))

fitted to binomial SAT counts: ``X`` holds densities, ``y`` the observed SAT
fraction at each density and ``sample_weight`` the number of trials.
"""

import math

import numpy as np
from scipy.optimize import minimize
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted, column_or_1d

LN2 = math.log(2.0)


def _softplus(z):
    return np.logaddexp(0.0, z)


def _sigmoid(z):
    # 1 / (1 + exp(-z)) without overflow
    return np.exp(-_softplus(-z))


def check_binomial_data(X, y, sample_weight=None):
    """Validate densities, SAT fractions and trial counts; return float arrays."""
    X = check_array(X, ensure_2d=False, dtype=np.float64)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise ValueError(f"expected a single density column, got {X.shape[1]}")
        X = X[:, 0]
    y = column_or_1d(np.asarray(y, dtype=np.float64))
    if y.shape[0] != X.shape[0]:
        raise ValueError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
    if np.any((y < 0) | (y > 1)):
        raise ValueError("y must hold SAT fractions in [0, 1]")
    if sample_weight is None:
        w = np.ones_like(y)
    else:
        w = column_or_1d(np.asarray(sample_weight, dtype=np.float64))
        if w.shape != y.shape or np.any(w < 0):
            raise ValueError("sample_weight must be nonnegative with one entry per row")
    return X, y, w


class ThresholdLogistic(BaseEstimator):
    """Binomial MLE of the transition location ``c_hat`` and slope ``gamma``.

    Parameters
    ----------
    c_init : float or None
        Starting location. ``None`` takes the density whose SAT fraction is
        nearest 1/2 (the first such density in ascending order).
    gamma_init : float or None
        Starting slope. ``None`` uses ``4 / (c_max - c_min)``.
    max_iter : int
        Iteration cap for the L-BFGS-B solver.
    tol : float
        Projected-gradient tolerance.

    Attributes
    ----------
    c_hat_, gamma_hat_ : float
        Fitted location and slope.
    log_likelihood_ : float
        Binomial log-likelihood at the optimum, binomial coefficients omitted.
    stderr_c_, stderr_gamma_ : float
        Standard errors from the inverse Fisher information.
    n_iter_ : int
    """

    def __init__(self, c_init=None, gamma_init=None, max_iter=500, tol=1e-10):
        self.c_init = c_init
        self.gamma_init = gamma_init
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y, sample_weight=None):
        c, frac, trials = check_binomial_data(X, y, sample_weight)
        order = np.lexsort((trials, frac, c))
        c, frac, trials = c[order], frac[order], trials[order]
        k = frac * trials
        total = trials.sum()
        if total <= 0:
            raise ValueError("no trials to fit")
        if np.all(k <= 0) or np.all(k >= trials):
            raise ValueError("degenerate sweep: all outcomes identical, threshold not identifiable")

        c0 = self.c_init
        if c0 is None:
            c0 = float(c[np.argmin(np.abs(frac - 0.5))])
        g0 = self.gamma_init
        if g0 is None:
            span = float(c.max() - c.min())
            g0 = 4.0 / span if span > 0 else 1.0
        if g0 <= 0:
            raise ValueError("gamma_init must be positive")
        # rescale so that both coordinates are O(1) for the solver
        scale = max(abs(c0), 1.0)

        def nll(theta):
            loc = theta[0] * scale
            gamma = math.exp(theta[1])
            z = gamma * (c - loc) * LN2
            # log p = -softplus(z), log(1 - p) = z - softplus(z)
            ll = np.sum((trials - k) * z - trials * _softplus(z))
            dz = trials * _sigmoid(z) - (trials - k)  # -dLL/dz
            grad = np.array([
                np.sum(dz * (-gamma * LN2)) * scale,
                np.sum(dz * (c - loc) * LN2) * gamma,
            ])
            return -ll, grad

        theta0 = np.array([c0 / scale, math.log(g0)])
        bounds = [(None, None), (math.log(g0) - 20, math.log(g0) + 20)]
        res = minimize(
            nll, theta0, jac=True, method="L-BFGS-B", bounds=bounds,
            options={"maxiter": self.max_iter, "gtol": self.tol, "ftol": 1e-15},
        )
        self.c_hat_ = float(res.x[0] * scale)
        self.gamma_hat_ = float(math.exp(res.x[1]))
        self.log_likelihood_ = float(-res.fun)
        self.n_iter_ = int(res.nit)
        self.converged_ = bool(res.success)

        z = self.gamma_hat_ * (c - self.c_hat_) * LN2
        pr = _sigmoid(-z)
        info_z = trials * pr * (1 - pr)
        jac = np.stack([-self.gamma_hat_ * LN2 * np.ones_like(c), (c - self.c_hat_) * LN2])
        fisher = (jac * info_z) @ jac.T
        try:
            cov = np.linalg.inv(fisher)
            self.stderr_c_ = float(math.sqrt(max(cov[0, 0], 0.0)))
            self.stderr_gamma_ = float(math.sqrt(max(cov[1, 1], 0.0)))
        except np.linalg.LinAlgError:
            self.stderr_c_ = self.stderr_gamma_ = math.inf
        return self

    def _densities(self, X):
        check_is_fitted(self, "c_hat_")
        X = check_array(X, ensure_2d=False, dtype=np.float64)
        return X[:, 0] if X.ndim == 2 else X

    def transform(self, X):
        """Rescaled coordinate ``gamma * (c - c_hat)``."""
        c = self._densities(X)
        return self.gamma_hat_ * (c - self.c_hat_)

    def predict_proba(self, X):
        """Columns ``[P(UNSAT), P(SAT)]``."""
        sat = _sigmoid(-self.transform(X) * LN2)
        return np.column_stack([1.0 - sat, sat])

    def predict(self, X):
        """True where SAT is the likelier outcome."""
        return self.predict_proba(X)[:, 1] >= 0.5

    def score(self, X, y, sample_weight=None):
        """Mean per-trial binomial log-likelihood."""
        check_is_fitted(self, "c_hat_")
        c, frac, trials = check_binomial_data(X, y, sample_weight)
        z = self.gamma_hat_ * (c - self.c_hat_) * LN2
        k = frac * trials
        return float(np.sum((trials - k) * z - trials * _softplus(z)) / trials.sum())
