"""
Downstream evaluation: weighted ridge regression with leave-one-out selection
of the penalty, mean absolute error and the weighted/uniform score ratio.

Weighted leave-one-out
----------------------
With an unpenalized intercept column, ``Z = [1, X]`` and ``D = diag(0, a, .., a)``,
the weighted ridge solution is ``c = (Z'WZ + D)^-1 Z'Wy``.  Removing row ``i``
is a rank-one downdate of ``Z'WZ``, and Sherman-Morrison gives the held-out
residual

    e_i = r_i / (1 - h_ii),   h_ii = w_i z_i' (Z'WZ + D)^-1 z_i,

where ``r_i`` is the in-sample residual.  The selection criterion is the
weighted mean ``sum_i w_i e_i^2 / sum_i w_i``.  Weights are rescaled to mean
one first, so the penalty keeps the same meaning whatever the weights' scale.
"""

from dataclasses import dataclass

import numpy as np

DEFAULT_ALPHA_GRID = tuple(10.0 ** (i - 4) for i in range(9))


@dataclass
class RidgeModel:
    coef: np.ndarray
    intercept: np.ndarray
    alpha: float
    alpha_grid: tuple = DEFAULT_ALPHA_GRID
    loo_errors: dict | None = None
    scalar_output: bool = True

    def predict(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        out = x @ self.coef + self.intercept
        return out[:, 0] if self.scalar_output else out


def _prepare(x, y, w):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    y = np.asarray(y, dtype=float)
    y_1d = y.ndim == 1
    y2 = y[:, None] if y_1d else y
    m = len(x)
    if w is None:
        w = np.ones(m)
    w = np.asarray(w, dtype=float).ravel()
    if len(w) != m or len(y2) != m:
        raise ValueError("x, y and w must have the same number of rows")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    if not w.sum() > 0:
        raise ValueError("all weights are zero")
    if m < 2:
        raise ValueError("need at least two rows")
    return x, y2, w / w.mean(), y_1d


def _solve(z, y, w, alpha):
    p1 = z.shape[1]
    zw = z * w[:, None]
    gram = zw.T @ z
    pen = np.full(p1, alpha)
    pen[0] = 0.0
    gram[np.diag_indices(p1)] += pen
    chol = np.linalg.cholesky(gram)
    inv = np.linalg.solve(chol.T, np.linalg.solve(chol, np.eye(p1)))
    c = inv @ (zw.T @ y)
    return c, inv


def _loo(z, y, w, alpha):
    c, inv = _solve(z, y, w, alpha)
    resid = y - z @ c
    h = w * np.einsum("ij,jk,ik->i", z, inv, z)
    loo = resid / (1.0 - h)[:, None]
    return float(np.sum(w[:, None] * loo**2) / w.sum() / y.shape[1])


def weighted_loo_error(x, y, w, alpha):
    """Closed-form weighted leave-one-out squared error at a fixed penalty."""
    x, y, w, _ = _prepare(x, y, w)
    z = np.hstack([np.ones((len(x), 1)), x])
    return _loo(z, y, w, alpha)


def ridge_fit_weighted(x, y, w=None, alpha_grid=DEFAULT_ALPHA_GRID):
    """Weighted ridge with the penalty chosen by weighted leave-one-out.

    The intercept is not penalized.  Ties in the LOO error go to the smaller
    penalty.
    """
    x, y2, w, y_1d = _prepare(x, y, w)
    if not alpha_grid or min(alpha_grid) <= 0:
        raise ValueError("alpha_grid must be nonempty and positive")
    z = np.hstack([np.ones((len(x), 1)), x])
    errors = {alpha: _loo(z, y2, w, alpha) for alpha in sorted(alpha_grid)}
    best = min(errors, key=lambda a: (errors[a], a))
    c, _ = _solve(z, y2, w, best)
    return RidgeModel(c[1:], c[0], best, tuple(alpha_grid), errors,
                      scalar_output=y_1d)


def ridge_fit_fixed(x, y, w=None, alpha=1.0):
    """Weighted ridge at a single penalty."""
    return ridge_fit_weighted(x, y, w, alpha_grid=(alpha,))


def mae(model, x_test, y_test):
    """Mean absolute error of ``model`` on the test rows."""
    y_test = np.asarray(y_test, dtype=float)
    if len(y_test) == 0:
        raise ValueError("empty test set")
    pred = model.predict(x_test) if hasattr(model, "predict") else model(x_test)
    pred = np.asarray(pred, dtype=float).reshape(y_test.shape)
    return float(np.mean(np.abs(pred - y_test)))


def score_ratio(mae_weighted, mae_uniform):
    """Weighted over uniform MAE; below 1 means the weighting helped."""
    if mae_uniform == 0:
        raise ZeroDivisionError("uniform-weight MAE is zero")
    return mae_weighted / mae_uniform
