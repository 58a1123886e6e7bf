"""
Gaussian kernel and weighted MMD estimators.

The kernel is ``k(x, x') = exp(-sigma * ||x - x'||^2)``, so ``sigma`` acts as an
inverse squared bandwidth: larger values give a narrower kernel.  Sigma is
carried around as ``log_sigma`` wherever it is optimized.
"""

from dataclasses import dataclass

import numpy as np

LOG_SIGMA_MIN = np.log(1e-6)
LOG_SIGMA_MAX = np.log(1e6)


@dataclass(frozen=True)
class KernelParam:
    """Gaussian kernel parameter stored on the log scale."""

    log_sigma: float

    def __post_init__(self):
        if not np.isfinite(self.log_sigma):
            raise ValueError("log_sigma must be finite")

    @classmethod
    def from_sigma(cls, sigma):
        if not sigma > 0:
            raise ValueError(f"sigma must be positive, got {sigma}")
        return cls(float(np.log(sigma)))

    @property
    def sigma(self):
        return float(np.exp(self.log_sigma))


@dataclass(frozen=True)
class BatchMmdValue:
    """Squared MMD together with its three kernel sums.

    ``value == term_ss + term_tt - 2 * term_st``.  ``uniform_value``, when
    set, is the MMD of the same batches and kernel under uniform weights.
    """

    value: float
    term_ss: float
    term_tt: float
    term_st: float
    degenerate: bool = False
    uniform_value: float | None = None


def _as_sigma(sigma):
    if isinstance(sigma, KernelParam):
        return sigma.sigma
    sigma = float(sigma)
    if not (sigma > 0 and np.isfinite(sigma)):
        raise ValueError(f"sigma must be finite and positive, got {sigma}")
    return sigma


def _as_2d(a, name):
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise ValueError(f"{name} must be a 2-D array, got shape {a.shape}")
    return a


def squared_distances(a, b):
    """Pairwise squared Euclidean distances, clamped at zero.

    Uses ``|a|^2 + |b|^2 - 2 a.b``; cancellation can produce tiny negatives,
    which are floored.
    """
    a = _as_2d(a, "a")
    b = _as_2d(b, "b")
    if a.shape[1] != b.shape[1]:
        raise ValueError(
            f"feature dimension mismatch: {a.shape[1]} != {b.shape[1]}")
    aa = np.einsum("ij,ij->i", a, a)
    bb = np.einsum("ij,ij->i", b, b)
    d = a @ b.T
    d *= -2.0
    d += aa[:, None]
    d += bb[None, :]
    np.maximum(d, 0.0, out=d)
    return d


def gaussian_gram(a, b, sigma):
    """Gram matrix ``exp(-sigma * ||a_i - b_j||^2)``.

    Parameters
    ----------
    a : array of shape (r, p)
    b : array of shape (s, p)
    sigma : float or KernelParam

    Returns
    -------
    array of shape (r, s)
    """
    sigma = _as_sigma(sigma)
    return np.exp(-sigma * squared_distances(a, b))


def weighted_mmd(source_x, target_x, w, sigma, atol=1e-8):
    """Empirical squared MMD between the ``w``-weighted source and the target.

    V-statistic form (diagonal terms included)::

        1/m^2 sum_ij w_i w_j k(x_i, x_j) + 1/n^2 sum_ij k(x'_i, x'_j)
            - 2/(nm) sum_ij w_i k(x_i, x'_j)

    ``w`` must be nonnegative with mean 1 (within ``atol``).
    """
    source_x = _as_2d(source_x, "source_x")
    target_x = _as_2d(target_x, "target_x")
    w = np.asarray(w, dtype=float).ravel()
    m, n = len(source_x), len(target_x)
    if len(w) != m:
        raise ValueError(f"got {len(w)} weights for {m} source rows")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    if abs(w.mean() - 1.0) > atol:
        raise ValueError(f"weights must have mean 1, got {w.mean()!r}")
    v = w / m
    return _mmd_terms(source_x, target_x, v, sigma)


def _mmd_terms(source_x, target_x, v, sigma):
    # v sums to one; target weights are uniform
    n = len(target_x)
    k_ss = gaussian_gram(source_x, source_x, sigma)
    k_tt = gaussian_gram(target_x, target_x, sigma)
    k_st = gaussian_gram(source_x, target_x, sigma)
    term_ss = float(v @ k_ss @ v)
    term_tt = float(k_tt.sum()) / n**2
    term_st = float(v @ k_st.sum(axis=1)) / n
    return BatchMmdValue(term_ss + term_tt - 2.0 * term_st,
                         term_ss, term_tt, term_st)


def selfnorm_weights(raw):
    """``|raw| / sum |raw|``; falls back to uniform when every entry is zero.

    Returns the normalized vector and a flag telling whether the fallback was
    used.
    """
    a = np.abs(np.asarray(raw, dtype=float).ravel())
    s = a.sum()
    if s == 0.0:
        return np.full(len(a), 1.0 / len(a)), True
    return a / s, False


def batch_mmd_selfnorm(source_batch, target_batch, raw, sigma):
    """Batch MMD with self-normalized weights built from raw network outputs."""
    source_batch = _as_2d(source_batch, "source_batch")
    target_batch = _as_2d(target_batch, "target_batch")
    v, degenerate = selfnorm_weights(raw)
    if len(v) != len(source_batch):
        raise ValueError("raw must have one entry per source row")
    out = _mmd_terms(source_batch, target_batch, v, sigma)
    if degenerate:
        out = BatchMmdValue(out.value, out.term_ss, out.term_tt, out.term_st,
                            degenerate=True)
    return out


def batch_mmd_grads(source_batch, target_batch, raw, sigma):
    """Self-normalized batch MMD and its analytic gradients.

    Returns
    -------
    grad_raw : array of shape (B,)
        Derivative with respect to the raw outputs.  The subgradient of
        ``|.|`` at 0 is taken as 0.
    grad_log_sigma : float
        Derivative with respect to ``log(sigma)``.
    value : BatchMmdValue
    """
    xs = _as_2d(source_batch, "source_batch")
    xt = _as_2d(target_batch, "target_batch")
    raw = np.asarray(raw, dtype=float).ravel()
    if len(raw) != len(xs):
        raise ValueError("raw must have one entry per source row")
    sig = _as_sigma(sigma)
    n = len(xt)
    v, degenerate = selfnorm_weights(raw)

    d_ss = squared_distances(xs, xs)
    d_tt = squared_distances(xt, xt)
    d_st = squared_distances(xs, xt)
    k_ss = np.exp(-sig * d_ss)
    k_tt = np.exp(-sig * d_tt)
    k_st = np.exp(-sig * d_st)

    kv = k_ss @ v
    kst_row = k_st.sum(axis=1)
    term_ss = float(v @ kv)
    term_tt = float(k_tt.sum()) / n**2
    term_st = float(v @ kst_row) / n
    B = len(xs)
    # same batches and kernel with uniform weights, a paired reference
    uniform = (float(k_ss.sum()) / B**2 + term_tt
               - 2.0 * float(kst_row.sum()) / (B * n))
    value = BatchMmdValue(term_ss + term_tt - 2.0 * term_st,
                          term_ss, term_tt, term_st, degenerate, uniform)

    if degenerate:
        grad_raw = np.zeros_like(raw)
    else:
        # dV/dv, then through v = |r| / sum|r|
        g = 2.0 * kv - (2.0 / n) * kst_row
        grad_raw = np.sign(raw) / np.abs(raw).sum() * (g - v @ g)

    # dk/dsigma = -d * k
    dss = -float(v @ ((d_ss * k_ss) @ v))
    dtt = -float((d_tt * k_tt).sum()) / n**2
    dst = -float(v @ (d_st * k_st).sum(axis=1)) / n
    grad_log_sigma = sig * (dss + dtt - 2.0 * dst)
    return grad_raw, grad_log_sigma, value
