"""
Comparison importance-weighting methods: KMM, KLIEP and nearest-neighbour
weighting, with their unsupervised hyper-parameter selection.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .kernel_mmd import gaussian_gram, squared_distances
from .utils import BudgetExceeded, check_deadline, make_rng

DEFAULT_SIGMA_GRID = tuple(10.0 ** (i - 4) for i in range(9))
DEFAULT_K_GRID = (1, 5, 10, 20, 50, 100)

# above this dimension a kd-tree loses to brute force
_TREE_MAX_DIM = 16


def _as_2d(a):
    a = np.asarray(a, dtype=float)
    return a[:, None] if a.ndim == 1 else a


# ---------------------------------------------------------------------------
# KMM
# ---------------------------------------------------------------------------

@dataclass
class KmmConfig:
    sigma_grid: tuple = DEFAULT_SIGMA_GRID
    weight_cap: float = 1000.0
    eps: float | None = None
    max_iters: int = 1000
    tol: float = 1e-7

    def __post_init__(self):
        if not self.weight_cap > 0:
            raise ValueError("weight_cap must be positive")
        if self.eps is not None and self.eps < 0:
            raise ValueError("eps must be nonnegative")
        if not self.sigma_grid or min(self.sigma_grid) <= 0:
            raise ValueError("sigma_grid must be nonempty and positive")

    def slack(self, m):
        if self.eps is not None:
            return self.eps
        return np.sqrt(m - 1) / np.sqrt(m)


@dataclass
class KmmResult:
    weights: np.ndarray
    objective: float
    iterations: int
    converged: bool
    sigma: float


def project_box_slab(v, cap, lo, hi):
    """Euclidean projection onto ``{0 <= w <= cap, lo <= sum(w) <= hi}``.

    The projection is ``clip(v - lam, 0, cap)`` for the scalar shift ``lam``
    that brings the sum into ``[lo, hi]`` (zero when it already is).  The
    sum is piecewise linear and nonincreasing in ``lam``, so the shift is
    found exactly by bisection over the sorted breakpoints.
    """
    w = np.clip(v, 0.0, cap)
    s = w.sum()
    if lo <= s <= hi:
        return w
    target = hi if s > hi else lo
    bps = np.unique(np.concatenate([v - cap, v]))

    def total(lam):
        return np.clip(v - lam, 0.0, cap).sum()

    # total(bps[0]) is the largest attainable sum, total(bps[-1]) == 0
    lo_i, hi_i = 0, len(bps) - 1
    if total(bps[0]) <= target:
        return np.clip(v - bps[0], 0.0, cap)
    while hi_i - lo_i > 1:
        mid = (lo_i + hi_i) // 2
        if total(bps[mid]) >= target:
            lo_i = mid
        else:
            hi_i = mid
    a, b = bps[lo_i], bps[hi_i]
    ta, tb = total(a), total(b)
    lam = a if ta == tb else a + (ta - target) * (b - a) / (ta - tb)
    return np.clip(v - lam, 0.0, cap)


def kmm_objective(k_ss, kappa, w, const):
    """Empirical squared MMD given ``K_ss``, ``kappa_i = mean_j k(x_i, x'_j)``
    and the constant target-target term."""
    m = len(w)
    return float(w @ (k_ss @ w)) / m**2 - 2.0 * float(w @ kappa) / m + const


def kmm_solve(source_x, target_x, sigma, cfg=None, deadline=None):
    """Kernel mean matching by accelerated projected gradient.

    Minimizes the weighted-MMD quadratic over ``0 <= w_i <= weight_cap`` and
    ``|mean(w) - 1| <= eps``, starting from the feasible uniform vector, and
    returns the best iterate seen.
    """
    cfg = cfg or KmmConfig()
    xs, xt = _as_2d(source_x), _as_2d(target_x)
    m, n = len(xs), len(xt)
    if m == 0 or n == 0:
        raise ValueError("source and target samples must be nonempty")
    eps = cfg.slack(m)
    lo, hi = m * (1.0 - eps), m * (1.0 + eps)
    cap = cfg.weight_cap

    k_ss = gaussian_gram(xs, xs, sigma)
    kappa = gaussian_gram(xs, xt, sigma).mean(axis=1)
    const = float(gaussian_gram(xt, xt, sigma).mean())
    # Gershgorin bound on the Hessian 2 K / m^2 (K has positive entries)
    lip = 2.0 * float(k_ss.sum(axis=1).max()) / m**2
    step = 1.0 / lip
    lin = 2.0 * kappa / m

    w = np.ones(m)
    kw = k_ss @ w
    f = float(w @ kw) / m**2 - float(lin @ w) + const
    best_w, best_f = w.copy(), f
    w_prev, kw_prev = w, kw
    t = 1.0
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        check_deadline(deadline)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        beta = (t - 1.0) / t_next
        y = w + beta * (w - w_prev)
        ky = kw + beta * (kw - kw_prev)
        grad = 2.0 * ky / m**2 - lin
        w_new = project_box_slab(y - step * grad, cap, lo, hi)
        kw_new = k_ss @ w_new
        f_new = float(w_new @ kw_new) / m**2 - float(lin @ w_new) + const
        delta = np.linalg.norm(w_new - w) / np.sqrt(m)
        if f_new > f:
            # adaptive restart of the momentum
            t = 1.0
        else:
            t = t_next
        w_prev, kw_prev = w, kw
        w, kw, f = w_new, kw_new, f_new
        if f < best_f:
            best_w, best_f = w.copy(), f
        if delta < cfg.tol:
            converged = True
            break
    return KmmResult(best_w, best_f, it, converged, float(sigma))


# ---------------------------------------------------------------------------
# KLIEP
# ---------------------------------------------------------------------------

@dataclass
class KliepConfig:
    num_centers: int = 100
    sigma_grid: tuple = DEFAULT_SIGMA_GRID
    lr: float = 0.01
    max_iters: int = 1000
    lcv_folds: int = 5
    seed: int = 0


@dataclass
class KliepResult:
    weights: np.ndarray
    alpha: np.ndarray
    centers: np.ndarray
    sigma: float
    loglik_trace: list = field(default_factory=list)

    def ratio(self, x):
        """Density-ratio model evaluated at new rows."""
        return gaussian_gram(_as_2d(x), self.centers, self.sigma) @ self.alpha


def _kliep_centers(xt, num_centers, seed):
    order = make_rng(seed).permutation(len(xt))
    return xt[order[:min(num_centers, len(xt))]]


def kliep_fit(source_x, target_x, sigma, cfg=None, deadline=None):
    """KLIEP: ratio model ``sum_l alpha_l k(x, c_l)`` over target centers.

    Projected gradient ascent on the mean target log-likelihood, rescaling
    ``alpha`` after every step so the model averages to 1 over the source.
    """
    cfg = cfg or KliepConfig()
    xs, xt = _as_2d(source_x), _as_2d(target_x)
    if len(xt) == 0 or len(xs) == 0:
        raise ValueError("source and target samples must be nonempty")
    centers = _kliep_centers(xt, cfg.num_centers, cfg.seed)
    design = gaussian_gram(xt, centers, sigma)
    b = gaussian_gram(xs, centers, sigma).mean(axis=0)
    bb = float(b @ b)
    if bb == 0.0 or np.any(design.sum(axis=1) == 0.0):
        raise ValueError("degenerate kernel design")

    alpha = np.ones(len(centers))
    alpha /= b @ alpha
    fitted = design @ alpha
    obj = float(np.mean(np.log(fitted)))
    trace = [obj]
    lr = cfg.lr
    for _ in range(cfg.max_iters):
        check_deadline(deadline)
        cand = alpha + lr * (design.T @ (1.0 / fitted))
        cand += b * ((1.0 - b @ cand) / bb)
        np.maximum(cand, 0.0, out=cand)
        scale = b @ cand
        if not scale > 0:
            raise ValueError("degenerate kernel design")
        cand /= scale
        cand_fitted = design @ cand
        with np.errstate(divide="ignore"):
            cand_obj = float(np.mean(np.log(cand_fitted)))
        # only improving steps are kept; otherwise the step is halved
        if cand_obj > obj:
            alpha, fitted, obj = cand, cand_fitted, cand_obj
        else:
            lr *= 0.5
            if lr < 1e-12 * cfg.lr:
                break
        trace.append(obj)

    w = gaussian_gram(xs, centers, sigma) @ alpha
    w = w / w.mean()
    return KliepResult(w, alpha, centers, float(sigma), trace)


def kliep_lcv(source_x, target_x, cfg=None, deadline=None):
    """Select sigma by likelihood cross-validation over target folds.

    Returns the best sigma, the refit on all targets, and the per-sigma mean
    held-out log-likelihood (``-inf`` when a fold scored a zero ratio or the
    fit was degenerate).
    """
    cfg = cfg or KliepConfig()
    xs, xt = _as_2d(source_x), _as_2d(target_x)
    k = cfg.lcv_folds
    if len(xt) < k:
        raise ValueError(f"need at least {k} target rows for {k}-fold LCV")
    folds = np.array_split(make_rng(cfg.seed).permutation(len(xt)), k)
    scores = {}
    for sigma in sorted(cfg.sigma_grid):
        fold_scores = []
        for i in range(k):
            held = folds[i]
            kept = np.concatenate([folds[j] for j in range(k) if j != i])
            try:
                res = kliep_fit(xs, xt[kept], sigma, cfg, deadline)
            except ValueError:
                fold_scores.append(-np.inf)
                continue
            r = res.ratio(xt[held])
            with np.errstate(divide="ignore"):
                fold_scores.append(float(np.mean(np.log(r))))
        scores[sigma] = float(np.mean(fold_scores))
    best = max(sorted(scores), key=lambda s: (scores[s], -s))
    if not np.isfinite(scores[best]):
        raise ValueError("KLIEP LCV: no sigma gave a finite held-out score")
    return best, kliep_fit(xs, xt, best, cfg, deadline), scores


# ---------------------------------------------------------------------------
# Nearest-neighbour weighting
# ---------------------------------------------------------------------------

@dataclass
class NnwConfig:
    k_grid: tuple = DEFAULT_K_GRID

    def __post_init__(self):
        if not self.k_grid or min(self.k_grid) < 1:
            raise ValueError("k_grid must be nonempty with every k >= 1")


def _knn_brute(xs, xt, k, chunk=512):
    out = np.empty((len(xt), k), dtype=np.intp)
    for start in range(0, len(xt), chunk):
        d = squared_distances(xt[start:start + chunk], xs)
        # stable sort: equal distances resolved toward the lower index
        out[start:start + chunk] = np.argsort(d, axis=1, kind="stable")[:, :k]
    return out


def _knn_tree(xs, xt, k):
    m = len(xs)
    tree = cKDTree(xs)
    kq = min(k + 1, m)
    dist, idx = tree.query(xt, k=kq)
    dist = dist.reshape(len(xt), kq)
    idx = idx.reshape(len(xt), kq)
    out = idx[:, :k].copy()
    if kq == k:
        return out
    # rows where the k-th and (k+1)-th distances tie need the index rule
    for r in np.flatnonzero(dist[:, k - 1] == dist[:, k]):
        cand = np.asarray(tree.query_ball_point(xt[r], dist[r, k - 1] * (1 + 1e-12) + 1e-300))
        cd = np.sqrt(((xs[cand] - xt[r]) ** 2).sum(axis=1))
        order = np.lexsort((cand, cd))
        out[r] = cand[order[:k]]
    return out


def knn_source_counts(source_x, target_x, k, brute=None):
    """Number of times each source row is among a target row's ``k`` nearest
    source rows."""
    xs, xt = _as_2d(source_x), _as_2d(target_x)
    m = len(xs)
    if not 1 <= k <= m:
        raise ValueError(f"k must be in [1, {m}], got {k}")
    if brute is None:
        brute = xs.shape[1] > _TREE_MAX_DIM
    idx = _knn_brute(xs, xt, k) if brute else _knn_tree(xs, xt, k)
    return np.bincount(idx.ravel(), minlength=m)


def nnw_fit(source_x, target_x, k, deadline=None):
    """Nearest-neighbour weighting, normalized to mean 1."""
    check_deadline(deadline)
    counts = knn_source_counts(source_x, target_x, k).astype(float)
    return counts * (len(counts) / counts.sum())


# ---------------------------------------------------------------------------
# Model selection
# ---------------------------------------------------------------------------

def _second_moment(x, w=None):
    xa = np.hstack([x, np.ones((len(x), 1))])
    if w is None:
        return xa.T @ xa / len(x)
    return (xa * w[:, None]).T @ xa / len(x)


def linear_discrepancy(source_x, w, target_x):
    """Spectral norm of the difference between the weighted source and the
    target second-moment matrices of the bias-augmented inputs ``(x, 1)``."""
    xs, xt = _as_2d(source_x), _as_2d(target_x)
    w = np.asarray(w, dtype=float).ravel()
    diff = _second_moment(xs, w) - _second_moment(xt)
    return float(np.max(np.abs(np.linalg.eigvalsh(diff))))


def select_by_discrepancy(method, grid, source_x, target_x, cfg=None,
                          deadline=None):
    """Fit ``method`` ('kmm' or 'nnw') at each grid value and keep the one with
    the smallest linear discrepancy; ties go to the smaller value.

    Returns ``(best_value, weights, discrepancies)``.
    """
    if not grid:
        raise ValueError("empty hyper-parameter grid")
    xs, xt = _as_2d(source_x), _as_2d(target_x)
    results = {}
    for value in sorted(grid):
        try:
            if method == "kmm":
                w = kmm_solve(xs, xt, value, cfg, deadline).weights
            elif method == "nnw":
                if value > len(xs):
                    continue
                w = nnw_fit(xs, xt, int(value), deadline)
            else:
                raise ValueError(f"unknown method {method!r}")
        except BudgetExceeded:
            raise
        except (ValueError, FloatingPointError, np.linalg.LinAlgError):
            if method not in ("kmm", "nnw"):
                raise
            continue
        results[value] = (linear_discrepancy(xs, w, xt), w)
    if not results:
        raise ValueError(f"{method}: every grid point failed")
    best = min(results, key=lambda v: (results[v][0], v))
    return best, results[best][1], {v: r[0] for v, r in results.items()}
