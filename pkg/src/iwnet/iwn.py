"""
Importance Weighting Network trainer.

Alternates an Adam descent step on the network parameters with an Adam ascent
step on ``log(sigma)`` of the self-normalized batch MMD, over independently
sampled source and target batches.

Early stopping and the returned snapshot follow an exponential moving average
of the batch MMD minus the uniform-weight MMD of the same batches.  The paired
difference cancels most of the batch noise and the drift that the rising
bandwidth adds to the raw batch MMD.
"""

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .kernel_mmd import (LOG_SIGMA_MAX, LOG_SIGMA_MIN, batch_mmd_grads,
                         weighted_mmd)
from .network import (AdamState, MlpModel, adam_step, mlp_backward,
                      mlp_forward, mlp_init, pretrain_to_one)
from .utils import check_deadline, child_seeds, make_rng

EMA_DECAY = 0.99
# the smoothed objective needs about 1 / (1 - decay) steps to mean anything
EMA_WARMUP = 100


@dataclass
class IwnConfig:
    batch_size: int = 256
    lr: float = 0.001
    max_iters: int = 50_000
    patience: int = 20_000
    sigma_init: float = 0.1
    hidden_layers: int = 3
    hidden_units: int = 100
    seed: int = 0
    trace_full_mmd_every: int | None = None
    pretrain_max_epochs: int = 100
    pretrain_tol: float = 2e-4
    pretrain_lr: float = 0.01

    def __post_init__(self):
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not 1 <= self.patience <= self.max_iters:
            raise ValueError("patience must be in [1, max_iters]")
        if not self.sigma_init > 0:
            raise ValueError("sigma_init must be positive")
        if not LOG_SIGMA_MIN <= np.log(self.sigma_init) <= LOG_SIGMA_MAX:
            raise ValueError("sigma_init must lie in [1e-6, 1e6]")


@dataclass
class FitReport:
    batch_mmd_trace: np.ndarray
    sigma_trace: np.ndarray
    best_iter: int
    stop_reason: str
    wall_time_seconds: float
    full_mmd_trace: dict = field(default_factory=dict)
    pretrain_epochs: int = 0
    pretrain_converged: bool = True
    sigma_clamped: bool = False
    degenerate_batches: int = 0

    @property
    def iterations(self):
        return len(self.batch_mmd_trace)

    def to_csv(self, path):
        """Write ``iteration, batch_mmd, sigma, full_mmd`` rows."""
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["iteration", "batch_mmd", "sigma", "full_mmd"])
            for i, (b, s) in enumerate(zip(self.batch_mmd_trace,
                                           self.sigma_trace)):
                full = self.full_mmd_trace.get(i)
                writer.writerow([i, repr(float(b)), repr(float(s)),
                                 "" if full is None else repr(float(full))])


def _check_inputs(source_x, target_x):
    xs = np.asarray(source_x, dtype=float)
    xt = np.asarray(target_x, dtype=float)
    if xs.ndim == 1:
        xs = xs[:, None]
    if xt.ndim == 1:
        xt = xt[:, None]
    if len(xs) == 0 or len(xt) == 0:
        raise ValueError("source and target samples must be nonempty")
    if xs.shape[1] != xt.shape[1]:
        raise ValueError("source and target feature dimensions differ")
    return xs, xt


def iwn_weigh_new(model, new_x):
    """``|W(x)|`` rescaled to mean 1 over ``new_x``."""
    new_x = np.asarray(new_x, dtype=float)
    if new_x.ndim == 1:
        new_x = new_x[:, None]
    out, _ = mlp_forward(model, new_x)
    w = np.abs(out)
    total = w.sum()
    if total == 0.0:
        return np.ones(len(w))
    return w / (total / len(w))


def iwn_fit(source_x, target_x, cfg=None, deadline=None, callback=None):
    """Train the weighting network and return source importance weights.

    Parameters
    ----------
    source_x : array of shape (m, p)
    target_x : array of shape (n, p)
    cfg : IwnConfig, optional
    deadline : Deadline, optional
        Checked once per iteration; raises ``BudgetExceeded`` when expired.
    callback : callable, optional
        Called as ``callback(iteration, model, sigma)`` every
        ``cfg.trace_full_mmd_every`` iterations (or every iteration when that
        is unset), after the update.

    Returns
    -------
    weights : array of shape (m,)
        Nonnegative, mean 1.
    model : MlpModel
        The network at the best smoothed objective.
    report : FitReport
    """
    cfg = cfg or IwnConfig()
    xs, xt = _check_inputs(source_x, target_x)
    m, n = len(xs), len(xt)
    t0 = time.perf_counter()

    init_seed, pretrain_seed, batch_seed = child_seeds(cfg.seed, 3)
    model = mlp_init(xs.shape[1], cfg.hidden_layers, cfg.hidden_units,
                     seed=init_seed)
    pre = pretrain_to_one(model, xs, max_epochs=cfg.pretrain_max_epochs,
                          tol=cfg.pretrain_tol, batch_size=cfg.batch_size,
                          lr=cfg.pretrain_lr, seed=pretrain_seed)
    check_deadline(deadline)

    rng = make_rng(batch_seed)
    params = model.params()
    opt = AdamState.for_params(params, lr=cfg.lr)
    log_sigma = np.array([np.log(cfg.sigma_init)])
    sigma = cfg.sigma_init
    opt_sigma = AdamState.for_params([log_sigma], lr=cfg.lr)

    every = cfg.trace_full_mmd_every
    batch_trace = np.empty(cfg.max_iters)
    sigma_trace = np.empty(cfg.max_iters)
    full_trace = {}
    best_model = model.copy()
    best_ema = np.inf
    best_iter = 0
    ema = None
    clamped = False
    degenerate = 0
    stop_reason = "max_iters"
    warmup = min(EMA_WARMUP, cfg.max_iters // 10)
    it = 0

    if every:
        full_trace[0] = weighted_mmd(xs, xt, iwn_weigh_new(model, xs),
                                     sigma).value

    B = cfg.batch_size
    while it < cfg.max_iters:
        check_deadline(deadline)
        xb = xs[rng.integers(0, m, B)]
        xtb = xt[rng.integers(0, n, B)]
        raw, cache = mlp_forward(model, xb)
        g_raw, g_log_sigma, value = batch_mmd_grads(xb, xtb, raw, sigma)
        if not (np.isfinite(value.value) and np.all(np.isfinite(g_raw))
                and np.isfinite(g_log_sigma)):
            raise FloatingPointError(
                f"non-finite batch MMD at iteration {it} (sigma={sigma!r})")
        degenerate += value.degenerate
        batch_trace[it] = value.value
        sigma_trace[it] = sigma

        signal = value.value - value.uniform_value
        ema = signal if ema is None else (
            EMA_DECAY * ema + (1.0 - EMA_DECAY) * signal)
        if it >= warmup and ema < best_ema:
            best_ema = ema
            best_iter = it
            best_model = model.copy()

        adam_step(params, mlp_backward(model, cache, g_raw), opt)
        # ascent on log(sigma)
        adam_step([log_sigma], [np.array([-g_log_sigma])], opt_sigma)
        if not LOG_SIGMA_MIN <= log_sigma[0] <= LOG_SIGMA_MAX:
            clamped = True
            np.clip(log_sigma, LOG_SIGMA_MIN, LOG_SIGMA_MAX, out=log_sigma)
        sigma = float(np.exp(log_sigma[0]))

        it += 1
        if every and it % every == 0:
            w = iwn_weigh_new(model, xs)
            full_trace[it] = weighted_mmd(xs, xt, w, sigma).value
        if callback is not None and (not every or it % every == 0):
            callback(it, model, sigma)
        if it - max(best_iter, warmup) > cfg.patience:
            stop_reason = "early_stop"
            break

    weights = iwn_weigh_new(best_model, xs)
    report = FitReport(
        batch_mmd_trace=batch_trace[:it].copy(),
        sigma_trace=sigma_trace[:it].copy(),
        best_iter=best_iter,
        stop_reason=stop_reason,
        wall_time_seconds=time.perf_counter() - t0,
        full_mmd_trace=full_trace,
        pretrain_epochs=pre.epochs,
        pretrain_converged=pre.converged,
        sigma_clamped=clamped,
        degenerate_batches=int(degenerate),
    )
    return weights, best_model, report
