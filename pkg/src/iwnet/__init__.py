"""Importance weighting for sample-bias correction.

The main entry point is :func:`iwnet.iwn.iwn_fit`, which trains a small
network whose absolute outputs are source importance weights, by
descent/ascent on a self-normalized batch MMD.  KMM, KLIEP and
nearest-neighbour weighting live in :mod:`iwnet.baselines`.
"""

from .baselines import (KliepConfig, KmmConfig, NnwConfig, kliep_fit,
                        kliep_lcv, kmm_solve, linear_discrepancy, nnw_fit,
                        select_by_discrepancy)
from .iwn import FitReport, IwnConfig, iwn_fit, iwn_weigh_new
from .kernel_mmd import (KernelParam, batch_mmd_grads, batch_mmd_selfnorm,
                         gaussian_gram, weighted_mmd)

__all__ = [
    "FitReport", "IwnConfig", "KernelParam", "KliepConfig", "KmmConfig",
    "NnwConfig", "batch_mmd_grads", "batch_mmd_selfnorm", "gaussian_gram",
    "iwn_fit", "iwn_weigh_new", "kliep_fit", "kliep_lcv", "kmm_solve",
    "linear_discrepancy", "nnw_fit", "select_by_discrepancy", "weighted_mmd",
]
__version__ = "0.1.0"
