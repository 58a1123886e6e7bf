import time

import numpy as np


class BudgetExceeded(RuntimeError):
    """Raised by a solver that ran past its cooperative deadline."""


class Deadline:
    """Wall-clock deadline checked cooperatively between solver iterations."""

    def __init__(self, seconds=None):
        self.seconds = seconds
        self.start = time.perf_counter()

    @property
    def elapsed(self):
        return time.perf_counter() - self.start

    def expired(self):
        return self.seconds is not None and self.elapsed > self.seconds

    def check(self):
        if self.expired():
            raise BudgetExceeded(
                f"time budget of {self.seconds:g} s exceeded")


def check_deadline(deadline):
    if deadline is not None:
        deadline.check()


def make_rng(seed):
    """Counter-based generator; identical seeds give identical streams on
    every platform."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(seed))


def child_seeds(seed, count):
    """Independent integer seeds derived from ``seed``."""
    ss = np.random.SeedSequence(seed)
    return [int(s.generate_state(1, dtype=np.uint64)[0])
            for s in ss.spawn(count)]


def normalize_mean_one(w):
    w = np.asarray(w, dtype=float)
    return w / w.mean()


def weight_stats(w):
    w = np.asarray(w, dtype=float)
    mean = float(w.mean())
    return {
        "w_min": float(w.min()),
        "w_max": float(w.max()),
        "w_mean": mean,
        "w_cv": float(w.std() / mean) if mean > 0 else float("nan"),
    }
