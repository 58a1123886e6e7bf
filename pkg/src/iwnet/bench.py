"""
Experiment harness: biased-sample experiments with all weighting methods,
the synthetic training-trace study, the scaling study and the IWN
architecture / batch-size ablation.
"""

import csv
import dataclasses
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from . import baselines
from .dataset import (BIAS_KINDS, apply_preprocess, fit_preprocess, load_csv,
                      make_mixture_spec, sample_mixture)
from .evaluation import mae, ridge_fit_weighted, score_ratio
from .iwn import IwnConfig, iwn_fit, iwn_weigh_new
from .kernel_mmd import weighted_mmd
from .utils import BudgetExceeded, Deadline, child_seeds, weight_stats

log = logging.getLogger(__name__)

METHODS = ("iwn", "kmm", "kliep", "nnw")
SUMMARY_COLUMNS = ("Avg Score Ratio", "Avg Rank", "Avg Comp. Time")
WORKERS_ENV = "IWNET_WORKERS"
TIMEOUT = "timeout"


class ConfigError(ValueError):
    """Invalid experiment configuration."""


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass
class DatasetConfig:
    """Where the unbiased data comes from.

    ``kind="csv"`` reads ``path``; ``kind="synthetic"`` uses the Gaussian
    mixture with ``num_components`` components in ``dim`` dimensions.
    """

    kind: str = "synthetic"
    path: str | None = None
    target_columns: list = field(default_factory=list)
    categorical_columns: list = field(default_factory=list)
    num_components: int = 10
    dim: int = 8
    pool_size: int = 2000

    def validate(self):
        if self.kind == "csv":
            if not self.path:
                raise ConfigError("csv dataset needs a path")
            if not self.target_columns:
                raise ConfigError("csv dataset needs target_columns")
        elif self.kind == "synthetic":
            if self.num_components < 3 or self.dim < 1 or self.pool_size < 2:
                raise ConfigError("invalid synthetic dataset parameters")
        else:
            raise ConfigError(f"unknown dataset kind {self.kind!r}")


@dataclass
class ExperimentConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    bias: str = "mixture"
    n: int = 1000
    methods: list = field(default_factory=lambda: list(METHODS))
    method_params: dict = field(default_factory=dict)
    repetitions: int = 10
    seed: int = 0
    time_budget_seconds: float = 500.0
    output_dir: str | None = None
    name: str = "experiment"

    def validate(self):
        self.dataset.validate()
        if self.bias not in (*BIAS_KINDS, "mixture"):
            raise ConfigError(f"unknown bias kind {self.bias!r}")
        if self.bias == "mixture" and self.dataset.kind != "synthetic":
            raise ConfigError("bias 'mixture' needs a synthetic dataset")
        if self.n < 2:
            raise ConfigError("n must be >= 2")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if not self.time_budget_seconds > 0:
            raise ConfigError("time_budget_seconds must be positive")
        if not self.methods:
            raise ConfigError("no methods given")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r}")
        for m, params in self.method_params.items():
            if m not in METHODS or not isinstance(params, dict):
                raise ConfigError(f"bad method_params entry {m!r}")
        return self

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, doc):
        doc = dict(doc)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        ds = doc.pop("dataset", {})
        ds_known = {f.name for f in dataclasses.fields(DatasetConfig)}
        if set(ds) - ds_known:
            raise ConfigError(
                f"unknown dataset keys: {sorted(set(ds) - ds_known)}")
        try:
            cfg = cls(dataset=DatasetConfig(**ds), **doc)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        return cfg.validate()

    def dump(self, path):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")

    @classmethod
    def load(cls, path):
        """Read a config file; a relative dataset path is taken relative to
        the file's directory."""
        try:
            with open(path) as f:
                doc = json.load(f)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        cfg = cls.from_dict(doc)
        ds_path = cfg.dataset.path
        if ds_path and not Path(ds_path).is_absolute():
            cfg.dataset.path = os.path.normpath(
                Path(path).resolve().parent / ds_path)
        return cfg


# ---------------------------------------------------------------------------
# Data for one repetition
# ---------------------------------------------------------------------------

@dataclass
class RepData:
    source_x: np.ndarray
    source_y: np.ndarray
    target_x: np.ndarray
    target_y: np.ndarray


def _load_unbiased(ds):
    raw = load_csv(ds.path, ds.target_columns, ds.categorical_columns)
    return apply_preprocess(raw, fit_preprocess(raw, ds.categorical_columns))


def make_rep_data(cfg, seed, unbiased=None):
    """Biased source and unbiased target for one repetition."""
    ds = cfg.dataset
    s_src, s_tgt = child_seeds(seed, 2)
    if ds.kind == "synthetic":
        # the mixture itself is fixed by the experiment seed
        spec = make_mixture_spec(ds.num_components, ds.dim, seed=cfg.seed)
        if cfg.bias == "mixture":
            src = sample_mixture(spec, cfg.n, "source", seed=s_src)
            tgt = sample_mixture(spec, ds.pool_size, "target", seed=s_tgt)
            return RepData(src.x, src.y[:, 0], tgt.x, tgt.y[:, 0])
        unbiased = sample_mixture(spec, ds.pool_size, "target", seed=s_tgt)
    elif unbiased is None:
        unbiased = _load_unbiased(ds)
    src = BIAS_KINDS[cfg.bias](unbiased, cfg.n, seed=s_src)
    return RepData(src.x, _first_output(src.y), unbiased.x,
                   _first_output(unbiased.y))


def _first_output(y):
    return y[:, 0] if y.shape[1] == 1 else y


# ---------------------------------------------------------------------------
# Fitting one method
# ---------------------------------------------------------------------------

def iwn_config(params, seed):
    params = dict(params or {})
    params.setdefault("seed", seed)
    try:
        return IwnConfig(**params)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"iwn: {exc}") from None


def fit_weights(method, source_x, target_x, params=None, seed=0,
                deadline=None):
    """Fit one weighting method with its default model selection.

    Returns ``(weights, info)`` where ``info`` records the selected
    hyper-parameter and, for IWN, the fit report.
    """
    params = dict(params or {})
    if method == "iwn":
        w, _, report = iwn_fit(source_x, target_x, iwn_config(params, seed),
                               deadline=deadline)
        return w, {"hyperparameter": repr(float(report.sigma_trace[report.best_iter])),
                   "report": report}
    if method == "kmm":
        try:
            cfg = baselines.KmmConfig(**params)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"kmm: {exc}") from None
        sigma, w, _ = baselines.select_by_discrepancy(
            "kmm", cfg.sigma_grid, source_x, target_x, cfg, deadline)
        return w, {"hyperparameter": repr(float(sigma))}
    if method == "kliep":
        params.setdefault("seed", seed)
        try:
            cfg = baselines.KliepConfig(**params)
        except TypeError as exc:
            raise ConfigError(f"kliep: {exc}") from None
        sigma, res, _ = baselines.kliep_lcv(source_x, target_x, cfg, deadline)
        return res.weights, {"hyperparameter": repr(float(sigma))}
    if method == "nnw":
        try:
            cfg = baselines.NnwConfig(**params)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"nnw: {exc}") from None
        k, w, _ = baselines.select_by_discrepancy(
            "nnw", cfg.k_grid, source_x, target_x, deadline=deadline)
        return w, {"hyperparameter": str(int(k))}
    raise ConfigError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------

RUN_COLUMNS = ("method", "repetition", "score_ratio", "timed_out",
               "fit_seconds", "mae_weighted", "mae_uniform", "hyperparameter",
               "w_min", "w_max", "w_mean", "w_cv", "iterations", "best_iter",
               "stop_reason")
WALL_TIME_COLUMNS = ("fit_seconds",)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _run_repetition(cfg, rep, seed, unbiased=None, trace_dir=None):
    data = make_rep_data(cfg, seed, unbiased)
    uniform = ridge_fit_weighted(data.source_x, data.source_y)
    mae_unif = mae(uniform, data.target_x, data.target_y)
    method_seeds = dict(zip(METHODS, child_seeds(seed + 1, len(METHODS))))
    records = []
    for method in cfg.methods:
        deadline = Deadline(cfg.time_budget_seconds)
        rec = {"method": method, "repetition": rep}
        t0 = time.perf_counter()
        try:
            w, info = fit_weights(method, data.source_x, data.target_x,
                                  cfg.method_params.get(method),
                                  method_seeds[method], deadline)
        except BudgetExceeded:
            rec.update(timed_out=True, score_ratio=TIMEOUT,
                       fit_seconds=time.perf_counter() - t0)
            records.append(rec)
            continue
        rec["fit_seconds"] = time.perf_counter() - t0
        model = ridge_fit_weighted(data.source_x, data.source_y, w)
        mae_w = mae(model, data.target_x, data.target_y)
        rec.update(timed_out=False, mae_weighted=mae_w, mae_uniform=mae_unif,
                   score_ratio=score_ratio(mae_w, mae_unif),
                   hyperparameter=info["hyperparameter"], **weight_stats(w))
        report = info.get("report")
        if report is not None:
            rec.update(iterations=report.iterations,
                       best_iter=report.best_iter,
                       stop_reason=report.stop_reason)
            if trace_dir is not None:
                report.to_csv(Path(trace_dir) / f"iwn_rep{rep}.csv")
        records.append(rec)
    return records


def rank_and_summarize(records, methods):
    """Per-method summary over repetitions.

    Ranks are computed within each repetition among the methods that did not
    time out (average ranks for ties) and then averaged.
    """
    by_rep = {}
    for r in records:
        by_rep.setdefault(r["repetition"], []).append(r)
    ranks = {m: [] for m in methods}
    for recs in by_rep.values():
        done = [r for r in recs if not r["timed_out"]]
        if not done:
            continue
        rk = rankdata([r["score_ratio"] for r in done])
        for r, v in zip(done, rk):
            r["rank"] = float(v)
            ranks[r["method"]].append(float(v))
    summary = []
    for m in methods:
        mine = [r for r in records if r["method"] == m]
        ok = [r for r in mine if not r["timed_out"]]
        ratios = np.array([r["score_ratio"] for r in ok])
        times = np.array([r["fit_seconds"] for r in mine])
        summary.append({
            "method": m,
            "Avg Score Ratio": float(ratios.mean()) if len(ok) else float("nan"),
            "Avg Rank": float(np.mean(ranks[m])) if ranks[m] else float("nan"),
            "Avg Comp. Time": float(times.mean()) if len(mine) else float("nan"),
            "std": float(ratios.std()) if len(ok) else float("nan"),
            "timeouts": len(mine) - len(ok),
        })
    return summary


def format_table(summary):
    header = ["method", *SUMMARY_COLUMNS]
    rows = []
    for s in summary:
        ratio = ("nan" if np.isnan(s["Avg Score Ratio"]) else
                 f"{s['Avg Score Ratio']:.3f} ({s['std']:.3f})")
        if s["timeouts"]:
            ratio += f" [{s['timeouts']} timeout]"
        rows.append([s["method"], ratio, f"{s['Avg Rank']:.2f}",
                     f"{s['Avg Comp. Time']:.2f}"])
    widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]
    lines = ["  ".join(c.ljust(wd) for c, wd in zip(header, widths))]
    lines.append("  ".join("-" * wd for wd in widths))
    lines += ["  ".join(c.ljust(wd) for c, wd in zip(r, widths)) for r in rows]
    return "\n".join(lines) + "\n"


def write_runs_csv(path, records):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(RUN_COLUMNS)
        for r in records:
            writer.writerow([_fmt(r.get(c)) for c in RUN_COLUMNS])


def write_summary_csv(path, summary):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["method", *SUMMARY_COLUMNS])
        for s in summary:
            writer.writerow([s["method"], *(_fmt(s[c]) for c in SUMMARY_COLUMNS)])


def default_workers():
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer") from None


def run_experiment(cfg, workers=None):
    """Run every repetition of ``cfg``.

    Returns ``(records, summary)``; when ``cfg.output_dir`` is set, also
    writes ``runs.csv``, ``summary.csv``, ``summary.txt``, ``config.json``
    and the IWN trace files.
    """
    cfg.validate()
    workers = default_workers() if workers is None else workers
    if workers > 1:
        log.warning("running with %d workers: fit times are not comparable "
                    "across methods", workers)
    out = Path(cfg.output_dir) if cfg.output_dir else None
    trace_dir = None
    if out is not None:
        trace_dir = out / "traces"
        trace_dir.mkdir(parents=True, exist_ok=True)
        cfg.dump(out / "config.json")
    unbiased = None
    if cfg.dataset.kind == "csv":
        unbiased = _load_unbiased(cfg.dataset)
    seeds = child_seeds(cfg.seed, cfg.repetitions)
    args = [(cfg, r, seeds[r], unbiased, trace_dir)
            for r in range(cfg.repetitions)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            chunks = list(pool.map(_run_repetition_star, args))
    else:
        chunks = [_run_repetition(*a) for a in args]
    records = [r for chunk in chunks for r in chunk]
    summary = rank_and_summarize(records, cfg.methods)
    if out is not None:
        write_runs_csv(out / "runs.csv", records)
        write_summary_csv(out / "summary.csv", summary)
        (out / "summary.txt").write_text(format_table(summary))
    return records, summary


def _run_repetition_star(args):
    return _run_repetition(*args)


# ---------------------------------------------------------------------------
# Synthetic study
# ---------------------------------------------------------------------------

def write_tidy_csv(path, rows):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["iteration", "series", "value"])
        for it, series, value in rows:
            writer.writerow([it, series, _fmt(float(value))])


def run_synthetic_study(dim=8, n=2000, iterations=4000, eval_every=50, seed=0,
                        num_components=10, iwn_params=None, with_kmm=True,
                        output_dir=None):
    """Train IWN on the mixture problem and trace MAE, MMD and sigma.

    At every ``eval_every`` iterations the current network's weights are used
    to fit a weighted ridge whose target MAE is recorded, together with the
    full-sample MMD at the current sigma.  The uniform and KMM MAEs are
    recorded as reference levels.
    """
    s_spec, s_src, s_tgt, s_fit = child_seeds(seed, 4)
    spec = make_mixture_spec(num_components, dim, seed=s_spec)
    src = sample_mixture(spec, n, "source", seed=s_src)
    tgt = sample_mixture(spec, n, "target", seed=s_tgt)
    xs, ys, xt, yt = src.x, src.y[:, 0], tgt.x, tgt.y[:, 0]

    mae_unif = mae(ridge_fit_weighted(xs, ys), xt, yt)
    params = {"max_iters": iterations, "patience": iterations,
              "trace_full_mmd_every": eval_every, "seed": s_fit}
    params.update(iwn_params or {})
    cfg = IwnConfig(**params)

    mae_trace = {}

    def on_eval(it, model, sigma):
        w = iwn_weigh_new(model, xs)
        mae_trace[it] = mae(ridge_fit_weighted(xs, ys, w), xt, yt)

    t0 = time.perf_counter()
    w, model, report = iwn_fit(xs, xt, cfg, callback=on_eval)
    fit_seconds = time.perf_counter() - t0
    mae_iwn = mae(ridge_fit_weighted(xs, ys, w), xt, yt)
    best_sigma = report.sigma_trace[report.best_iter]
    full_best = weighted_mmd(xs, xt, w, best_sigma).value
    # iteration 0 is the pretrained network at the initial sigma
    full_start = report.full_mmd_trace.get(0)

    result = {
        "mae_uniform": mae_unif,
        "mae_iwn": mae_iwn,
        "ratio_iwn": score_ratio(mae_iwn, mae_unif),
        "full_mmd_start": full_start,
        "full_mmd_best": full_best,
        "best_iter": report.best_iter,
        "sigma_start": float(report.sigma_trace[0]),
        "iwn_seconds": fit_seconds,
        "report": report,
        "mae_trace": mae_trace,
    }
    if with_kmm:
        sigma, wk, _ = baselines.select_by_discrepancy(
            "kmm", baselines.DEFAULT_SIGMA_GRID, xs, xt)
        result["mae_kmm"] = mae(ridge_fit_weighted(xs, ys, wk), xt, yt)
        result["ratio_kmm"] = score_ratio(result["mae_kmm"], mae_unif)
        result["kmm_sigma"] = float(sigma)

    if output_dir is not None:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        rows = []
        for i, (b, s) in enumerate(zip(report.batch_mmd_trace,
                                       report.sigma_trace)):
            rows += [(i, "batch_mmd", b), (i, "sigma", s)]
        rows += [(i, "full_mmd", v) for i, v in report.full_mmd_trace.items()]
        rows += [(i, "mae_iwn", v) for i, v in mae_trace.items()]
        rows += [(0, "mae_uniform", mae_unif)]
        if with_kmm:
            rows += [(0, "mae_kmm", result["mae_kmm"])]
        rows.sort(key=lambda r: (r[0], r[1]))
        write_tidy_csv(out / "synthetic_trace.csv", rows)
        np.savetxt(out / "iwn_weights.csv", w, header="weight", comments="")
        (out / "mixture_spec.json").write_text(spec.to_json())
        summary = {k: v for k, v in result.items()
                   if k not in ("report", "mae_trace")}
        (out / "synthetic_summary.json").write_text(
            json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return result


# ---------------------------------------------------------------------------
# Scaling study
# ---------------------------------------------------------------------------

def run_scaling_study(sizes, dims, methods=METHODS, budget=500.0, seed=0,
                      iwn_iters=1000, output_dir=None):
    """Wall time of each method per (n, p) on the mixture problem.

    IWN runs a fixed number of iterations (early stopping off) so its cost
    does not depend on n; the other methods include their model selection.
    Cells past the budget are reported as timeouts.
    """
    rows = []
    for p in dims:
        spec = make_mixture_spec(10, p, seed=seed)
        for n in sizes:
            s_src, s_tgt = child_seeds(seed + 7919 * p + n, 2)
            xs = sample_mixture(spec, n, "source", seed=s_src).x
            xt = sample_mixture(spec, n, "target", seed=s_tgt).x
            for method in methods:
                params = ({"max_iters": iwn_iters, "patience": iwn_iters}
                          if method == "iwn" else None)
                deadline = Deadline(budget)
                t0 = time.perf_counter()
                try:
                    fit_weights(method, xs, xt, params, seed, deadline)
                    seconds, timed_out = time.perf_counter() - t0, False
                except BudgetExceeded:
                    seconds, timed_out = time.perf_counter() - t0, True
                rows.append({"method": method, "n": n, "p": p,
                             "seconds": seconds, "timed_out": timed_out})
                log.info("scaling %s n=%d p=%d: %.2fs%s", method, n, p,
                         seconds, " (timeout)" if timed_out else "")
    if output_dir is not None:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "scaling.csv", "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["method", "n", "p", "seconds"])
            for r in rows:
                writer.writerow([r["method"], r["n"], r["p"],
                                 f">{budget:g}" if r["timed_out"]
                                 else _fmt(r["seconds"])])
    return rows


# ---------------------------------------------------------------------------
# Ablation
# ---------------------------------------------------------------------------

def run_ablation(architectures=(), batch_sizes=(), dataset=None, bias="mixture",
                 n=2000, repetitions=10, iterations=2000, seed=0,
                 base_params=None, output_dir=None):
    """Score of IWN per network architecture (at batch 256) and score and
    time per batch size (at 3 x 100).

    Returns a list of row dicts with ``kind`` set to ``"architecture"`` or
    ``"batch"``.
    """
    cfg = ExperimentConfig(dataset=dataset or DatasetConfig(), bias=bias, n=n,
                           methods=["iwn"], repetitions=repetitions, seed=seed)
    cfg.validate()
    unbiased = _load_unbiased(cfg.dataset) if cfg.dataset.kind == "csv" else None
    seeds = child_seeds(seed, repetitions)
    reps = []
    for r in range(repetitions):
        data = make_rep_data(cfg, seeds[r], unbiased)
        mae_unif = mae(ridge_fit_weighted(data.source_x, data.source_y),
                       data.target_x, data.target_y)
        reps.append((data, mae_unif))

    def evaluate(params):
        scores, times = [], []
        for r, (data, mae_unif) in enumerate(reps):
            p = {"max_iters": iterations, "patience": iterations,
                 "seed": seeds[r]}
            p.update(base_params or {})
            p.update(params)
            t0 = time.perf_counter()
            w, _, _ = iwn_fit(data.source_x, data.target_x, IwnConfig(**p))
            times.append(time.perf_counter() - t0)
            m = mae(ridge_fit_weighted(data.source_x, data.source_y, w),
                    data.target_x, data.target_y)
            scores.append(score_ratio(m, mae_unif))
        return np.array(scores), np.array(times)

    rows = []
    for layers, units in architectures:
        s, t = evaluate({"hidden_layers": layers, "hidden_units": units,
                         "batch_size": 256})
        rows.append({"kind": "architecture", "layers": layers, "units": units,
                     "score_mean": s.mean(), "score_std": s.std(),
                     "time_mean": t.mean(), "time_std": t.std(),
                     "scores": s.tolist()})
    for b in batch_sizes:
        s, t = evaluate({"hidden_layers": 3, "hidden_units": 100,
                         "batch_size": b})
        rows.append({"kind": "batch", "batch_size": b,
                     "score_mean": s.mean(), "score_std": s.std(),
                     "time_mean": t.mean(), "time_std": t.std(),
                     "scores": s.tolist()})

    if output_dir is not None:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "ablation.csv", "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["kind", "layers", "units", "batch_size",
                             "score_mean", "score_std", "time_mean",
                             "time_std"])
            for r in rows:
                writer.writerow([r["kind"], r.get("layers", ""),
                                 r.get("units", ""), r.get("batch_size", ""),
                                 *(_fmt(r[k]) for k in ("score_mean",
                                   "score_std", "time_mean", "time_std"))])
        (out / "ablation.txt").write_text(format_ablation(rows))
    return rows


def format_ablation(rows):
    """Architecture grid (layers x units) beside the batch-size column."""
    arch = [r for r in rows if r["kind"] == "architecture"]
    batch = [r for r in rows if r["kind"] == "batch"]
    units = sorted({r["units"] for r in arch})
    layers = sorted({r["layers"] for r in arch})
    cell = {(r["layers"], r["units"]): r for r in arch}
    left = [["layers\\units", *map(str, units)]]
    for l in layers:
        left.append([str(l)] + [
            f"{cell[(l, u)]['score_mean']:.2f} ({cell[(l, u)]['score_std']:.2f})"
            if (l, u) in cell else "" for u in units])
    right = [["size", "score", "time (s)"]]
    for r in batch:
        right.append([str(r["batch_size"]),
                      f"{r['score_mean']:.2f} ({r['score_std']:.2f})",
                      f"{r['time_mean']:.1f} ({r['time_std']:.1f})"])
    height = max(len(left), len(right))
    lw = [max(len(row[i]) for row in left) for i in range(len(left[0]))]
    rw = [max(len(row[i]) for row in right) for i in range(3)]
    lines = []
    for i in range(height):
        lrow = left[i] if i < len(left) else [""] * len(lw)
        rrow = right[i] if i < len(right) else [""] * 3
        lines.append("  ".join(c.ljust(w) for c, w in zip(lrow, lw)) + " || "
                     + "  ".join(c.ljust(w) for c, w in zip(rrow, rw)))
    return "\n".join(l.rstrip() for l in lines) + "\n"
