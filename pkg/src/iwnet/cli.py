"""Command-line entry point: ``iwnet {weigh,bench,synthetic,scaling,ablation}``."""

import argparse
import json
import logging
import sys

import numpy as np

from . import bench
from .dataset import apply_preprocess, fit_preprocess, load_csv

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _parse_params(items):
    params = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise bench.ConfigError(f"--param expects key=value, got {item!r}")
        try:
            params[key] = json.loads(value)
        except json.JSONDecodeError:
            params[key] = value
    return params


def cmd_weigh(args):
    try:
        src = load_csv(args.source, args.target_columns, args.categorical)
        tgt = load_csv(args.target, [], args.categorical)
    except (OSError, KeyError, ValueError) as exc:
        raise bench.ConfigError(str(exc)) from None
    # drop source outputs so both files share the input schema
    if src.feature_names != tgt.feature_names:
        raise bench.ConfigError("source and target input columns differ")
    stats = fit_preprocess(tgt, args.categorical)
    xs = apply_preprocess(src, stats).x
    xt = apply_preprocess(tgt, stats).x
    w, info = bench.fit_weights(args.method, xs, xt, _parse_params(args.param),
                                seed=args.seed)
    np.savetxt(args.out, w, fmt="%.17g", header="weight", comments="")
    print(f"{args.method}: wrote {len(w)} weights to {args.out} "
          f"(selected {info['hyperparameter']})")


def cmd_bench(args):
    cfg = bench.ExperimentConfig.load(args.config)
    if args.out:
        cfg.output_dir = args.out
    _, summary = bench.run_experiment(cfg, workers=args.workers)
    print(bench.format_table(summary), end="")


def cmd_synthetic(args):
    res = bench.run_synthetic_study(
        dim=args.dim, n=args.n, iterations=args.iterations,
        eval_every=args.eval_every, seed=args.seed,
        num_components=args.components, with_kmm=not args.no_kmm,
        output_dir=args.out)
    print(f"uniform MAE {res['mae_uniform']:.4f}  IWN MAE {res['mae_iwn']:.4f}"
          f"  ratio {res['ratio_iwn']:.3f}")
    if "ratio_kmm" in res:
        print(f"KMM MAE {res['mae_kmm']:.4f}  ratio {res['ratio_kmm']:.3f}")


def cmd_scaling(args):
    rows = bench.run_scaling_study(args.sizes, args.dims, args.methods,
                                   args.budget, args.seed, args.iwn_iters,
                                   args.out)
    for r in rows:
        t = f">{args.budget:g}" if r["timed_out"] else f"{r['seconds']:.2f}"
        print(f"{r['method']:6s} n={r['n']:<8d} p={r['p']:<5d} {t}")


def cmd_ablation(args):
    archs = [(l, u) for l in args.layers for u in args.units]
    ds = bench.DatasetConfig(dim=args.dim, pool_size=args.pool_size)
    rows = bench.run_ablation(archs, args.batch_sizes, ds, n=args.n,
                              repetitions=args.reps, iterations=args.iterations,
                              seed=args.seed, output_dir=args.out)
    print(bench.format_ablation(rows), end="")


def build_parser():
    p = argparse.ArgumentParser(prog="iwnet", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    w = sub.add_parser("weigh", help="fit one method on source/target CSVs")
    w.add_argument("--source", required=True)
    w.add_argument("--target", required=True)
    w.add_argument("--method", choices=bench.METHODS, default="iwn")
    w.add_argument("--target-columns", nargs="*", default=[],
                   help="output columns present in the source file")
    w.add_argument("--categorical", nargs="*", default=[])
    w.add_argument("--param", action="append",
                   help="method parameter as key=value (JSON values)")
    w.add_argument("--seed", type=int, default=0)
    w.add_argument("--out", required=True)
    w.set_defaults(func=cmd_weigh)

    b = sub.add_parser("bench", help="run an experiment config file")
    b.add_argument("config")
    b.add_argument("--out", help="override output_dir")
    b.add_argument("--workers", type=int, default=None)
    b.set_defaults(func=cmd_bench)

    s = sub.add_parser("synthetic", help="mixture study traces")
    s.add_argument("--dim", type=int, default=8)
    s.add_argument("--n", type=int, default=2000)
    s.add_argument("--components", type=int, default=10)
    s.add_argument("--iterations", type=int, default=4000)
    s.add_argument("--eval-every", type=int, default=50)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--no-kmm", action="store_true")
    s.add_argument("--out")
    s.set_defaults(func=cmd_synthetic)

    c = sub.add_parser("scaling", help="fit time versus n and p")
    c.add_argument("--sizes", type=int, nargs="+", default=[500, 2000])
    c.add_argument("--dims", type=int, nargs="+", default=[32])
    c.add_argument("--methods", nargs="+", choices=bench.METHODS,
                   default=list(bench.METHODS))
    c.add_argument("--budget", type=float, default=500.0)
    c.add_argument("--iwn-iters", type=int, default=1000)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out")
    c.set_defaults(func=cmd_scaling)

    a = sub.add_parser("ablation", help="architecture and batch-size study")
    a.add_argument("--layers", type=int, nargs="*", default=[0, 1, 2, 3, 4])
    a.add_argument("--units", type=int, nargs="*", default=[10, 100, 300])
    a.add_argument("--batch-sizes", type=int, nargs="*",
                   default=[16, 64, 256, 1024, 4096])
    a.add_argument("--reps", type=int, default=10)
    a.add_argument("--iterations", type=int, default=2000)
    a.add_argument("--dim", type=int, default=8)
    a.add_argument("--n", type=int, default=2000)
    a.add_argument("--pool-size", type=int, default=2000)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--out")
    a.set_defaults(func=cmd_ablation)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except bench.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        logging.getLogger("iwnet").debug("failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
