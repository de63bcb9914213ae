"""Command-line entry point: ``sparse-cc {simulate|fit|path|select|experiment}``."""
import argparse
import json
import sys

import numpy as np

from sparsecc import experiments
from sparsecc.model import read_csv, write_dataset
from sparsecc.path import gbm, write_sketch_csv
from sparsecc.selection import select
from sparsecc.simulate import MarginalSpec, make_truth, sample_case_control
from sparsecc.solver import SolverConfig, fit_l1_logistic, lambda_max


def _cmd_simulate(args):
    spec = MarginalSpec(args.kind, args.M)
    rng = np.random.default_rng(args.seed)
    truth = make_truth(spec, args.kstar, args.beta_value, args.pi, rng, args.mc)
    data = sample_case_control(spec, truth, args.n, rng)
    write_dataset(args.output, data)
    sidecar = args.truth or args.output.rsplit(".", 1)[0] + ".truth.json"
    with open(sidecar, "w", encoding="utf-8") as fh:
        json.dump(truth.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0


def _cmd_fit(args):
    data = read_csv(args.input)
    lam = args.lam if args.lam is not None else args.lambda_fraction * lambda_max(data)
    fit = fit_l1_logistic(data, lam, SolverConfig(tolerance=args.tol))
    text = json.dumps(fit.to_dict(), indent=2, sort_keys=True)
    _emit(text, args.output)
    return 0 if fit.converged else 1


def _cmd_path(args):
    data = read_csv(args.input)
    sketch = gbm(data, args.alpha, SolverConfig(), args.kmax)
    write_sketch_csv(args.output, sketch)
    return 0


def _cmd_select(args):
    data = read_csv(args.input)
    res = select(data, args.folds, args.alpha, args.seed, SolverConfig(), args.kmax)
    _emit(res.to_json(), args.output)
    return 0


def _cmd_experiment(args):
    summary = experiments.run_preset(args.table, args.scale, args.out, args.seed, args.jobs,
                                     args.replicates)
    if args.check and args.table in ("1", "2", "mse"):
        misses = experiments.check_summary(args.table, summary)
        for m in misses:
            print(f"MISS {m}", file=sys.stderr)
        if misses:
            return 2
    return 0


def _emit(text, path):
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def build_parser():
    p = argparse.ArgumentParser(prog="sparse-cc", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="draw a case-control dataset")
    s.add_argument("--kind", choices=["snp", "nor_iid", "nor_corr"], required=True)
    s.add_argument("--M", type=int, required=True)
    s.add_argument("--kstar", type=int, required=True)
    s.add_argument("--beta-value", type=float, default=1.0)
    s.add_argument("--pi", type=float, default=0.01)
    s.add_argument("--n", type=int, required=True, help="rows per class")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--mc", type=int, default=1_000_000, help="Monte Carlo size for intercept calibration")
    s.add_argument("--output", required=True)
    s.add_argument("--truth", help="ground-truth JSON path (default: <output>.truth.json)")
    s.set_defaults(func=_cmd_simulate)

    f = sub.add_parser("fit", help="L1-penalized fit at one penalty")
    f.add_argument("--input", required=True)
    g = f.add_mutually_exclusive_group()
    g.add_argument("--lambda", dest="lam", type=float)
    g.add_argument("--lambda-fraction", type=float, default=0.5, help="fraction of lambda_max")
    f.add_argument("--tol", type=float, default=1e-8)
    f.add_argument("--output")
    f.set_defaults(func=_cmd_fit)

    pa = sub.add_parser("path", help="GBM path sketch")
    pa.add_argument("--input", required=True)
    pa.add_argument("--alpha", type=float, default=None, help="default 1e-4 * lambda_max")
    pa.add_argument("--kmax", type=int, default=None)
    pa.add_argument("--output", required=True)
    pa.set_defaults(func=_cmd_path)

    se = sub.add_parser("select", help="CV + BIC variable selection")
    se.add_argument("--input", required=True)
    se.add_argument("--folds", type=int, default=10)
    se.add_argument("--seed", type=int, default=0)
    se.add_argument("--alpha", type=float, default=None)
    se.add_argument("--kmax", type=int, default=None)
    se.add_argument("--output")
    se.set_defaults(func=_cmd_select)

    e = sub.add_parser("experiment", help="simulation studies")
    e.add_argument("--table", choices=["1", "2", "mse", "fig1"], required=True)
    e.add_argument("--scale", choices=["desk", "paper"], default="desk")
    e.add_argument("--jobs", type=int, default=1)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--replicates", type=int, default=None, help="override the preset count")
    e.add_argument("--out", default="results")
    e.add_argument("--check", action="store_true", help="exit 2 when a threshold is missed")
    e.set_defaults(func=_cmd_experiment)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
