"""Command-line interface.  Exit codes: 0 ok, 1 usage, 2 data, 3 numerical."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import bounds, datasets, experiments, gaussian
from .exceptions import (
    DataError,
    InvalidDistributionError,
    InvalidInputError,
    NotApplicableError,
    UnboundedComplexityError,
)
from .model import save_separator
from .solver import SolverConfig, _resolve_loss, train_linear, train_polynomial

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _common(p):
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--seed", type=int, help="random seed (overrides the config)")
    p.add_argument("--out", help="write results (model file or CSV) here")


def _values(args, keys):
    """Merge config-file values with explicit flags; flags win."""
    merged = dict(datasets.read_config(args.config)) if args.config else {}
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            merged[k] = v
    if args.seed is not None:
        merged["seed"] = args.seed
    return merged


def _need(vals, key, typ=float):
    if key not in vals:
        raise UsageError(f"missing required value: --{key.replace('_', '-')}")
    try:
        return typ(vals[key])
    except (TypeError, ValueError):
        raise UsageError(f"invalid value for {key}: {vals[key]!r}") from None


def _emit(text, out=None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_train(args):
    vals = _values(args, ["data", "loss", "degree", "max_iterations", "l1_bound"])
    data = datasets.load_csv(_need(vals, "data", str))
    loss = _resolve_loss(vals.get("loss", "hinge"))
    degree = int(vals.get("degree", 1))
    cfg = SolverConfig(max_iterations=int(vals.get("max_iterations", 50_000)),
                       l1_bound=float(vals.get("l1_bound", math.inf)),
                       seed=int(vals.get("seed", 0)))
    model = train_linear(data, loss, cfg) if degree == 1 else train_polynomial(data, degree, loss, cfg)
    print(model.summary())
    if args.out:
        save_separator(model.separator, args.out)


def cmd_bounds(args):
    vals = _values(args, ["n", "h", "delta", "p", "tau", "J"])
    inputs = bounds.VapnikBoundInputs(
        _need(vals, "n", int), _need(vals, "h"), _need(vals, "delta"),
        _need(vals, "p"), _need(vals, "tau"), _need(vals, "J"),
    )
    print(bounds.vapnik_relative_bound(inputs))


def cmd_complexity(args):
    vals = _values(args, ["eps", "delta", "d", "J", "tau", "p"])
    eps, delta = _need(vals, "eps"), _need(vals, "delta")
    d, J, tau, p = _need(vals, "d", int), _need(vals, "J"), _need(vals, "tau"), _need(vals, "p")
    n_num = bounds.info_complexity_numeric(eps, delta, bounds.vc_dim_hinge_loss_family(d), J, tau, p)
    n_asym = bounds.info_complexity_asymptotic(eps, delta, d, J, tau, p)
    if n_asym is None:
        print(f"numeric={n_num} asymptotic=none ratio=none")
    else:
        print(f"numeric={n_num} asymptotic={n_asym!r} ratio={n_num / n_asym!r}")


def _pair_from(vals):
    def vec(key):
        return np.array(json.loads(_need(vals, key, str)), dtype=float)

    beta1 = float(vals.get("beta1", 0.5))
    pi1 = float(vals["pi1"]) if "pi1" in vals else None
    return gaussian.GaussianPair.from_arrays(vec("mean_pos"), vec("cov_pos"), vec("mean_neg"),
                                             vec("cov_neg"), beta1=beta1, pi1=pi1)


_PAIR_KEYS = ["mean_pos", "cov_pos", "mean_neg", "cov_neg", "beta1", "pi1"]


def cmd_gauss_sim(args):
    vals = _values(args, _PAIR_KEYS + ["n_mc", "k", "n_train"])
    pair = _pair_from(vals)
    seed = int(vals.get("seed", 0))
    n_mc = int(vals.get("n_mc", 100_000))
    surface = gaussian.bayes_quadratic_surface(pair)
    risk = gaussian.weighted_risk_mc(pair, surface, n_mc, seed)
    print(f"sigma_criterion={gaussian.sigma_criterion(pair)!r}")
    print(f"bayes_risk={risk.estimate!r} se={risk.standard_error!r}")
    if "k" in vals:
        rep = gaussian.algorithmic_error_report(pair, int(vals["k"]),
                                                int(vals.get("n_train", 100_000)), n_mc, seed)
        print(f"e_alg={rep.clamped!r} raw={rep.raw!r} se={rep.standard_error!r}")
    if args.out:
        Path(args.out).write_text(surface.dumps())
    else:
        sys.stdout.write(surface.dumps())


def cmd_rates(args):
    vals = _values(args, ["trials", "kind"])
    trials = int(vals.get("trials", 200))
    seed = int(vals.get("seed", 0))
    if vals.get("kind", "squared") == "deviation":
        rep = experiments.rate_optimality_check(trials=trials, seed=seed)
        rows = [{"n": int(n), "k": 1, "e_inf": e, "e_inf_se": math.nan, "e_alg": 0.0,
                 "e_alg_se": 0.0, "e_total": e, "e_total_se": math.nan, "bound": math.nan}
                for n, e in rep.fit.points]
        _emit(experiments.reports_to_csv(rows), args.out)
        print(f"# exponent={rep.fit.exponent!r} r2={rep.fit.r_squared!r} pass={rep.passed}")
        return
    rep = experiments.squared_loss_rate_experiment(trials=trials, seed=seed)
    _emit(rep.to_csv(), args.out)
    print(f"# exponent={rep.excess_fit.exponent!r} r2={rep.excess_fit.r_squared!r} "
          f"gap_exponent={rep.gap_fit.exponent!r} pass={rep.passed}")


def cmd_scale(args):
    vals = _values(args, _PAIR_KEYS + ["n", "k_max", "trials", "n_mc"])
    pair = _pair_from(vals)
    res = experiments.scale_search(
        pair, None, _need(vals, "n", int), int(vals.get("k_max", 3)),
        trials=int(vals.get("trials", 20)), seed=int(vals.get("seed", 0)),
        n_mc=int(vals.get("n_mc", 100_000)),
    )
    _emit(res.to_csv(), args.out)
    print(f"# best_k={res.best_k}")


def cmd_wisconsin(args):
    vals = dict(datasets.read_config(args.config)) if args.config else {}
    base = Path(args.config).parent if args.config else None
    if args.data:
        vals["dataset_path"] = args.data
    if args.repetitions is not None:
        vals["repetitions"] = args.repetitions
    cfg = datasets.ExperimentConfig.from_mapping(vals, base_dir=base)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    report = datasets.reproduce_table(cfg)
    print(report.format())
    if args.out:
        rows = ["run,machine,fp,fn,tp,tn,errors,error_rate"]
        for i, run in enumerate(report.runs):
            for name, c in run.counts.items():
                rows.append(f"{i},{name},{c.fp},{c.fn},{c.tp},{c.tn},{c.errors},{c.error_rate:.17g}")
        Path(args.out).write_text("\n".join(rows) + "\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="svmcomplexity", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("train", help="fit a model on a CSV dataset")
    _common(p)
    p.add_argument("--data")
    p.add_argument("--loss", choices=["hinge", "squared"])
    p.add_argument("--degree", type=int)
    p.add_argument("--max-iterations", dest="max_iterations", type=int)
    p.add_argument("--l1-bound", dest="l1_bound", type=float)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("bounds", help="relative VC bound")
    _common(p)
    for name, typ in (("n", int), ("h", float), ("delta", float), ("p", float),
                      ("tau", float), ("J", float)):
        p.add_argument(f"--{name}", type=typ)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("complexity", help="information complexity, numeric and asymptotic")
    _common(p)
    for name, typ in (("eps", float), ("delta", float), ("d", int), ("J", float),
                      ("tau", float), ("p", float)):
        p.add_argument(f"--{name}", type=typ)
    p.set_defaults(func=cmd_complexity)

    def pair_flags(p):
        for name in ("mean-pos", "cov-pos", "mean-neg", "cov-neg"):
            p.add_argument(f"--{name}", dest=name.replace("-", "_"), help="JSON list")
        p.add_argument("--beta1", type=float)
        p.add_argument("--pi1", type=float)
        p.add_argument("--n-mc", dest="n_mc", type=int)

    p = sub.add_parser("gauss-sim", help="Bayes surface and weighted risks for a Gaussian pair")
    _common(p)
    pair_flags(p)
    p.add_argument("--k", type=int)
    p.add_argument("--n-train", dest="n_train", type=int)
    p.set_defaults(func=cmd_gauss_sim)

    p = sub.add_parser("rates", help="log-log rate fits")
    _common(p)
    p.add_argument("--trials", type=int)
    p.add_argument("--kind", choices=["squared", "deviation"])
    p.set_defaults(func=cmd_rates)

    p = sub.add_parser("scale", help="search the polynomial degree k for a given n")
    _common(p)
    pair_flags(p)
    p.add_argument("--n", type=int)
    p.add_argument("--k-max", dest="k_max", type=int)
    p.add_argument("--trials", type=int)
    p.set_defaults(func=cmd_scale)

    p = sub.add_parser("wisconsin", help="three-pipeline table on the Wisconsin data")
    _common(p)
    p.add_argument("--data")
    p.add_argument("--repetitions", type=int)
    p.set_defaults(func=cmd_wisconsin)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (UnboundedComplexityError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InvalidInputError, InvalidDistributionError, NotApplicableError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
