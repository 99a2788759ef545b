"""Command-line interface: ``simulate``, ``fit``, ``prop1`` and ``version``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from . import harness as H
from . import models as M
from .errors import (
    DebiasRegError, InfeasibleConstraint, MaxIterExceeded, SingularInnerSolve, SingularKKT,
)
from .kernels import KernelSpec, median_bandwidth
from .metrics import evaluate
from .theory import BiasTrend, monte_carlo_prop1

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SOLVER = 0, 1, 2, 3
SOLVER_ERRORS = (SingularKKT, SingularInnerSolve, MaxIterExceeded, InfeasibleConstraint)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    for f in fields(H.ExperimentConfig):
        p.add_argument("--" + f.name.replace("_", "-"), dest=f.name, default=None,
                       help=argparse.SUPPRESS if f.name in ("data", "response") else None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="debiasreg", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("simulate", help="replicated synthetic experiment")
    p.add_argument("--config", help="flat key = value file with ExperimentConfig fields")
    _add_config_flags(p)

    p = sub.add_parser("fit", help="fit one method on a CSV file and print a JSON report")
    p.add_argument("--data", required=True)
    p.add_argument("--response", required=True)
    p.add_argument("--method", required=True, choices=H.METHODS)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--bandwidth", type=float)
    p.add_argument("--test", help="held-out CSV with the same columns")
    p.add_argument("--cv-folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output-dir", help="also write predictions and the report here")

    p = sub.add_parser("prop1", help="Monte-Carlo check of the shrinkage inequality")
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--r2", type=float, required=True)
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--reps", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)

    sub.add_parser("version", help="print the package version")
    return parser


def config_from_args(args: argparse.Namespace) -> H.ExperimentConfig:
    values = H.read_config_file(args.config) if args.config else {}
    for f in fields(H.ExperimentConfig):
        raw = getattr(args, f.name, None)
        if raw is not None:
            values[f.name] = H._coerce(f.name, raw)
    return H.ExperimentConfig(**values)


def _cmd_simulate(args) -> int:
    try:
        config = config_from_args(args)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, DebiasRegError):
            raise
        raise UsageError(str(exc))
    result = H.run_experiment(config)
    H.write_outputs(result)
    for label, fails in result.table.failures.items():
        if fails:
            print(f"{label}: {len(fails)} replication(s) excluded", file=sys.stderr)
    print(f"wrote {Path(config.output_dir) / 'results.csv'}")
    return EXIT_OK


def _fit_report(args) -> dict:
    train = H.load_csv(args.data, args.response)
    method = args.method
    hp = H.Hyperparameters()
    if method.startswith("lasso"):
        hp.lasso_lambda = args.lam if args.lam is not None else M.cv_lambda_lasso(
            train, args.cv_folds, args.seed)
    else:
        if args.bandwidth is not None:
            hp.bandwidth = args.bandwidth
            hp.krr_lambda = args.lam if args.lam is not None else M.cv_lambda_krr(
                train, KernelSpec(args.bandwidth), args.cv_folds, args.seed)
        elif args.lam is not None:
            hp.bandwidth = median_bandwidth(train.features)
            hp.krr_lambda = args.lam
        else:
            kernel, hp.krr_lambda = M.cv_krr(train, args.cv_folds, args.seed)
            hp.bandwidth = kernel.bandwidth
    fit = H.fit_method(method, train, hp)
    y_fit = M.fitted_values(fit, train)
    report = {
        "method": method,
        "n_train": train.n,
        "p": train.p,
        "hyperparameters": {k: v for k, v in vars(hp).items() if v is not None},
        "constraint_residual": fit.constraint_residual,
        "group_mean_gaps": M.group_mean_gaps(train.response, y_fit).tolist(),
        "train": evaluate(train.response, y_fit, "train").as_dict(),
    }
    predictions = {"train": (train, y_fit)}
    if args.test:
        test = H.load_csv(args.test, args.response)
        y_hat = M.predict(fit, test.features)
        report["test"] = evaluate(test.response, y_hat, "test").as_dict()
        predictions["test"] = (test, y_hat)
    if args.output_dir:
        out = Path(args.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        for split, (ds, y_hat) in predictions.items():
            with open(out / f"predictions_{method}_{split}.csv", "w") as fh:
                fh.write("y,y_hat,residual\n")
                for y, yh in zip(ds.response, y_hat):
                    fh.write(f"{y!r},{float(yh)!r},{float(y - yh)!r}\n")
        with open(out / "report.json", "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return report


def _cmd_fit(args) -> int:
    print(json.dumps(_fit_report(args), indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_prop1(args) -> int:
    try:
        t = BiasTrend(args.c, args.r2, args.sigma2, args.n)
    except ValueError as exc:
        raise UsageError(str(exc))
    res = monte_carlo_prop1(t, args.reps, args.seed)
    out = {k: (bool(v) if isinstance(v, (bool, np.bool_)) else v)
           for k, v in vars(res).items()}
    out.update(z_unbiased=res.z_unbiased, z_biased=res.z_biased)
    print(json.dumps(out, indent=2, sort_keys=True))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if args.command is None:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        if args.command == "version":
            print(__version__)
            return EXIT_OK
        handler = {"simulate": _cmd_simulate, "fit": _cmd_fit, "prop1": _cmd_prop1}
        return handler[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except H.ReplicationFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except SOLVER_ERRORS as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (DebiasRegError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
