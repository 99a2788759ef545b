"""Replicated simulation runs, CSV ingestion and result files."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy

from . import __version__
from . import models as M
from .data import Dataset, split_train_test
from .datagen import KINDS, ScenarioSpec, generate
from .errors import DebiasRegError, MissingColumn, ParseError
from .kernels import KernelSpec, median_bandwidth
from .metrics import METRIC_NAMES, evaluate

log = logging.getLogger(__name__)

METHODS = ("krr_const", "lasso_const", "krr", "lasso")
SPLITS = ("train", "test")
RESULT_COLUMNS = ("scenario", "split", "method", "metric", "mean", "sd", "replications")
SCATTER_COLUMNS = ("replication", "y", "y_hat", "residual")
MAX_FAILURE_FRACTION = 0.05


class ReplicationFailure(DebiasRegError, RuntimeError):
    """Too many replications failed for the aggregate to be trusted."""


# ---------------------------------------------------------------------------
# Configuration


@dataclass
class ExperimentConfig:
    """Settings of a replicated experiment.

    ``lambda_policy`` is ``"cv"`` or a fixed number; ``bandwidth_policy`` is
    ``"cv"`` (joint CV over multiples of the median distance), ``"median"``
    (median heuristic, lambda still tuned) or a fixed number. CV selections
    use the one-standard-error rule unless ``cv_rule`` is ``"min"``.
    """

    scenarios: Tuple[str, ...] = KINDS
    methods: Tuple[str, ...] = METHODS
    n_train: int = 100
    n_test: int = 100
    replications: int = 100
    seed_base: int = 0
    p: int = 10
    beta: Optional[Tuple[float, ...]] = None
    noise_sd: float = 1.0
    data: Optional[str] = None
    response: Optional[str] = None
    lambda_policy: Union[str, float] = "cv"
    bandwidth_policy: Union[str, float] = "cv"
    cv_folds: int = 5
    cv_rule: str = "1se"
    krr_method: str = "kkt"
    workers: int = 1
    output_dir: str = "results"

    def __post_init__(self):
        self.scenarios = tuple(self.scenarios)
        self.methods = tuple(self.methods)
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if not self.methods:
            raise ValueError("methods must be nonempty")
        bad = set(self.methods) - set(METHODS)
        if bad:
            raise ValueError(f"unknown methods {sorted(bad)}")
        if self.data is None:
            bad = set(self.scenarios) - set(KINDS)
            if bad or not self.scenarios:
                raise ValueError(f"scenarios must be drawn from {KINDS}")
        elif self.response is None:
            raise ValueError("an external data file needs a response column")
        if self.n_train < 1 or self.n_test < 1:
            raise ValueError("n_train and n_test must be >= 1")
        if self.cv_rule not in ("min", "1se"):
            raise ValueError("cv_rule must be 'min' or '1se'")
        if self.krr_method not in ("kkt", "dual_ascent"):
            raise ValueError("krr_method must be 'kkt' or 'dual_ascent'")
        self.lambda_policy = _policy(self.lambda_policy, ("cv",))
        self.bandwidth_policy = _policy(self.bandwidth_policy, ("cv", "median"))

    @property
    def scenario_labels(self) -> Tuple[str, ...]:
        if self.data is not None:
            return (Path(self.data).stem,)
        return self.scenarios

    def to_dict(self) -> dict:
        return asdict(self)


def _policy(value, names):
    if isinstance(value, str) and value in names:
        return value
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ValueError(f"policy must be one of {names} or a number, got {value!r}")
    if not v >= 0:
        raise ValueError("fixed hyperparameters must be nonnegative")
    return v


def _coerce(name: str, raw: str):
    """Convert a text value to the type of ExperimentConfig field ``name``."""
    raw = raw.strip()
    if name in ("scenarios", "methods"):
        return tuple(s.strip() for s in raw.split(",") if s.strip())
    if name == "beta":
        return None if raw.lower() in ("", "none") else tuple(
            float(s) for s in raw.split(","))
    if name in ("n_train", "n_test", "replications", "seed_base", "p", "cv_folds",
                "workers"):
        return int(raw)
    if name == "noise_sd":
        return float(raw)
    if name in ("data", "response"):
        return None if raw.lower() in ("", "none") else raw
    return raw


CONFIG_KEYS = tuple(f.name for f in fields(ExperimentConfig))


def read_config_file(path) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError(f"{path}:{lineno}: expected key = value", row=lineno)
            key, raw = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in CONFIG_KEYS:
                raise ParseError(f"{path}:{lineno}: unknown key {key!r}", row=lineno)
            values[key] = _coerce(key, raw)
    return values


def write_config_file(config: ExperimentConfig, path) -> None:
    with open(path, "w") as fh:
        for key, value in config.to_dict().items():
            if isinstance(value, (tuple, list)):
                value = ",".join(str(v) for v in value)
            fh.write(f"{key} = {value}\n")


# ---------------------------------------------------------------------------
# CSV input


def load_csv(path, response_column: Union[str, int]) -> Dataset:
    """Read a numeric CSV with a header row into a Dataset.

    Features are all non-response columns in file order. Every row with a
    missing or non-numeric cell is reported in the raised ParseError.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(f"{path}: empty file", row=1)
        if isinstance(response_column, int) or (
                isinstance(response_column, str) and response_column.isdigit()
                and response_column not in header):
            col = int(response_column)
            if not 0 <= col < len(header):
                raise MissingColumn(f"column index {col} out of range")
        elif response_column in header:
            col = header.index(response_column)
        else:
            raise MissingColumn(f"response column {response_column!r} not in {header}")
        rows, bad = [], []
        for lineno, record in enumerate(reader, 2):
            if not record or all(not c.strip() for c in record):
                continue
            if len(record) != len(header):
                bad.append((lineno, f"expected {len(header)} fields, got {len(record)}"))
                continue
            try:
                vals = [float(c) for c in record]
            except ValueError:
                bad.append((lineno, "non-numeric or missing cell"))
                continue
            if not all(math.isfinite(v) for v in vals):
                bad.append((lineno, "non-finite cell"))
                continue
            rows.append(vals)
    if bad:
        detail = "; ".join(f"row {r}: {why}" for r, why in bad[:20])
        raise ParseError(f"{path}: {len(bad)} invalid row(s): {detail}", row=bad[0][0])
    if not rows:
        raise ParseError(f"{path}: no data rows")
    table = np.array(rows)
    feat_cols = [j for j in range(len(header)) if j != col]
    if not feat_cols:
        raise ParseError(f"{path}: no feature columns besides the response")
    return Dataset(table[:, feat_cols], table[:, col], [header[j] for j in feat_cols])


def write_csv(dataset: Dataset, path, response_name: str = "y") -> None:
    names = dataset.feature_names or tuple(f"x{j + 1}" for j in range(dataset.p))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([*names, response_name])
        for row, y in zip(dataset.features, dataset.response):
            w.writerow([repr(float(v)) for v in row] + [repr(float(y))])


# ---------------------------------------------------------------------------
# Fitting with a hyperparameter policy


@dataclass
class Hyperparameters:
    lasso_lambda: Optional[float] = None
    krr_lambda: Optional[float] = None
    bandwidth: Optional[float] = None


def tune(train: Dataset, methods: Sequence[str], lambda_policy, bandwidth_policy,
         folds: int = 5, rule: str = "1se", seed: int = 0) -> Hyperparameters:
    """Choose hyperparameters on the unconstrained counterparts of ``methods``."""
    hp = Hyperparameters()
    if any(m.startswith("lasso") for m in methods):
        hp.lasso_lambda = (M.cv_lambda_lasso(train, folds, seed, rule=rule)
                           if lambda_policy == "cv" else float(lambda_policy))
    if any(m.startswith("krr") for m in methods):
        if bandwidth_policy == "cv" and lambda_policy == "cv":
            kernel, hp.krr_lambda = M.cv_krr(train, folds, seed, rule=rule)
            hp.bandwidth = kernel.bandwidth
            return hp
        if bandwidth_policy in ("cv", "median"):
            hp.bandwidth = median_bandwidth(train.features)
            if bandwidth_policy == "cv":
                # lambda fixed: pick the bandwidth at that lambda
                kernel, _ = M.cv_krr(train, folds, seed, grid=[float(lambda_policy)],
                                     rule=rule)
                hp.bandwidth = kernel.bandwidth
        else:
            hp.bandwidth = float(bandwidth_policy)
        if lambda_policy == "cv":
            hp.krr_lambda = M.cv_lambda_krr(train, KernelSpec(hp.bandwidth), folds, seed,
                                            rule=rule)
        else:
            hp.krr_lambda = float(lambda_policy)
    return hp


def fit_method(method: str, train: Dataset, hp: Hyperparameters, krr_method: str = "kkt"):
    if method == "lasso":
        return M.fit_lasso(train, hp.lasso_lambda)
    if method == "lasso_const":
        return M.fit_constrained_lasso(train, hp.lasso_lambda)
    kernel = KernelSpec(hp.bandwidth)
    if method == "krr":
        return M.fit_krr(train, kernel, hp.krr_lambda)
    if method == "krr_const":
        return M.fit_constrained_krr(train, kernel, hp.krr_lambda, method=krr_method)
    raise ValueError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# Replication loop


def replication_seed(seed_base: int, replication: int, stream: int = 0) -> int:
    """Counter-style seed: depends only on (seed_base, replication, stream)."""
    ss = np.random.SeedSequence([int(seed_base), int(replication), int(stream)])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


@dataclass
class MethodOutcome:
    y: Dict[str, np.ndarray]
    y_hat: Dict[str, np.ndarray]
    metrics: Dict[str, Dict[str, float]]
    constraint_residual: float
    hyperparameters: dict


@dataclass
class ReplicationOutcome:
    scenario: str
    replication: int
    seeds: Dict[str, int]
    methods: Dict[str, MethodOutcome] = field(default_factory=dict)
    error: Optional[str] = None


def _replication_data(config: ExperimentConfig, scenario: str, r: int, source: Optional[Dataset]):
    if source is None:
        s_train = replication_seed(config.seed_base, r, 0)
        s_test = replication_seed(config.seed_base, r, 1)
        linear = scenario == "linear"
        base = ScenarioSpec(scenario, n=config.n_train, p=config.p if linear else 10,
                            beta=config.beta if linear else None, noise_sd=config.noise_sd)
        train = generate(replace(base, n=config.n_train, seed=s_train))
        test = generate(replace(base, n=config.n_test, seed=s_test))
        return train, test, {"train": s_train, "test": s_test}
    s_split = replication_seed(config.seed_base, r, 0)
    split = split_train_test(source, config.n_train, s_split)
    test = split.test
    if config.n_test < test.n:
        rows = np.random.default_rng(replication_seed(config.seed_base, r, 1)).choice(
            test.n, config.n_test, replace=False)
        test = test.subset(np.sort(rows))
    return split.train, test, {"split": s_split}


def run_replication(config: ExperimentConfig, scenario: str, r: int,
                    source: Optional[Dataset] = None) -> ReplicationOutcome:
    train, test, seeds = _replication_data(config, scenario, r, source)
    cv_seed = replication_seed(config.seed_base, r, 2)
    seeds["cv"] = cv_seed
    out = ReplicationOutcome(scenario, r, seeds)
    try:
        hp = tune(train, config.methods, config.lambda_policy, config.bandwidth_policy,
                  config.cv_folds, config.cv_rule, cv_seed)
        for method in config.methods:
            fit = fit_method(method, train, hp, config.krr_method)
            ys, preds, mets = {}, {}, {}
            for split, ds in (("train", train), ("test", test)):
                y_hat = (M.fitted_values(fit, ds) if split == "train"
                         else M.predict(fit, ds.features))
                ys[split], preds[split] = ds.response, y_hat
                mets[split] = evaluate(ds.response, y_hat, split).metrics()
            out.methods[method] = MethodOutcome(ys, preds, mets, fit.constraint_residual,
                                                asdict(hp))
    except (DebiasRegError, np.linalg.LinAlgError, ValueError) as exc:
        out.error = f"{type(exc).__name__}: {exc}"
        out.methods = {}
    return out


@dataclass
class ResultTable:
    """Aggregated metrics, one row per (scenario, split, method, metric)."""

    rows: List[dict]
    replications: Dict[str, int]
    failures: Dict[str, List[Tuple[int, str]]]
    max_constraint_residual: Dict[Tuple[str, str], float]

    def value(self, scenario: str, split: str, method: str, metric: str,
              stat: str = "mean") -> float:
        for row in self.rows:
            if (row["scenario"], row["split"], row["method"], row["metric"]) == (
                    scenario, split, method, metric):
                return row[stat]
        raise KeyError((scenario, split, method, metric))


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    table: ResultTable
    outcomes: Dict[str, List[ReplicationOutcome]]


def _run_one(args):
    return run_replication(*args)


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    source = load_csv(config.data, config.response) if config.data else None
    labels = [label for label in config.scenario_labels for _ in range(config.replications)]
    jobs = [(config, label, r % config.replications, source)
            for r, label in enumerate(labels)]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_run_one, jobs, chunksize=4))
    else:
        results = [_run_one(job) for job in jobs]
    outcomes: Dict[str, List[ReplicationOutcome]] = {}
    for label, res in zip(labels, results):
        outcomes.setdefault(label, []).append(res)
    table = aggregate(config, outcomes)
    for label, fails in table.failures.items():
        if len(fails) > MAX_FAILURE_FRACTION * config.replications:
            raise ReplicationFailure(
                f"{label}: {len(fails)} of {config.replications} replications failed; "
                f"first: {fails[0][1]}")
    return ExperimentResult(config, table, outcomes)


def _sd(values: np.ndarray) -> float:
    return float(np.std(values, ddof=1)) if values.size > 1 else 0.0


def aggregate(config: ExperimentConfig, outcomes: Dict[str, List[ReplicationOutcome]]
              ) -> ResultTable:
    rows, reps, failures, max_res = [], {}, {}, {}
    for label in config.scenario_labels:
        ok = [o for o in outcomes[label] if o.error is None]
        failures[label] = [(o.replication, o.error) for o in outcomes[label] if o.error]
        for fail in failures[label]:
            log.warning("%s replication %d failed: %s", label, *fail)
        reps[label] = len(ok)
        for split in SPLITS:
            for method in config.methods:
                for metric in METRIC_NAMES:
                    vals = np.array([o.methods[method].metrics[split][metric] for o in ok])
                    rows.append({
                        "scenario": label, "split": split, "method": method,
                        "metric": metric,
                        "mean": float(vals.mean()) if vals.size else float("nan"),
                        "sd": _sd(vals), "replications": len(ok),
                    })
        for method in config.methods:
            res = [o.methods[method].constraint_residual for o in ok]
            max_res[(label, method)] = float(max(res)) if res else float("nan")
    return ResultTable(rows, reps, failures, max_res)


# ---------------------------------------------------------------------------
# Output files


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def write_outputs(result: ExperimentResult, output_dir=None) -> List[Path]:
    """Write results.csv, per-point scatter files, constraints.csv and a manifest."""
    config, table = result.config, result.table
    out = Path(output_dir or config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    path = out / "results.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for row in table.rows:
            w.writerow([_fmt(row[c]) for c in RESULT_COLUMNS])
    written.append(path)

    path = out / "constraints.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("scenario", "replication", "method", "constraint_residual"))
        for label in config.scenario_labels:
            for o in result.outcomes[label]:
                for method, mo in o.methods.items():
                    w.writerow((label, o.replication, method, _fmt(mo.constraint_residual)))
    written.append(path)

    for label in config.scenario_labels:
        sub = out / label
        sub.mkdir(exist_ok=True)
        for method in config.methods:
            for split in SPLITS:
                path = sub / f"scatter_{method}_{split}.csv"
                with open(path, "w", newline="") as fh:
                    w = csv.writer(fh, lineterminator="\n")
                    w.writerow(SCATTER_COLUMNS)
                    for o in result.outcomes[label]:
                        if o.error:
                            continue
                        mo = o.methods[method]
                        for y, yh in zip(mo.y[split], mo.y_hat[split]):
                            w.writerow((o.replication, _fmt(y), _fmt(yh), _fmt(y - yh)))
                written.append(path)

    manifest = {
        "package": "debiasreg",
        "version": __version__,
        "config": config.to_dict(),
        "seed_base": config.seed_base,
        "seeds": {label: {str(o.replication): o.seeds for o in result.outcomes[label]}
                  for label in config.scenario_labels},
        "hyperparameters": {
            label: {str(o.replication): next(iter(o.methods.values())).hyperparameters
                    for o in result.outcomes[label] if o.methods}
            for label in config.scenario_labels},
        "replications_used": table.replications,
        "failures": {k: [list(f) for f in v] for k, v in table.failures.items()},
        "max_constraint_residual": {f"{s}/{m}": v
                                    for (s, m), v in table.max_constraint_residual.items()},
        "defaults": {
            "lasso": "z-scored features, unpenalized intercept at the training mean",
            "krr": "RBF kernel exp(-|x-x'|^2/bandwidth^2), response centred at the "
                   "training mean, jitter 1e-10",
            "tuning": f"{config.cv_folds}-fold CV on the unconstrained counterpart, "
                      f"rule {config.cv_rule}",
        },
        "libraries": {"python": platform.python_version(), "numpy": np.__version__,
                      "scipy": scipy.__version__},
    }
    path = out / "manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    written.append(path)
    write_config_file(config, out / "config.txt")
    written.append(out / "config.txt")
    return written


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(type(o))


def read_results(path) -> List[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def default_workers() -> int:
    return max(1, min(4, os.cpu_count() or 1))
