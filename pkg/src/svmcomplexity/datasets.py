"""Dataset loading, seeded splits, configuration files, and the Wisconsin table run."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .exceptions import DataError, InvalidInputError, ParseError
from .model import ConfusionCounts, Dataset, Hinge, Loss, confusion
from .solver import SolverConfig, _resolve_loss, derive_seed, select_features, train_linear, train_polynomial

log = logging.getLogger(__name__)

WISCONSIN_FIELDS = 11
REFERENCE_TABLE = {
    "9-variable SVM": ConfusionCounts(tp=107, tn=194, fp=37, fn=11),
    "3-variable SVM": ConfusionCounts(tp=44, tn=192, fp=41, fn=72),
    "3-variable nonlinear SVM": ConfusionCounts(tp=117, tn=202, fp=29, fn=1),
}
REFERENCE_RATES = {"9-variable SVM": 0.1375, "3-variable SVM": 0.3239, "3-variable nonlinear SVM": 0.0860}


@dataclass(frozen=True)
class WisconsinRecord:
    id: int
    features: tuple
    class_code: int

    @property
    def label(self) -> float:
        return 1.0 if self.class_code == 4 else -1.0


def parse_wisconsin_line(line: str, lineno: int | None = None) -> WisconsinRecord | None:
    """Parse one UCI line; ``None`` if an attribute is missing (``?``)."""
    parts = [p.strip() for p in line.strip().split(",")]
    if len(parts) != WISCONSIN_FIELDS:
        raise ParseError(f"expected {WISCONSIN_FIELDS} fields, found {len(parts)}", lineno)
    if "?" in parts:
        return None
    try:
        values = [int(p) for p in parts]
    except ValueError:
        raise ParseError("non-integer field", lineno) from None
    feats = tuple(values[1:10])
    if any(not 1 <= v <= 10 for v in feats):
        raise ParseError("feature outside 1..10", lineno)
    if values[10] not in (2, 4):
        raise ParseError(f"class code must be 2 or 4, found {values[10]}", lineno)
    return WisconsinRecord(values[0], feats, values[10])


@dataclass(frozen=True)
class LoadReport:
    raw: int
    dropped: int

    @property
    def usable(self) -> int:
        return self.raw - self.dropped


def load_wisconsin(path, report: bool = False):
    """Read ``breast-cancer-wisconsin.data``; rows with ``?`` are dropped and counted.

    Labels: class code 4 (malignant) maps to +1 and 2 (benign) to -1.
    With ``report=True`` returns ``(dataset, LoadReport)``.
    """
    records, raw, dropped = [], 0, 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            raw += 1
            rec = parse_wisconsin_line(line, lineno)
            if rec is None:
                dropped += 1
            else:
                records.append(rec)
    if not records:
        raise DataError(f"{path}: no usable records")
    log.info("%s: %d records, %d dropped for missing values", path, raw, dropped)
    data = Dataset(
        np.array([r.features for r in records], dtype=float),
        np.array([r.label for r in records]),
    )
    return (data, LoadReport(raw, dropped)) if report else data


def load_csv(path) -> Dataset:
    """CSV with header ``x1,...,xd,y``."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        d = len(header) - 1
        if d < 1 or header[-1] != "y" or header[:-1] != [f"x{i}" for i in range(1, d + 1)]:
            raise ParseError("header must be x1,...,xd,y", 1)
        rows = []
        for lineno, row in enumerate(reader, 2):
            if not row or not any(c.strip() for c in row):
                continue
            if len(row) != d + 1:
                raise ParseError(f"expected {d + 1} fields, found {len(row)}", lineno)
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                raise ParseError("non-numeric field", lineno) from None
    if not rows:
        raise DataError(f"{path}: no data rows")
    arr = np.array(rows)
    return Dataset(arr[:, :d], arr[:, d])


def save_csv(data: Dataset, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"x{i}" for i in range(1, data.dim + 1)] + ["y"])
        for x, y in zip(data.X, data.y):
            writer.writerow([format(v, ".17g") for v in x] + [format(y, ".17g")])


@dataclass(frozen=True)
class SplitResult:
    train: Dataset
    test: Dataset
    train_idx: np.ndarray
    test_idx: np.ndarray
    discarded: int

    def __iter__(self):
        yield self.train
        yield self.test


def split(data: Dataset, n_train: int, seed, n_test: int | None = None) -> SplitResult:
    """Seeded shuffle: first ``n_train`` rows train, the next ``min(n_train, rest)`` test."""
    n = len(data)
    if not 1 <= n_train < n:
        raise DataError(f"cannot take {n_train} training rows from {n} records")
    order = np.random.default_rng(seed).permutation(n)
    rest = n - n_train
    n_test = min(n_train, rest) if n_test is None else min(n_test, rest)
    tr, te = order[:n_train], order[n_train : n_train + n_test]
    discarded = rest - n_test
    if discarded:
        log.info("split discards %d records", discarded)
    return SplitResult(data.subset(rows=tr), data.subset(rows=te), tr, te, discarded)


def read_config(path) -> dict[str, str]:
    """Line-oriented ``key = value`` file; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError("expected 'key = value'", lineno)
            key, value = (s.strip() for s in line.split("=", 1))
            if not key:
                raise ParseError("empty key", lineno)
            out[key.replace("-", "_")] = value
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    dataset_path: str = "data/breast-cancer-wisconsin.data"
    seed: int = 0
    n_train: int = 349
    feature_count: int = 3
    degree: int = 2
    solver: SolverConfig = field(default_factory=lambda: SolverConfig(max_iterations=10_000))
    selection_iterations: int = 2_000
    loss: Loss = field(default_factory=Hinge)
    repetitions: int = 10

    def __post_init__(self):
        if self.n_train < 1 or self.repetitions < 1 or self.feature_count < 1:
            raise InvalidInputError("n_train, repetitions and feature_count must be positive")

    @classmethod
    def from_mapping(cls, values: dict, base_dir=None) -> "ExperimentConfig":
        values = dict(values)
        solver_keys = {"max_iterations": int, "step_scale": float, "l1_bound": float, "tolerance": float}
        solver_kw = {k: t(values.pop(k)) for k, t in solver_keys.items() if k in values}
        kw = {}
        for key, typ in (("seed", int), ("n_train", int), ("feature_count", int), ("degree", int),
                         ("selection_iterations", int), ("repetitions", int)):
            if key in values:
                kw[key] = typ(values.pop(key))
        if "dataset_path" in values:
            p = Path(values.pop("dataset_path"))
            if base_dir is not None and not p.is_absolute():
                p = Path(base_dir) / p
            kw["dataset_path"] = str(p)
        if "loss" in values:
            kw["loss"] = _resolve_loss(values.pop("loss"))
        if values:
            raise InvalidInputError(f"unknown configuration keys: {sorted(values)}")
        solver = replace(cls.__dataclass_fields__["solver"].default_factory(), **solver_kw)
        return cls(solver=solver, **kw)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        return cls.from_mapping(read_config(path), base_dir=Path(path).parent)


PIPELINES = ("9-variable SVM", "3-variable SVM", "3-variable nonlinear SVM")


@dataclass(frozen=True)
class RunResult:
    seed: int
    selected: tuple
    counts: dict


@dataclass(frozen=True)
class TableReport:
    runs: tuple
    medians: dict
    load: LoadReport
    n_train: int
    n_test: int
    discarded: int

    @property
    def ordering_holds(self) -> bool:
        m = self.medians
        return m[PIPELINES[2]] < m[PIPELINES[0]] < m[PIPELINES[1]]

    def within_tolerance(self, tol: float = 0.05) -> dict:
        return {k: abs(self.medians[k] - REFERENCE_RATES[k]) <= tol for k in PIPELINES}

    def format(self) -> str:
        lines = [
            f"records: {self.load.raw} raw, {self.load.dropped} dropped, {self.load.usable} usable",
            f"split: {self.n_train} train / {self.n_test} test / {self.discarded} discarded "
            f"(reference: 349 / 349 of 699)",
            "",
            f"{'run':>4} {'machine':<26} {'FP':>4} {'FN':>4} {'TP':>4} {'TN':>4} {'ERR':>4} {'%ERR':>7}",
        ]
        for i, run in enumerate(self.runs):
            for name in PIPELINES:
                c = run.counts[name]
                lines.append(f"{i:>4} {name:<26} {c.fp:>4} {c.fn:>4} {c.tp:>4} {c.tn:>4} "
                             f"{c.errors:>4} {c.error_rate:>7.4f}")
            lines.append(f"{'':>4} selected columns (0-based): {list(run.selected)}")
        lines += ["", f"{'machine':<26} {'median':>8} {'reference':>10}"]
        for name in PIPELINES:
            lines.append(f"{name:<26} {self.medians[name]:>8.4f} {REFERENCE_RATES[name]:>10.4f}")
        lines.append(f"ordering nonlinear-3 < linear-9 < linear-3: {self.ordering_holds}")
        return "\n".join(lines)


def reproduce_table(config: ExperimentConfig) -> TableReport:
    """Three hinge pipelines on each of ``repetitions`` seeded splits, plus medians."""
    data, load = load_wisconsin(config.dataset_path, report=True)
    if config.n_train >= len(data):
        raise DataError(f"n_train={config.n_train} exceeds {len(data)} usable records")
    select_cfg = replace(config.solver, max_iterations=config.selection_iterations)
    runs = []
    for r in range(config.repetitions):
        seed = derive_seed(config.seed, r)
        parts = split(data, config.n_train, seed)
        cfg = replace(config.solver, seed=seed)
        full = train_linear(parts.train, config.loss, cfg)
        cols = select_features(parts.train, config.feature_count, config.loss,
                               replace(select_cfg, seed=seed))
        tr3, te3 = parts.train.subset(columns=cols), parts.test.subset(columns=cols)
        lin3 = train_linear(tr3, config.loss, cfg)
        poly3 = train_polynomial(tr3, config.degree, config.loss, cfg)
        counts = {
            PIPELINES[0]: confusion(parts.test, full.separator),
            PIPELINES[1]: confusion(te3, lin3.separator),
            PIPELINES[2]: confusion(te3, poly3.separator),
        }
        runs.append(RunResult(seed, tuple(cols), counts))
        log.info("run %d: %s", r, {k: round(v.error_rate, 4) for k, v in counts.items()})
    medians = {k: float(np.median([run.counts[k].error_rate for run in runs])) for k in PIPELINES}
    return TableReport(tuple(runs), medians, load, len(parts.train), len(parts.test), parts.discarded)


def reference_error_rate(name: str) -> float:
    c = REFERENCE_TABLE[name]
    return c.errors / c.total if c.total else math.nan
