"""Stratified k-fold cross-validation and classification error rate."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import classifiers
from .assembly import Dataset
from .classifiers import ClassifierSpec
from .selection import Preprocessor, fit_preprocess


class FoldError(RuntimeError):
    def __init__(self, fold: int, exc: Exception):
        super().__init__(f"fold {fold}: {type(exc).__name__}: {exc}")
        self.fold = fold


def stratified_kfold(labels, k: int = 10, seed: int = 0) -> np.ndarray:
    """Fold index (0..k-1) for every sample.

    Each class (in order of first appearance) is shuffled with ``seed`` and
    dealt round-robin, continuing the deal position from one class to the
    next so fold sizes also stay within one of each other. Leave-one-out (``k == len(labels)``) is
    accepted even though classes are then smaller than ``k``.
    """
    labels = np.asarray(labels)
    n = labels.size
    if k < 2:
        raise ValueError("k must be at least 2")
    if k > n:
        raise ValueError(f"k={k} exceeds the {n} samples")
    classes, first, counts = np.unique(labels, return_index=True, return_counts=True)
    if k != n and counts.min() < k:
        small = classes[np.argmin(counts)]
        raise ValueError(f"class {small!r} has {counts.min()} members, fewer than k={k}")
    # deal classes in order of first appearance so renaming them cannot move samples
    classes = classes[np.argsort(first)]
    rng = np.random.default_rng(seed)
    folds = np.empty(n, dtype=np.int64)
    pos = 0
    for c in classes:
        idx = rng.permutation(np.flatnonzero(labels == c))
        folds[idx] = (pos + np.arange(idx.size)) % k
        pos = (pos + idx.size) % k
    return folds


def cer(predicted, truth) -> float:
    """Classification error rate in percent."""
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    if predicted.shape != truth.shape:
        raise ValueError("predicted and truth lengths differ")
    if truth.size == 0:
        raise ValueError("empty prediction")
    return float(100.0 * np.count_nonzero(predicted != truth) / truth.size)


@dataclass
class EvaluationReport:
    classifier: str
    spec: dict
    classes: list[str]
    k: int
    seed: int
    repeats: int
    policy: str
    fold_cer: list[float]
    overall_cer: float
    mean_fold_cer: float
    per_class_cer: dict[str, float]
    confusion: list[list[int]]
    selection: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    CSV_FIELDS = ("classifier", "k", "seed", "repeats", "policy", "overall_cer", "mean_fold_cer")

    def csv_row(self) -> dict:
        row = {f: getattr(self, f) for f in self.CSV_FIELDS}
        for c in self.classes:
            row[f"cer_{c}"] = self.per_class_cer[c]
        row.update({f"n_{k}": v for k, v in self.selection.items() if k.startswith("d_")})
        return row


def reports_to_csv(reports: list[EvaluationReport]) -> str:
    rows = [r.csv_row() for r in reports]
    cols = list(dict.fromkeys(c for r in rows for c in r))
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def _spec_dict(spec: ClassifierSpec) -> dict:
    return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(spec).items()}


def cross_validate_many(ds: Dataset, specs: list[ClassifierSpec], k: int = 10, seed: int = 0,
                        global_preprocess: bool = False, alpha: float = 0.1, k_features: int = 80,
                        select: bool = True, repeats: int = 1) -> list[EvaluationReport]:
    """Cross-validate several classifiers on identical folds and preprocessing.

    With ``global_preprocess`` the imputation/selection/normalization chain
    is fitted once on all rows; otherwise it is refitted on each training
    split so no test information leaks into the features.
    """
    y = ds.y
    classes = list(ds.classes)
    policy = "global" if global_preprocess else "per-fold"
    global_pre = fit_preprocess(ds, alpha, k_features, select=select)
    sel = {
        "d_initial": global_pre.report.n_initial,
        "d_utest": global_pre.report.n_utest,
        "d_final": len(global_pre.names),
        "alpha": alpha,
        "k_features": k_features,
        "fold_d_utest": [],
        "fold_d_final": [],
    }

    preds = {i: [] for i in range(len(specs))}
    truths = []
    fold_cers = {i: [] for i in range(len(specs))}
    for r in range(repeats):
        folds = stratified_kfold(y, k, seed + r)
        for f in range(k):
            test = np.flatnonzero(folds == f)
            train = np.flatnonzero(folds != f)
            try:
                pre: Preprocessor = global_pre if global_preprocess else fit_preprocess(
                    ds.subset(rows=train), alpha, k_features, select=select)
            except Exception as exc:
                raise FoldError(f, exc) from exc
            sel["fold_d_utest"].append(pre.report.n_utest)
            sel["fold_d_final"].append(len(pre.names))
            tr = pre.transform(ds.subset(rows=train))
            te = pre.transform(ds.subset(rows=test))
            truths.append(y[test])
            for i, spec in enumerate(specs):
                try:
                    model = classifiers.train(spec, tr.X, y[train], classes)
                    p = classifiers.predict_many(model, te.X)
                except Exception as exc:
                    raise FoldError(f, exc) from exc
                preds[i].append(p)
                fold_cers[i].append(cer(p, y[test]))

    truth = np.concatenate(truths)
    reports = []
    for i, spec in enumerate(specs):
        pred = np.concatenate(preds[i])
        conf = np.zeros((2, 2), dtype=np.int64)
        np.add.at(conf, (truth, pred), 1)
        per_class = {
            c: 100.0 * (conf[j].sum() - conf[j, j]) / conf[j].sum() if conf[j].sum() else float("nan")
            for j, c in enumerate(classes)
        }
        reports.append(EvaluationReport(
            classifier=spec.label,
            spec=_spec_dict(spec),
            classes=classes,
            k=k,
            seed=seed,
            repeats=repeats,
            policy=policy,
            fold_cer=[float(v) for v in fold_cers[i]],
            overall_cer=float(cer(pred, truth)),
            mean_fold_cer=float(np.mean(fold_cers[i])),
            per_class_cer={c: float(v) for c, v in per_class.items()},
            confusion=conf.tolist(),
            selection=dict(sel),
        ))
    return reports


def cross_validate(ds: Dataset, spec: ClassifierSpec, k: int = 10, seed: int = 0,
                   global_preprocess: bool = False, **kw) -> EvaluationReport:
    return cross_validate_many(ds, [spec], k, seed, global_preprocess, **kw)[0]
