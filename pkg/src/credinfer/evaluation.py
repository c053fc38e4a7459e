"""Bi-class / multi-class metrics and the theta x fold experiment harness."""

from __future__ import annotations

import csv
import enum
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from credinfer import numgrad as ng
from credinfer.features import build_vocab
from credinfer.graph import NODE_TYPES, CredLabel, Hsn, split_folds
from credinfer.train import FoldData, TrainConfig, fit, infer, predicted_classes

log = logging.getLogger(__name__)

METRIC_FIELDS = ("mode", "node_type", "theta", "fold", "accuracy", "precision", "recall", "f1")


class Polarity(enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"


def to_polarity(label: CredLabel) -> Polarity:
    return Polarity.POSITIVE if label.positive else Polarity.NEGATIVE


@dataclass(frozen=True)
class MetricRecord:
    mode: str
    node_type: str
    theta: float
    fold: int
    accuracy: float
    precision: float
    recall: float
    f1: float

    def row(self) -> list[str]:
        return [self.mode, self.node_type, f"{self.theta:.1f}", str(self.fold),
                repr(self.accuracy), repr(self.precision), repr(self.recall), repr(self.f1)]


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    p = _ratio(tp, tp + fp)
    r = _ratio(tp, tp + fn)
    return p, r, _ratio(2 * p * r, p + r)


def metrics(preds: Mapping, truth: Mapping, mode: str) -> dict[str, float]:
    """Accuracy, precision, recall and F1 over nodes keyed identically.

    ``bi``: values are :class:`Polarity` (or bools, True = positive) and
    the positive class is scored. ``multi``: values are class indices
    0..5 (or :class:`CredLabel`) and P/R/F1 are unweighted means over all
    six classes; undefined ratios count as 0. Macro F1 is the mean of the
    per-class F1 values.
    """
    if set(preds) != set(truth):
        raise KeyError("prediction and truth keys differ")
    keys = sorted(preds)
    if mode == "bi":
        p = np.array([_is_positive(preds[k]) for k in keys], dtype=bool)
        t = np.array([_is_positive(truth[k]) for k in keys], dtype=bool)
        tp = int(np.sum(p & t))
        fp = int(np.sum(p & ~t))
        fn = int(np.sum(~p & t))
        prec, rec, f1 = _prf(tp, fp, fn)
        acc = float(np.mean(p == t)) if keys else 0.0
        return {"accuracy": acc, "precision": prec, "recall": rec, "f1": f1}
    if mode != "multi":
        raise ValueError(f"unknown mode {mode!r}")
    p = np.array([_class(preds[k]) for k in keys], dtype=np.int64)
    t = np.array([_class(truth[k]) for k in keys], dtype=np.int64)
    per = [_prf(int(np.sum((p == c) & (t == c))), int(np.sum((p == c) & (t != c))),
                int(np.sum((p != c) & (t == c)))) for c in range(6)]
    acc = float(np.mean(p == t)) if keys else 0.0
    return {
        "accuracy": acc,
        "precision": float(np.mean([x[0] for x in per])),
        "recall": float(np.mean([x[1] for x in per])),
        "f1": float(np.mean([x[2] for x in per])),
    }


def _is_positive(v) -> bool:
    if isinstance(v, Polarity):
        return v is Polarity.POSITIVE
    if isinstance(v, CredLabel):
        return v.positive
    return bool(v)


def _class(v) -> int:
    return v.index if isinstance(v, CredLabel) else int(v)


def confusion_matrix(preds: Sequence[int], truth: Sequence[int], n: int) -> np.ndarray:
    m = np.zeros((n, n), dtype=np.int64)
    for p, t in zip(preds, truth):
        m[t, p] += 1
    return m


# ---------------------------------------------------------------------------
# prediction decoding
# ---------------------------------------------------------------------------


def decode(probs: np.ndarray, mode: str) -> np.ndarray:
    """Class ids in the evaluated space from model probabilities.

    Bi mode gives 0 = positive, 1 = negative. A six-way model evaluated
    in bi mode sums probability mass per polarity first.
    """
    if mode == "bi" and probs.shape[1] == 6:
        probs = np.stack([probs[:, :3].sum(axis=1), probs[:, 3:].sum(axis=1)], axis=1)
    return predicted_classes(probs)


def score_nodes(hsn: Hsn, probs: Mapping[str, np.ndarray], test_ids: Mapping[str, Sequence[str]],
                mode: str, theta: float, fold: int) -> list[MetricRecord]:
    out = []
    for nt in NODE_TYPES:
        pos = hsn.position(nt)
        ids = list(test_ids[nt])
        cls = decode(probs[nt][[pos[i] for i in ids]], mode) if ids else np.zeros(0, dtype=np.int64)
        if mode == "bi":
            preds = {i: c == 0 for i, c in zip(ids, cls)}
            truth = {i: hsn.label_of(nt, i).positive for i in ids}
        else:
            preds = {i: int(c) for i, c in zip(ids, cls)}
            truth = {i: hsn.label_of(nt, i).index for i in ids}
        out.append(MetricRecord(mode, nt, float(theta), int(fold), **metrics(preds, truth, mode)))
    return out


# ---------------------------------------------------------------------------
# explicit-feature linear baseline
# ---------------------------------------------------------------------------


def fit_linear_baseline(features: np.ndarray, targets: np.ndarray, n_classes: int, epochs: int = 500,
                        learning_rate: float = 0.5, alpha: float = 1e-4) -> tuple[np.ndarray, np.ndarray]:
    """Softmax regression on fixed features by full-batch gradient descent."""
    W = np.zeros((n_classes, features.shape[1]))
    b = np.zeros(n_classes)
    onehot = np.eye(n_classes)[targets]
    n = max(len(targets), 1)
    for _ in range(epochs):
        tape = ng.Tape()
        tW, tb = tape.watch(W, "W"), tape.watch(b, "b")
        probs = ng.softmax(ng.affine(tW, features, tb))
        L = ng.add(ng.cross_entropy(probs, onehot), ng.scale(ng.sum_squares(tW), alpha))
        g = tape.backward(L)
        W -= learning_rate / n * g[tW]
        b -= learning_rate / n * g[tb]
    return W, b


def linear_baseline_predict(W: np.ndarray, b: np.ndarray, features: np.ndarray) -> np.ndarray:
    return ng.softmax(ng.affine(W, features, b)).data


# ---------------------------------------------------------------------------
# experiment harness
# ---------------------------------------------------------------------------


@dataclass
class ExperimentReport:
    records: list[MetricRecord]

    def means(self) -> list[dict]:
        groups: dict[tuple, list[MetricRecord]] = {}
        for r in self.records:
            groups.setdefault((r.mode, r.node_type, r.theta), []).append(r)
        out = []
        for (mode, nt, theta), rs in sorted(groups.items(), key=lambda kv: (kv[0][0], NODE_TYPES.index(kv[0][1]), kv[0][2])):
            row = {"mode": mode, "node_type": nt, "theta": theta, "folds": len(rs)}
            for m in ("accuracy", "precision", "recall", "f1"):
                row[m] = float(np.mean([getattr(r, m) for r in rs]))
            out.append(row)
        return out

    def write(self, directory) -> tuple[Path, Path]:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        per_fold, agg = d / "report.csv", d / "report_mean.csv"
        with open(per_fold, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(METRIC_FIELDS)
            for r in self.records:
                w.writerow(r.row())
        with open(agg, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["mode", "node_type", "theta", "folds", "accuracy", "precision", "recall", "f1"])
            for row in self.means():
                w.writerow([row["mode"], row["node_type"], f"{row['theta']:.1f}", row["folds"]]
                           + [repr(row[m]) for m in ("accuracy", "precision", "recall", "f1")])
        return per_fold, agg


def run_cell(hsn: Hsn, theta: float, fold_index: int, k: int, config: TrainConfig, seed: int,
             modes: Iterable[str] = ("bi", "multi")) -> list[MetricRecord]:
    """Fit and score one (theta, fold) cell for every requested mode."""
    split = split_folds(hsn, k, theta, seed)
    fold = split.folds[fold_index]
    vocab = build_vocab(hsn, config.d, train_ids=fold.sampled)
    data = FoldData.build(hsn, vocab, fold.sampled, config.q)
    records = []
    modes = list(modes)
    if config.train_space == "multi":
        cfg = replace(config, mode="multi", fold=fold_index, theta=theta, seed=seed)
        probs = infer(fit(hsn, vocab, fold.sampled, cfg, data=data).params, data)
        for mode in modes:
            records += score_nodes(hsn, probs, fold.test, mode, theta, fold_index)
        return records
    for mode in modes:
        cfg = replace(config, mode=mode, fold=fold_index, theta=theta, seed=seed)
        probs = infer(fit(hsn, vocab, fold.sampled, cfg, data=data).params, data)
        records += score_nodes(hsn, probs, fold.test, mode, theta, fold_index)
    return records


def _cell(args):
    return run_cell(*args)


def run_experiment(hsn: Hsn, theta_grid: Sequence[float], k: int, config: TrainConfig, seed: int,
                   modes: Iterable[str] = ("bi", "multi"), parallel: int = 1) -> ExperimentReport:
    """Cross-validated fits over the theta grid; records ordered by (theta, fold, mode, type).

    Labels must already be complete (run :func:`derive_entity_labels`).
    """
    for nt in NODE_TYPES:
        if any(hsn.label_of(nt, i) is None for i in hsn.ids(nt)):
            raise ValueError(f"unlabelled {nt} nodes; derive entity labels first")
    modes = tuple(modes)
    cells = [(hsn, float(theta), f, k, config, seed, modes) for theta in theta_grid for f in range(k)]
    if parallel > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=parallel) as pool:
            results = list(pool.map(_cell, cells))
    else:
        results = []
        for cell in cells:
            log.info("theta %.1f fold %d", cell[1], cell[2])
            results.append(_cell(cell))
    return ExperimentReport([r for rs in results for r in rs])
