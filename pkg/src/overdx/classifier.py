"""Baseline label producer: undersampling, greedy feature selection and
gradient-boosted decision stumps, plus import of external predictions."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np

from .errors import InputError, RowError, SchemaError
from .stats import rankdata


@dataclass(frozen=True)
class TabularDataset:
    case_ids: tuple[str, ...]
    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...]

    def __post_init__(self):
        if self.X.ndim != 2 or self.X.shape[0] != len(self.case_ids) or self.X.shape[1] != len(self.feature_names):
            raise InputError("feature matrix does not match case ids / feature names")
        if self.y.shape != (len(self.case_ids),):
            raise InputError("one label per case required")
        if not np.isin(self.y, (0, 1)).all():
            raise InputError("labels must be 0/1")

    def __len__(self):
        return len(self.case_ids)

    def rows(self, idx) -> "TabularDataset":
        idx = np.asarray(idx, dtype=int)
        return TabularDataset(tuple(self.case_ids[i] for i in idx), self.X[idx], self.y[idx], self.feature_names)

    def columns(self, cols: Sequence[int]) -> "TabularDataset":
        cols = list(cols)
        return TabularDataset(self.case_ids, self.X[:, cols], self.y, tuple(self.feature_names[c] for c in cols))


@dataclass(frozen=True)
class BoostParams:
    n_rounds: int = 200
    learning_rate: float = 0.1
    l2: float = 1.0


@dataclass(frozen=True)
class ModelMetrics:
    auroc: float
    mcc: float
    tp: int
    tn: int
    fp: int
    fn: int

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def read_features_csv(reader: IO[str]) -> TabularDataset:
    rdr = csv.reader(reader)
    header = next(rdr, None)
    if not header or header[:2] != ["case_id", "label"] or len(header) < 3:
        raise SchemaError("features file needs header case_id,label,<feature>...")
    ids, rows, labels = [], [], []
    for line, row in enumerate(rdr, start=2):
        if len(row) != len(header):
            raise RowError(line, f"expected {len(header)} fields, got {len(row)}")
        try:
            labels.append(int(row[1]))
            rows.append([float(v) for v in row[2:]])
        except ValueError as exc:
            raise RowError(line, str(exc)) from None
        ids.append(row[0])
    X = np.array(rows, dtype=float).reshape(len(rows), len(header) - 2)
    return TabularDataset(tuple(ids), X, np.array(labels, dtype=int), tuple(header[2:]))


def write_features_csv(ds: TabularDataset, writer: IO[str]) -> None:
    out = csv.writer(writer, lineterminator="\n")
    out.writerow(["case_id", "label", *ds.feature_names])
    for cid, label, row in zip(ds.case_ids, ds.y, ds.X):
        out.writerow([cid, int(label), *(repr(float(v)) for v in row)])


def undersample(ds: TabularDataset, seed: int = 0) -> TabularDataset:
    """Randomly drop majority-class rows until both classes have equal size."""
    pos = np.flatnonzero(ds.y == 1)
    neg = np.flatnonzero(ds.y == 0)
    if len(pos) == 0 or len(neg) == 0:
        raise InputError("undersampling needs both classes")
    rng = np.random.default_rng(seed)
    if len(pos) < len(neg):
        neg = rng.choice(neg, size=len(pos), replace=False)
    else:
        pos = rng.choice(pos, size=len(neg), replace=False)
    return ds.rows(np.sort(np.concatenate([pos, neg])))


class StumpBooster:
    """Logistic-loss gradient boosting with depth-1 trees on standardized inputs.

    Each round fits one split with Newton leaf values (``l2`` regularized)
    and adds it scaled by the learning rate.
    """

    def __init__(self, params: BoostParams = BoostParams()):
        self.params = params

    def fit(self, X: np.ndarray, y: np.ndarray) -> "StumpBooster":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        self.mean_ = X.mean(axis=0)
        std = X.std(axis=0)
        self.scale_ = np.where(std > 0, std, 1.0)
        Z = (X - self.mean_) / self.scale_
        prior = min(max(y.mean(), 1e-6), 1 - 1e-6)
        self.base_ = math.log(prior / (1 - prior))
        self.stumps_: list[tuple[int, float, float, float]] = []

        order = np.argsort(Z, axis=0, kind="stable")
        Zs = np.take_along_axis(Z, order, axis=0)
        # split after sorted position i is allowed only between distinct values
        can_split = Zs[1:] > Zs[:-1]
        lam = self.params.l2
        F = np.full(len(y), self.base_)
        for _ in range(self.params.n_rounds):
            p = 1 / (1 + np.exp(-F))
            g = y - p
            h = p * (1 - p)
            G, H = g.sum(), h.sum()
            GL = np.cumsum(g[order], axis=0)[:-1]
            HL = np.cumsum(h[order], axis=0)[:-1]
            GR, HR = G - GL, H - HL
            gain = GL ** 2 / (HL + lam) + GR ** 2 / (HR + lam) - G ** 2 / (H + lam)
            gain = np.where(can_split, gain, -np.inf)
            if gain.size == 0 or not np.isfinite(gain).any():
                break
            i, j = np.unravel_index(np.argmax(gain), gain.shape)
            if gain[i, j] <= 1e-12:
                break
            thr = (Zs[i, j] + Zs[i + 1, j]) / 2
            left = GL[i, j] / (HL[i, j] + lam)
            right = GR[i, j] / (HR[i, j] + lam)
            lr = self.params.learning_rate
            self.stumps_.append((int(j), float(thr), lr * left, lr * right))
            F += np.where(Z[:, j] <= thr, lr * left, lr * right)
        return self

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        Z = (np.asarray(X, dtype=float) - self.mean_) / self.scale_
        F = np.full(Z.shape[0], self.base_)
        for j, thr, left, right in self.stumps_:
            F += np.where(Z[:, j] <= thr, left, right)
        return F

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return 1 / (1 + np.exp(-self.decision_function(X)))


def train_predict(
    ds: TabularDataset,
    params: BoostParams = BoostParams(),
    seed: int = 0,
    eval_X: np.ndarray | None = None,
):
    """Fit the booster on ``ds`` and score ``eval_X`` (default: the training rows).

    Returns ``(scores, predictions)`` with predictions at threshold 0.5.  The
    learner itself has no randomness; ``seed`` is accepted for pipeline
    symmetry.
    """
    counts = np.bincount(ds.y, minlength=2)
    if counts.min() < 2:
        raise InputError("training needs at least two cases of each class")
    model = StumpBooster(params).fit(ds.X, ds.y)
    scores = model.predict_proba(ds.X if eval_X is None else eval_X)
    return scores, (scores >= 0.5).astype(int)


def auroc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Area under the ROC curve via the rank-sum formulation (ties count one half)."""
    labels = np.asarray(labels)
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise InputError("AUROC needs both classes")
    ranks = np.asarray(rankdata(list(map(float, scores))))
    r_pos = ranks[labels == 1].sum()
    return float((r_pos - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def mcc_from_confusion(tp: int, tn: int, fp: int, fn: int) -> float:
    denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if denom == 0:
        return 0.0
    return (tp * tn - fp * fn) / math.sqrt(denom)


def metrics(scores: Sequence[float], labels: Sequence[int], threshold: float = 0.5) -> ModelMetrics:
    labels = np.asarray(labels)
    pred = (np.asarray(scores, dtype=float) >= threshold).astype(int)
    tp = int(((pred == 1) & (labels == 1)).sum())
    tn = int(((pred == 0) & (labels == 0)).sum())
    fp = int(((pred == 1) & (labels == 0)).sum())
    fn = int(((pred == 0) & (labels == 1)).sum())
    return ModelMetrics(auroc(scores, labels), mcc_from_confusion(tp, tn, fp, fn), tp, tn, fp, fn)


def stratified_folds(y: np.ndarray, n_folds: int, seed: int) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(n_folds)]
    for cls in (0, 1):
        idx = rng.permutation(np.flatnonzero(y == cls))
        for k, i in enumerate(idx):
            folds[k % n_folds].append(int(i))
    return [np.array(sorted(f), dtype=int) for f in folds]


def cv_auroc(ds: TabularDataset, folds: list[np.ndarray], params: BoostParams) -> float:
    scores = []
    all_idx = np.arange(len(ds))
    for test in folds:
        train = np.setdiff1d(all_idx, test)
        s, _ = train_predict(ds.rows(train), params, eval_X=ds.X[test])
        scores.append(auroc(s, ds.y[test]))
    return float(np.mean(scores))


def greedy_forward_select(
    ds: TabularDataset,
    k: int = 13,
    folds: int = 3,
    seed: int = 0,
    params: BoostParams = BoostParams(),
) -> list[int]:
    """Add, one at a time, the feature that most improves cross-validated AUROC.

    Returns column indices in selection order; ties go to the lower index.
    """
    n_feat = ds.X.shape[1]
    if not 0 <= k <= n_feat:
        raise InputError(f"k must lie in [0, {n_feat}]")
    split = stratified_folds(ds.y, folds, seed)
    chosen: list[int] = []
    for _ in range(k):
        best, best_score = None, -np.inf
        for f in range(n_feat):
            if f in chosen:
                continue
            score = cv_auroc(ds.columns(chosen + [f]), split, params)
            if score > best_score:
                best, best_score = f, score
        chosen.append(best)
    return chosen


def out_of_fold_predictions(
    ds: TabularDataset,
    folds: int = 5,
    seed: int = 0,
    params: BoostParams = BoostParams(),
    balance: bool = True,
) -> np.ndarray:
    """Score every case with a model that never saw it (training folds undersampled)."""
    scores = np.empty(len(ds))
    all_idx = np.arange(len(ds))
    for k, test in enumerate(stratified_folds(ds.y, folds, seed)):
        train = ds.rows(np.setdiff1d(all_idx, test))
        if balance:
            train = undersample(train, seed + k)
        scores[test], _ = train_predict(train, params, eval_X=ds.X[test])
    return scores


def import_predictions(reader: IO[str]) -> dict[str, tuple[float | None, int]]:
    """Read ``case_id`` plus ``score`` and/or ``y_pred`` columns.

    A missing ``y_pred`` is derived from the score at 0.5.
    """
    rdr = csv.DictReader(reader)
    header = set(rdr.fieldnames or [])
    if "case_id" not in header or not header & {"score", "y_pred"}:
        raise SchemaError("predictions file needs case_id and score or y_pred")
    out: dict[str, tuple[float | None, int]] = {}
    for row in rdr:
        line = rdr.line_num
        cid = row["case_id"].strip()
        if cid in out:
            raise RowError(line, f"duplicate case id {cid!r}")
        score = None
        if row.get("score") not in (None, ""):
            try:
                score = float(row["score"])
            except ValueError:
                raise RowError(line, f"bad score {row['score']!r}") from None
            if not 0 <= score <= 1:
                raise RowError(line, f"score {score} outside [0, 1]")
        if row.get("y_pred") not in (None, ""):
            if row["y_pred"].strip() not in ("0", "1"):
                raise RowError(line, f"y_pred must be 0 or 1, got {row['y_pred']!r}")
            pred = int(row["y_pred"])
        elif score is not None:
            pred = int(score >= 0.5)
        else:
            raise RowError(line, "row has neither score nor y_pred")
        out[cid] = (score, pred)
    return out


def write_predictions_csv(case_ids, scores, writer: IO[str]) -> None:
    out = csv.writer(writer, lineterminator="\n")
    out.writerow(["case_id", "score", "y_pred"])
    for cid, s in zip(case_ids, scores):
        out.writerow([cid, f"{float(s):.6f}", int(s >= 0.5)])
