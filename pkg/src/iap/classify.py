"""1-NN and random-forest classifiers with OA / AA / kappa scoring."""

from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from sklearn.tree import DecisionTreeClassifier

from .errors import ValidationError
from .numerics import rng_stream

NN_BLOCK = 2048


def _as_rows(x, name):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValidationError(f"{name} must be a 2-D array")
    return x


def _check_train(train_x, train_y):
    train_x = _as_rows(train_x, "training features")
    train_y = np.asarray(train_y, dtype=np.int64).ravel()
    if train_x.shape[0] == 0:
        raise ValidationError("training set is empty")
    if train_y.shape[0] != train_x.shape[0]:
        raise ValidationError("training labels and rows differ in count")
    return train_x, train_y


def nn_classify(train_x, train_y, query) -> np.ndarray:
    """1-nearest neighbour under Euclidean distance.

    Ties go to the lowest training row.  A BLAS distance expansion picks
    candidates, which are then re-ranked with exact differences so the result
    does not depend on rounding in the expansion.
    """
    train_x, train_y = _check_train(train_x, train_y)
    query = _as_rows(query, "query features")
    if query.shape[1] != train_x.shape[1]:
        raise ValidationError(
            f"query width {query.shape[1]} differs from training width {train_x.shape[1]}")
    tn = np.einsum("ij,ij->i", train_x, train_x)
    out = np.empty(query.shape[0], np.int64)
    for s in range(0, query.shape[0], NN_BLOCK):
        q = query[s:s + NN_BLOCK]
        qn = np.einsum("ij,ij->i", q, q)
        d2 = qn[:, None] - 2.0 * (q @ train_x.T) + tn[None, :]
        lo = d2.min(axis=1)
        slack = 1e-9 * (qn + tn.max()) + 1e-12
        for i in range(q.shape[0]):
            cand = np.flatnonzero(d2[i] <= lo[i] + slack[i])
            if cand.size == 1:
                best = cand[0]
            else:
                diff = train_x[cand] - q[i]
                exact = np.einsum("ij,ij->i", diff, diff)
                best = cand[np.argmin(exact)]
            out[s + i] = train_y[best]
    return out


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 200
    max_features: int | None = None   # None -> ceil(sqrt(F))
    min_leaf: int = 1
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValidationError("forest needs at least one tree")
        if self.min_leaf < 1:
            raise ValidationError("min_leaf must be >= 1")
        if self.max_features is not None and self.max_features < 1:
            raise ValidationError("max_features must be >= 1")


def _tree_seed(seed: int, t: int) -> int:
    return int(rng_stream(seed, f"forest/{t}").integers(2**31 - 1))


def rf_classify(train_x, train_y, query, params: ForestParams = ForestParams(),
                threads: int = 1) -> np.ndarray:
    """Bagged Gini CART trees; majority vote, ties to the lowest class id.

    Each tree draws its bootstrap and split features from its own stream
    derived from ``(seed, tree index)``, so the result is independent of
    thread scheduling.
    """
    train_x, train_y = _check_train(train_x, train_y)
    query = _as_rows(query, "query features")
    if query.shape[1] != train_x.shape[1]:
        raise ValidationError(
            f"query width {query.shape[1]} differs from training width {train_x.shape[1]}")
    classes = np.unique(train_y)
    if classes.size < 2:
        warnings.warn("random forest trained on a single class; predicting it everywhere",
                      RuntimeWarning, stacklevel=2)
        return np.full(query.shape[0], classes[0], np.int64)
    n, F = train_x.shape
    mf = params.max_features or math.ceil(math.sqrt(F))
    mf = min(mf, F)

    def grow(t):
        rs = _tree_seed(params.seed, t)
        idx = (np.random.default_rng(rs).integers(0, n, n) if params.bootstrap
               else np.arange(n))
        tree = DecisionTreeClassifier(criterion="gini", max_features=mf,
                                      min_samples_leaf=params.min_leaf, random_state=rs)
        tree.fit(train_x[idx], train_y[idx])
        pred = tree.predict(query)
        return np.searchsorted(classes, pred)

    votes = np.zeros((query.shape[0], classes.size), np.int64)
    rows = np.arange(query.shape[0])
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            for col in ex.map(grow, range(params.n_trees)):
                np.add.at(votes, (rows, col), 1)
    else:
        for t in range(params.n_trees):
            np.add.at(votes, (rows, grow(t)), 1)
    return classes[np.argmax(votes, axis=1)]


@dataclass(frozen=True)
class Metrics:
    oa: float
    aa: float
    kappa: float
    recall: dict          # class id -> recall, for classes present in truth
    confusion: np.ndarray  # rows truth, columns prediction; index = class id - 1

    def as_dict(self) -> dict:
        return {"OA": self.oa, "AA": self.aa, "kappa": self.kappa,
                "recall": {str(k): v for k, v in self.recall.items()},
                "confusion": self.confusion.tolist()}


def evaluate(pred, truth) -> Metrics:
    pred = np.asarray(pred, dtype=np.int64).ravel()
    truth = np.asarray(truth, dtype=np.int64).ravel()
    if pred.shape != truth.shape:
        raise ValidationError(f"{pred.size} predictions for {truth.size} truth labels")
    if truth.size == 0:
        raise ValidationError("no test samples to evaluate")
    if truth.min() < 1 or pred.min() < 1:
        raise ValidationError("class ids must be >= 1")
    C = int(max(truth.max(), pred.max()))
    conf = np.zeros((C, C), np.int64)
    np.add.at(conf, (truth - 1, pred - 1), 1)
    total = conf.sum()
    po = np.trace(conf) / total
    rows = conf.sum(axis=1)
    cols = conf.sum(axis=0)
    pe = float((rows.astype(np.float64) @ cols) / float(total) ** 2)
    kappa = 1.0 if po == 1.0 else (po - pe) / (1.0 - pe)
    present = np.flatnonzero(rows)
    recall = {int(c + 1): float(conf[c, c] / rows[c]) for c in present}
    aa = float(np.mean(list(recall.values())))
    return Metrics(float(po), aa, float(kappa), recall, conf)


def format_metrics(metrics: dict) -> str:
    """Per-class recall table with one column per classifier, then OA/AA/kappa."""
    names = list(metrics)
    classes = sorted({c for m in metrics.values() for c in m.recall})
    head = f"{'class':>6}" + "".join(f"{n:>12}" for n in names)
    lines = [head, "-" * len(head)]
    for c in classes:
        cells = "".join(f"{100 * m.recall[c]:12.2f}" if c in m.recall else f"{'-':>12}"
                        for m in metrics.values())
        lines.append(f"{c:>6}{cells}")
    lines.append("-" * len(head))
    lines.append(f"{'OA':>6}" + "".join(f"{100 * m.oa:12.2f}" for m in metrics.values()))
    lines.append(f"{'AA':>6}" + "".join(f"{100 * m.aa:12.2f}" for m in metrics.values()))
    lines.append(f"{'kappa':>6}" + "".join(f"{m.kappa:12.4f}" for m in metrics.values()))
    return "\n".join(lines) + "\n"


def metrics_json(metrics: dict) -> str:
    return json.dumps({k: m.as_dict() for k, m in metrics.items()}, indent=2, sort_keys=True) + "\n"
