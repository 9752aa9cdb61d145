"""Classifiers written against plain numpy: Gaussian naive Bayes, k-nearest
neighbours and a bootstrap forest of Gini trees with impurity importance.

All ties are broken deterministically: by class order first, then by
training-sample index.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyClass, InvalidK, NonFiniteInput

if TYPE_CHECKING:
    from .shotfeat import FeatureLayout

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class Dataset:
    x: np.ndarray
    y: np.ndarray
    class_set: tuple[str, ...] = ()
    feature_layout: FeatureLayout | None = None
    ids: tuple[str, ...] | None = None
    years: np.ndarray | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim != 2:
            raise DimensionMismatch(f"x must be 2-D, got shape {x.shape}")
        y = np.asarray(self.y).astype(str)
        if y.shape != (x.shape[0],):
            raise DimensionMismatch(f"{x.shape[0]} rows but {y.shape[0]} labels")
        if x.shape[0] < 2:
            raise EmptyClass("a dataset needs at least two samples")
        if not np.all(np.isfinite(x)):
            raise NonFiniteInput("feature matrix contains NaN or infinite values")
        classes = tuple(self.class_set) if self.class_set else tuple(sorted(set(y.tolist())))
        present = set(y.tolist())
        unknown = present - set(classes)
        if unknown:
            raise EmptyClass(f"labels not in class_set: {sorted(unknown)}")
        empty = [c for c in classes if c not in present]
        if empty:
            raise EmptyClass(f"class(es) without samples: {empty}")
        if self.ids is not None and len(self.ids) != x.shape[0]:
            raise DimensionMismatch("ids length differs from row count")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "class_set", classes)
        if self.ids is not None:
            object.__setattr__(self, "ids", tuple(self.ids))
        if self.years is not None:
            object.__setattr__(self, "years", np.asarray(self.years, dtype=int))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def codes(self) -> np.ndarray:
        lookup = {c: i for i, c in enumerate(self.class_set)}
        return np.array([lookup[v] for v in self.y], dtype=np.intp)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.codes(), minlength=len(self.class_set))

    def subset(self, rows, keep_classes: bool = True) -> Dataset:
        rows = np.asarray(rows)
        return Dataset(
            self.x[rows],
            self.y[rows],
            self.class_set if keep_classes else (),
            self.feature_layout,
            None if self.ids is None else tuple(np.asarray(self.ids, dtype=object)[rows]),
            None if self.years is None else self.years[rows],
        )

    def columns(self, cols) -> Dataset:
        """Restrict to a subset of feature columns; the layout is dropped."""
        return replace(self, x=self.x[:, cols], feature_layout=None)

    def relabel(self, y: Sequence[str], class_set: Sequence[str] = ()) -> Dataset:
        return replace(self, y=np.asarray(y), class_set=tuple(class_set))


def _check_dim(model_d: int, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model_d:
        raise DimensionMismatch(f"model expects {model_d} features, got {x.shape[-1]}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput("query contains NaN or infinite values")
    return x


# ---------------------------------------------------------------------------
# Gaussian naive Bayes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GnbModel:
    classes: tuple[str, ...]
    priors: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    epsilon: float

    def to_dict(self) -> dict:
        return {
            "format": "shotstyle.gnb",
            "version": MODEL_FORMAT_VERSION,
            "classes": list(self.classes),
            "priors": self.priors.tolist(),
            "means": self.means.tolist(),
            "variances": self.variances.tolist(),
            "epsilon": self.epsilon,
        }

    @classmethod
    def from_dict(cls, d: dict) -> GnbModel:
        _check_format(d, "shotstyle.gnb")
        return cls(
            tuple(d["classes"]),
            np.array(d["priors"], dtype=float),
            np.array(d["means"], dtype=float),
            np.array(d["variances"], dtype=float),
            float(d["epsilon"]),
        )


def gnb_fit(data: Dataset, epsilon_scale: float = 1e-9) -> GnbModel:
    """Per-class feature means and population variances.

    Variances are floored at ``epsilon_scale`` times the largest per-feature
    variance over the whole training set (``epsilon_scale`` itself when every
    feature is constant).
    """
    codes = data.codes()
    c = len(data.class_set)
    counts = np.bincount(codes, minlength=c)
    if np.any(counts == 0):
        raise EmptyClass("every class needs at least one training sample")
    max_var = float(data.x.var(axis=0).max())
    epsilon = epsilon_scale * max_var if max_var > 0 else epsilon_scale
    means = np.zeros((c, data.d))
    variances = np.zeros((c, data.d))
    for k in range(c):
        xk = data.x[codes == k]
        means[k] = xk.mean(axis=0)
        variances[k] = xk.var(axis=0)
    variances = np.maximum(variances, epsilon)
    return GnbModel(data.class_set, counts / counts.sum(), means, variances, epsilon)


def gnb_log_posterior(model: GnbModel, x) -> np.ndarray:
    """Unnormalized log posteriors, shape ``(classes,)`` or ``(n, classes)``."""
    x = _check_dim(model.means.shape[1], x)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    log_norm = -0.5 * np.log(2.0 * np.pi * model.variances).sum(axis=1)
    diff = x[:, None, :] - model.means[None, :, :]
    quad = -0.5 * (diff**2 / model.variances[None, :, :]).sum(axis=2)
    out = np.log(model.priors)[None, :] + log_norm[None, :] + quad
    return out[0] if single else out


def gnb_predict(model: GnbModel, x) -> tuple[str, np.ndarray]:
    logp = gnb_log_posterior(model, np.asarray(x, dtype=float).reshape(-1))
    return model.classes[int(np.argmax(logp))], logp


def gnb_predict_many(model: GnbModel, x) -> list[str]:
    logp = gnb_log_posterior(model, np.atleast_2d(x))
    return [model.classes[i] for i in np.argmax(logp, axis=1)]


# ---------------------------------------------------------------------------
# k-nearest neighbours
# ---------------------------------------------------------------------------


def knn_predict(train: Dataset, x, k: int = 1) -> str:
    if not 1 <= k <= train.n:
        raise InvalidK(f"k must lie in [1, {train.n}], got {k}")
    x = _check_dim(train.d, np.asarray(x, dtype=float).reshape(-1))
    dist = np.sqrt(((train.x - x) ** 2).sum(axis=1))
    nearest = np.argsort(dist, kind="stable")[:k]
    votes = np.bincount(train.codes()[nearest], minlength=len(train.class_set))
    return train.class_set[int(np.argmax(votes))]


# ---------------------------------------------------------------------------
# decision forest
# ---------------------------------------------------------------------------


@dataclass
class Tree:
    """Flat binary tree; ``feature[i] == -1`` marks a leaf."""

    feature: list[int] = field(default_factory=list)
    threshold: list[float] = field(default_factory=list)
    left: list[int] = field(default_factory=list)
    right: list[int] = field(default_factory=list)
    value: list[list[float]] = field(default_factory=list)
    n_samples: list[int] = field(default_factory=list)
    impurity: list[float] = field(default_factory=list)

    def add(self, value: np.ndarray, n: int, impurity: float) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(value.tolist())
        self.n_samples.append(int(n))
        self.impurity.append(float(impurity))
        return len(self.feature) - 1

    def leaf_values(self, x: np.ndarray) -> np.ndarray:
        out = np.empty((x.shape[0], len(self.value[0])))
        for r, row in enumerate(x):
            node = 0
            while self.feature[node] >= 0:
                node = self.left[node] if row[self.feature[node]] <= self.threshold[node] else self.right[node]
            out[r] = self.value[node]
        return out

    def importances(self, d: int) -> np.ndarray:
        imp = np.zeros(d)
        total = self.n_samples[0]
        for i, f in enumerate(self.feature):
            if f < 0:
                continue
            l, r = self.left[i], self.right[i]
            imp[f] += (
                self.n_samples[i] * self.impurity[i]
                - self.n_samples[l] * self.impurity[l]
                - self.n_samples[r] * self.impurity[r]
            ) / total
        return imp

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _gini(counts: np.ndarray) -> np.ndarray:
    n = counts.sum(axis=-1, keepdims=True)
    p = np.divide(counts, n, out=np.zeros_like(counts, dtype=float), where=n > 0)
    return 1.0 - (p**2).sum(axis=-1)


def _best_split(xs: np.ndarray, onehot: np.ndarray):
    """Lowest weighted child Gini over thresholds of one feature.

    Returns ``(score, threshold)`` or ``None`` when the feature is constant.
    """
    order = np.argsort(xs, kind="stable")
    xs = xs[order]
    valid = xs[1:] > xs[:-1]
    if not valid.any():
        return None
    cum = np.cumsum(onehot[order], axis=0)
    total = cum[-1]
    m = xs.shape[0]
    left = cum[:-1]
    right = total - left
    nl = np.arange(1, m, dtype=float)
    score = (nl * _gini(left) + (m - nl) * _gini(right)) / m
    score = np.where(valid, score, np.inf)
    i = int(np.argmin(score))
    lo, hi = xs[i], xs[i + 1]
    thr = lo + (hi - lo) / 2.0
    if not lo <= thr < hi:
        thr = lo
    return float(score[i]), float(thr)


def _grow_tree(x: np.ndarray, codes: np.ndarray, n_classes: int, max_features: int, rng) -> Tree:
    tree = Tree()
    eye = np.eye(n_classes)
    d = x.shape[1]

    def make(rows: np.ndarray) -> int:
        counts = np.bincount(codes[rows], minlength=n_classes).astype(float)
        return tree.add(counts / counts.sum(), rows.size, float(_gini(counts)))

    root = make(np.arange(x.shape[0]))
    stack = [(root, np.arange(x.shape[0]))]
    while stack:
        node, rows = stack.pop()
        if tree.impurity[node] <= 0.0:
            continue
        onehot = eye[codes[rows]]
        best = None
        for j, f in enumerate(rng.permutation(d)):
            if j >= max_features and best is not None:
                break
            found = _best_split(x[rows, f], onehot)
            if found is not None and (best is None or found[0] < best[0]):
                best = (found[0], found[1], int(f))
        if best is None:
            continue
        _, thr, f = best
        go_left = x[rows, f] <= thr
        tree.feature[node] = f
        tree.threshold[node] = thr
        lrows, rrows = rows[go_left], rows[~go_left]
        tree.left[node] = make(lrows)
        tree.right[node] = make(rrows)
        stack.append((tree.right[node], rrows))
        stack.append((tree.left[node], lrows))
    return tree


@dataclass
class ForestModel:
    classes: tuple[str, ...]
    n_features: int
    trees: list[Tree]
    max_features: str
    seed: int
    bootstrap_rows: list[np.ndarray]

    @property
    def tree_count(self) -> int:
        return len(self.trees)

    def to_dict(self) -> dict:
        return {
            "format": "shotstyle.forest",
            "version": MODEL_FORMAT_VERSION,
            "classes": list(self.classes),
            "n_features": self.n_features,
            "max_features": self.max_features,
            "seed": self.seed,
            "trees": [t.to_dict() for t in self.trees],
            "bootstrap_rows": [r.tolist() for r in self.bootstrap_rows],
        }

    @classmethod
    def from_dict(cls, d: dict) -> ForestModel:
        _check_format(d, "shotstyle.forest")
        return cls(
            tuple(d["classes"]),
            int(d["n_features"]),
            [Tree(**t) for t in d["trees"]],
            d["max_features"],
            int(d["seed"]),
            [np.array(r, dtype=np.intp) for r in d["bootstrap_rows"]],
        )


def _n_candidate_features(rule: str, d: int) -> int:
    if rule == "sqrt":
        return max(1, int(math.sqrt(d)))
    if rule == "all":
        return d
    raise ValueError(f"max_features must be 'sqrt' or 'all', got {rule!r}")


def forest_fit(data: Dataset, trees: int = 100, max_features: str = "sqrt", seed: int = 0) -> ForestModel:
    """Bootstrap forest of unpruned Gini trees, reproducible from ``seed``."""
    if trees < 1:
        raise ValueError("need at least one tree")
    codes = data.codes()
    c = len(data.class_set)
    if np.any(np.bincount(codes, minlength=c) == 0):
        raise EmptyClass("every class needs at least one training sample")
    mf = _n_candidate_features(max_features, data.d)
    fitted, rows_used = [], []
    for child in np.random.SeedSequence(seed).spawn(trees):
        rng = np.random.default_rng(child)
        rows = rng.integers(0, data.n, data.n)
        fitted.append(_grow_tree(data.x[rows], codes[rows], c, mf, rng))
        rows_used.append(rows)
    return ForestModel(data.class_set, data.d, fitted, max_features, seed, rows_used)


def forest_predict_proba(model: ForestModel, x) -> np.ndarray:
    x = np.atleast_2d(_check_dim(model.n_features, x))
    return sum(t.leaf_values(x) for t in model.trees) / len(model.trees)


def forest_predict(model: ForestModel, x) -> list[str]:
    proba = forest_predict_proba(model, x)
    return [model.classes[i] for i in np.argmax(proba, axis=1)]


def forest_oob_accuracy(model: ForestModel, data: Dataset) -> float:
    """Accuracy of out-of-bag votes over samples left out by at least one tree."""
    c = len(model.classes)
    votes = np.zeros((data.n, c))
    for tree, rows in zip(model.trees, model.bootstrap_rows):
        oob = np.setdiff1d(np.arange(data.n), rows)
        if oob.size:
            votes[oob] += tree.leaf_values(data.x[oob])
    seen = votes.sum(axis=1) > 0
    if not seen.any():
        return float("nan")
    pred = np.argmax(votes[seen], axis=1)
    return float(np.mean(pred == data.codes()[seen]))


def forest_importance(model: ForestModel) -> np.ndarray:
    """Mean decrease in Gini impurity per feature, normalized to sum to one."""
    per_tree = []
    for tree in model.trees:
        imp = tree.importances(model.n_features)
        s = imp.sum()
        per_tree.append(imp / s if s > 0 else imp)
    mean = np.mean(per_tree, axis=0)
    total = mean.sum()
    if total <= 0:
        # no tree ever split: nothing distinguishes the features
        return np.full(model.n_features, 1.0 / model.n_features)
    return mean / total


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------


def _check_format(d: dict, expected: str):
    if d.get("format") != expected:
        raise ValueError(f"expected a {expected} document, got {d.get('format')!r}")
    if d.get("version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model version {d.get('version')!r}")


def dump_model(model: GnbModel | ForestModel) -> str:
    return json.dumps(model.to_dict(), indent=1, sort_keys=True)


def load_model(text: str) -> GnbModel | ForestModel:
    d = json.loads(text)
    if d.get("format") == "shotstyle.forest":
        return ForestModel.from_dict(d)
    return GnbModel.from_dict(d)
