"""Leave-one-out attribution, metrics, grid search, ablations and the other
corpus-level analyses (production period, feature similarity, correlation,
per-director importance)."""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    InfeasibleStratification,
    InvalidK,
    OutOfRange,
    UnknownBlock,
    UnknownDirector,
    UntrainableFold,
    ZeroVariance,
)
from .learn import (
    Dataset,
    forest_fit,
    forest_importance,
    forest_predict,
    gnb_fit,
    gnb_predict_many,
    knn_predict,
)

# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are true classes, columns predicted classes."""

    classes: tuple[str, ...]
    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        k = len(self.classes)
        if counts.shape != (k, k):
            raise ValueError(f"confusion counts must be {k}x{k}, got {counts.shape}")
        if np.any(counts < 0):
            raise ValueError("confusion counts must be non-negative")
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_predictions(cls, truth: Sequence[str], pred: Sequence[str], classes: Sequence[str]) -> ConfusionMatrix:
        idx = {c: i for i, c in enumerate(classes)}
        counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
        for t, p in zip(truth, pred):
            counts[idx[t], idx[p]] += 1
        return cls(tuple(classes), counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["truth\\pred", *self.classes])
        for c, row in zip(self.classes, self.counts):
            w.writerow([c, *row.tolist()])
        return buf.getvalue()


@dataclass(frozen=True)
class ClassMetrics:
    classes: tuple[str, ...]
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    avg_precision: float
    avg_recall: float
    avg_f1: float
    accuracy: float


def weighted_average(values: Sequence[float], supports: Sequence[float]) -> float:
    values = np.asarray(values, dtype=float)
    supports = np.asarray(supports, dtype=float)
    return float((values * supports).sum() / supports.sum())


def f1_score(precision, recall):
    p = np.asarray(precision, dtype=float)
    r = np.asarray(recall, dtype=float)
    denom = p + r
    return np.divide(2 * p * r, denom, out=np.zeros_like(denom), where=denom > 0)


def metrics_from_confusion(cm: ConfusionMatrix) -> ClassMetrics:
    """Per-class precision/recall/F1 with support-weighted averages.

    A zero denominator yields 0 for that metric.
    """
    if cm.total == 0:
        raise ValueError("confusion matrix is empty")
    counts = cm.counts.astype(float)
    tp = np.diag(counts)
    predicted = counts.sum(axis=0)
    support = counts.sum(axis=1)
    precision = np.divide(tp, predicted, out=np.zeros_like(tp), where=predicted > 0)
    recall = np.divide(tp, support, out=np.zeros_like(tp), where=support > 0)
    f1 = f1_score(precision, recall)
    return ClassMetrics(
        classes=cm.classes,
        precision=precision,
        recall=recall,
        f1=f1,
        support=support.astype(np.int64),
        avg_precision=weighted_average(precision, support),
        avg_recall=weighted_average(recall, support),
        avg_f1=weighted_average(f1, support),
        accuracy=float(tp.sum() / counts.sum()),
    )


@dataclass(frozen=True)
class EvalReport:
    metrics: ClassMetrics
    confusion: ConfusionMatrix
    fold_predictions: tuple[tuple[str, str, str], ...]  # (sample id, truth, predicted)
    selected: tuple[ModelSpec, ...] = ()

    @property
    def accuracy(self) -> float:
        return self.metrics.accuracy

    def format_text(self, label_header: str = "author", count_header: str = "movies") -> str:
        m = self.metrics
        width = max(len(label_header), len("avg / total"), *(len(c) for c in m.classes)) + 2
        lines = [f"{label_header:<{width}}{'precision':>10}{'recall':>10}{'f1-score':>10}{count_header:>10}"]
        for i, c in enumerate(m.classes):
            lines.append(
                f"{c:<{width}}{m.precision[i]:>10.2f}{m.recall[i]:>10.2f}{m.f1[i]:>10.2f}{int(m.support[i]):>10d}"
            )
        lines.append(
            f"{'avg / total':<{width}}{m.avg_precision:>10.2f}{m.avg_recall:>10.2f}"
            f"{m.avg_f1:>10.2f}{int(m.support.sum()):>10d}"
        )
        lines.append(f"accuracy: {m.accuracy:.4f}")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        m = self.metrics
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["class", "precision", "recall", "f1", "support"])
        for i, c in enumerate(m.classes):
            w.writerow([c, f"{m.precision[i]:.6f}", f"{m.recall[i]:.6f}", f"{m.f1[i]:.6f}", int(m.support[i])])
        w.writerow(
            ["avg / total", f"{m.avg_precision:.6f}", f"{m.avg_recall:.6f}", f"{m.avg_f1:.6f}", int(m.support.sum())]
        )
        return buf.getvalue()

    def predictions_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["id", "truth", "predicted"])
        w.writerows(self.fold_predictions)
        return buf.getvalue()


# ---------------------------------------------------------------------------
# model specifications
# ---------------------------------------------------------------------------

DEFAULT_PARAMS = {
    "gnb": {"epsilon_scale": 1e-9},
    "knn": {"k": 1},
    "forest": {"trees": 100, "max_features": "sqrt", "seed": 0},
}


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    params: tuple[tuple[str, object], ...] = ()

    def __post_init__(self):
        if self.kind not in DEFAULT_PARAMS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        unknown = {k for k, _ in self.params} - set(DEFAULT_PARAMS[self.kind])
        if unknown:
            raise ValueError(f"unknown {self.kind} parameter(s): {sorted(unknown)}")

    @classmethod
    def make(cls, kind: str, **params) -> ModelSpec:
        return cls(kind, tuple(sorted(params.items())))

    def resolved(self) -> dict:
        out = dict(DEFAULT_PARAMS[self.kind])
        out.update(self.params)
        return out

    def describe(self) -> str:
        inner = ", ".join(f"{k}={v}" for k, v in sorted(self.resolved().items()))
        return f"{self.kind}({inner})"


def expand_grid(kind: str, **lattice: Iterable) -> list[ModelSpec]:
    """All parameter combinations, last parameter varying fastest."""
    names = list(lattice)
    return [ModelSpec.make(kind, **dict(zip(names, combo))) for combo in itertools.product(*lattice.values())]


def fit_predict(spec: ModelSpec, train: Dataset, x_test: np.ndarray) -> list[str]:
    p = spec.resolved()
    x_test = np.atleast_2d(x_test)
    if spec.kind == "gnb":
        return gnb_predict_many(gnb_fit(train, p["epsilon_scale"]), x_test)
    if spec.kind == "knn":
        return [knn_predict(train, row, int(p["k"])) for row in x_test]
    model = forest_fit(train, int(p["trees"]), p["max_features"], int(p["seed"]))
    return forest_predict(model, x_test)


# ---------------------------------------------------------------------------
# cross-validation
# ---------------------------------------------------------------------------


def stratified_folds(data: Dataset, k: int, seed: int = 0) -> list[np.ndarray]:
    """Test-index arrays of ``k`` stratified folds."""
    if k < 2:
        raise ValueError("need at least two folds")
    counts = data.class_counts()
    if counts.min() < k:
        small = [c for c, n in zip(data.class_set, counts) if n < k]
        raise InfeasibleStratification(f"{k}-fold stratification impossible; too few samples in {small}")
    rng = np.random.default_rng(seed)
    codes = data.codes()
    folds: list[list[int]] = [[] for _ in range(k)]
    offset = 0
    for c in range(len(data.class_set)):
        members = rng.permutation(np.flatnonzero(codes == c))
        for j, idx in enumerate(members):
            folds[(offset + j) % k].append(int(idx))
        offset += members.size
    return [np.array(sorted(f), dtype=np.intp) for f in folds]


def cv_accuracy(data: Dataset, spec: ModelSpec, folds: Sequence[np.ndarray]) -> float:
    correct = total = 0
    for test in folds:
        train = data.subset(np.setdiff1d(np.arange(data.n), test))
        pred = fit_predict(spec, train, data.x[test])
        correct += int(np.sum(np.array(pred) == data.y[test]))
        total += test.size
    return correct / total


def grid_search(data: Dataset, grid: Sequence[ModelSpec], inner_folds: int = 5, seed: int = 0) -> ModelSpec:
    """Best grid point by stratified inner-CV accuracy; ties go to the earlier point.

    Points that cannot be fitted on an inner training split (e.g. ``k``
    larger than the split) are skipped.
    """
    if not grid:
        raise ValueError("grid is empty")
    if len(grid) == 1:
        return grid[0]
    folds = stratified_folds(data, inner_folds, seed)
    best, best_score = None, -np.inf
    for spec in grid:
        try:
            score = cv_accuracy(data, spec, folds)
        except InvalidK:
            continue
        if score > best_score:
            best, best_score = spec, score
    if best is None:
        raise InvalidK("no grid point could be fitted on the inner folds")
    return best


def loocv(
    data: Dataset,
    spec: ModelSpec,
    grid: Sequence[ModelSpec] | None = None,
    inner_folds: int = 5,
    seed: int = 0,
) -> EvalReport:
    """Hold out each sample once; with ``grid`` the model is re-selected on
    every training split before predicting the held-out sample."""
    counts = data.class_counts()
    if np.any(counts < 2):
        lonely = [c for c, n in zip(data.class_set, counts) if n < 2]
        raise UntrainableFold(f"class(es) {lonely} have a single sample; leaving it out empties the class")
    ids = data.ids if data.ids is not None else tuple(str(i) for i in range(data.n))
    preds, chosen = [], []
    for i in range(data.n):
        train = data.subset(np.delete(np.arange(data.n), i))
        fold_spec = grid_search(train, grid, inner_folds, seed) if grid else spec
        chosen.append(fold_spec)
        preds.append(fit_predict(fold_spec, train, data.x[i])[0])
    cm = ConfusionMatrix.from_predictions(data.y, preds, data.class_set)
    folds = tuple((ids[i], str(data.y[i]), preds[i]) for i in range(data.n))
    return EvalReport(metrics_from_confusion(cm), cm, folds, tuple(chosen) if grid else ())


def _block_columns(data: Dataset, block: str) -> np.ndarray:
    if block == "all":
        return np.arange(data.d)
    layout = data.feature_layout
    if layout is None:
        raise UnknownBlock("dataset carries no feature layout")
    cols = []
    for name in block.split("+"):
        try:
            s = layout.slice(name)
        except KeyError:
            raise UnknownBlock(f"no feature block named {name!r}; have {list(layout.block_names)}") from None
        cols.extend(range(s.start, s.stop))
    return np.array(cols, dtype=np.intp)


def ablation(
    data: Dataset,
    blocks: Sequence[str],
    spec: ModelSpec,
    grid: Sequence[ModelSpec] | None = None,
    inner_folds: int = 5,
    seed: int = 0,
) -> dict[str, float]:
    """LOOCV accuracy using each block on its own.

    ``"all"`` names the full vector and ``"a+b"`` the union of two blocks.
    """
    out = {}
    for block in blocks:
        cols = _block_columns(data, block)
        out[block] = loocv(data.columns(cols), spec, grid, inner_folds, seed).accuracy
    return out


# ---------------------------------------------------------------------------
# production period
# ---------------------------------------------------------------------------


class Period(IntEnum):
    P1948_1959 = 0
    P1960_1969 = 1
    P1970_1979 = 2
    P1980_1989 = 3
    P1990_1999 = 4
    P2000_2009 = 5
    P2010_2017 = 6

    @property
    def span(self) -> tuple[int, int]:
        a, b = self.name[1:].split("_")
        return int(a), int(b)

    @property
    def label(self) -> str:
        a, b = self.span
        return f"({self.value}) {a}-{b}"


def period_label(year: int) -> Period:
    for p in Period:
        lo, hi = p.span
        if lo <= year <= hi:
            return p
    raise OutOfRange(f"year {year} outside 1948-2017")


def period_dataset(data: Dataset) -> Dataset:
    if data.years is None:
        raise ValueError("dataset has no production years")
    labels = [period_label(int(y)).label for y in data.years]
    present = sorted(set(labels))
    return data.relabel(labels, present)


# ---------------------------------------------------------------------------
# similarity and correlation
# ---------------------------------------------------------------------------


def histogram_intersection(a, b) -> float:
    return float(np.minimum(np.asarray(a, dtype=float), np.asarray(b, dtype=float)).sum())


def feature_similarity(a, b) -> tuple[float, float]:
    """Pearson correlation and histogram intersection of two distributions."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise ValueError("distributions must be 1-D of equal length >= 2")
    da, db = a - a.mean(), b - b.mean()
    denom = np.sqrt((da**2).sum() * (db**2).sum())
    if denom == 0:
        raise ZeroVariance("Pearson correlation undefined for a constant distribution")
    return float((da * db).sum() / denom), histogram_intersection(a, b)


def feature_correlation_matrix(features: Dataset | np.ndarray) -> np.ndarray:
    """Pearson correlation between every pair of feature coordinates.

    Constant coordinates have undefined correlation, reported as NaN.
    """
    x = features.x if isinstance(features, Dataset) else np.asarray(features, dtype=float)
    if x.shape[0] < 3:
        raise ValueError("need at least three samples")
    centered = x - x.mean(axis=0)
    norms = np.sqrt((centered**2).sum(axis=0))
    defined = norms > 1e-12 * np.maximum(1.0, np.abs(x).max(axis=0))
    z = np.zeros_like(centered)
    z[:, defined] = centered[:, defined] / norms[defined]
    corr = np.clip(z.T @ z, -1.0, 1.0)
    corr[~defined, :] = np.nan
    corr[:, ~defined] = np.nan
    idx = np.flatnonzero(defined)
    corr[idx, idx] = 1.0
    return corr


# ---------------------------------------------------------------------------
# per-director importance
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ImportanceTable:
    directors: tuple[str, ...]
    blocks: tuple[str, ...]
    absolute: np.ndarray  # directors x blocks, rows sum to 1
    normalized: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "normalized", normalize_by_mean(self.absolute))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["director", "variant", *self.blocks])
        for i, d in enumerate(self.directors):
            w.writerow([d, "absolute", *(f"{v:.6f}" for v in self.absolute[i])])
        for i, d in enumerate(self.directors):
            w.writerow([d, "normalized", *(f"{v:.6f}" for v in self.normalized[i])])
        return buf.getvalue()


def normalize_by_mean(absolute: np.ndarray) -> np.ndarray:
    """Divide each block column by its mean over directors (0 where the mean is 0)."""
    absolute = np.asarray(absolute, dtype=float)
    mean = absolute.mean(axis=0, keepdims=True)
    return np.divide(absolute, mean, out=np.zeros_like(absolute), where=mean > 0)


def block_importance(weights: np.ndarray, layout, blocks: Sequence[str] | None = None) -> np.ndarray:
    blocks = tuple(blocks or layout.block_names)
    return np.array([weights[layout.slice(b)].sum() for b in blocks])


def _director_importance(data: Dataset, director: str, blocks, trees, max_features, seed) -> np.ndarray:
    binary = np.where(data.y == director, director, "rest")
    model = forest_fit(data.relabel(binary), trees, max_features, seed)
    return block_importance(forest_importance(model), data.feature_layout, blocks)


def importance_profiles(
    data: Dataset,
    blocks: Sequence[str] | None = None,
    trees: int = 200,
    max_features: str = "sqrt",
    seed: int = 0,
) -> ImportanceTable:
    """One-against-all forest importance for every director, summed per block."""
    if data.feature_layout is None:
        raise UnknownBlock("dataset carries no feature layout")
    blocks = tuple(blocks or data.feature_layout.block_names)
    for b in blocks:
        _block_columns(data, b)
    counts = dict(zip(data.class_set, data.class_counts()))
    for d, n in counts.items():
        if n < 2:
            raise UnknownDirector(f"director {d!r} has {n} film(s); need at least 2")
    rows = [_director_importance(data, d, blocks, trees, max_features, seed) for d in data.class_set]
    return ImportanceTable(data.class_set, blocks, np.array(rows))


def importance_profile(
    data: Dataset,
    director: str,
    blocks: Sequence[str] | None = None,
    trees: int = 200,
    max_features: str = "sqrt",
    seed: int = 0,
) -> tuple[dict[str, float], dict[str, float]]:
    """Absolute and cross-director-normalized block importances of one director."""
    if director not in data.class_set:
        raise UnknownDirector(f"no films by {director!r}")
    table = importance_profiles(data, blocks, trees, max_features, seed)
    i = table.directors.index(director)
    return dict(zip(table.blocks, table.absolute[i])), dict(zip(table.blocks, table.normalized[i]))


def mapping_csv(rows: Mapping[str, float], key: str = "block", value: str = "accuracy") -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([key, value])
    for k, v in rows.items():
        w.writerow([k, f"{v:.6f}"])
    return buf.getvalue()
