"""Robust line fits of per-film shot duration against production year."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import Corpus
from .errors import DegenerateX, InsufficientFilms, NoConsensus


@dataclass(frozen=True)
class TrendLine:
    slope: float
    intercept: float
    method: str
    inlier_mask: tuple[bool, ...] | None = None
    threshold: float | None = None

    def __call__(self, x):
        return self.intercept + self.slope * np.asarray(x, dtype=float)


def _xy(points) -> tuple[np.ndarray, np.ndarray]:
    arr = np.asarray(points, dtype=float).reshape(-1, 2)
    return arr[:, 0], arr[:, 1]


def _check_x(x: np.ndarray):
    if x.size < 2 or np.unique(x).size < 2:
        raise DegenerateX("need at least two points with distinct x")


def theil_sen(points: Sequence[tuple[float, float]]) -> TrendLine:
    """Median of pairwise slopes; intercept is the median of ``y - slope * x``."""
    x, y = _xy(points)
    _check_x(x)
    i, j = np.triu_indices(x.size, k=1)
    dx = x[j] - x[i]
    keep = dx != 0
    slope = float(np.median((y[j] - y[i])[keep] / dx[keep]))
    intercept = float(np.median(y - slope * x))
    return TrendLine(slope, intercept, "theil_sen")


def _lstsq(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    xm, ym = x.mean(), y.mean()
    sxx = ((x - xm) ** 2).sum()
    slope = ((x - xm) * (y - ym)).sum() / sxx
    return float(slope), float(ym - slope * xm)


def auto_threshold(x: np.ndarray, y: np.ndarray) -> float:
    """1.5 x the median absolute Theil-Sen residual.

    A floor relative to the data scale keeps noiseless lines from producing a
    zero threshold that rounding error alone would violate.
    """
    ts = theil_sen(np.column_stack([x, y]))
    mad = float(np.median(np.abs(y - ts(x))))
    floor = 1e-9 * max(1.0, float(np.median(np.abs(y))))
    return max(1.5 * mad, floor)


def ransac_line(
    points: Sequence[tuple[float, float]],
    residual_threshold: float | str = "auto",
    iterations: int = 1000,
    seed: int = 0,
) -> TrendLine:
    """Largest-consensus line from random two-point hypotheses, refit by least
    squares on the consensus set.

    The refit is repeated until the inlier set is stable, so every reported
    inlier lies within ``residual_threshold`` of the returned line.
    """
    x, y = _xy(points)
    _check_x(x)
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    thr = auto_threshold(x, y) if residual_threshold == "auto" else float(residual_threshold)
    rng = np.random.default_rng(seed)
    n = x.size
    best_mask, best_count = None, -1
    for _ in range(iterations):
        a, b = rng.choice(n, size=2, replace=False)
        if x[a] == x[b]:
            continue
        slope = (y[b] - y[a]) / (x[b] - x[a])
        mask = np.abs(y - (y[a] + slope * (x - x[a]))) <= thr
        count = int(mask.sum())
        if count > best_count:
            best_mask, best_count = mask, count
    if best_mask is None or best_count < 2 or np.unique(x[best_mask]).size < 2:
        raise NoConsensus("no hypothesis gathered two inliers with distinct x")

    mask = best_mask
    for _ in range(50):
        slope, intercept = _lstsq(x[mask], y[mask])
        new_mask = np.abs(y - (intercept + slope * x)) <= thr
        if np.array_equal(new_mask, mask) or new_mask.sum() < 2 or np.unique(x[new_mask]).size < 2:
            break
        mask = new_mask
    mask = np.abs(y - (intercept + slope * x)) <= thr
    return TrendLine(slope, intercept, "ransac", tuple(bool(m) for m in mask), thr)


def film_statistic(durations: np.ndarray, statistic: str = "mean") -> float:
    if statistic == "mean":
        return float(durations.mean())
    if statistic == "median":
        return float(np.median(durations))
    raise ValueError(f"statistic must be 'mean' or 'median', got {statistic!r}")


def director_points(corpus: Corpus, statistic: str = "mean") -> dict[str, np.ndarray]:
    out = {}
    for director, films in corpus.by_director().items():
        rows = [(f.year, film_statistic(f.shot_list.durations, statistic)) for f in films if f.shot_list is not None]
        out[director] = np.array(rows, dtype=float).reshape(-1, 2)
    return out


def director_trends(
    corpus: Corpus,
    statistic: str = "mean",
    residual_threshold: float | str = "auto",
    iterations: int = 1000,
    seed: int = 0,
) -> dict[str, tuple[TrendLine, TrendLine]]:
    """Theil-Sen and RANSAC fits of per-film duration statistic versus year."""
    out = {}
    for director, pts in director_points(corpus, statistic).items():
        if pts.shape[0] < 2 or np.unique(pts[:, 0]).size < 2:
            raise InsufficientFilms(
                f"{director}: need at least 2 films with shot lists from distinct years, have {pts.shape[0]}"
            )
        out[director] = (theil_sen(pts), ransac_line(pts, residual_threshold, iterations, seed))
    return out


def trends_csv(trends: dict[str, tuple[TrendLine, TrendLine]], n_films: dict[str, int]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["director", "method", "slope", "intercept", "n_films"])
    for director, lines in trends.items():
        for line in lines:
            w.writerow([director, line.method, repr(line.slope), repr(line.intercept), n_films[director]])
    return buf.getvalue()
