"""Shot duration and shot scale features.

A film is described by four blocks, concatenated in this order:

    ddistr   distribution of shots over the seven duration classes      (7)
    dtrans   duration-class transition matrix between consecutive shots (49)
    sdistr   per-second distribution over the scale classes             (3 or 7)
    strans   per-second scale transition matrix                         (9 or 49)

giving 68 coordinates with three scale classes and 112 with seven. Four
accessory coordinates (year, #Frames, #Shots, #SChanges) may be appended.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Mapping, Sequence

import numpy as np

from .corpus import DEFAULT_7TO3, SCALES3, SCALES7, FilmRecord, ScaleTrack, ShotList, reduce_scale_7to3
from .errors import (
    DegenerateSample,
    EmptyShotList,
    EmptyTrack,
    MissingAnnotation,
    NonPositiveDuration,
    TooFewShots,
    TooShortTrack,
)


class DurationClass(IntEnum):
    VS = 0
    S = 1
    SM = 2
    M = 3
    ML = 4
    L = 5
    VL = 6


DURATION_CLASSES = tuple(c.name for c in DurationClass)
# Upper (exclusive) edges of VS..L in seconds; VL is open-ended.
DURATION_EDGES = (2.0, 4.5, 7.0, 10.0, 22.5, 40.0)
ACCESSORY_NAMES = ("year", "#Frames", "#Shots", "#SChanges")
ACCESSORY_BLOCKS = ("year", "frames", "shots", "schanges")


def duration_bounds(cls: DurationClass | int) -> tuple[float, float]:
    """Half-open ``[lo, hi)`` interval of a duration class (VS is ``(0, 2)``)."""
    i = int(cls)
    lo = 0.0 if i == 0 else DURATION_EDGES[i - 1]
    hi = DURATION_EDGES[i] if i < len(DURATION_EDGES) else math.inf
    return lo, hi


def classify_duration(t_d: float) -> DurationClass:
    if not t_d > 0:
        raise NonPositiveDuration(f"shot duration must be positive, got {t_d!r}")
    i = 0
    while i < len(DURATION_EDGES) and t_d >= DURATION_EDGES[i]:
        i += 1
    return DurationClass(i)


def duration_codes(durations) -> np.ndarray:
    d = np.asarray(durations, dtype=float)
    if np.any(~(d > 0)):
        raise NonPositiveDuration("all shot durations must be positive")
    return np.searchsorted(np.array(DURATION_EDGES), d, side="right")


def _durations(shots: ShotList | Sequence[float]) -> np.ndarray:
    if isinstance(shots, ShotList):
        return shots.durations
    return np.asarray(shots, dtype=float)


def _distribution(codes: np.ndarray, k: int) -> np.ndarray:
    counts = np.bincount(codes, minlength=k).astype(float)
    return counts / counts.sum()


@dataclass(frozen=True)
class TransitionMatrix:
    """Class-to-class transition probabilities with the raw pair counts.

    Under ``row`` normalization each observed source row sums to one and
    never-observed rows stay zero. ``joint`` divides by the number of pairs.
    """

    classes: tuple[str, ...]
    counts: np.ndarray
    probs: np.ndarray
    normalization: str = "row"

    @property
    def size(self) -> int:
        return len(self.classes)

    def flat(self) -> np.ndarray:
        return self.probs.reshape(-1)


def transition_counts(codes: np.ndarray, k: int) -> np.ndarray:
    codes = np.asarray(codes, dtype=np.intp)
    pairs = codes[:-1] * k + codes[1:]
    return np.bincount(pairs, minlength=k * k).reshape(k, k)


def normalize_counts(counts: np.ndarray, normalization: str = "row") -> np.ndarray:
    counts = np.asarray(counts, dtype=float)
    if normalization == "row":
        sums = counts.sum(axis=1, keepdims=True)
        return np.divide(counts, sums, out=np.zeros_like(counts), where=sums > 0)
    if normalization == "joint":
        total = counts.sum()
        return counts / total if total > 0 else np.zeros_like(counts)
    raise ValueError(f"normalization must be 'row' or 'joint', got {normalization!r}")


def _transitions(codes: np.ndarray, classes: tuple[str, ...], normalization: str) -> TransitionMatrix:
    counts = transition_counts(codes, len(classes))
    return TransitionMatrix(classes, counts, normalize_counts(counts, normalization), normalization)


def duration_distribution(shots: ShotList | Sequence[float]) -> np.ndarray:
    d = _durations(shots)
    if d.size == 0:
        raise EmptyShotList("cannot compute a duration distribution of zero shots")
    return _distribution(duration_codes(d), len(DURATION_CLASSES))


def duration_transitions(shots: ShotList | Sequence[float], normalization: str = "row") -> TransitionMatrix:
    d = _durations(shots)
    if d.size < 2:
        raise TooFewShots(f"need at least 2 shots for transitions, got {d.size}")
    return _transitions(duration_codes(d), DURATION_CLASSES, normalization)


def scale_distribution(track: ScaleTrack) -> np.ndarray:
    if len(track.labels) == 0:
        raise EmptyTrack("scale track is empty")
    return _distribution(track.codes(), len(track.classes))


def scale_transitions(track: ScaleTrack, normalization: str = "row") -> TransitionMatrix:
    if len(track.labels) < 2:
        raise TooShortTrack(f"need at least 2 seconds for transitions, got {len(track.labels)}")
    return _transitions(track.codes(), track.classes, normalization)


@dataclass(frozen=True)
class AccessoryFeatures:
    year: int
    n_frames: int
    n_shots: int
    n_scale_changes: int

    def as_array(self) -> np.ndarray:
        return np.array([self.year, self.n_frames, self.n_shots, self.n_scale_changes], dtype=float)


def accessory_features(film: FilmRecord, frame_rate: float = 25.0) -> AccessoryFeatures:
    """Year, #Frames, #Shots and #SChanges of a film.

    #Frames is the annotated runtime in seconds times ``frame_rate``.
    """
    if film.shot_list is None or film.scale_track is None:
        raise MissingAnnotation(f"{film.film_id}: accessory features need a shot list and a scale track")
    labels = film.scale_track.labels
    changes = sum(1 for a, b in zip(labels, labels[1:]) if a != b)
    return AccessoryFeatures(
        year=film.year,
        n_frames=int(round(len(labels) * frame_rate)),
        n_shots=len(film.shot_list),
        n_scale_changes=changes,
    )


# ---------------------------------------------------------------------------
# feature vectors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FeatureLayout:
    """Named contiguous blocks plus one name per coordinate."""

    blocks: tuple[tuple[str, int, int], ...]
    names: tuple[str, ...]

    def __post_init__(self):
        pos = 0
        for _, start, stop in self.blocks:
            if start != pos or stop <= start:
                raise ValueError("layout blocks must tile the coordinates in order")
            pos = stop
        if pos != len(self.names):
            raise ValueError("layout blocks do not cover every coordinate")

    @property
    def dim(self) -> int:
        return len(self.names)

    @property
    def block_names(self) -> tuple[str, ...]:
        return tuple(b[0] for b in self.blocks)

    def slice(self, name: str) -> slice:
        for block, start, stop in self.blocks:
            if block == name:
                return slice(start, stop)
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "blocks": [{"name": n, "start": s, "stop": e} for n, s, e in self.blocks],
            "coordinates": list(self.names),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> FeatureLayout:
        blocks = tuple((b["name"], int(b["start"]), int(b["stop"])) for b in d["blocks"])
        return cls(blocks, tuple(d["coordinates"]))


def build_layout(scale_mode: int = 3, accessory: bool = False) -> FeatureLayout:
    scales = SCALES3 if scale_mode == 3 else SCALES7
    parts: list[tuple[str, list[str]]] = [
        ("ddistr", [f"ddistr[{c}]" for c in DURATION_CLASSES]),
        ("dtrans", [f"dtrans[{a}->{b}]" for a in DURATION_CLASSES for b in DURATION_CLASSES]),
        ("sdistr", [f"sdistr[{c}]" for c in scales]),
        ("strans", [f"strans[{a}->{b}]" for a in scales for b in scales]),
    ]
    if accessory:
        parts.extend((block, [name]) for block, name in zip(ACCESSORY_BLOCKS, ACCESSORY_NAMES))
    blocks, names, pos = [], [], 0
    for block, coords in parts:
        blocks.append((block, pos, pos + len(coords)))
        names.extend(coords)
        pos += len(coords)
    return FeatureLayout(tuple(blocks), tuple(names))


@dataclass(frozen=True)
class FeatureConfig:
    scale_mode: int = 3
    accessory: bool = False
    normalization: str = "row"
    frame_rate: float = 25.0
    mapping: Mapping[str, str] = field(default_factory=lambda: dict(DEFAULT_7TO3))

    def __post_init__(self):
        if self.scale_mode not in (3, 7):
            raise ValueError(f"scale_mode must be 3 or 7, got {self.scale_mode!r}")


@dataclass(frozen=True)
class FeatureVector:
    film_id: str
    values: np.ndarray
    layout: FeatureLayout

    def block(self, name: str) -> np.ndarray:
        return self.values[self.layout.slice(name)]

    @property
    def ddistr(self) -> np.ndarray:
        return self.block("ddistr")

    @property
    def dtrans(self) -> np.ndarray:
        return self.block("dtrans")

    @property
    def sdistr(self) -> np.ndarray:
        return self.block("sdistr")

    @property
    def strans(self) -> np.ndarray:
        return self.block("strans")


def scale_track_for_mode(track: ScaleTrack, config: FeatureConfig) -> ScaleTrack:
    if config.scale_mode == track.vocabulary:
        return track
    if config.scale_mode == 3:
        return reduce_scale_7to3(track, config.mapping)
    raise MissingAnnotation(f"{track.film_id}: 7-scale features need a 7-class scale track")


def assemble_feature_vector(film: FilmRecord, config: FeatureConfig | None = None) -> FeatureVector:
    config = config or FeatureConfig()
    if film.shot_list is None:
        raise MissingAnnotation(f"{film.film_id}: duration features need a shot list")
    if film.scale_track is None:
        raise MissingAnnotation(f"{film.film_id}: scale features need a scale track")
    track = scale_track_for_mode(film.scale_track, config)
    parts = [
        duration_distribution(film.shot_list),
        duration_transitions(film.shot_list, config.normalization).flat(),
        scale_distribution(track),
        scale_transitions(track, config.normalization).flat(),
    ]
    if config.accessory:
        parts.append(accessory_features(film, config.frame_rate).as_array())
    layout = build_layout(config.scale_mode, config.accessory)
    return FeatureVector(film.film_id, np.concatenate(parts), layout)


# ---------------------------------------------------------------------------
# log-normal duration model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LogNormalFit:
    mu: float
    sigma: float

    @property
    def mode(self) -> float:
        return math.exp(self.mu - self.sigma**2)

    @property
    def median(self) -> float:
        return math.exp(self.mu)

    @property
    def mean(self) -> float:
        return math.exp(self.mu + self.sigma**2 / 2)

    def pdf(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.exp(-((np.log(t) - self.mu) ** 2) / (2 * self.sigma**2)) / (
                t * self.sigma * math.sqrt(2 * math.pi)
            )
        return np.where(t > 0, out, 0.0)


def fit_lognormal(durations: Sequence[float]) -> LogNormalFit:
    """Maximum-likelihood log-normal fit (population std of the logs)."""
    d = np.asarray(durations, dtype=float)
    if d.size < 2:
        raise DegenerateSample("need at least two durations")
    if np.any(~(d > 0)):
        raise NonPositiveDuration("durations must be positive")
    logs = np.log(d)
    if np.ptp(logs) == 0.0:
        raise DegenerateSample("all durations are equal; sigma would be zero")
    return LogNormalFit(float(logs.mean()), float(logs.std()))
