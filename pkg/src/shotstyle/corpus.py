"""Film manifests, shot lists and per-second shot-scale tracks.

File formats (UTF-8, comma separated, ``.`` decimal separator):

* shot list:    ``film_id,shot_index,start_s,duration_s``
* scale track:  ``film_id,second,label``
* manifest:     ``film_id,title,director,year,is_color,shotlist_file,scaletrack_file``

Manifest file paths are relative to the data directory; either annotation
file may be left empty, but not both.
"""

from __future__ import annotations

import csv
import io
import os
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import (
    DuplicateIndex,
    DuplicateSecond,
    EmptyCorpus,
    IncompleteMapping,
    MalformedTable,
    MissingAnnotation,
    MissingSecond,
    NonContiguous,
    NonPositiveDuration,
    UnknownLabel,
)

SCALES7 = ("ECU", "CU", "MCU", "MS", "MLS", "LS", "ELS")
SCALES3 = ("CS", "MS", "LS")

# MLS frames actors knee-up, so it is grouped with the medium family.
DEFAULT_7TO3 = {
    "ECU": "CS",
    "CU": "CS",
    "MCU": "CS",
    "MS": "MS",
    "MLS": "MS",
    "LS": "LS",
    "ELS": "LS",
}

CONTIGUITY_TOL = 1e-6

SHOT_HEADER = ("film_id", "shot_index", "start_s", "duration_s")
SCALE_HEADER = ("film_id", "second", "label")
MANIFEST_HEADER = (
    "film_id",
    "title",
    "director",
    "year",
    "is_color",
    "shotlist_file",
    "scaletrack_file",
)


def vocabulary_labels(vocabulary: int) -> tuple[str, ...]:
    if vocabulary == 7:
        return SCALES7
    if vocabulary == 3:
        return SCALES3
    raise ValueError(f"vocabulary must be 3 or 7, got {vocabulary!r}")


@dataclass(frozen=True)
class ShotRecord:
    index: int
    start_s: float
    duration_s: float

    def __post_init__(self):
        if not self.duration_s > 0:
            raise NonPositiveDuration(
                f"shot {self.index}: duration {self.duration_s!r} is not positive"
            )
        if self.start_s < 0:
            raise MalformedTable(f"shot {self.index}: negative start {self.start_s!r}")

    @property
    def end_s(self) -> float:
        return self.start_s + self.duration_s


@dataclass(frozen=True)
class ShotList:
    film_id: str
    shots: tuple[ShotRecord, ...]

    def __post_init__(self):
        if not self.shots:
            raise MalformedTable(f"{self.film_id}: shot list is empty")
        for i, shot in enumerate(self.shots):
            if shot.index != i:
                raise MalformedTable(
                    f"{self.film_id}: shot indices must be 0..n-1, found {shot.index} at position {i}"
                )
        for prev, cur in zip(self.shots, self.shots[1:]):
            if abs(cur.start_s - prev.end_s) > CONTIGUITY_TOL:
                raise NonContiguous(
                    f"{self.film_id}: shot {cur.index} starts at {cur.start_s} "
                    f"but shot {prev.index} ends at {prev.end_s}"
                )

    @classmethod
    def from_durations(cls, film_id: str, durations: Iterable[float], start_s: float = 0.0) -> ShotList:
        shots = []
        t = start_s
        for i, d in enumerate(durations):
            shots.append(ShotRecord(i, t, float(d)))
            t += float(d)
        return cls(film_id, tuple(shots))

    def __len__(self) -> int:
        return len(self.shots)

    @property
    def durations(self) -> np.ndarray:
        return np.array([s.duration_s for s in self.shots], dtype=float)

    @property
    def total_duration(self) -> float:
        return float(sum(s.duration_s for s in self.shots))


@dataclass(frozen=True)
class ScaleTrack:
    film_id: str
    labels: tuple[str, ...]
    vocabulary: int = 3

    def __post_init__(self):
        allowed = vocabulary_labels(self.vocabulary)
        if not self.labels:
            raise MalformedTable(f"{self.film_id}: scale track is empty")
        for second, label in enumerate(self.labels):
            if label not in allowed:
                raise UnknownLabel(
                    f"{self.film_id}: label {label!r} at second {second} is not in "
                    f"the {self.vocabulary}-class vocabulary"
                )

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def classes(self) -> tuple[str, ...]:
        return vocabulary_labels(self.vocabulary)

    def codes(self) -> np.ndarray:
        """Labels as integer class indices in vocabulary order."""
        lookup = {label: i for i, label in enumerate(self.classes)}
        return np.fromiter((lookup[l] for l in self.labels), dtype=np.intp, count=len(self.labels))


@dataclass(frozen=True)
class FilmRecord:
    film_id: str
    title: str
    director: str
    year: int
    is_color: bool
    shot_list: ShotList | None = None
    scale_track: ScaleTrack | None = None

    def __post_init__(self):
        if not 1900 <= self.year <= 2100:
            raise MalformedTable(f"{self.film_id}: year {self.year} outside [1900, 2100]")
        if self.shot_list is None and self.scale_track is None:
            raise MissingAnnotation(f"{self.film_id}: neither shot list nor scale track given")


@dataclass(frozen=True)
class Corpus:
    films: tuple[FilmRecord, ...]
    directors: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if not self.films:
            raise EmptyCorpus("corpus contains no films")
        ids = Counter(f.film_id for f in self.films)
        dupes = sorted(i for i, c in ids.items() if c > 1)
        if dupes:
            raise MalformedTable(f"duplicate film_id(s): {', '.join(dupes)}")
        used = sorted({f.director for f in self.films})
        if not self.directors:
            object.__setattr__(self, "directors", tuple(used))
        elif sorted(set(self.directors)) != used or len(set(self.directors)) != len(self.directors):
            raise MalformedTable("director label set must match the directors referenced by films")

    def __len__(self) -> int:
        return len(self.films)

    def __iter__(self):
        return iter(self.films)

    def by_director(self) -> dict[str, list[FilmRecord]]:
        out: dict[str, list[FilmRecord]] = {d: [] for d in self.directors}
        for film in self.films:
            out[film.director].append(film)
        return out


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------


def _rows(text: str, header: tuple[str, ...], what: str) -> list[dict[str, str]]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        raise MalformedTable(f"{what}: empty table")
    got = tuple(h.strip() for h in reader.fieldnames)
    if got != header:
        raise MalformedTable(f"{what}: expected header {','.join(header)}, got {','.join(got)}")
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if None in row or any(v is None for v in row.values()):
            raise MalformedTable(f"{what}: line {lineno} has the wrong number of fields")
        rows.append({k.strip(): v.strip() for k, v in row.items()})
    return rows


def _single_film_id(rows: list[dict[str, str]], what: str) -> str:
    ids = {r["film_id"] for r in rows}
    if len(ids) != 1:
        raise MalformedTable(f"{what}: expected exactly one film_id, found {sorted(ids)}")
    return ids.pop()


def _number(value: str, kind, what: str):
    try:
        return kind(value)
    except ValueError:
        raise MalformedTable(f"{what}: cannot parse {value!r} as {kind.__name__}") from None


def parse_shot_list(text: str) -> ShotList:
    rows = _rows(text, SHOT_HEADER, "shot list")
    if not rows:
        raise MalformedTable("shot list: no shots")
    film_id = _single_film_id(rows, "shot list")
    seen: set[int] = set()
    shots = []
    for row in rows:
        idx = _number(row["shot_index"], int, "shot list")
        if idx in seen:
            raise DuplicateIndex(f"{film_id}: shot index {idx} appears twice")
        seen.add(idx)
        start = _number(row["start_s"], float, "shot list")
        duration = _number(row["duration_s"], float, "shot list")
        shots.append(ShotRecord(idx, start, duration))
    return ShotList(film_id, tuple(shots))


def parse_scale_track(text: str, vocabulary: int | str = 3, fill: str = "strict") -> ScaleTrack:
    """Parse a second-by-second scale annotation.

    ``vocabulary`` is 3, 7 or ``"auto"`` (3 when every label belongs to the
    3-class set, else 7). With ``fill="forward"`` missing seconds repeat the
    previous label; the default strict mode rejects gaps.
    """
    if fill not in ("strict", "forward"):
        raise ValueError(f"fill must be 'strict' or 'forward', got {fill!r}")
    rows = _rows(text, SCALE_HEADER, "scale track")
    if not rows:
        raise MalformedTable("scale track: no rows")
    film_id = _single_film_id(rows, "scale track")
    by_second: dict[int, str] = {}
    for row in rows:
        sec = _number(row["second"], int, "scale track")
        if sec < 0:
            raise MalformedTable(f"{film_id}: negative second {sec}")
        if sec in by_second:
            raise DuplicateSecond(f"{film_id}: second {sec} annotated twice")
        by_second[sec] = row["label"]

    if vocabulary == "auto":
        vocabulary = 3 if set(by_second.values()) <= set(SCALES3) else 7
    allowed = vocabulary_labels(int(vocabulary))
    for sec, label in sorted(by_second.items()):
        if label not in allowed:
            raise UnknownLabel(
                f"{film_id}: label {label!r} at second {sec} is not in the {vocabulary}-class vocabulary"
            )

    length = max(by_second) + 1
    labels = []
    for sec in range(length):
        if sec in by_second:
            labels.append(by_second[sec])
        elif fill == "forward" and labels:
            labels.append(labels[-1])
        else:
            raise MissingSecond(f"{film_id}: second {sec} has no label")
    return ScaleTrack(film_id, tuple(labels), int(vocabulary))


def reduce_scale_7to3(track: ScaleTrack, mapping: Mapping[str, str] = DEFAULT_7TO3) -> ScaleTrack:
    if track.vocabulary != 7:
        raise ValueError("reduce_scale_7to3 expects a 7-class track")
    missing = [l for l in SCALES7 if l not in mapping]
    if missing:
        raise IncompleteMapping(f"mapping has no target for {', '.join(missing)}")
    bad = sorted({v for k, v in mapping.items() if k in SCALES7 and v not in SCALES3})
    if bad:
        raise IncompleteMapping(f"mapping targets outside CS/MS/LS: {', '.join(bad)}")
    return ScaleTrack(track.film_id, tuple(mapping[l] for l in track.labels), 3)


def _parse_bool(value: str, film_id: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "y", "color", "colour"):
        return True
    if v in ("0", "false", "no", "n", "bw", "b&w", ""):
        return False
    raise MalformedTable(f"{film_id}: cannot interpret is_color={value!r}")


def parse_manifest(text: str) -> list[dict[str, str]]:
    rows = _rows(text, MANIFEST_HEADER, "manifest")
    if not rows:
        raise EmptyCorpus("manifest lists no films")
    return rows


def load_corpus(
    manifest: str | os.PathLike,
    data_dir: str | os.PathLike | None = None,
    vocabulary: int | str = "auto",
    fill: str = "strict",
) -> Corpus:
    """Load every film listed in ``manifest``.

    ``data_dir`` defaults to the manifest's directory.
    """
    manifest = Path(manifest)
    base = Path(data_dir) if data_dir is not None else manifest.parent
    rows = parse_manifest(manifest.read_text(encoding="utf-8"))
    films = []
    for row in rows:
        fid = row["film_id"]
        shot_list = scale_track = None
        if not row["shotlist_file"] and not row["scaletrack_file"]:
            raise MissingAnnotation(f"{fid}: manifest gives neither shotlist_file nor scaletrack_file")
        if row["shotlist_file"]:
            shot_list = parse_shot_list((base / row["shotlist_file"]).read_text(encoding="utf-8"))
            if shot_list.film_id != fid:
                raise MalformedTable(f"{fid}: shot list belongs to film {shot_list.film_id!r}")
        if row["scaletrack_file"]:
            scale_track = parse_scale_track(
                (base / row["scaletrack_file"]).read_text(encoding="utf-8"), vocabulary, fill
            )
            if scale_track.film_id != fid:
                raise MalformedTable(f"{fid}: scale track belongs to film {scale_track.film_id!r}")
        films.append(
            FilmRecord(
                film_id=fid,
                title=row["title"],
                director=row["director"],
                year=_number(row["year"], int, f"manifest row {fid}"),
                is_color=_parse_bool(row["is_color"], fid),
                shot_list=shot_list,
                scale_track=scale_track,
            )
        )
    return Corpus(tuple(films))


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _write_table(header: Iterable[str], rows: Iterable[Iterable]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def shot_list_to_text(shot_list: ShotList) -> str:
    return _write_table(
        SHOT_HEADER,
        ((shot_list.film_id, s.index, repr(s.start_s), repr(s.duration_s)) for s in shot_list.shots),
    )


def scale_track_to_text(track: ScaleTrack) -> str:
    return _write_table(SCALE_HEADER, ((track.film_id, i, l) for i, l in enumerate(track.labels)))


def save_corpus(corpus: Corpus, out_dir: str | os.PathLike, manifest_name: str = "manifest.csv") -> Path:
    """Write ``corpus`` as a manifest plus per-film annotation files.

    Returns the manifest path. Annotation files go to ``shots/`` and
    ``scales/`` below ``out_dir``.
    """
    out = Path(out_dir)
    (out / "shots").mkdir(parents=True, exist_ok=True)
    (out / "scales").mkdir(parents=True, exist_ok=True)
    rows = []
    for film in corpus.films:
        shot_rel = scale_rel = ""
        if film.shot_list is not None:
            shot_rel = f"shots/{film.film_id}.csv"
            (out / shot_rel).write_text(shot_list_to_text(film.shot_list), encoding="utf-8")
        if film.scale_track is not None:
            scale_rel = f"scales/{film.film_id}.csv"
            (out / scale_rel).write_text(scale_track_to_text(film.scale_track), encoding="utf-8")
        rows.append(
            (film.film_id, film.title, film.director, film.year, int(film.is_color), shot_rel, scale_rel)
        )
    path = out / manifest_name
    path.write_text(_write_table(MANIFEST_HEADER, rows), encoding="utf-8")
    return path
