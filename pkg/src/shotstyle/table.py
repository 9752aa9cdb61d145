"""Feature tables: ``film_id,director,year,f0..f{d-1}`` plus a JSON layout sidecar."""

from __future__ import annotations

import csv
import io
import json
import os
from pathlib import Path

import numpy as np

from .corpus import Corpus
from .errors import MalformedTable
from .learn import Dataset
from .shotfeat import FeatureConfig, FeatureLayout, assemble_feature_vector, build_layout

LAYOUT_SUFFIX = ".layout.json"


def corpus_dataset(corpus: Corpus, config: FeatureConfig | None = None) -> Dataset:
    config = config or FeatureConfig()
    vectors = [assemble_feature_vector(f, config) for f in corpus.films]
    return Dataset(
        x=np.vstack([v.values for v in vectors]),
        y=np.array([f.director for f in corpus.films]),
        class_set=corpus.directors,
        feature_layout=build_layout(config.scale_mode, config.accessory),
        ids=tuple(f.film_id for f in corpus.films),
        years=np.array([f.year for f in corpus.films]),
    )


def layout_path(table_path: str | os.PathLike) -> Path:
    p = Path(table_path)
    return p.with_name(p.name + LAYOUT_SUFFIX)


def feature_table_text(data: Dataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["film_id", "director", "year", *(f"f{i}" for i in range(data.d))])
    ids = data.ids or tuple(str(i) for i in range(data.n))
    years = data.years if data.years is not None else np.zeros(data.n, dtype=int)
    for fid, label, year, row in zip(ids, data.y, years, data.x):
        w.writerow([fid, label, int(year), *(repr(float(v)) for v in row)])
    return buf.getvalue()


def write_feature_table(path: str | os.PathLike, data: Dataset) -> tuple[Path, Path]:
    path = Path(path)
    path.write_text(feature_table_text(data), encoding="utf-8")
    side = layout_path(path)
    layout = data.feature_layout or FeatureLayout((("features", 0, data.d),), tuple(f"f{i}" for i in range(data.d)))
    doc = {"version": 1, "class_set": list(data.class_set), **layout.to_dict()}
    side.write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
    return path, side


def read_feature_table(path: str | os.PathLike) -> Dataset:
    path = Path(path)
    reader = csv.reader(io.StringIO(path.read_text(encoding="utf-8")))
    try:
        header = next(reader)
    except StopIteration:
        raise MalformedTable(f"{path}: empty feature table") from None
    if header[:3] != ["film_id", "director", "year"]:
        raise MalformedTable(f"{path}: header must start with film_id,director,year")
    d = len(header) - 3
    ids, labels, years, rows = [], [], [], []
    for lineno, row in enumerate(reader, start=2):
        if len(row) != d + 3:
            raise MalformedTable(f"{path}: line {lineno} has {len(row)} fields, expected {d + 3}")
        ids.append(row[0])
        labels.append(row[1])
        try:
            years.append(int(row[2]))
            rows.append([float(v) for v in row[3:]])
        except ValueError:
            raise MalformedTable(f"{path}: line {lineno} has a non-numeric value") from None
    if not rows:
        raise MalformedTable(f"{path}: no feature rows")
    layout, class_set = None, ()
    side = layout_path(path)
    if side.exists():
        doc = json.loads(side.read_text(encoding="utf-8"))
        layout = FeatureLayout.from_dict(doc)
        class_set = tuple(doc.get("class_set", ()))
        if layout.dim != d:
            raise MalformedTable(f"{side}: layout has {layout.dim} coordinates, table has {d}")
    return Dataset(np.array(rows), np.array(labels), class_set, layout, tuple(ids), np.array(years))
