"""Shot-based film style analysis: shot duration and shot scale statistics,
authorship and period classifiers, embeddings, trends and a synthetic corpus
generator."""

from __future__ import annotations

__version__ = "0.1.0"

from .corpus import Corpus, FilmRecord, ScaleTrack, ShotList, ShotRecord, load_corpus
from .errors import InputError, ShotStyleError
from .shotfeat import FeatureConfig, FeatureLayout, assemble_feature_vector, fit_lognormal
from .learn import Dataset, forest_fit, gnb_fit, knn_predict

__all__ = [
    "Corpus",
    "Dataset",
    "FeatureConfig",
    "FeatureLayout",
    "FilmRecord",
    "InputError",
    "ScaleTrack",
    "ShotList",
    "ShotRecord",
    "ShotStyleError",
    "assemble_feature_vector",
    "fit_lognormal",
    "forest_fit",
    "gnb_fit",
    "knn_predict",
    "load_corpus",
]
