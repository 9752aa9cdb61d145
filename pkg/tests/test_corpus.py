from __future__ import annotations

from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shotstyle.corpus import (
    DEFAULT_7TO3,
    SCALES3,
    SCALES7,
    Corpus,
    ScaleTrack,
    load_corpus,
    parse_manifest,
    parse_scale_track,
    parse_shot_list,
    reduce_scale_7to3,
    save_corpus,
    scale_track_to_text,
    shot_list_to_text,
)
from shotstyle.errors import (
    DuplicateIndex,
    DuplicateSecond,
    EmptyCorpus,
    IncompleteMapping,
    InputError,
    MissingAnnotation,
    MissingSecond,
    NonContiguous,
    NonPositiveDuration,
    UnknownLabel,
)
from shotstyle.shotfeat import scale_distribution

from conftest import make_film

SHOT_HEAD = "film_id,shot_index,start_s,duration_s\n"
SCALE_HEAD = "film_id,second,label\n"


def test_two_contiguous_shots():
    sl = parse_shot_list(SHOT_HEAD + "f,0,0.0,2.0\nf,1,2.0,3.0\n")
    assert len(sl) == 2
    assert sl.total_duration == 5.0
    assert sl.film_id == "f"


def test_gap_is_non_contiguous():
    with pytest.raises(NonContiguous):
        parse_shot_list(SHOT_HEAD + "f,0,0.0,2.0\nf,1,2.5,3.0\n")


def test_overlap_is_non_contiguous():
    with pytest.raises(NonContiguous):
        parse_shot_list(SHOT_HEAD + "f,0,0.0,2.0\nf,1,1.9,3.0\n")


def test_tiny_rounding_gap_is_tolerated():
    sl = parse_shot_list(SHOT_HEAD + "f,0,0.0,0.1\nf,1,0.1000000001,0.2\n")
    assert len(sl) == 2


def test_single_shot():
    sl = parse_shot_list(SHOT_HEAD + "f,0,0.0,40.0\n")
    assert len(sl) == 1 and sl.total_duration == 40.0


@pytest.mark.parametrize("dur", ["0", "-1.5"])
def test_non_positive_duration(dur):
    with pytest.raises(NonPositiveDuration):
        parse_shot_list(SHOT_HEAD + f"f,0,0.0,{dur}\n")


def test_duplicate_index():
    with pytest.raises(DuplicateIndex):
        parse_shot_list(SHOT_HEAD + "f,0,0.0,2.0\nf,0,2.0,3.0\n")


def test_input_errors_are_value_errors():
    with pytest.raises(ValueError):
        parse_shot_list(SHOT_HEAD + "f,0,0.0,-1\n")
    assert issubclass(NonContiguous, InputError)


def test_scale_track_basic():
    tr = parse_scale_track(SCALE_HEAD + "f,0,CS\nf,1,CS\nf,2,MS\n", 3)
    assert len(tr) == 3
    assert tr.labels == ("CS", "CS", "MS")


def test_excluded_labels_are_unknown():
    with pytest.raises(UnknownLabel):
        parse_scale_track(SCALE_HEAD + "f,0,FS\n", 3)
    with pytest.raises(UnknownLabel):
        parse_scale_track(SCALE_HEAD + "f,0,OS\n", 7)


def test_missing_second_strict():
    with pytest.raises(MissingSecond):
        parse_scale_track(SCALE_HEAD + "f,0,CS\nf,2,MS\n", 3)


def test_missing_second_forward_fill():
    tr = parse_scale_track(SCALE_HEAD + "f,0,CS\nf,2,MS\n", 3, fill="forward")
    assert tr.labels == ("CS", "CS", "MS")


def test_duplicate_second():
    with pytest.raises(DuplicateSecond):
        parse_scale_track(SCALE_HEAD + "f,0,CS\nf,0,MS\n", 3)


def test_auto_vocabulary():
    assert parse_scale_track(SCALE_HEAD + "f,0,CS\nf,1,LS\n", "auto").vocabulary == 3
    assert parse_scale_track(SCALE_HEAD + "f,0,MS\nf,1,ECU\n", "auto").vocabulary == 7


def test_reduce_close_family():
    tr = ScaleTrack("f", ("ECU", "CU", "MCU"), 7)
    assert reduce_scale_7to3(tr).labels == ("CS", "CS", "CS")


def test_reduce_long_family():
    assert reduce_scale_7to3(ScaleTrack("f", ("LS", "ELS"), 7)).labels == ("LS", "LS")


def test_reduce_medium_family_matches_hand_labelled_track():
    seven = ScaleTrack("f", ("MS", "MLS", "CU", "ELS", "MLS"), 7)
    reduced = reduce_scale_7to3(seven)
    assert reduced.labels == ("MS", "MS", "CS", "LS", "MS")
    hand = ScaleTrack("f", ("MS", "MS", "CS", "LS", "MS"), 3)
    assert list(scale_distribution(reduced)) == list(scale_distribution(hand))


def test_reduce_incomplete_mapping():
    mapping = {k: v for k, v in DEFAULT_7TO3.items() if k != "MLS"}
    with pytest.raises(IncompleteMapping):
        reduce_scale_7to3(ScaleTrack("f", ("MS",), 7), mapping)


def test_reduce_alternative_mapping():
    mapping = dict(DEFAULT_7TO3, MLS="LS")
    assert reduce_scale_7to3(ScaleTrack("f", ("MLS",), 7), mapping).labels == ("LS",)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.sampled_from(SCALES7), min_size=1, max_size=200))
def test_reduction_is_pure_relabelling(labels):
    reduced = reduce_scale_7to3(ScaleTrack("f", tuple(labels), 7))
    assert len(reduced) == len(labels)
    src = Counter(labels)
    want = Counter()
    for lab, n in src.items():
        want[DEFAULT_7TO3[lab]] += n
    assert Counter(reduced.labels) == want


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(1, 600), min_size=1, max_size=60))
def test_shot_list_round_trip(tenths):
    from shotstyle.corpus import ShotList

    sl = ShotList.from_durations("f", [t / 10 for t in tenths])
    again = parse_shot_list(shot_list_to_text(sl))
    assert again == sl


@settings(max_examples=60, deadline=None)
@given(st.lists(st.sampled_from(SCALES3), min_size=1, max_size=100))
def test_scale_track_round_trip(labels):
    tr = ScaleTrack("f", tuple(labels), 3)
    assert parse_scale_track(scale_track_to_text(tr), 3) == tr


MANIFEST_HEAD = "film_id,title,director,year,is_color,shotlist_file,scaletrack_file\n"


def _write_two_films(tmp_path):
    (tmp_path / "a.csv").write_text(SHOT_HEAD + "a,0,0.0,2.0\na,1,2.0,3.0\n")
    (tmp_path / "b.csv").write_text(SCALE_HEAD + "b,0,CS\nb,1,MS\n")
    m = tmp_path / "m.csv"
    m.write_text(MANIFEST_HEAD + "a,Film A,X,1960,0,a.csv,\nb,Film B,X,1970,1,,b.csv\n")
    return m


def test_load_corpus_one_director(tmp_path):
    corpus = load_corpus(_write_two_films(tmp_path))
    assert len(corpus) == 2
    assert corpus.directors == ("X",)
    assert corpus.films[0].shot_list is not None and corpus.films[0].scale_track is None
    assert corpus.films[1].is_color is True


def test_load_corpus_data_dir(tmp_path):
    m = _write_two_films(tmp_path)
    sub = tmp_path / "sub"
    sub.mkdir()
    (sub / "m2.csv").write_text(m.read_text())
    corpus = load_corpus(sub / "m2.csv", data_dir=tmp_path)
    assert len(corpus) == 2


def test_film_without_annotations(tmp_path):
    m = tmp_path / "m.csv"
    m.write_text(MANIFEST_HEAD + "a,Film A,X,1960,0,,\n")
    with pytest.raises(MissingAnnotation):
        load_corpus(m)


def test_empty_manifest(tmp_path):
    m = tmp_path / "m.csv"
    m.write_text(MANIFEST_HEAD)
    with pytest.raises(EmptyCorpus):
        load_corpus(m)


def test_manifest_header_checked():
    with pytest.raises(InputError):
        parse_manifest("film_id,title\nx,y\n")


def test_seventy_seven_film_manifest(tmp_path):
    rows = []
    for i in range(77):
        (tmp_path / f"s{i}.csv").write_text(SHOT_HEAD + f"m{i},0,0.0,{1 + i % 9}.5\n")
        rows.append(f"m{i},T{i},D{i % 6},{1950 + i % 60},{i % 2},s{i}.csv,\n")
    m = tmp_path / "m.csv"
    m.write_text(MANIFEST_HEAD + "".join(rows))
    corpus = load_corpus(m)
    assert len(corpus) == 77
    assert len(corpus.directors) == 6


def test_corpus_invariants():
    f = make_film("a")
    with pytest.raises(InputError):
        Corpus((f, f))
    with pytest.raises(InputError):
        Corpus((f,), directors=("A", "B"))


def test_year_range():
    with pytest.raises(InputError):
        make_film(year=1850)


def test_save_and_reload(tmp_path):
    films = (make_film("a", director="X"), make_film("b", (2.5, 40.0), ("LS", "LS"), "Y", 1999))
    corpus = Corpus(films)
    manifest = save_corpus(corpus, tmp_path / "out")
    again = load_corpus(manifest)
    assert again == corpus
