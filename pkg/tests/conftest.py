from __future__ import annotations

import numpy as np
import pytest

from shotstyle.corpus import FilmRecord, ScaleTrack, ShotList


def make_film(film_id="f", durations=(1.0, 3.0, 5.0), labels=("CS", "CS", "MS"), director="A", year=1970, vocabulary=3):
    shots = ShotList.from_durations(film_id, durations) if durations is not None else None
    track = ScaleTrack(film_id, tuple(labels), vocabulary) if labels is not None else None
    return FilmRecord(film_id, film_id, director, year, False, shots, track)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# criterion number -> (passed, detail), filled in by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
