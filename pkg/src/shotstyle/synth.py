"""Synthetic corpora with known generating parameters.

Each director is a pair of Markov chains: one over the seven duration
classes (shot to shot) and one over scale classes (second to second).
Durations are drawn from a per-class log-normal restricted to the class bin
by rejection, so classifying a sampled duration always recovers the state
that produced it.
"""

from __future__ import annotations

import json
import math
import os
from bisect import bisect_right
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import SCALES3, SCALES7, Corpus, FilmRecord, ScaleTrack, ShotList, save_corpus
from .errors import InfeasibleProfile
from .shotfeat import DURATION_CLASSES, duration_bounds

STOCHASTIC_TOL = 1e-9
MAX_REJECTIONS = 10_000


def _row_stochastic(m: np.ndarray, what: str) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InfeasibleProfile(f"{what} must be square")
    if np.any(m < 0) or np.any(np.abs(m.sum(axis=1) - 1.0) > STOCHASTIC_TOL):
        raise InfeasibleProfile(f"{what} rows must be non-negative and sum to 1")
    return m


def _distribution(v, k: int, what: str) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (k,) or np.any(v < 0):
        raise InfeasibleProfile(f"{what} must be {k} non-negative weights")
    if abs(v.sum() - 1.0) > STOCHASTIC_TOL:
        raise InfeasibleProfile(f"{what} must sum to 1 (got {v.sum()!r})")
    return v


@dataclass(frozen=True)
class DirectorProfile:
    name: str
    duration_chain: np.ndarray
    duration_initial: np.ndarray
    duration_sampler: tuple[tuple[float, float], ...]  # (mu, sigma) of ln t per class
    scale_chain: np.ndarray
    scale_initial: np.ndarray
    film_length_s: tuple[float, float] = (3600.0, 6000.0)
    drift_per_year: float = 0.0
    reference_year: int = 1980
    jitter: float | None = None
    career: tuple[int, int] = (1950, 2013)

    def __post_init__(self):
        object.__setattr__(self, "duration_chain", _row_stochastic(self.duration_chain, "duration_chain"))
        if self.duration_chain.shape != (7, 7):
            raise InfeasibleProfile("duration_chain must be 7x7")
        object.__setattr__(self, "duration_initial", _distribution(self.duration_initial, 7, "duration_initial"))
        object.__setattr__(self, "scale_chain", _row_stochastic(self.scale_chain, "scale_chain"))
        k = self.scale_chain.shape[0]
        if k not in (3, 7):
            raise InfeasibleProfile("scale_chain must be 3x3 or 7x7")
        object.__setattr__(self, "scale_initial", _distribution(self.scale_initial, k, "scale_initial"))
        sampler = tuple((float(m), float(s)) for m, s in self.duration_sampler)
        if len(sampler) != 7 or any(s < 0 for _, s in sampler):
            raise InfeasibleProfile("duration_sampler needs seven (mu, sigma >= 0) pairs")
        for c, (mu, sigma) in enumerate(sampler):
            lo, hi = duration_bounds(c)
            if sigma == 0 and not lo <= math.exp(mu) < hi:
                raise InfeasibleProfile(f"class {DURATION_CLASSES[c]}: fixed duration {math.exp(mu)} outside its bin")
        object.__setattr__(self, "duration_sampler", sampler)
        lo, hi = self.film_length_s
        if not 0 < lo <= hi:
            raise InfeasibleProfile("film_length_s must satisfy 0 < min <= max")
        if self.jitter is not None and self.jitter <= 0:
            raise InfeasibleProfile("jitter concentration must be positive")

    @property
    def scale_vocabulary(self) -> int:
        return self.scale_chain.shape[0]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "duration_chain": self.duration_chain.tolist(),
            "duration_initial": self.duration_initial.tolist(),
            "duration_sampler": [list(p) for p in self.duration_sampler],
            "scale_chain": self.scale_chain.tolist(),
            "scale_initial": self.scale_initial.tolist(),
            "film_length_s": list(self.film_length_s),
            "drift_per_year": self.drift_per_year,
            "reference_year": self.reference_year,
            "jitter": self.jitter,
            "career": list(self.career),
        }

    @classmethod
    def from_dict(cls, d: dict) -> DirectorProfile:
        d = dict(d)
        d["duration_sampler"] = tuple(tuple(p) for p in d["duration_sampler"])
        d["film_length_s"] = tuple(d["film_length_s"])
        d["career"] = tuple(d["career"])
        return cls(**d)


def stationary_distribution(chain: np.ndarray, tol: float = 1e-13, max_iter: int = 100_000) -> np.ndarray:
    """Power iteration for the left fixed point of a row-stochastic matrix."""
    chain = np.asarray(chain, dtype=float)
    pi = np.full(chain.shape[0], 1.0 / chain.shape[0])
    for _ in range(max_iter):
        nxt = pi @ chain
        if np.abs(nxt - pi).max() < tol:
            return nxt
        pi = nxt
    return pi


def _jitter_chain(chain: np.ndarray, concentration: float, rng) -> np.ndarray:
    out = chain.copy()
    for i, row in enumerate(chain):
        support = row > 0
        if support.sum() > 1:
            out[i, support] = rng.dirichlet(concentration * row[support])
    return out


class _ChainWalker:
    """Draws successive states of a Markov chain from uniform variates."""

    def __init__(self, chain: np.ndarray):
        self.cum = np.cumsum(chain, axis=1).tolist()
        self.last = [int(np.flatnonzero(row > 0)[-1]) if row.any() else len(row) - 1 for row in chain]

    def step(self, state: int, u: float) -> int:
        j = bisect_right(self.cum[state], u)
        return self.last[state] if j >= len(self.cum[state]) else j


def _draw_initial(initial: np.ndarray, u: float) -> int:
    cum = np.cumsum(initial).tolist()
    j = bisect_right(cum, u)
    if j >= len(cum):
        j = int(np.flatnonzero(initial > 0)[-1])
    return j


def _sample_duration(cls: int, mu: float, sigma: float, shift: float, rng) -> float:
    lo, hi = duration_bounds(cls)
    for _ in range(MAX_REJECTIONS):
        t = round(float(rng.lognormal(mu, sigma)) + shift, 1)
        if lo <= t < hi and t > 0:
            return t
    raise InfeasibleProfile(
        f"class {DURATION_CLASSES[cls]}: log-normal({mu:.3g}, {sigma:.3g}) shifted by {shift:.3g} "
        f"almost never lands in [{lo}, {hi})"
    )


def sample_durations(
    profile: DirectorProfile,
    rng: np.random.Generator,
    n_shots: int | None = None,
    total_s: float | None = None,
    chain: np.ndarray | None = None,
    year: int | None = None,
) -> list[float]:
    """Shot durations (0.1 s resolution) from the duration chain.

    Stops after ``n_shots`` shots or once the running total reaches ``total_s``.
    """
    if (n_shots is None) == (total_s is None):
        raise ValueError("give exactly one of n_shots or total_s")
    if profile.duration_initial.sum() <= 0:
        raise InfeasibleProfile("initial duration distribution has no mass")
    walker = _ChainWalker(profile.duration_chain if chain is None else chain)
    shift = profile.drift_per_year * ((year if year is not None else profile.reference_year) - profile.reference_year)
    state = _draw_initial(profile.duration_initial, float(rng.random()))
    out: list[float] = []
    total = 0.0
    while True:
        mu, sigma = profile.duration_sampler[state]
        d = _sample_duration(state, mu, sigma, shift, rng)
        out.append(d)
        total += d
        if (n_shots is not None and len(out) >= n_shots) or (total_s is not None and total >= total_s):
            return out
        state = walker.step(state, float(rng.random()))


def sample_scale_labels(profile: DirectorProfile, rng, seconds: int, chain: np.ndarray | None = None) -> list[str]:
    labels = SCALES3 if profile.scale_vocabulary == 3 else SCALES7
    walker = _ChainWalker(profile.scale_chain if chain is None else chain)
    u = rng.random(seconds).tolist()
    state = _draw_initial(profile.scale_initial, u[0])
    out = [labels[state]]
    for v in u[1:]:
        state = walker.step(state, v)
        out.append(labels[state])
    return out


def sample_film(
    profile: DirectorProfile,
    year: int,
    seed: int,
    film_id: str | None = None,
    title: str | None = None,
) -> FilmRecord:
    rng = np.random.default_rng(seed)
    dchain, schain = profile.duration_chain, profile.scale_chain
    if profile.jitter is not None:
        dchain = _jitter_chain(dchain, profile.jitter, rng)
        schain = _jitter_chain(schain, profile.jitter, rng)
    lo, hi = profile.film_length_s
    length = lo if lo == hi else float(rng.uniform(lo, hi))
    durations = sample_durations(profile, rng, total_s=length, chain=dchain, year=year)
    film_id = film_id or f"{profile.name}_{year}_{seed}"
    shots = ShotList.from_durations(film_id, durations)
    seconds = max(1, int(math.floor(shots.total_duration + 1e-9)))
    track = ScaleTrack(film_id, tuple(sample_scale_labels(profile, rng, seconds, schain)), profile.scale_vocabulary)
    return FilmRecord(
        film_id=film_id,
        title=title or film_id,
        director=profile.name,
        year=int(year),
        is_color=bool(rng.random() < 0.5),
        shot_list=shots,
        scale_track=track,
    )


def career_years(profile: DirectorProfile, n: int) -> list[int]:
    a, b = profile.career
    if n == 1:
        return [a]
    return [int(round(v)) for v in np.linspace(a, b, n)]


@dataclass(frozen=True)
class Benchmark:
    corpus: Corpus
    profiles: tuple[DirectorProfile, ...]
    film_seeds: dict[str, int] = field(default_factory=dict)

    def truth(self) -> dict:
        return {
            "profiles": [p.to_dict() for p in self.profiles],
            "films": [
                {"film_id": f.film_id, "director": f.director, "year": f.year, "seed": self.film_seeds[f.film_id]}
                for f in self.corpus.films
            ],
        }


def build_benchmark(profiles: Sequence[DirectorProfile], films_per_director: int, seed: int = 0) -> Benchmark:
    if len(profiles) < 2:
        raise InfeasibleProfile("a benchmark needs at least two director profiles")
    if films_per_director < 1:
        raise InfeasibleProfile("films_per_director must be >= 1")
    names = [p.name for p in profiles]
    if len(set(names)) != len(names):
        raise InfeasibleProfile("director profile names must be unique")
    children = np.random.SeedSequence(seed).spawn(len(profiles) * films_per_director)
    films, seeds = [], {}
    for p_idx, profile in enumerate(profiles):
        for j, year in enumerate(career_years(profile, films_per_director)):
            film_seed = int(children[p_idx * films_per_director + j].generate_state(1)[0])
            film_id = f"{profile.name}_{j:03d}"
            films.append(sample_film(profile, year, film_seed, film_id, f"{profile.name} film {j + 1}"))
            seeds[film_id] = film_seed
    return Benchmark(Corpus(tuple(films)), tuple(profiles), seeds)


def write_benchmark(bench: Benchmark, out_dir: str | os.PathLike) -> Path:
    """Write manifest, annotation files and ``truth.json``; returns the manifest path."""
    manifest = save_corpus(bench.corpus, out_dir)
    (Path(out_dir) / "truth.json").write_text(json.dumps(bench.truth(), indent=1, sort_keys=True) + "\n")
    return manifest


# ---------------------------------------------------------------------------
# profile construction
# ---------------------------------------------------------------------------

# (mu, sigma) of ln t_d per duration class, centred inside each bin.
DEFAULT_SAMPLER = (
    (math.log(1.2), 0.35),
    (math.log(3.1), 0.2),
    (math.log(5.7), 0.12),
    (math.log(8.4), 0.1),
    (math.log(15.0), 0.25),
    (math.log(30.0), 0.15),
    (math.log(60.0), 0.35),
)


def lognormal_class_mass(mu: float, sigma: float) -> np.ndarray:
    """Probability a log-normal(mu, sigma) duration falls in each class bin."""

    def cdf(t: float) -> float:
        if t <= 0:
            return 0.0
        if math.isinf(t):
            return 1.0
        return 0.5 * (1.0 + math.erf((math.log(t) - mu) / (sigma * math.sqrt(2.0))))

    return np.array([cdf(duration_bounds(c)[1]) - cdf(duration_bounds(c)[0]) for c in range(7)])


# Typical art-film pacing: median shot around 5 s.
BASE_DURATION_PREFERENCE = lognormal_class_mass(math.log(5.0), 0.9)


def duration_chain_from_preferences(preference: np.ndarray, locality: float) -> np.ndarray:
    """Rows proportional to ``preference[j] * exp(-|i - j| / locality)``.

    Small ``locality`` keeps cuts between neighbouring duration classes.
    """
    k = len(preference)
    idx = np.arange(k)
    kernel = np.exp(-np.abs(idx[:, None] - idx[None, :]) / locality)
    rows = kernel * np.asarray(preference)[None, :]
    return rows / rows.sum(axis=1, keepdims=True)


def scale_chain_from_preferences(preference: np.ndarray, stay: float) -> np.ndarray:
    """Second-to-second chain: remain with probability ``stay``, else jump by preference."""
    k = len(preference)
    chain = np.zeros((k, k))
    for i in range(k):
        off = np.array(preference, dtype=float)
        off[i] = 0.0
        chain[i] = (1.0 - stay) * off / off.sum()
        chain[i, i] = stay
    return chain


def random_profile(
    name: str,
    rng: np.random.Generator,
    scale_vocabulary: int = 3,
    jitter: float | None = 100.0,
    film_length_s: tuple[float, float] = (3600.0, 6000.0),
    scale_chain: np.ndarray | None = None,
    career: tuple[int, int] = (1950, 2013),
) -> DirectorProfile:
    """A director with random duration and scale habits.

    Passing ``scale_chain`` shares that chain (and a uniform initial
    distribution) so that only duration features carry director signal.
    """
    pref = 0.5 * BASE_DURATION_PREFERENCE + 0.5 * rng.dirichlet(np.full(7, 1.5))
    pref = 0.9 * pref + 0.1 / 7
    dchain = duration_chain_from_preferences(pref, float(rng.uniform(0.7, 3.0)))
    if scale_chain is None:
        spref = rng.dirichlet(np.full(scale_vocabulary, 2.0)) * 0.8 + 0.2 / scale_vocabulary
        scale_chain = scale_chain_from_preferences(spref, float(rng.uniform(0.85, 0.97)))
    k = scale_chain.shape[0]
    return DirectorProfile(
        name=name,
        duration_chain=dchain,
        duration_initial=stationary_distribution(dchain),
        duration_sampler=DEFAULT_SAMPLER,
        scale_chain=scale_chain,
        scale_initial=np.full(k, 1.0 / k),
        film_length_s=film_length_s,
        jitter=jitter,
        career=career,
    )


def default_profiles(
    n: int,
    seed: int = 0,
    scale_vocabulary: int = 3,
    jitter: float | None = 100.0,
    shared_scale: bool = False,
    film_length_s: tuple[float, float] = (3600.0, 6000.0),
) -> list[DirectorProfile]:
    rng = np.random.default_rng(seed)
    shared = None
    if shared_scale:
        shared = scale_chain_from_preferences(np.full(scale_vocabulary, 1.0 / scale_vocabulary), 0.9)
    profiles = []
    for i in range(n):
        start = int(rng.integers(1950, 1985))
        profiles.append(
            random_profile(
                f"D{i + 1}",
                rng,
                scale_vocabulary,
                jitter,
                film_length_s,
                scale_chain=shared,
                career=(start, start + int(rng.integers(15, 30))),
            )
        )
    return profiles
