"""Chord diagrams of class distributions and transition probabilities.

The outer ring is split into one segment per class, sized by the class
distribution. Each segment is then divided among the chords leaving it, in
proportion to that row of the transition matrix, so a chord's width where
it leaves the ring is ``segment_size * P(target | source)``. Self-transitions
stay inside their own segment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ClassCountMismatch
from .shotfeat import TransitionMatrix

TWO_PI = 2.0 * math.pi

DURATION_COLORS = ("#d62728", "#98df8a", "#1f77b4", "#9edae5", "#ff7f0e", "#2ca02c", "#9467bd")
SCALE3_COLORS = ("#d62728", "#2ca02c", "#1f77b4")
SCALE7_COLORS = ("#d62728", "#ff7f0e", "#bcbd22", "#2ca02c", "#17becf", "#1f77b4", "#9467bd")


@dataclass(frozen=True)
class Segment:
    label: str
    color: str
    start: float
    end: float

    @property
    def size(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class Chord:
    source: int
    target: int
    width: float  # radians of the source segment
    start: float
    end: float

    @property
    def self_loop(self) -> bool:
        return self.source == self.target


@dataclass(frozen=True)
class ChordSpec:
    segments: tuple[Segment, ...]
    chords: tuple[Chord, ...]

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(s.label for s in self.segments)


def default_colors(n: int) -> tuple[str, ...]:
    if n == 7:
        return DURATION_COLORS
    if n == 3:
        return SCALE3_COLORS
    return tuple(f"hsl({int(360 * i / n)},60%,50%)" for i in range(n))


def chord_spec(
    distribution: Sequence[float],
    transitions: TransitionMatrix | np.ndarray,
    labels: Sequence[str] | None = None,
    colors: Sequence[str] | None = None,
) -> ChordSpec:
    dist = np.asarray(distribution, dtype=float)
    if isinstance(transitions, TransitionMatrix):
        labels = labels or transitions.classes
        probs = transitions.probs
    else:
        probs = np.asarray(transitions, dtype=float)
    k = dist.shape[0]
    if probs.shape != (k, k):
        raise ClassCountMismatch(f"distribution has {k} classes but transitions are {probs.shape}")
    if np.any(dist < 0) or dist.sum() <= 0:
        raise ValueError("distribution must be non-negative with positive mass")
    labels = tuple(labels) if labels is not None else tuple(str(i) for i in range(k))
    colors = tuple(colors) if colors is not None else default_colors(k)
    if len(labels) != k or len(colors) != k:
        raise ClassCountMismatch("labels/colors must match the class count")

    bounds = np.concatenate([[0.0], np.cumsum(dist / dist.sum()) * TWO_PI])
    bounds[-1] = TWO_PI
    segments = tuple(Segment(labels[i], colors[i], float(bounds[i]), float(bounds[i + 1])) for i in range(k))
    chords = []
    for i, seg in enumerate(segments):
        row = probs[i]
        total = row.sum()
        if total <= 0 or seg.size <= 0:
            continue
        a = seg.start
        for j in range(k):
            w = seg.size * row[j] / total
            if w <= 0:
                continue
            chords.append(Chord(i, j, float(w), float(a), float(a + w)))
            a += w
    return ChordSpec(segments, tuple(chords))


def _pt(angle: float, r: float, c: float) -> str:
    # angle 0 at 12 o'clock, increasing clockwise
    return f"{c + r * math.sin(angle):.4f},{c - r * math.cos(angle):.4f}"


def _arc_flag(span: float) -> int:
    return 1 if span > math.pi else 0


def render_svg(spec: ChordSpec, size: int = 400, title: str | None = None) -> str:
    """Deterministic SVG rendering of a chord spec."""
    c = size / 2.0
    r_out = size * 0.45
    r_in = size * 0.40
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">'
    ]
    if title:
        parts.append(f"<title>{_escape(title)}</title>")
    for seg in spec.segments:
        if seg.size <= 0:
            continue
        if seg.size >= TWO_PI - 1e-12:
            parts.append(
                f'<circle cx="{c:.4f}" cy="{c:.4f}" r="{(r_out + r_in) / 2:.4f}" fill="none" '
                f'stroke="{seg.color}" stroke-width="{r_out - r_in:.4f}"><title>{_escape(seg.label)}</title></circle>'
            )
            continue
        f = _arc_flag(seg.size)
        d = (
            f"M{_pt(seg.start, r_out, c)} A{r_out:.4f},{r_out:.4f} 0 {f} 1 {_pt(seg.end, r_out, c)} "
            f"L{_pt(seg.end, r_in, c)} A{r_in:.4f},{r_in:.4f} 0 {f} 0 {_pt(seg.start, r_in, c)} Z"
        )
        parts.append(f'<path d="{d}" fill="{seg.color}"><title>{_escape(seg.label)}</title></path>')
    for ch in spec.chords:
        src = spec.segments[ch.source]
        f = _arc_flag(ch.end - ch.start)
        head = f"M{_pt(ch.start, r_in, c)} A{r_in:.4f},{r_in:.4f} 0 {f} 1 {_pt(ch.end, r_in, c)} "
        if ch.self_loop:
            mid = (ch.start + ch.end) / 2.0
            d = head + f"Q{_pt(mid, r_in * 0.55, c)} {_pt(ch.start, r_in, c)} Z"
        else:
            tgt = spec.segments[ch.target]
            tip = _pt((tgt.start + tgt.end) / 2.0, r_in, c)
            d = head + f"Q{c:.4f},{c:.4f} {tip} Q{c:.4f},{c:.4f} {_pt(ch.start, r_in, c)} Z"
        label = f"{src.label}->{spec.segments[ch.target].label}"
        parts.append(
            f'<path d="{d}" fill="{src.color}" fill-opacity="0.6" stroke="none">'
            f"<title>{_escape(label)} {ch.width:.6f}</title></path>"
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def chord_export(
    distribution: Sequence[float],
    transitions: TransitionMatrix | np.ndarray,
    labels: Sequence[str] | None = None,
    colors: Sequence[str] | None = None,
    title: str | None = None,
) -> tuple[ChordSpec, str]:
    spec = chord_spec(distribution, transitions, labels, colors)
    return spec, render_svg(spec, title=title)
