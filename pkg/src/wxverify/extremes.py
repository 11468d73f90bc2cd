"""Heatwave / cold-surge event labeling, temporal-IoU matching, and
categorical scores (POD / FAR / CSI).

An event is a maximal run of at least three consecutive exceedance days
at one location: daily max strictly above tau_heat for heatwaves, daily
min strictly below tau_cold for cold surges. Predicted and observed
events match one-to-one when their day-count IoU reaches gamma
(default 0.5); matching maximizes the number of matched pairs, with
higher-IoU pairs preferred among maximum matchings. Unmatched
predictions are false positives, unmatched truths false negatives.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import UndefinedScore

#: Minimum run length, in days, for an exceedance run to count as an event.
MIN_EVENT_DAYS = 3


class EventKind(Enum):
    HEATWAVE = "heatwave"
    COLDSURGE = "coldsurge"


@dataclass(frozen=True)
class EventSegment:
    """One contiguous extreme-temperature run at one location.

    ``start_day`` and ``end_day`` are inclusive calendar indices.
    """

    location: str
    kind: EventKind
    start_day: int
    end_day: int

    def __post_init__(self):
        if self.end_day - self.start_day + 1 < MIN_EVENT_DAYS:
            raise ValueError(
                f"segment [{self.start_day}, {self.end_day}] shorter than "
                f"{MIN_EVENT_DAYS} days")

    @property
    def n_days(self) -> int:
        return self.end_day - self.start_day + 1


def label_events(values: np.ndarray, thresholds: np.ndarray, kind: EventKind,
                 location: str = "", first_day: int = 1) -> list[EventSegment]:
    """Maximal exceedance runs of length >= 3 in a daily series.

    ``values`` and ``thresholds`` are aligned per-day arrays; entry k
    describes calendar day ``first_day + k``. Comparisons are strict
    (> for heat, < for cold); NaN days never exceed and therefore break
    runs. Runs touching either series boundary count on their observed
    length.
    """
    v = np.asarray(values, dtype=np.float64)
    t = np.asarray(thresholds, dtype=np.float64)
    if v.shape != t.shape or v.ndim != 1:
        raise ValueError("values and thresholds must be aligned 1-D arrays")
    with np.errstate(invalid="ignore"):
        if kind is EventKind.HEATWAVE:
            mask = v > t
        else:
            mask = v < t
    segments = []
    idx = np.nonzero(mask)[0]
    if idx.size == 0:
        return segments
    breaks = np.nonzero(np.diff(idx) > 1)[0]
    for run in np.split(idx, breaks + 1):
        if run.size >= MIN_EVENT_DAYS:
            segments.append(EventSegment(location, kind,
                                         first_day + int(run[0]),
                                         first_day + int(run[-1])))
    return segments


def temporal_iou(a: EventSegment, b: EventSegment) -> float:
    """Day-count intersection over union of two segments; 0 when disjoint."""
    if a.location != b.location:
        raise ValueError("IoU requires segments at the same location")
    if a.kind is not b.kind:
        raise ValueError("IoU requires segments of the same kind")
    inter = min(a.end_day, b.end_day) - max(a.start_day, b.start_day) + 1
    if inter <= 0:
        return 0.0
    union = a.n_days + b.n_days - inter
    return inter / union


@dataclass(frozen=True)
class MatchResult:
    """Outcome of matching predicted against observed segments."""

    tp: int
    fp: int
    fn: int
    pairs: tuple[tuple[EventSegment, EventSegment, float], ...]
    gamma: float

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn) < 0:
            raise ValueError("counts must be non-negative")
        if len(self.pairs) != self.tp:
            raise ValueError("pair list length must equal tp")
        preds = [id(p) for p, _, _ in self.pairs]
        truths = [id(t) for _, t, _ in self.pairs]
        if len(set(preds)) != len(preds) or len(set(truths)) != len(truths):
            raise ValueError("each segment may appear in at most one pair")
        if any(iou < self.gamma for _, _, iou in self.pairs):
            raise ValueError("every pair must satisfy IoU >= gamma")


def _validate_side(segments: Sequence[EventSegment], side: str):
    for prev, cur in zip(segments, segments[1:]):
        if cur.start_day <= prev.end_day:
            raise ValueError(f"{side} segments must be sorted and disjoint")
        if cur.location != prev.location or cur.kind is not prev.kind:
            raise ValueError(f"{side} segments must share location and kind")


def match_events(pred: Sequence[EventSegment], truth: Sequence[EventSegment],
                 gamma: float = 0.5) -> MatchResult:
    """One-to-one matching of predicted to observed segments.

    Admissible pairs have IoU >= gamma. The matching has maximum
    cardinality (so true-positive counts agree with an exhaustive
    search); candidate pairs are considered in descending IoU order with
    ties broken by earlier truth start, then earlier prediction start,
    which makes the result deterministic. tp + fn = len(truth) and
    tp + fp = len(pred).
    """
    if not 0.0 < gamma <= 1.0:
        raise ValueError("gamma must lie in (0, 1]")
    _validate_side(pred, "predicted")
    _validate_side(truth, "truth")

    candidates = []  # (iou, pred index, truth index)
    for pi, p in enumerate(pred):
        for ti, t in enumerate(truth):
            iou = temporal_iou(p, t)
            if iou >= gamma:
                candidates.append((iou, pi, ti))
    candidates.sort(key=lambda c: (-c[0], truth[c[2]].start_day,
                                   pred[c[1]].start_day))

    adjacency: dict[int, list[int]] = {}
    for iou, pi, ti in candidates:
        adjacency.setdefault(pi, []).append(ti)

    match_of_pred: dict[int, int] = {}
    match_of_truth: dict[int, int] = {}
    for iou, pi, ti in candidates:
        if pi not in match_of_pred and ti not in match_of_truth:
            match_of_pred[pi] = ti
            match_of_truth[ti] = pi

    def augment(pi: int, visited: set[int]) -> bool:
        for ti in adjacency.get(pi, ()):
            if ti in visited:
                continue
            visited.add(ti)
            if ti not in match_of_truth or augment(match_of_truth[ti], visited):
                match_of_pred[pi] = ti
                match_of_truth[ti] = pi
                return True
        return False

    for pi in range(len(pred)):
        if pi not in match_of_pred:
            augment(pi, set())

    iou_of = {(pi, ti): iou for iou, pi, ti in candidates}
    pairs = tuple(sorted(
        ((pred[pi], truth[ti], iou_of[(pi, ti)])
         for pi, ti in match_of_pred.items()),
        key=lambda pair: pair[1].start_day))
    tp = len(pairs)
    return MatchResult(tp, len(pred) - tp, len(truth) - tp, pairs, gamma)


def pod(m: MatchResult) -> float:
    """Probability of detection, TP / (TP + FN)."""
    if m.tp + m.fn == 0:
        raise UndefinedScore("POD")
    return m.tp / (m.tp + m.fn)


def far(m: MatchResult) -> float:
    """False alarm ratio, FP / (TP + FP)."""
    if m.tp + m.fp == 0:
        raise UndefinedScore("FAR")
    return m.fp / (m.tp + m.fp)


def csi(m: MatchResult) -> float:
    """Critical success index, TP / (TP + FP + FN)."""
    if m.tp + m.fp + m.fn == 0:
        raise UndefinedScore("CSI")
    return m.tp / (m.tp + m.fp + m.fn)


@dataclass(frozen=True)
class CategoricalScores:
    """POD / FAR / CSI with None marking an undefined (0/0) score.

    Callers must surface undefined scores as "n/a", never as 0.
    """

    pod: float | None
    far: float | None
    csi: float | None


def scores_from_counts(tp: int, fp: int, fn: int) -> CategoricalScores:
    """POD / FAR / CSI from raw counts (e.g. aggregated over locations)."""
    if min(tp, fp, fn) < 0:
        raise ValueError("counts must be non-negative")
    return CategoricalScores(
        pod=tp / (tp + fn) if tp + fn else None,
        far=fp / (tp + fp) if tp + fp else None,
        csi=tp / (tp + fp + fn) if tp + fp + fn else None,
    )


def categorical_scores(m: MatchResult) -> CategoricalScores:
    """All three categorical scores, with zero-denominator cases as None."""
    return scores_from_counts(m.tp, m.fp, m.fn)
