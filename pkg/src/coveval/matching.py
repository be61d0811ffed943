"""Box matching for one image and one class.

Two matchers live here. Multi-matching, used by CovEval, runs over the CAr matrix
without any one-to-one restriction. Greedy one-to-one matching, used by the mAP
pipeline, pairs confidence-ranked detections with ground truths by IoU.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, MixedGroupError
from .geometry import Box, iou, pairwise_car

__all__ = [
    "Detection",
    "GroundTruth",
    "CArMatrix",
    "MultiMatchResult",
    "MatchPair",
    "OneToOneMatch",
    "sort_detections",
    "build_car_matrix",
    "multi_match",
    "greedy_one_to_one_match",
    "image_precision_map",
]


@dataclass(frozen=True, slots=True)
class GroundTruth:
    image_id: str
    class_id: str
    box: Box

    def __post_init__(self):
        if not isinstance(self.box, Box):
            object.__setattr__(self, "box", Box(*self.box))


@dataclass(frozen=True, slots=True)
class Detection:
    image_id: str
    class_id: str
    box: Box
    confidence: float

    def __post_init__(self):
        if not isinstance(self.box, Box):
            object.__setattr__(self, "box", Box(*self.box))
        conf = float(self.confidence)
        if not (0.0 <= conf <= 1.0):
            raise ConfigError(f"confidence {self.confidence!r} outside [0, 1]")
        object.__setattr__(self, "confidence", conf)


def sort_detections(dets: Sequence[Detection]) -> list[Detection]:
    """Descending confidence; equal confidences keep their input order."""
    return sorted(dets, key=lambda d: -d.confidence)


def _check_threshold(value: float, name: str) -> float:
    value = float(value)
    if not (0.0 < value <= 1.0) or math.isnan(value):
        raise ConfigError(f"{name} must lie in (0, 1], got {value}")
    return value


def _single_group(dets, gts):
    keys = {(d.image_id, d.class_id) for d in dets} | {(g.image_id, g.class_id) for g in gts}
    if len(keys) > 1:
        raise MixedGroupError(f"expected one (image, class) group, got {sorted(keys)}")


@dataclass(frozen=True)
class CArMatrix:
    """``values[i, j]`` is the CAr of detection ``rows[i]`` and ground truth ``cols[j]``."""

    rows: tuple[Detection, ...]
    cols: tuple[GroundTruth, ...]
    values: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class MultiMatchResult:
    k_p: int
    k_r: int
    m: int
    n: int
    valid_rows: np.ndarray
    covered_cols: np.ndarray


class MatchPair(NamedTuple):
    rank: int  # 1-based position in the confidence-sorted detection list
    gt_index: int
    iou: float


@dataclass(frozen=True)
class OneToOneMatch:
    pairs: list[MatchPair]
    unmatched_detections: list[int] = field(default_factory=list)  # 1-based ranks
    unmatched_gts: list[int] = field(default_factory=list)


def build_car_matrix(dets: Sequence[Detection], gts: Sequence[GroundTruth]) -> CArMatrix:
    """Build the m x n cover-area-rate table for one image and one class.

    Rows follow descending detection confidence (stable for ties), columns
    follow the ground-truth input order.
    """
    _single_group(dets, gts)
    rows = tuple(sort_detections(dets))
    cols = tuple(gts)
    if rows and cols:
        values = pairwise_car([d.box for d in rows], [g.box for g in cols])
    else:
        values = np.zeros((len(rows), len(cols)), dtype=np.float64)
    return CArMatrix(rows=rows, cols=cols, values=values)


def multi_match(matrix: CArMatrix | np.ndarray, car_threshold: float) -> MultiMatchResult:
    """Count valid detections and covered ground truths without pairing restrictions.

    A detection row is valid when its largest CAr reaches ``car_threshold``; a
    ground-truth column is covered when its largest CAr does. One detection may
    cover many ground truths and one ground truth may be covered many times.
    """
    car_threshold = _check_threshold(car_threshold, "car_threshold")
    values = matrix.values if isinstance(matrix, CArMatrix) else np.asarray(matrix, dtype=np.float64)
    m, n = values.shape
    hits = values >= car_threshold
    valid_rows = hits.any(axis=1) if n else np.zeros(m, dtype=bool)
    covered_cols = hits.any(axis=0) if m else np.zeros(n, dtype=bool)
    return MultiMatchResult(
        k_p=int(valid_rows.sum()),
        k_r=int(covered_cols.sum()),
        m=m,
        n=n,
        valid_rows=valid_rows,
        covered_cols=covered_cols,
    )


def greedy_one_to_one_match(
    dets: Sequence[Detection],
    gts: Sequence[GroundTruth],
    iou_threshold: float = 0.55,
) -> OneToOneMatch:
    """Pair detections with ground truths one-to-one, highest confidence first.

    Each detection, in rank order, claims the still-free ground truth with the
    highest IoU at or above ``iou_threshold``; ties go to the lowest ground-truth
    index. Detections are sorted here, so callers may pass them in any order.
    """
    iou_threshold = _check_threshold(iou_threshold, "iou_threshold")
    ranked = sort_detections(dets)
    free = list(range(len(gts)))
    pairs: list[MatchPair] = []
    unmatched_dets: list[int] = []
    for rank, det in enumerate(ranked, start=1):
        best, best_iou = None, -1.0
        for j in free:
            value = iou(gts[j].box, det.box)
            if value >= iou_threshold and value > best_iou:
                best, best_iou = j, value
        if best is None:
            unmatched_dets.append(rank)
        else:
            free.remove(best)
            pairs.append(MatchPair(rank, best, best_iou))
    return OneToOneMatch(pairs=pairs, unmatched_detections=unmatched_dets, unmatched_gts=free)


def image_precision_map(match: OneToOneMatch, n_gts: int) -> float | None:
    """Per-image precision P of the mAP pipeline.

    The k-th detected ground truth (ordered by the rank of its matching
    detection) scores ``k / rank``; undetected ground truths score 0. P is the
    mean over all ``n_gts`` ground truths. Returns ``None`` when the image has
    no ground truth, since P is then undefined and the image is skipped.
    """
    if n_gts <= 0:
        return None
    ranks = sorted(p.rank for p in match.pairs)
    return math.fsum(k / rank for k, rank in enumerate(ranks, start=1)) / n_gts
