"""Axis-aligned boxes and the two overlap measures, IoU and cover-area rate.

Coordinates are continuous reals. A box spans ``[x1, x2] x [y1, y2]`` and its
area is ``(x2 - x1) * (y2 - y1)``; there is no "+1 pixel" convention.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidBoxError

__all__ = [
    "Box",
    "box_area",
    "intersection_area",
    "iou",
    "car",
    "pairwise_iou",
    "pairwise_car",
]


@dataclass(frozen=True, slots=True)
class Box:
    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        for name in ("x1", "y1", "x2", "y2"):
            value = getattr(self, name)
            try:
                value = float(value)
            except (TypeError, ValueError):
                raise InvalidBoxError(f"box coordinate {name}={value!r} is not a number") from None
            if not math.isfinite(value):
                raise InvalidBoxError(f"box coordinate {name}={value!r} is not finite")
            object.__setattr__(self, name, value)
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise InvalidBoxError(
                f"degenerate box ({self.x1}, {self.y1}, {self.x2}, {self.y2}): "
                "need x1 < x2 and y1 < y2"
            )

    @classmethod
    def from_center(cls, cx: float, cy: float, width: float, height: float | None = None) -> Box:
        height = width if height is None else height
        return cls(cx - width / 2.0, cy - height / 2.0, cx + width / 2.0, cy + height / 2.0)

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def center(self) -> tuple[float, float]:
        return (self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0

    def contains(self, other: Box) -> bool:
        return (
            self.x1 <= other.x1 and self.y1 <= other.y1
            and other.x2 <= self.x2 and other.y2 <= self.y2
        )

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x1, self.y1, self.x2, self.y2)


def _check(b) -> Box:
    if not isinstance(b, Box):
        raise InvalidBoxError(f"expected a Box, got {type(b).__name__}")
    return b


def box_area(b: Box) -> float:
    b = _check(b)
    return (b.x2 - b.x1) * (b.y2 - b.y1)


def intersection_area(a: Box, b: Box) -> float:
    """Overlap area of two boxes, 0 when they are disjoint or only touch.

    Sorts the four x and the four y coordinates and multiplies the spans between
    the middle two of each, after an early exit for strictly separated boxes.
    """
    a, b = _check(a), _check(b)
    if a.x1 > b.x2 or a.y1 > b.y2 or b.x1 > a.x2 or b.y1 > a.y2:
        return 0.0
    xs = sorted((a.x1, a.x2, b.x1, b.x2))
    ys = sorted((a.y1, a.y2, b.y1, b.y2))
    return (xs[2] - xs[1]) * (ys[2] - ys[1])


def iou(g: Box, d: Box) -> float:
    inter = intersection_area(g, d)
    union = box_area(g) + box_area(d) - inter
    return inter / union


def car(g: Box, d: Box) -> float:
    """Cover-area rate: intersection over the area of the smaller box.

    Symmetric, in ``[0, 1]``, and equal to 1 whenever one box contains the
    other, whatever their size ratio.
    """
    inter = intersection_area(g, d)
    return inter / min(box_area(g), box_area(d))


def _as_array(boxes: Sequence[Box] | np.ndarray) -> np.ndarray:
    if isinstance(boxes, np.ndarray):
        arr = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    else:
        arr = np.array([_check(b).as_tuple() for b in boxes], dtype=np.float64).reshape(-1, 4)
    return arr


def _pairwise_terms(a, b):
    a, b = _as_array(a), _as_array(b)
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.maximum(iw, 0.0) * np.maximum(ih, 0.0)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    return inter, area_a[:, None], area_b[None, :]


def pairwise_iou(a, b) -> np.ndarray:
    """``len(a) x len(b)`` IoU table; agrees with :func:`iou` entry by entry."""
    inter, area_a, area_b = _pairwise_terms(a, b)
    return inter / (area_a + area_b - inter) if inter.size else inter


def pairwise_car(a, b) -> np.ndarray:
    """``len(a) x len(b)`` cover-area-rate table; agrees with :func:`car` entry by entry."""
    inter, area_a, area_b = _pairwise_terms(a, b)
    return inter / np.minimum(area_a, area_b) if inter.size else inter
