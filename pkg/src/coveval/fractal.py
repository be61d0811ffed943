"""Fractal and random-fractal polylines, and synthetic crack scenes built on them.

A curve starts as one segment. Each iteration replaces every segment by
``G + 1`` segments, inserting ``G`` new nodes. The ``g``-th node (1-based) of a
segment from ``A`` to ``B`` sits at

    A + s * (B - A) + h * R(B - A),   s = (g - 1 + t) / G

where ``R`` rotates by +90 degrees (the left-hand normal). The regular
transform uses constant ``(t, h)``; the random one draws ``t ~ U(t_lo, t_hi)``
and ``h ~ U(h_lo, h_hi)`` independently for every inserted node.

Every point carries its insertion iteration ``n`` and its group order ``k``
within that iteration. Its topological order ``(k + (k-1)//G) / (G+1)**n``
places it on ``[0, 1]`` in traversal order; the endpoints sit at 0 and 1.

Randomness comes from ``numpy.random.Generator(PCG64(seed))``. Per iteration
all ``t`` draws for the iteration are taken first (segment-major, then node),
then all ``h`` draws, so a seed fixes the curve on every platform.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import (
    ConfigError,
    EmptySceneError,
    EstimationError,
    InvalidIndexError,
    ResourceLimitError,
    WindowTooSmallError,
)
from .geometry import Box
from .matching import Detection, GroundTruth

__all__ = [
    "TransformParams",
    "IndexedPoint",
    "PolyCurve",
    "NoiseModel",
    "SyntheticScene",
    "DEFAULT_MAX_POINTS",
    "make_rng",
    "base_curve",
    "apply_transform",
    "generate_curve",
    "topological_order",
    "topological_order_exact",
    "extract_subcurve",
    "box_counts",
    "estimate_fractal_dimension",
    "default_scales",
    "synthesize_annotations",
    "derive_seeds",
    "make_scene",
]

DEFAULT_MAX_POINTS = 1 << 22


@dataclass(frozen=True)
class TransformParams:
    kind: str = "random"
    G: int = 1
    t_lo: float = 0.35
    t_hi: float = 0.65
    h_lo: float = -0.3
    h_hi: float = 0.3

    def __post_init__(self):
        if self.kind not in ("deterministic", "random"):
            raise ConfigError(f"kind must be 'deterministic' or 'random', got {self.kind!r}")
        if not isinstance(self.G, (int, np.integer)) or self.G < 1:
            raise ConfigError(f"G must be an integer >= 1, got {self.G!r}")
        if not (0.0 < self.t_lo <= self.t_hi < 1.0):
            raise ConfigError(f"need 0 < t_lo <= t_hi < 1, got ({self.t_lo}, {self.t_hi})")
        if not (self.h_lo <= self.h_hi) or not all(map(math.isfinite, (self.h_lo, self.h_hi))):
            raise ConfigError(f"need finite h_lo <= h_hi, got ({self.h_lo}, {self.h_hi})")
        if self.kind == "deterministic" and (self.t_lo != self.t_hi or self.h_lo != self.h_hi):
            raise ConfigError("deterministic transform needs t_lo == t_hi and h_lo == h_hi")

    @classmethod
    def deterministic(cls, t: float = 0.5, h: float = 0.0, G: int = 1) -> TransformParams:
        return cls("deterministic", G, t, t, h, h)

    @classmethod
    def random(cls, t_range=(0.35, 0.65), h_range=(-0.3, 0.3), G: int = 1) -> TransformParams:
        return cls("random", G, t_range[0], t_range[1], h_range[0], h_range[1])

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "G": int(self.G),
            "t_lo": self.t_lo, "t_hi": self.t_hi, "h_lo": self.h_lo, "h_hi": self.h_hi,
        }


@dataclass(frozen=True)
class IndexedPoint:
    x: float
    y: float
    n: int
    k: int
    t_order: float


@dataclass(frozen=True, eq=False)
class PolyCurve:
    """A polyline whose points are stored column-wise and sorted by ``t_order``.

    ``window`` is ``(0, 1)`` for a full curve and the requested interval for a
    slice taken with :func:`extract_subcurve`.
    """

    xy: np.ndarray
    n: np.ndarray
    k: np.ndarray
    t_order: np.ndarray
    depth: int
    params: TransformParams
    seed: int | None = None
    window: tuple[float, float] = (0.0, 1.0)

    def __len__(self) -> int:
        return len(self.xy)

    @property
    def points(self) -> list[IndexedPoint]:
        return [
            IndexedPoint(float(x), float(y), int(n), int(k), float(t))
            for (x, y), n, k, t in zip(self.xy, self.n, self.k, self.t_order)
        ]

    @property
    def segment_lengths(self) -> np.ndarray:
        return np.hypot(*np.diff(self.xy, axis=0).T)

    @property
    def length(self) -> float:
        return float(self.segment_lengths.sum())

    def exact_orders(self) -> list[Fraction]:
        """Topological orders as exact fractions (endpoints 0 and 1)."""
        out = []
        for n, k in zip(self.n, self.k):
            out.append(Fraction(int(k)) if n == 0 else topological_order_exact(int(n), int(k), self.params.G))
        return out

    def same_as(self, other: PolyCurve) -> bool:
        """Bit-for-bit equality of geometry, indices and metadata."""
        return (
            self.depth == other.depth and self.params == other.params and self.seed == other.seed
            and tuple(self.window) == tuple(other.window)
            and np.array_equal(self.xy, other.xy) and np.array_equal(self.n, other.n)
            and np.array_equal(self.k, other.k) and np.array_equal(self.t_order, other.t_order)
        )


def make_rng(seed: int | np.random.Generator | None) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def topological_order_exact(n: int, k: int, G: int) -> Fraction:
    if G < 1:
        raise InvalidIndexError(f"G must be >= 1, got {G}")
    if n < 1 or not (1 <= k <= G * (G + 1) ** (n - 1)):
        raise InvalidIndexError(f"point index (n={n}, k={k}) out of range for G={G}")
    return Fraction(k + (k - 1) // G, (G + 1) ** n)


def topological_order(n: int, k: int, G: int) -> float:
    """Position in ``(0, 1)`` of the ``k``-th point inserted at iteration ``n``.

    >>> topological_order(2, 2, 1)
    0.75
    """
    return float(topological_order_exact(n, k, G))


def base_curve(
    start=(0.0, 0.0), end=(1.0, 0.0), params: TransformParams | None = None, seed: int | None = None
) -> PolyCurve:
    params = params or TransformParams()
    xy = np.array([start, end], dtype=np.float64)
    if np.array_equal(xy[0], xy[1]):
        raise ConfigError("base segment endpoints coincide")
    return PolyCurve(
        xy=xy,
        n=np.zeros(2, dtype=np.int64),
        k=np.array([0, 1], dtype=np.int64),
        t_order=np.array([0.0, 1.0]),
        depth=0,
        params=params,
        seed=seed,
    )


def apply_transform(curve: PolyCurve, params: TransformParams, rng=None) -> PolyCurve:
    """One iteration: insert ``G`` nodes into every segment of ``curve``.

    ``rng`` is a seed or a ``numpy.random.Generator``; it is only consumed by
    the random kind.
    """
    if tuple(curve.window) != (0.0, 1.0):
        raise ConfigError("cannot transform a sub-curve slice; transform the full curve")
    G = int(params.G)
    if curve.depth > 0 and curve.params.G != G:
        raise ConfigError(f"curve was built with G={curve.params.G}, params have G={G}")
    a, b = curve.xy[:-1], curve.xy[1:]
    S = len(a)
    if params.kind == "random":
        gen = make_rng(rng)
        t = gen.uniform(params.t_lo, params.t_hi, size=(S, G))
        h = gen.uniform(params.h_lo, params.h_hi, size=(S, G))
    else:
        t = np.full((S, G), params.t_lo)
        h = np.full((S, G), params.h_lo)
    frac = (np.arange(G)[None, :] + t) / G
    d = b - a
    normal = np.stack([-d[:, 1], d[:, 0]], axis=1)
    new = a[:, None, :] + frac[..., None] * d[:, None, :] + h[..., None] * normal[:, None, :]

    n_new = curve.depth + 1
    xy = np.empty((S * (G + 1) + 1, 2))
    xy[:: G + 1] = curve.xy
    n_arr = np.empty(len(xy), dtype=np.int64)
    k_arr = np.empty(len(xy), dtype=np.int64)
    n_arr[:: G + 1] = curve.n
    k_arr[:: G + 1] = curve.k
    mask = np.ones(len(xy), dtype=bool)
    mask[:: G + 1] = False
    xy[mask] = new.reshape(-1, 2)
    n_arr[mask] = n_new
    k_new = np.arange(1, S * G + 1, dtype=np.int64)
    k_arr[mask] = k_new
    t_arr = np.empty(len(xy))
    t_arr[:: G + 1] = curve.t_order
    t_arr[mask] = (k_new + (k_new - 1) // G) / float((G + 1) ** n_new)
    return PolyCurve(
        xy=xy, n=n_arr, k=k_arr, t_order=t_arr, depth=n_new, params=params, seed=curve.seed
    )


def generate_curve(
    params: TransformParams,
    depth: int,
    seed: int | None = 0,
    base=((0.0, 0.0), (1.0, 0.0)),
    max_points: int = DEFAULT_MAX_POINTS,
) -> PolyCurve:
    """Apply the transform ``depth`` times to a base segment.

    The result has ``(G + 1) ** depth + 1`` points.
    """
    if depth < 0:
        raise ConfigError(f"depth must be >= 0, got {depth}")
    count = (params.G + 1) ** depth + 1
    if count > max_points:
        raise ResourceLimitError(f"depth {depth} with G={params.G} needs {count} points (cap {max_points})")
    rng = make_rng(seed)
    curve = base_curve(base[0], base[1], params, seed)
    for _ in range(depth):
        curve = apply_transform(curve, params, rng)
    return curve


def extract_subcurve(curve: PolyCurve, t_a: float, t_b: float) -> PolyCurve:
    """Contiguous points with topological order in ``[t_a, t_b]``.

    Indices and orders are kept as in the parent curve.
    """
    if not (0.0 <= t_a < t_b <= 1.0):
        raise ConfigError(f"need 0 <= t_a < t_b <= 1, got ({t_a}, {t_b})")
    lo = int(np.searchsorted(curve.t_order, t_a, side="left"))
    hi = int(np.searchsorted(curve.t_order, t_b, side="right"))
    if hi - lo < 2:
        raise WindowTooSmallError(f"window [{t_a}, {t_b}] holds {hi - lo} point(s); need at least 2")
    return replace(
        curve,
        xy=curve.xy[lo:hi].copy(),
        n=curve.n[lo:hi].copy(),
        k=curve.k[lo:hi].copy(),
        t_order=curve.t_order[lo:hi].copy(),
        window=(float(t_a), float(t_b)),
    )


def _resample(xy: np.ndarray, spacing: float) -> np.ndarray:
    seg = np.diff(xy, axis=0)
    lengths = np.hypot(seg[:, 0], seg[:, 1])
    steps = np.maximum(np.ceil(lengths / spacing).astype(np.int64), 1)
    parts = [xy[i] + np.linspace(0.0, 1.0, s, endpoint=False)[:, None] * seg[i] for i, s in enumerate(steps)]
    parts.append(xy[-1:])
    return np.concatenate(parts)


def box_counts(curve: PolyCurve | np.ndarray, scales: Sequence[float]) -> np.ndarray:
    """Number of grid cells of each side length touched by the polyline.

    Segments are sampled at a quarter of the smallest scale, so a segment can
    only skip a cell corner it barely grazes.
    """
    xy = curve.xy if isinstance(curve, PolyCurve) else np.asarray(curve, dtype=np.float64)
    scales = np.asarray(scales, dtype=np.float64)
    pts = _resample(xy, scales.min() / 4.0)
    pts = pts - pts.min(axis=0)
    counts = []
    for s in scales:
        cells = np.floor(pts / s).astype(np.int64)
        counts.append(len(np.unique(cells, axis=0)))
    return np.array(counts)


def default_scales(curve: PolyCurve, count: int = 6, finest_segments: float = 2.0) -> np.ndarray:
    """Geometric scales from half the curve's extent down to a few segment lengths.

    The finest scale stays at ``finest_segments`` median segment lengths,
    because below that the polyline is straight and counts grow like a line.
    """
    extent = float(np.ptp(curve.xy, axis=0).max())
    finest = finest_segments * float(np.median(curve.segment_lengths))
    coarsest = extent / 2.0
    if coarsest <= finest:
        raise EstimationError("curve too coarse for a scale range; increase depth")
    return np.geomspace(coarsest, finest, count)


def estimate_fractal_dimension(curve: PolyCurve | np.ndarray, scales: Sequence[float] | None = None) -> float:
    """Box-counting dimension: least-squares slope of log count vs log(1/scale)."""
    if scales is None:
        if not isinstance(curve, PolyCurve):
            raise ConfigError("scales are required for a raw point array")
        scales = default_scales(curve)
    scales = np.asarray(scales, dtype=np.float64)
    if len(scales) < 3 or np.any(scales <= 0):
        raise ConfigError("need at least 3 positive grid scales")
    if scales.max() / scales.min() < 10.0 - 1e-9:
        raise ConfigError("grid scales must span at least one decade")
    counts = box_counts(curve, scales)
    if np.all(counts == counts[0]):
        raise EstimationError(f"box counts constant ({counts[0]}) across scales; cannot fit a slope")
    slope, _ = np.polyfit(np.log(1.0 / scales), np.log(counts), 1)
    return float(slope)


@dataclass(frozen=True)
class NoiseModel:
    """How simulated detections deviate from the ground-truth tiling.

    ``scale_jitter`` multiplies the detection side relative to the GT side.
    ``position_jitter`` shifts each detection by up to that fraction of its
    side in x and y. ``duplication`` boxes are emitted per kept GT, spread
    along the curve inside the GT's stride window. Each GT is missed with
    probability ``dropout``. ``false_alarms`` boxes are placed away from all GT
    boxes. Confidences are drawn from ``U(conf_lo, conf_hi)``.
    """

    scale_jitter: float = 1.0
    position_jitter: float = 0.0
    duplication: int = 1
    dropout: float = 0.0
    false_alarms: int = 0
    conf_lo: float = 0.6
    conf_hi: float = 1.0

    def __post_init__(self):
        if not self.scale_jitter > 0:
            raise ConfigError(f"scale_jitter must be > 0, got {self.scale_jitter}")
        if self.position_jitter < 0:
            raise ConfigError(f"position_jitter must be >= 0, got {self.position_jitter}")
        if not isinstance(self.duplication, (int, np.integer)) or self.duplication < 1:
            raise ConfigError(f"duplication must be an integer >= 1, got {self.duplication!r}")
        if not (0.0 <= self.dropout <= 1.0):
            raise ConfigError(f"dropout must lie in [0, 1], got {self.dropout}")
        if self.false_alarms < 0:
            raise ConfigError(f"false_alarms must be >= 0, got {self.false_alarms}")
        if not (0.0 <= self.conf_lo <= self.conf_hi <= 1.0):
            raise ConfigError(f"need 0 <= conf_lo <= conf_hi <= 1, got ({self.conf_lo}, {self.conf_hi})")

    def to_dict(self) -> dict:
        return {
            "scale_jitter": self.scale_jitter, "position_jitter": self.position_jitter,
            "duplication": int(self.duplication), "dropout": self.dropout,
            "false_alarms": int(self.false_alarms), "conf_lo": self.conf_lo, "conf_hi": self.conf_hi,
        }


@dataclass(frozen=True, eq=False)
class SyntheticScene:
    image_id: str
    class_id: str
    width: float
    height: float
    curve: PolyCurve
    gt_boxes: list[GroundTruth]
    det_boxes: list[Detection]
    noise: NoiseModel = field(default_factory=NoiseModel)
    box_size: float = 32.0
    stride: float = 32.0
    seed: int | None = None

    def same_as(self, other: SyntheticScene) -> bool:
        return (
            self.image_id == other.image_id and self.class_id == other.class_id
            and self.width == other.width and self.height == other.height
            and self.curve.same_as(other.curve)
            and self.gt_boxes == other.gt_boxes and self.det_boxes == other.det_boxes
            and self.noise == other.noise and self.box_size == other.box_size
            and self.stride == other.stride and self.seed == other.seed
        )


def _point_at(xy: np.ndarray, cum: np.ndarray, s: float) -> np.ndarray:
    s = min(max(s, 0.0), cum[-1])
    i = int(np.searchsorted(cum, s, side="right")) - 1
    i = min(max(i, 0), len(xy) - 2)
    seg_len = cum[i + 1] - cum[i]
    f = 0.0 if seg_len == 0 else (s - cum[i]) / seg_len
    return xy[i] + f * (xy[i + 1] - xy[i])


def synthesize_annotations(
    curve: PolyCurve,
    box_size: float,
    stride: float | None = None,
    noise: NoiseModel | None = None,
    seed: int | None = 0,
    *,
    image_id: str = "scene",
    class_id: str = "crack",
    width: float | None = None,
    height: float | None = None,
    max_false_alarm_tries: int = 1000,
) -> SyntheticScene:
    """Tile a curve with square GT boxes and simulate a detector's output on it.

    GT centres lie on the polyline at arc lengths ``stride * (i + 1/2)``.
    """
    stride = box_size if stride is None else stride
    noise = noise or NoiseModel()
    if not (box_size > 0 and stride > 0):
        raise ConfigError("box_size and stride must be > 0")
    xy = curve.xy
    cum = np.concatenate([[0.0], np.cumsum(curve.segment_lengths)])
    total = float(cum[-1])
    if stride > total:
        raise EmptySceneError(f"stride {stride} exceeds curve length {total:.6g}")
    n_boxes = int(total // stride)
    centers_s = stride * (np.arange(n_boxes) + 0.5)

    if width is None or height is None:
        hi = xy.max(axis=0) + box_size
        width = float(math.ceil(hi[0])) if width is None else width
        height = float(math.ceil(hi[1])) if height is None else height

    gts = [
        GroundTruth(image_id, class_id, Box.from_center(*_point_at(xy, cum, s), box_size))
        for s in centers_s
    ]

    rng = make_rng(seed)
    det_side = box_size * noise.scale_jitter
    d = int(noise.duplication)
    offsets = (np.arange(d) - (d - 1) / 2.0) * (stride / d)
    dets: list[Detection] = []
    for s in centers_s:
        drop = rng.random() < noise.dropout
        jitter = rng.uniform(-noise.position_jitter, noise.position_jitter, size=(d, 2)) * det_side
        conf = rng.uniform(noise.conf_lo, noise.conf_hi, size=d)
        if drop:
            continue
        for j in range(d):
            cx, cy = _point_at(xy, cum, s + offsets[j]) + jitter[j]
            dets.append(Detection(image_id, class_id, Box.from_center(cx, cy, det_side), float(conf[j])))

    gt_arr = np.array([g.box.as_tuple() for g in gts])
    placed = 0
    tries = 0
    while placed < noise.false_alarms and tries < max_false_alarm_tries:
        tries += 1
        cx = rng.uniform(det_side / 2.0, max(width - det_side / 2.0, det_side / 2.0))
        cy = rng.uniform(det_side / 2.0, max(height - det_side / 2.0, det_side / 2.0))
        conf = rng.uniform(noise.conf_lo, noise.conf_hi)
        box = Box.from_center(cx, cy, det_side)
        clear = (
            (box.x2 <= gt_arr[:, 0]) | (box.x1 >= gt_arr[:, 2])
            | (box.y2 <= gt_arr[:, 1]) | (box.y1 >= gt_arr[:, 3])
        )
        if clear.all():
            dets.append(Detection(image_id, class_id, box, float(conf)))
            placed += 1
    if placed < noise.false_alarms:
        raise EmptySceneError(
            f"placed only {placed} of {noise.false_alarms} false alarms clear of the GT boxes"
        )

    return SyntheticScene(
        image_id=image_id,
        class_id=class_id,
        width=float(width),
        height=float(height),
        curve=curve,
        gt_boxes=gts,
        det_boxes=dets,
        noise=noise,
        box_size=float(box_size),
        stride=float(stride),
        seed=seed,
    )


def derive_seeds(seed: int, count: int) -> list[int]:
    """``count`` independent 64-bit seeds spawned from ``seed``, stable across platforms."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in children]


def make_scene(
    seed: int,
    params: TransformParams | None = None,
    depth: int = 6,
    noise: NoiseModel | None = None,
    box_size: float = 32.0,
    stride: float | None = None,
    width: float = 512.0,
    height: float = 512.0,
    image_id: str = "scene",
    class_id: str = "crack",
    max_points: int = DEFAULT_MAX_POINTS,
) -> SyntheticScene:
    """One synthetic crack: a fractal curve across the image plus its annotations.

    The base segment runs horizontally through the image centre, ``box_size``
    in from each side. Curve and annotation randomness use separate seeds
    derived from ``seed``.
    """
    params = params or TransformParams()
    curve_seed, ann_seed = derive_seeds(seed, 2)
    base = ((box_size, height / 2.0), (width - box_size, height / 2.0))
    curve = generate_curve(params, depth, curve_seed, base=base, max_points=max_points)
    return synthesize_annotations(
        curve, box_size, stride, noise, ann_seed,
        image_id=image_id, class_id=class_id, width=width, height=height,
    )
