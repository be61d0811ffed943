from fractions import Fraction

import numpy as np
import pytest
from scipy.optimize import brentq

from coveval.errors import (
    ConfigError,
    EmptySceneError,
    EstimationError,
    InvalidIndexError,
    ResourceLimitError,
    WindowTooSmallError,
)
from coveval.evaluate import evaluate
from coveval.fractal import (
    NoiseModel,
    TransformParams,
    apply_transform,
    base_curve,
    box_counts,
    derive_seeds,
    estimate_fractal_dimension,
    extract_subcurve,
    generate_curve,
    make_scene,
    synthesize_annotations,
    topological_order,
    topological_order_exact,
)
from coveval.geometry import car, iou
from coveval.matching import build_car_matrix, greedy_one_to_one_match, multi_match


def recursive_oracle(a, b, t, h, G, depth):
    """Depth-first subdivision, written independently of the vectorized transform."""
    if depth == 0:
        return [a]
    ax, ay = a
    dx, dy = b[0] - ax, b[1] - ay
    nodes = [a]
    for g in range(G):
        s = (g + t) / G
        nodes.append((ax + s * dx - h * dy, ay + s * dy + h * dx))
    nodes.append(b)
    out = []
    for p, q in zip(nodes[:-1], nodes[1:]):
        out.extend(recursive_oracle(p, q, t, h, G, depth - 1))
    return out


def test_params_validation():
    with pytest.raises(ConfigError):
        TransformParams("deterministic", 1, 0.3, 0.5, 0.0, 0.0)
    with pytest.raises(ConfigError):
        TransformParams("random", 0)
    with pytest.raises(ConfigError):
        TransformParams("random", 1, 0.0, 0.5)
    with pytest.raises(ConfigError):
        TransformParams("fuzzy")


def test_zero_offset_inserts_midpoint():
    c = apply_transform(base_curve(), TransformParams.deterministic(0.5, 0.0))
    assert c.xy.tolist() == [[0.0, 0.0], [0.5, 0.0], [1.0, 0.0]]
    assert c.depth == 1
    assert (c.n.tolist(), c.k.tolist()) == ([0, 1, 0], [0, 1, 1])


def test_offset_uses_left_normal():
    c = apply_transform(base_curve(), TransformParams.deterministic(0.5, 0.5))
    assert c.xy[1].tolist() == [0.5, 0.5]


def test_random_transform_reproducible():
    p = TransformParams.random()
    c0 = generate_curve(p, 3, seed=11)
    a = apply_transform(c0, p, np.random.default_rng(5))
    b = apply_transform(c0, p, np.random.default_rng(5))
    assert a.same_as(b)
    assert not np.array_equal(a.xy, apply_transform(c0, p, np.random.default_rng(6)).xy)


def test_random_draws_within_ranges():
    p = TransformParams.random(t_range=(0.4, 0.6), h_range=(0.1, 0.2))
    c = apply_transform(base_curve(params=p), p, 3)
    x, y = c.xy[1]
    assert 0.4 <= x <= 0.6 and 0.1 <= y <= 0.2


def test_generate_counts_and_determinism():
    p = TransformParams.random()
    assert len(generate_curve(p, 0)) == 2
    assert len(generate_curve(TransformParams.deterministic(0.5, 0.2), 3)) == 9
    a, b = generate_curve(p, 7, seed=3), generate_curve(p, 7, seed=3)
    assert a.same_as(b) and a.xy.tobytes() == b.xy.tobytes()


def test_resource_cap():
    with pytest.raises(ResourceLimitError):
        generate_curve(TransformParams(G=3), 12, max_points=10_000)
    with pytest.raises(ConfigError):
        generate_curve(TransformParams(), -1)


@pytest.mark.parametrize("n, k, G, expected", [(1, 1, 1, 0.5), (2, 2, 1, 0.75), (1, 2, 2, 2 / 3)])
def test_topological_order_examples(n, k, G, expected):
    assert topological_order(n, k, G) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("n, k, G", [(0, 1, 1), (1, 0, 1), (1, 2, 1), (2, 7, 2), (1, 1, 0)])
def test_topological_order_range(n, k, G):
    with pytest.raises(InvalidIndexError):
        topological_order(n, k, G)


@pytest.mark.parametrize("G", [1, 2, 3])
@pytest.mark.parametrize("depth", [1, 3, 5])
def test_order_matches_recursive_traversal(G, depth):
    t, h = 0.45, 0.2
    c = generate_curve(TransformParams.deterministic(t, h, G), depth)
    oracle = np.array(recursive_oracle((0.0, 0.0), (1.0, 0.0), t, h, G, depth) + [(1.0, 0.0)])
    order = np.argsort(c.t_order, kind="stable")
    assert np.allclose(c.xy[order], oracle, atol=1e-12)
    exact = c.exact_orders()
    assert exact == [Fraction(j, (G + 1) ** depth) for j in range((G + 1) ** depth + 1)]
    assert set(np.diff(np.array(exact, dtype=object))) == {Fraction(1, (G + 1) ** depth)}
    assert np.all(c.k[c.n >= 1] <= G * (G + 1) ** (c.n[c.n >= 1] - 1))


def test_zero_offset_keeps_segment_image():
    for G in (1, 2, 3):
        c = generate_curve(TransformParams.deterministic(0.3, 0.0, G), 4)
        assert np.all(c.xy[:, 1] == 0.0)
        assert np.all(np.diff(c.xy[:, 0]) > 0)


def test_extract_subcurve():
    c = generate_curve(TransformParams.deterministic(0.5, 0.25), 2)
    full = extract_subcurve(c, 0.0, 1.0)
    assert np.array_equal(full.xy, c.xy)
    half = extract_subcurve(c, 0.0, 0.5)
    assert half.t_order.tolist() == [0.0, 0.25, 0.5]
    assert half.n.tolist() == [0, 2, 1]
    with pytest.raises(WindowTooSmallError):
        extract_subcurve(generate_curve(TransformParams(), 3), 0.3, 0.30001)
    with pytest.raises(ConfigError):
        extract_subcurve(c, 0.6, 0.5)


def test_line_dimension_is_one():
    c = base_curve()
    d = estimate_fractal_dimension(c, np.geomspace(0.5, 0.005, 6))
    assert d == pytest.approx(1.0, abs=0.1)


def similarity_dimension(t, h):
    r1, r2 = np.hypot(t, h), np.hypot(1 - t, h)
    return brentq(lambda d: r1**d + r2**d - 1.0, 0.5, 3.0)


def test_regular_curve_dimension_golden():
    c = generate_curve(TransformParams.deterministic(0.5, 0.3), 12)
    d = estimate_fractal_dimension(c)
    assert 1.0 < d < 2.0
    assert d == pytest.approx(similarity_dimension(0.5, 0.3), abs=0.1)
    assert d == pytest.approx(1.235412753784101, abs=1e-9)


def test_half_windows_agree():
    c = generate_curve(TransformParams.deterministic(0.5, 0.3), 12)
    a = estimate_fractal_dimension(extract_subcurve(c, 0.0, 0.5))
    b = estimate_fractal_dimension(extract_subcurve(c, 0.5, 1.0))
    assert a == pytest.approx(b, abs=0.05)


def test_dimension_errors():
    c = generate_curve(TransformParams(), 6)
    with pytest.raises(ConfigError):
        estimate_fractal_dimension(c, [0.1, 0.05])
    with pytest.raises(ConfigError):
        estimate_fractal_dimension(c, [0.1, 0.05, 0.02])
    with pytest.raises(EstimationError):
        estimate_fractal_dimension(base_curve(), [100.0, 50.0, 10.0, 5.0])


def test_box_counts_square_path():
    square = np.array([[0, 0], [1, 0], [1, 1], [0, 1], [0, 0]], dtype=float) * 0.999
    counts = box_counts(square, [0.5, 0.25])
    assert counts.tolist() == [4, 12]


def test_faithful_scene_scores_perfect():
    s = make_scene(1)
    assert [d.box for d in s.det_boxes] == [g.box for g in s.gt_boxes]
    r = multi_match(build_car_matrix(s.det_boxes, s.gt_boxes), 0.55)
    assert r.k_p == r.m and r.k_r == r.n and r.n > 0


def test_gt_boxes_touch_the_curve():
    s = make_scene(4, depth=5)
    pts = s.curve.xy
    dense = np.concatenate([pts[:-1] + f * np.diff(pts, axis=0) for f in np.linspace(0, 1, 64)])
    for g in s.gt_boxes:
        b = g.box
        inside = (dense[:, 0] >= b.x1) & (dense[:, 0] <= b.x2) & (dense[:, 1] >= b.y1) & (dense[:, 1] <= b.y2)
        assert inside.any()


def test_small_boxes_cover_but_fail_iou():
    s = make_scene(2, noise=NoiseModel(scale_jitter=0.25))
    for d, g in zip(s.det_boxes, s.gt_boxes):
        assert car(g.box, d.box) == 1.0
        assert iou(g.box, d.box) == pytest.approx(1 / 16)
    assert greedy_one_to_one_match(s.det_boxes, s.gt_boxes, 0.55).pairs == []


def test_dropout_recall_monte_carlo():
    xr = [
        evaluate(s.gt_boxes, s.det_boxes, standard="coveval").maxr
        for s in (make_scene(seed, noise=NoiseModel(dropout=0.5)) for seed in derive_seeds(5, 100))
    ]
    assert np.mean(xr) == pytest.approx(0.5, abs=0.05)


def test_false_alarms_are_clear_of_gts():
    s = make_scene(9, noise=NoiseModel(false_alarms=5))
    extra = s.det_boxes[len(s.gt_boxes):]
    assert len(extra) == 5
    assert all(car(g.box, d.box) == 0.0 for d in extra for g in s.gt_boxes)
    r = multi_match(build_car_matrix(s.det_boxes, s.gt_boxes), 0.55)
    assert r.k_p == len(s.gt_boxes) and r.m == len(s.gt_boxes) + 5


def test_duplicates_per_gt():
    s = make_scene(3, noise=NoiseModel(duplication=3))
    assert len(s.det_boxes) == 3 * len(s.gt_boxes)


def test_scene_reproducible():
    noise = NoiseModel(0.8, 0.1, 2, 0.2, 3)
    assert make_scene(21, noise=noise).same_as(make_scene(21, noise=noise))
    assert not make_scene(21, noise=noise).same_as(make_scene(22, noise=noise))


def test_stride_longer_than_curve():
    with pytest.raises(EmptySceneError):
        synthesize_annotations(base_curve(), 0.1, stride=2.0)


def test_depth_zero_scene_is_straight_tiling():
    s = make_scene(0, depth=0, box_size=32.0, width=512, height=512)
    assert len(s.curve) == 2
    assert len(s.gt_boxes) == int((512 - 64) // 32)
    assert all(g.box.center[1] == 256.0 for g in s.gt_boxes)


def test_exact_order_of_endpoints():
    assert topological_order_exact(3, 1, 1) == Fraction(1, 8)
    c = generate_curve(TransformParams(), 2)
    assert c.exact_orders()[0] == 0 and c.exact_orders()[-1] == 1
