"""Acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line (shown in the terminal summary) before
asserting, so a failing criterion is reported rather than hidden.
"""
import math
import time

import numpy as np
import pytest

from coveval.cli import main
from coveval.evaluate import evaluate
from coveval.fractal import (
    NoiseModel,
    TransformParams,
    derive_seeds,
    estimate_fractal_dimension,
    extract_subcurve,
    generate_curve,
    make_scene,
)
from coveval.geometry import Box, car, intersection_area, iou
from coveval.matching import Detection, GroundTruth, greedy_one_to_one_match, multi_match
from coveval.metrics import f_ext_mu

from conftest import clamped_intersection, random_boxes

# (mAXP, mAXR) -> (F(0.5), F(0.8)), all in percent
PUBLISHED_ROWS = [
    ((90.9, 87.9), (89.4, 88.5)),
    ((90.6, 87.1), (88.8, 87.8)),
    ((87.3, 89.3), (88.3, 88.9)),
    ((83.9, 82.7), (83.3, 82.9)),
    ((74.9, 83.8), (79.1, 81.8)),
    ((82.5, 90.0), (86.1, 88.4)),
]

GOLDEN_MEAN_F05 = 1.0
GOLDEN_MEAN_AP = 0.0


def test_c1_published_f_ext(acceptance):
    worst = 0.0
    misses = []
    for (xp, xr), expected in PUBLISHED_ROWS:
        for mu, want in zip((0.5, 0.8), expected):
            got = 100.0 * f_ext_mu(xp / 100.0, xr / 100.0, mu)
            err = abs(got - want)
            worst = max(worst, err)
            if err > 0.05:
                misses.append(f"({xp}, {xr}) mu={mu}: {got:.3f} vs {want}")
    ok = acceptance("C1 F_ext reproduces published values within 0.05 pp", not misses,
                    f"max error {worst:.4f}" + (f"; misses: {'; '.join(misses)}" if misses else ""))
    assert ok, misses


@pytest.mark.filterwarnings("ignore::coveval.errors.ExtremeMuWarning")
def test_c2_endpoint_identities(acceptance):
    grid = np.linspace(0.01, 1.0, 100)
    worst = 0.0
    for xp in grid:
        for xr in grid:
            xp_, xr_ = float(xp), float(xr)
            worst = max(
                worst,
                abs(f_ext_mu(xp_, xr_, 0.0) - xp_),
                abs(f_ext_mu(xp_, xr_, 1.0) - xr_),
                abs(f_ext_mu(xp_, xr_, 0.5) - 2 * xp_ * xr_ / (xp_ + xr_)),
            )
    ok = acceptance("C2 endpoint identities on a 100x100 grid", worst <= 1e-12, f"max error {worst:.2e}")
    assert ok


@pytest.mark.filterwarnings("ignore::UserWarning")
def test_c2_warns_on_extreme_mu():
    with pytest.warns(UserWarning):
        f_ext_mu(0.5, 0.5, 0.0)


def test_c3_overlap_properties(acceptance):
    rng = np.random.default_rng(2023)
    start = time.perf_counter()
    a_boxes = random_boxes(rng, 10_000)
    b_boxes = random_boxes(rng, 10_000)
    failures = 0
    for a, b in zip(a_boxes, b_boxes):
        u, c = iou(a, b), car(a, b)
        failures += not (0.0 <= u <= c <= 1.0)
        failures += u != iou(b, a) or c != car(b, a)
        failures += intersection_area(a, b) != clamped_intersection(a, b)
        inner = Box(a.x1 + 0.25 * a.width, a.y1 + 0.25 * a.height, a.x2 - 0.25 * a.width, a.y2 - 0.25 * a.height)
        failures += car(a, inner) != 1.0
    elapsed = time.perf_counter() - start
    ok = acceptance("C3 overlap property suite on 10,000 pairs", failures == 0 and elapsed < 5.0,
                    f"{failures} failures, {elapsed:.2f} s")
    assert ok


def scan_counts(values, thr):
    m, n = values.shape
    k_p = sum(1 for i in range(m) if any(values[i, j] >= thr for j in range(n)))
    k_r = sum(1 for j in range(n) if any(values[i, j] >= thr for i in range(m)))
    return k_p, k_r


def enumerate_assignments(m, n):
    out = []

    def rec(i, used, acc):
        if i == m:
            out.append(tuple(acc))
            return
        rec(i + 1, used, acc + [None])
        for j in range(n):
            if j not in used:
                rec(i + 1, used | {j}, acc + [j])

    rec(0, frozenset(), [])
    return out


def enumerated_greedy(dets, gts, thr):
    """Lexicographically best feasible assignment in confidence order, by exhaustive search."""
    order = sorted(range(len(dets)), key=lambda i: -dets[i].confidence)
    table = [[iou(g.box, dets[i].box) for g in gts] for i in order]
    best, best_key = None, None
    for assign in enumerate_assignments(len(dets), len(gts)):
        if any(j is not None and table[r][j] < thr for r, j in enumerate(assign)):
            continue
        key = tuple((-1.0, 0) if j is None else (table[r][j], -j) for r, j in enumerate(assign))
        if best_key is None or key > best_key:
            best, best_key = assign, key
    return [(r + 1, j) for r, j in enumerate(best) if j is not None]


def test_c4_matching_oracles(acceptance):
    rng = np.random.default_rng(77)
    start = time.perf_counter()
    mm_fail = 0
    for _ in range(1000):
        m, n = rng.integers(0, 9, size=2)
        values = np.round(rng.uniform(0, 1, size=(m, n)), 2)
        thr = float(rng.choice([0.3, 0.55, 0.7, 1.0]))
        if m == 0:
            continue
        r = multi_match(values, thr)
        mm_fail += (r.k_p, r.k_r) != scan_counts(values, thr)
    greedy_fail = 0
    for _ in range(300):
        m, n = rng.integers(0, 6, size=2)
        dets = [Detection("i", "c", b, float(c)) for b, c in zip(random_boxes(rng, m), rng.uniform(0, 1, m))]
        gts = [GroundTruth("i", "c", b) for b in random_boxes(rng, n)]
        thr = float(rng.choice([0.1, 0.3, 0.55]))
        res = greedy_one_to_one_match(dets, gts, thr)
        pairs = [(p.rank, p.gt_index) for p in res.pairs]
        greedy_fail += pairs != enumerated_greedy(dets, gts, thr)
        greedy_fail += len({g for _, g in pairs}) != len(pairs) or any(p.iou < thr for p in res.pairs)
        greedy_fail += sorted(res.unmatched_gts + [g for _, g in pairs]) != list(range(n))
    elapsed = time.perf_counter() - start
    ok = acceptance("C4 matching equals exhaustive oracles", mm_fail == 0 and greedy_fail == 0 and elapsed < 10.0,
                    f"multi-match {mm_fail} / greedy {greedy_fail} failures, {elapsed:.2f} s")
    assert ok


def test_c5_small_faithful_boxes(acceptance):
    noise = NoiseModel(scale_jitter=0.25, duplication=2, dropout=0.0)
    f05, ap = [], []
    for seed in derive_seeds(2024, 50):
        s = make_scene(seed, noise=noise)
        r = evaluate(s.gt_boxes, s.det_boxes, mu_list=(0.5,), overlap_threshold=0.55)
        f05.append(r.mf_ext[0.5])
        ap.append(r.map)
    mean_f, mean_ap = math.fsum(f05) / len(f05), math.fsum(ap) / len(ap)
    ok = mean_f >= 0.95 and mean_ap <= 0.5
    ok = ok and abs(mean_f - GOLDEN_MEAN_F05) < 1e-12 and abs(mean_ap - GOLDEN_MEAN_AP) < 1e-12
    acceptance("C5 CovEval credits small faithful boxes that mAP rejects", ok,
               f"mean F(0.5) {mean_f:.4f}, mean AP {mean_ap:.4f}")
    assert ok


def test_c6_topological_order(acceptance):
    from fractions import Fraction

    start = time.perf_counter()
    bad = []
    for G in (1, 2, 3):
        for depth in range(7):
            for kind in ("random", "deterministic"):
                params = TransformParams(kind=kind, G=G) if kind == "random" else \
                    TransformParams.deterministic(0.4, 0.25, G)
                c = generate_curve(params, depth, seed=depth)
                total = (G + 1) ** depth
                exact = c.exact_orders()
                if len(c) != total + 1:
                    bad.append(f"count G={G} N={depth}")
                if list(np.argsort(c.t_order, kind="stable")) != list(range(len(c))):
                    bad.append(f"order G={G} N={depth}")
                if any(b - a != Fraction(1, total) for a, b in zip(exact, exact[1:])):
                    bad.append(f"gap G={G} N={depth}")
    elapsed = time.perf_counter() - start
    ok = acceptance("C6 topological order equals traversal order", not bad and elapsed < 5.0,
                    f"{len(bad)} failures, {elapsed:.2f} s")
    assert ok, bad


def test_c7_half_window_dimension(acceptance):
    start = time.perf_counter()
    rng = np.random.default_rng(8)
    full, half = [], []
    for seed in range(20):
        c = generate_curve(TransformParams(G=1), 8, seed=seed)
        t_a = float(rng.uniform(0.0, 0.5))
        full.append(estimate_fractal_dimension(c))
        half.append(estimate_fractal_dimension(extract_subcurve(c, t_a, t_a + 0.5)))
    full, half = np.array(full), np.array(half)
    pooled = math.sqrt((full.var(ddof=1) + half.var(ddof=1)) / 2.0)
    diff = abs(full.mean() - half.mean())
    elapsed = time.perf_counter() - start
    ok = acceptance("C7 half-window dimension matches the full curve", diff < 3 * pooled and elapsed < 60.0,
                    f"full {full.mean():.4f}, half {half.mean():.4f}, |diff| {diff:.4f} < 3*{pooled:.4f}, "
                    f"{elapsed:.2f} s")
    assert ok


def tree_bytes(root):
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_c8_determinism(acceptance, tmp_path):
    args = ["--count", "8", "--seed", "99", "--depth", "6", "--scale-jitter", "0.7", "--position-jitter", "0.1",
            "--duplication", "2", "--dropout", "0.1", "--false-alarms", "1"]
    codes = [main(["synth", "--out", str(tmp_path / name), "--threads", t, *args])
             for name, t in (("a", "1"), ("b", "1"), ("c", "8"))]
    trees = [tree_bytes(tmp_path / n) for n in "abc"]
    synth_ok = codes == [0, 0, 0] and trees[0] == trees[1] == trees[2]
    reports = []
    for t in ("1", "3", "8"):
        out = tmp_path / f"report_{t}.json"
        codes.append(main(["evaluate", "--gt", str(tmp_path / "a" / "gt"), "--det", str(tmp_path / "a" / "det"),
                           "--threads", t, "--out", str(out)]))
        reports.append(out.read_bytes())
    eval_ok = codes[3:] == [0, 0, 0] and len(set(reports)) == 1
    ok = acceptance("C8 synth and evaluate are deterministic across runs and threads", synth_ok and eval_ok,
                    f"synth {'identical' if synth_ok else 'differs'}, reports {'identical' if eval_ok else 'differ'}")
    assert ok
