"""
Synthetic cracks from repeated node insertion
=============================================

Start from a straight segment and, at every iteration, insert a node into
each segment at a random fraction along it, pushed sideways by a random
offset. After a few iterations the polyline looks like a crack. Each point
keeps a topological order T in [0, 1] that records where it sits along the
curve, so sub-curves can be cut by T alone.
"""

import numpy as np

from coveval import (
    NoiseModel,
    TransformParams,
    estimate_fractal_dimension,
    evaluate,
    extract_subcurve,
    generate_curve,
    make_scene,
)

# a reproducible random crack: 2**8 + 1 points after eight iterations
params = TransformParams(kind="random", G=1, t_lo=0.35, t_hi=0.65, h_lo=-0.3, h_hi=0.3)
curve = generate_curve(params, depth=8, seed=42)
print(f"{len(curve)} points, length {curve.length:.3f}")

# T increases along the curve, so sorting by T gives the traversal order
assert np.all(np.diff(curve.t_order) > 0)

# box-counting dimension of the whole curve and of its two halves
print(f"dimension (full):        {estimate_fractal_dimension(curve):.3f}")
print(f"dimension (first half):  {estimate_fractal_dimension(extract_subcurve(curve, 0.0, 0.5)):.3f}")
print(f"dimension (second half): {estimate_fractal_dimension(extract_subcurve(curve, 0.5, 1.0)):.3f}")

# a scene places ground-truth boxes along the crack and simulates a detector;
# here the detector finds every segment but draws boxes a quarter of the size
scene = make_scene(7, params, depth=6, noise=NoiseModel(scale_jitter=0.25, duplication=2))
report = evaluate(scene.gt_boxes, scene.det_boxes)
print(f"{len(scene.gt_boxes)} GT boxes, {len(scene.det_boxes)} detections")
print(f"mAP={report.map:.3f}  F_ext(0.5)={report.mf_ext[0.5]:.3f}  F_ext(0.8)={report.mf_ext[0.8]:.3f}")
