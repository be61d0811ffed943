"""
Multi-match scoring against one-to-one AP
=========================================

CovEval lets any number of detections share a ground-truth box and any
detection cover several ground truths. One-to-one AP pairs each ground truth
with at most one detection by IoU. On a crack covered by short boxes the two
standards disagree sharply.
"""

from coveval import Box, Detection, GroundTruth, build_car_matrix, evaluate, multi_match

# one long crack annotated as two boxes
gts = [GroundTruth("img", "crack", Box(0, 0, 100, 20)), GroundTruth("img", "crack", Box(100, 0, 200, 20))]

# the detector proposes four short boxes along the crack and one false alarm
dets = [Detection("img", "crack", Box(x, 2, x + 40, 18), c) for x, c in [(5, 0.9), (55, 0.8), (105, 0.85), (150, 0.7)]]
dets.append(Detection("img", "crack", Box(0, 100, 30, 130), 0.6))

# the CAr matrix has one row per detection (highest confidence first)
matrix = build_car_matrix(dets, gts)
print(matrix.values.round(2))

# a row is a valid detection when it covers some ground truth, a column is
# found when some detection covers it
result = multi_match(matrix, 0.55)
print(f"XP = {result.k_p}/{result.m}, XR = {result.k_r}/{result.n}")

# the same inputs under both standards
report = evaluate(gts, dets, mu_list=(0.5, 0.8))
print(f"mAP        = {report.map:.3f}")
print(f"F_ext(0.5) = {report.mf_ext[0.5]:.3f}")
print(f"F_ext(0.8) = {report.mf_ext[0.8]:.3f}")
