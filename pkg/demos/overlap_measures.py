"""
IoU versus cover-area rate
==========================

A crack is long and thin, so its ground-truth box is mostly background. A
detector that draws several small boxes along the crack finds all of it, yet
each small box has a poor IoU with the large annotation. The cover-area rate
(CAr) divides the shared area by the smaller box instead of the union.
"""

from coveval import Box, car, iou

# a long ground-truth box and a detection that sits entirely inside it
gt = Box(0, 0, 200, 20)
small = Box(10, 2, 50, 18)
print(f"small box inside:   IoU={iou(gt, small):.3f}  CAr={car(gt, small):.3f}")

# the same detection shifted so that only half of it overlaps
shifted = Box(180, 2, 220, 18)
print(f"half outside:       IoU={iou(gt, shifted):.3f}  CAr={car(gt, shifted):.3f}")

# IoU never exceeds CAr, and both equal 1 for identical boxes
print(f"identical boxes:    IoU={iou(gt, gt):.3f}  CAr={car(gt, gt):.3f}")

# CAr is symmetric: it does not matter which box is the ground truth
assert car(gt, small) == car(small, gt)
