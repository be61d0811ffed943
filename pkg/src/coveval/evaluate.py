"""Run CovEval, one-to-one mAP, or both over a set of images and classes."""
from __future__ import annotations

import logging
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, Sequence

from .errors import ConfigError, EmptyEvaluationError
from .matching import (
    Detection,
    GroundTruth,
    build_car_matrix,
    greedy_one_to_one_match,
    image_precision_map,
    multi_match,
)
from .metrics import (
    DEFAULT_MU,
    EvalReport,
    ImageScore,
    aggregate_all,
    aggregate_class,
    image_scores,
)

__all__ = ["STANDARDS", "score_image", "evaluate"]

log = logging.getLogger(__name__)

STANDARDS = ("both", "map", "coveval")


def score_image(
    image_id: str,
    class_id: str,
    dets: Sequence[Detection],
    gts: Sequence[GroundTruth],
    overlap_threshold: float = 0.55,
    confidence_threshold: float = 0.5,
    standard: str = "both",
) -> ImageScore:
    """Score one (image, class) group under the selected standard(s).

    CovEval drops detections below ``confidence_threshold`` before matching;
    the mAP path ranks every detection.
    """
    xp = xr = p_map = None
    if standard in ("both", "coveval"):
        kept = [d for d in dets if d.confidence >= confidence_threshold]
        result = multi_match(build_car_matrix(kept, gts), overlap_threshold)
        xp, xr = image_scores(result)
    if standard in ("both", "map"):
        match = greedy_one_to_one_match(dets, gts, overlap_threshold)
        p_map = image_precision_map(match, len(gts))
    return ImageScore(image_id=image_id, class_id=class_id, xp=xp, xr=xr, p_map=p_map)


def evaluate(
    ground_truths: Iterable[GroundTruth],
    detections: Iterable[Detection],
    *,
    classes: Sequence[str] | None = None,
    image_ids: Sequence[str] | None = None,
    overlap_threshold: float = 0.55,
    confidence_threshold: float = 0.5,
    mu_list: Sequence[float] = DEFAULT_MU,
    standard: str = "both",
    threads: int = 1,
) -> EvalReport:
    """Evaluate detections against ground truth for every class.

    ``image_ids`` fixes the image universe (normally from the manifest); by
    default it is every image mentioned by either input. An image with neither
    ground truth nor detections of a class is left out of that class entirely.
    The result does not depend on ``threads``.
    """
    if standard not in STANDARDS:
        raise ConfigError(f"standard must be one of {STANDARDS}, got {standard!r}")
    if not (0.0 < confidence_threshold <= 1.0):
        raise ConfigError(f"confidence_threshold must lie in (0, 1], got {confidence_threshold}")
    if not (0.0 < overlap_threshold <= 1.0):
        raise ConfigError(f"overlap_threshold must lie in (0, 1], got {overlap_threshold}")
    if threads < 1:
        raise ConfigError(f"threads must be >= 1, got {threads}")
    for mu in mu_list:
        if not (0.0 <= mu <= 1.0):
            raise ConfigError(f"mu must lie in [0, 1], got {mu}")

    gts_by = defaultdict(list)
    dets_by = defaultdict(list)
    seen_images: dict[str, None] = {}
    seen_classes: dict[str, None] = {}
    for g in ground_truths:
        gts_by[g.class_id, g.image_id].append(g)
        seen_images.setdefault(g.image_id)
        seen_classes.setdefault(g.class_id)
    for d in detections:
        dets_by[d.class_id, d.image_id].append(d)
        seen_images.setdefault(d.image_id)
        seen_classes.setdefault(d.class_id)

    images = list(image_ids) if image_ids is not None else sorted(seen_images)
    class_list = list(classes) if classes is not None else sorted(seen_classes)
    if not images or not class_list:
        raise EmptyEvaluationError("no images or classes to evaluate")

    jobs = []
    for c in class_list:
        for img in images:
            gts = gts_by.get((c, img), [])
            dets = dets_by.get((c, img), [])
            if gts or dets:
                jobs.append((img, c, dets, gts))
    if not jobs:
        raise EmptyEvaluationError("no ground truth or detections in any evaluated image")
    log.info("scoring %d (image, class) groups on %d thread(s)", len(jobs), threads)

    def run(job):
        img, c, dets, gts = job
        return score_image(img, c, dets, gts, overlap_threshold, confidence_threshold, standard)

    if threads == 1:
        per_image = [run(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_image = list(pool.map(run, jobs))

    by_class = defaultdict(list)
    for s in per_image:
        by_class[s.class_id].append(s)
    class_scores = [
        aggregate_class(by_class[c], mu_list, class_id=c) for c in class_list if by_class[c]
    ]
    if not class_scores:
        raise EmptyEvaluationError("no class has any scored image")
    config = {
        "standard": standard,
        "overlap_threshold": overlap_threshold,
        "confidence_threshold": confidence_threshold,
        "mu_list": [float(m) for m in mu_list],
        "classes": class_list,
        "n_images": len(images),
    }
    return aggregate_all(class_scores, config=config, per_image=per_image)
