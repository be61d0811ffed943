"""Score aggregation: XP/XR, AXP/AXR, mAXP/mAXR, one-to-one AP/mAP, and F_ext.

All scores are fractions in ``[0, 1]``. ``None`` marks a statistic that is
undefined for an image (empty denominator) or not available for a class
(undefined on every image); it is skipped in means and never imputed.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import ConfigError, DegenerateScoreWarning, ExtremeMuWarning
from .matching import MultiMatchResult

__all__ = [
    "MU_PRESETS",
    "DEFAULT_MU",
    "ImageScore",
    "ClassScore",
    "EvalReport",
    "image_scores",
    "aggregate_class",
    "aggregate_all",
    "f_ext_mu",
    "mu_preset",
    "mean_defined",
]

MU_PRESETS: dict[str, float] = {
    "avoid-false-alarm": 0.05,
    "balanced": 0.5,
    "avoid-missing": 0.8,
    "strongly-avoid-missing": 0.95,
}

DEFAULT_MU: tuple[float, ...] = (0.5, 0.8)


@dataclass(frozen=True)
class ImageScore:
    image_id: str
    class_id: str
    xp: float | None = None
    xr: float | None = None
    p_map: float | None = None


@dataclass(frozen=True)
class ClassScore:
    class_id: str
    axr: float | None
    axp: float | None
    ap: float | None
    f_ext: dict[float, float | None] = field(default_factory=dict)
    n_images: int = 0


@dataclass(frozen=True)
class EvalReport:
    per_class: list[ClassScore]
    maxr: float | None
    maxp: float | None
    map: float | None
    mf_ext: dict[float, float | None]
    config: dict = field(default_factory=dict)
    per_image: list[ImageScore] = field(default_factory=list)

    def class_score(self, class_id: str) -> ClassScore:
        for c in self.per_class:
            if c.class_id == class_id:
                return c
        raise KeyError(class_id)


def mean_defined(values: Iterable[float | None]) -> float | None:
    """Mean of the non-``None`` values, ``None`` if there are none.

    Uses an exactly rounded sum, so the result does not depend on input order.
    """
    defined = [v for v in values if v is not None]
    if not defined:
        return None
    return math.fsum(defined) / len(defined)


def image_scores(result: MultiMatchResult) -> tuple[float | None, float | None]:
    """``(xp, xr)`` for one image from a multi-match result.

    XP is undefined without detections, XR without ground truth. With
    detections but no ground truth every detection is a false alarm, so XP = 0.
    """
    xp = result.k_p / result.m if result.m else None
    xr = result.k_r / result.n if result.n else None
    return xp, xr


def _check_mu(mu: float) -> float:
    mu = float(mu)
    if not (0.0 <= mu <= 1.0):
        raise ConfigError(f"mu must lie in [0, 1], got {mu}")
    return mu


def f_ext_mu(xp: float, xr: float, mu: float = 0.5) -> float:
    """Extended F-score with recall/precision trade-off ``mu``.

    ``xp**(2(1-mu)) * xr**(2mu) / ((1-mu)*xp + mu*xr)``. Gives XP at mu=0, XR at
    mu=1 and the harmonic mean at mu=0.5. Larger ``mu`` leans towards recall.
    """
    mu = _check_mu(mu)
    xp, xr = float(xp), float(xr)
    for name, v in (("xp", xp), ("xr", xr)):
        if not (0.0 <= v <= 1.0):
            raise ConfigError(f"{name} must lie in [0, 1], got {v}")
    if mu in (0.0, 1.0):
        warnings.warn(
            f"mu={mu:g} scores only one of XP/XR; use a preset such as 0.05 or 0.95",
            ExtremeMuWarning,
            stacklevel=2,
        )
    if xp == 0.0 and xr == 0.0:
        warnings.warn("XP and XR are both 0; F_ext reported as 0", DegenerateScoreWarning, stacklevel=2)
        return 0.0
    denom = (1.0 - mu) * xp + mu * xr
    if denom == 0.0:
        # mu=1 with xr=0, or mu=0 with xp=0: the numerator vanishes too
        return 0.0
    return xp ** (2.0 * (1.0 - mu)) * xr ** (2.0 * mu) / denom


def mu_preset(name: str) -> float:
    key = name.strip().lower().replace("_", "-").replace(" ", "-")
    try:
        return MU_PRESETS[key]
    except KeyError:
        valid = ", ".join(MU_PRESETS)
        raise ConfigError(f"unknown mu scenario {name!r}; valid names: {valid}") from None


def _f_ext_map(axp, axr, mu_list) -> dict[float, float | None]:
    out = {}
    for mu in mu_list:
        mu = _check_mu(mu)
        if axp is None or axr is None:
            out[mu] = None
        else:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", DegenerateScoreWarning)
                out[mu] = f_ext_mu(axp, axr, mu)
    return out


def aggregate_class(
    scores: Sequence[ImageScore],
    mu_list: Sequence[float] = DEFAULT_MU,
    class_id: str | None = None,
) -> ClassScore:
    """Average per-image XP, XR and P into AXP, AXR and AP for one class."""
    if not scores:
        raise ConfigError("aggregate_class needs at least one image score")
    ids = {s.class_id for s in scores}
    if class_id is None:
        if len(ids) > 1:
            raise ConfigError(f"scores span several classes: {sorted(ids)}")
        class_id = next(iter(ids))
    axp = mean_defined(s.xp for s in scores)
    axr = mean_defined(s.xr for s in scores)
    ap = mean_defined(s.p_map for s in scores)
    return ClassScore(
        class_id=class_id,
        axr=axr,
        axp=axp,
        ap=ap,
        f_ext=_f_ext_map(axp, axr, mu_list),
        n_images=len(scores),
    )


def aggregate_all(
    classes: Sequence[ClassScore],
    config: Mapping | None = None,
    per_image: Sequence[ImageScore] = (),
) -> EvalReport:
    """Unweighted means over classes; F_ext is averaged per class, not pooled."""
    if not classes:
        raise ConfigError("aggregate_all needs at least one class score")
    mus = []
    for c in classes:
        for mu in c.f_ext:
            if mu not in mus:
                mus.append(mu)
    return EvalReport(
        per_class=list(classes),
        maxr=mean_defined(c.axr for c in classes),
        maxp=mean_defined(c.axp for c in classes),
        map=mean_defined(c.ap for c in classes),
        mf_ext={mu: mean_defined(c.f_ext.get(mu) for c in classes) for mu in mus},
        config=dict(config or {}),
        per_image=list(per_image),
    )
