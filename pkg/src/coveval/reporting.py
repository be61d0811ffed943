"""Report serialization and rendering (percent tables, long CSV, rank comparison)."""
from __future__ import annotations

import csv
import io
import os
from pathlib import Path

from .datasets import SCHEMA_VERSION, check_schema, dump_json, load_json_text
from .errors import ParseError
from .metrics import ClassScore, EvalReport, ImageScore

__all__ = [
    "report_to_dict",
    "report_from_dict",
    "write_report",
    "read_report",
    "render_table",
    "long_rows",
    "render_long_csv",
    "compare_rows",
    "render_compare_csv",
]


def _mu_key(mu: float) -> str:
    return repr(float(mu))


def report_to_dict(report: EvalReport) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "report",
        "config": report.config,
        "summary": {
            "map": report.map,
            "maxr": report.maxr,
            "maxp": report.maxp,
            "mf_ext": {_mu_key(mu): v for mu, v in report.mf_ext.items()},
        },
        "per_class": [
            {
                "class_id": c.class_id,
                "ap": c.ap,
                "axr": c.axr,
                "axp": c.axp,
                "f_ext": {_mu_key(mu): v for mu, v in c.f_ext.items()},
                "n_images": c.n_images,
            }
            for c in report.per_class
        ],
        "per_image": [
            {"image_id": s.image_id, "class_id": s.class_id, "xp": s.xp, "xr": s.xr, "p_map": s.p_map}
            for s in report.per_image
        ],
    }


def report_from_dict(doc, source=None) -> EvalReport:
    doc = check_schema(doc, "report", source)
    try:
        summary = doc["summary"]
        return EvalReport(
            per_class=[
                ClassScore(
                    class_id=c["class_id"],
                    axr=c["axr"],
                    axp=c["axp"],
                    ap=c["ap"],
                    f_ext={float(k): v for k, v in c["f_ext"].items()},
                    n_images=c.get("n_images", 0),
                )
                for c in doc["per_class"]
            ],
            maxr=summary["maxr"],
            maxp=summary["maxp"],
            map=summary["map"],
            mf_ext={float(k): v for k, v in summary["mf_ext"].items()},
            config=doc.get("config", {}),
            per_image=[ImageScore(**s) for s in doc.get("per_image", [])],
        )
    except (KeyError, TypeError, ValueError, AttributeError) as e:
        raise ParseError(f"malformed report ({type(e).__name__}: {e})", source=source) from None


def write_report(report: EvalReport, path: str | os.PathLike) -> None:
    Path(path).write_text(dump_json(report_to_dict(report)), encoding="utf-8")


def read_report(path: str | os.PathLike) -> EvalReport:
    path = Path(path)
    return report_from_dict(load_json_text(path.read_bytes(), source=path), source=path)


def _pct(v: float | None) -> str:
    return "n/a" if v is None else f"{100.0 * v:.1f}"


def _columns(report: EvalReport):
    mus = list(report.mf_ext)
    standard = report.config.get("standard", "both")
    cols = []
    if standard in ("both", "map"):
        cols.append(("AP", lambda c: c.ap, report.map))
    if standard in ("both", "coveval"):
        for mu in mus:
            cols.append((f"F_ext({mu:g})", lambda c, mu=mu: c.f_ext.get(mu), report.mf_ext.get(mu)))
        cols.append(("mAXR", lambda c: c.axr, report.maxr))
        cols.append(("mAXP", lambda c: c.axp, report.maxp))
    return cols


def render_table(report: EvalReport) -> str:
    """Aligned text table of percentages with one decimal, one row per class plus the mean."""
    cols = _columns(report)
    header = ["class"] + [name for name, _, _ in cols]
    rows = [[c.class_id] + [_pct(get(c)) for _, get, _ in cols] for c in report.per_class]
    rows.append(["mean"] + [_pct(total) for _, _, total in cols])
    widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]

    def fmt(r):
        return "  ".join([r[0].ljust(widths[0])] + [v.rjust(w) for v, w in zip(r[1:], widths[1:])])

    lines = [fmt(header), "  ".join("-" * w for w in widths)]
    lines += [fmt(r) for r in rows[:-1]]
    lines.append("  ".join("-" * w for w in widths))
    lines.append(fmt(rows[-1]))
    return "\n".join(lines) + "\n"


def long_rows(report: EvalReport) -> list[tuple[str, str, float | None]]:
    """``(class, metric, value)`` triples; class ``"_all"`` holds the class means."""
    out = []
    for c in report.per_class:
        out += [(c.class_id, "ap", c.ap), (c.class_id, "axr", c.axr), (c.class_id, "axp", c.axp)]
        out += [(c.class_id, f"f_ext_{mu:g}", v) for mu, v in c.f_ext.items()]
    out += [("_all", "map", report.map), ("_all", "maxr", report.maxr), ("_all", "maxp", report.maxp)]
    out += [("_all", f"mf_ext_{mu:g}", v) for mu, v in report.mf_ext.items()]
    return out


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def render_long_csv(report: EvalReport) -> str:
    return _csv(["class", "metric", "value"], [(c, m, _cell(v)) for c, m, v in long_rows(report)])


def _ranks(scores: dict[str, float | None]) -> dict[str, int]:
    # descending score, ties and missing scores ordered by class name
    order = sorted(scores, key=lambda c: (scores[c] is None, -(scores[c] or 0.0), c))
    return {c: i for i, c in enumerate(order, start=1)}


def compare_rows(report: EvalReport, mu: float = 0.8) -> list[dict]:
    """Per-class AP and F_ext(mu) with each class's rank under both standards.

    ``rank_delta`` is ``rank_map - rank_coveval``: positive when a class climbs
    under CovEval.
    """
    ap = {c.class_id: c.ap for c in report.per_class}
    fx = {c.class_id: c.f_ext.get(float(mu)) for c in report.per_class}
    r_map, r_cov = _ranks(ap), _ranks(fx)
    return [
        {
            "class": c.class_id,
            "ap": c.ap,
            f"f_ext_{mu:g}": fx[c.class_id],
            "axr": c.axr,
            "axp": c.axp,
            "rank_map": r_map[c.class_id],
            "rank_coveval": r_cov[c.class_id],
            "rank_delta": r_map[c.class_id] - r_cov[c.class_id],
        }
        for c in sorted(report.per_class, key=lambda c: c.class_id)
    ]


def render_compare_csv(report: EvalReport, mu: float = 0.8) -> str:
    rows = compare_rows(report, mu)
    header = list(rows[0]) if rows else ["class"]
    body = [[_cell(r[h]) for h in header] for r in rows]
    return _csv(header, body)


def _cell(v):
    if v is None:
        return ""
    return repr(v) if isinstance(v, float) else v
