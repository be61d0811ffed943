"""``coveval`` command line: evaluate, compare, synth, report.

Exit codes: 0 on success, 1 on input or configuration errors, 2 when there is
nothing to evaluate. ``COVEVAL_LOG`` sets the log level (default WARNING).
"""
from __future__ import annotations

import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click

from . import __version__
from .datasets import (
    ImageRecord,
    Manifest,
    dump_json,
    format_detections,
    format_voc_annotation,
    load_detection_dir,
    load_ground_truth_dir,
    validate_inputs,
    write_manifest,
    write_scene,
)
from .errors import ConfigError, CovEvalError, EmptyEvaluationError
from .evaluate import STANDARDS, evaluate
from .fractal import DEFAULT_MAX_POINTS, NoiseModel, TransformParams, derive_seeds, make_scene
from .metrics import mu_preset
from .reporting import read_report, render_compare_csv, render_long_csv, render_table, write_report

log = logging.getLogger("coveval")

EXIT_OK, EXIT_INPUT, EXIT_EMPTY = 0, 1, 2


def _setup_logging():
    level = os.environ.get("COVEVAL_LOG", "WARNING").upper()
    if not isinstance(logging.getLevelName(level), int):
        level = "WARNING"
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def parse_mu_list(text: str) -> list[float]:
    """Comma-separated mu values; scenario names such as ``avoid-missing`` are accepted."""
    out = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        try:
            mu = float(token)
        except ValueError:
            mu = mu_preset(token)
        if not (0.0 <= mu <= 1.0):
            raise ConfigError(f"mu must lie in [0, 1], got {token}")
        if mu not in out:
            out.append(mu)
    if not out:
        raise ConfigError("empty --mu list")
    return out


def _parse_range(text: str, name: str) -> tuple[float, float]:
    parts = text.split(",")
    try:
        if len(parts) == 1:
            v = float(parts[0])
            return v, v
        if len(parts) == 2:
            return float(parts[0]), float(parts[1])
    except ValueError:
        pass
    raise ConfigError(f"{name} expects 'lo,hi' or a single number, got {text!r}")


def _threshold(value: float, name: str) -> float:
    if not (0.0 < value <= 1.0):
        raise ConfigError(f"{name} must lie in (0, 1], got {value}")
    return value


common_eval_options = [
    click.option("--gt", "gt_path", required=True, type=click.Path(path_type=Path),
                 help="Directory of VOC annotation XML (optionally with manifest.json)."),
    click.option("--det", "det_path", required=True, type=click.Path(path_type=Path),
                 help="Directory of <class>.txt detection files, or a detections JSON file."),
    click.option("--overlap-threshold", default=0.55, show_default=True, type=float),
    click.option("--confidence-threshold", default=0.5, show_default=True, type=float,
                 help="Applied by CovEval only."),
    click.option("--mu", "mu_text", default="0.5,0.8", show_default=True,
                 help="Comma-separated F_ext trade-off values or scenario names."),
    click.option("--threads", default=1, show_default=True, type=int),
]


def with_eval_options(fn):
    for opt in reversed(common_eval_options):
        fn = opt(fn)
    return fn


def _run_evaluation(gt_path, det_path, standard, overlap_threshold, confidence_threshold, mu_list, threads):
    _threshold(overlap_threshold, "--overlap-threshold")
    _threshold(confidence_threshold, "--confidence-threshold")
    manifest, gts = load_ground_truth_dir(gt_path)
    dets = load_detection_dir(det_path, manifest.classes)
    validate_inputs(manifest, dets, gts)
    report = evaluate(
        gts,
        dets,
        classes=manifest.classes,
        image_ids=manifest.image_ids,
        overlap_threshold=overlap_threshold,
        confidence_threshold=confidence_threshold,
        mu_list=mu_list,
        standard=standard,
        threads=threads,
    )
    report.config.update({"gt": str(gt_path), "det": str(det_path)})
    return report


@click.group()
@click.version_option(__version__, prog_name="coveval")
def cli():
    """Covering-overlap (CovEval) and mAP evaluation for box detectors."""


@cli.command("evaluate")
@with_eval_options
@click.option("--standard", type=click.Choice(STANDARDS), default="both", show_default=True)
@click.option("--out", "out_path", type=click.Path(path_type=Path), help="Write the JSON report here.")
def cmd_evaluate(gt_path, det_path, overlap_threshold, confidence_threshold, mu_text, threads, standard, out_path):
    """Score detections and print a percent table."""
    mu_list = parse_mu_list(mu_text)
    report = _run_evaluation(gt_path, det_path, standard, overlap_threshold, confidence_threshold, mu_list, threads)
    if out_path is not None:
        write_report(report, out_path)
    click.echo(render_table(report), nl=False)


@cli.command("compare")
@with_eval_options
@click.option("--rank-mu", default=0.8, show_default=True, type=float,
              help="F_ext trade-off used for the CovEval ranking.")
@click.option("--out", "out_path", type=click.Path(path_type=Path), help="Write the CSV here instead of stdout.")
def cmd_compare(gt_path, det_path, overlap_threshold, confidence_threshold, mu_text, threads, rank_mu, out_path):
    """Rank classes under mAP and under CovEval side by side (CSV)."""
    mu_list = parse_mu_list(mu_text)
    if not (0.0 <= rank_mu <= 1.0):
        raise ConfigError(f"--rank-mu must lie in [0, 1], got {rank_mu}")
    if rank_mu not in mu_list:
        mu_list.append(rank_mu)
    report = _run_evaluation(gt_path, det_path, "both", overlap_threshold, confidence_threshold, mu_list, threads)
    text = render_compare_csv(report, rank_mu)
    if out_path is not None:
        Path(out_path).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)


@cli.command("synth")
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--count", default=10, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=click.IntRange(0, 2**64 - 1))
@click.option("--kind", type=click.Choice(["random", "deterministic"]), default="random", show_default=True)
@click.option("--G", "G", default=1, show_default=True, type=int, help="Nodes inserted per segment per iteration.")
@click.option("--depth", default=6, show_default=True, type=int)
@click.option("--t-range", default="0.35,0.65", show_default=True, help="Along-segment fraction bounds.")
@click.option("--h-range", default="-0.3,0.3", show_default=True, help="Normal offset bounds (fraction of length).")
@click.option("--box-size", default=32.0, show_default=True, type=float)
@click.option("--stride", default=None, type=float, help="Arc-length spacing of GT boxes [default: box size].")
@click.option("--scale-jitter", default=1.0, show_default=True, type=float)
@click.option("--position-jitter", default=0.0, show_default=True, type=float)
@click.option("--duplication", default=1, show_default=True, type=int)
@click.option("--dropout", default=0.0, show_default=True, type=float)
@click.option("--false-alarms", default=0, show_default=True, type=int)
@click.option("--width", default=512.0, show_default=True, type=float)
@click.option("--height", default=512.0, show_default=True, type=float)
@click.option("--class-id", default="crack", show_default=True)
@click.option("--max-points", default=DEFAULT_MAX_POINTS, show_default=True, type=int)
@click.option("--threads", default=1, show_default=True, type=int)
def cmd_synth(out_dir, count, seed, kind, G, depth, t_range, h_range, box_size, stride, scale_jitter,
              position_jitter, duplication, dropout, false_alarms, width, height, class_id, max_points, threads):
    """Write synthetic crack scenes: VOC ground truth, detections, scene JSON."""
    if count < 1:
        raise ConfigError(f"--count must be >= 1, got {count}")
    if threads < 1:
        raise ConfigError(f"--threads must be >= 1, got {threads}")
    t_lo, t_hi = _parse_range(t_range, "--t-range")
    h_lo, h_hi = _parse_range(h_range, "--h-range")
    params = TransformParams(kind, G, t_lo, t_hi, h_lo, h_hi)
    noise = NoiseModel(scale_jitter, position_jitter, duplication, dropout, false_alarms)
    seeds = derive_seeds(seed, count)
    ids = [f"scene_{i:04d}" for i in range(count)]

    def build(i):
        return make_scene(seeds[i], params, depth, noise, box_size, stride, width, height,
                          image_id=ids[i], class_id=class_id, max_points=max_points)

    if threads == 1:
        scenes = [build(i) for i in range(count)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            scenes = list(pool.map(build, range(count)))

    gt_dir, det_dir, scene_dir = out_dir / "gt", out_dir / "det", out_dir / "scenes"
    for d in (gt_dir, det_dir, scene_dir):
        d.mkdir(parents=True, exist_ok=True)
    records = []
    for s in scenes:
        rec = ImageRecord(s.image_id, s.width, s.height, f"{s.image_id}.xml")
        (gt_dir / rec.annotation).write_text(format_voc_annotation(rec, s.gt_boxes), encoding="utf-8")
        write_scene(s, scene_dir / f"{s.image_id}.json")
        records.append(rec)
    write_manifest(Manifest(records, [class_id]), gt_dir / "manifest.json")
    (det_dir / f"{class_id}.txt").write_text(
        format_detections(d for s in scenes for d in s.det_boxes), encoding="utf-8"
    )
    config = {
        "schema_version": 1,
        "kind": "synth",
        "seed": seed,
        "count": count,
        "depth": depth,
        "params": params.to_dict(),
        "noise": noise.to_dict(),
        "box_size": box_size,
        "stride": box_size if stride is None else stride,
        "width": width,
        "height": height,
        "class_id": class_id,
        "scene_seeds": seeds,
    }
    (out_dir / "synth.json").write_text(dump_json(config), encoding="utf-8")
    click.echo(f"wrote {count} scene(s) to {out_dir}")


@cli.command("report")
@click.argument("report_path", type=click.Path(path_type=Path))
@click.option("--format", "fmt", type=click.Choice(["table", "csv"]), default="table", show_default=True)
def cmd_report(report_path, fmt):
    """Render a saved JSON report as a percent table or long-format CSV."""
    report = read_report(report_path)
    click.echo(render_table(report) if fmt == "table" else render_long_csv(report), nl=False)


def main(argv=None) -> int:
    """Run the CLI and return its exit code instead of exiting."""
    _setup_logging()
    try:
        cli.main(args=argv, prog_name="coveval", standalone_mode=False)
    except EmptyEvaluationError as e:
        click.echo(f"error: {e}", err=True)
        return EXIT_EMPTY
    except CovEvalError as e:
        click.echo(f"error: {e}", err=True)
        return EXIT_INPUT
    except click.exceptions.Exit as e:
        return e.exit_code
    except click.ClickException as e:
        e.show()
        return EXIT_INPUT
    except click.Abort:
        click.echo("aborted", err=True)
        return EXIT_INPUT
    except OSError as e:
        click.echo(f"error: {e}", err=True)
        return EXIT_INPUT
    return EXIT_OK


def run():
    sys.exit(main())
