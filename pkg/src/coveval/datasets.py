"""On-disk formats: VOC annotation XML, per-class detection text, scene JSON, manifests.

Detection text format, one detection per line::

    <image_id> <confidence> <xmin> <ymin> <xmax> <ymax>

Fields are whitespace separated, numbers use a dot decimal separator. Blank
lines and lines starting with ``#`` are ignored. A detection directory holds
one ``<class_id>.txt`` per class or a single ``detections.json``.

JSON documents written here carry a ``schema_version`` field. Floats are
written with ``repr`` precision, so reading a document back is exact.
"""
from __future__ import annotations

import io
import json
import logging
import os
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np

from .errors import ConfigError, CovEvalError, InvalidBoxError, ParseError, SchemaVersionError
from .fractal import NoiseModel, PolyCurve, SyntheticScene, TransformParams
from .geometry import Box
from .matching import Detection, GroundTruth

__all__ = [
    "SCHEMA_VERSION",
    "ImageRecord",
    "Manifest",
    "ValidationReport",
    "MissingDetectionsError",
    "parse_voc_annotation",
    "parse_voc_gt",
    "format_voc_annotation",
    "parse_detections",
    "format_detections",
    "detections_to_json",
    "detections_from_json",
    "scene_to_dict",
    "scene_from_dict",
    "write_scene",
    "read_scene",
    "manifest_to_dict",
    "manifest_from_dict",
    "load_manifest",
    "write_manifest",
    "load_ground_truth_dir",
    "load_detection_dir",
    "validate_inputs",
    "check_schema",
    "dump_json",
    "load_json_text",
]

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
MANIFEST_NAME = "manifest.json"
UNIFIED_DETECTIONS_NAME = "detections.json"


class MissingDetectionsError(ConfigError):
    def __init__(self, class_id: str, directory):
        self.class_id = class_id
        super().__init__(f"no detection file for class {class_id!r} in {directory}")


@dataclass(frozen=True)
class ImageRecord:
    image_id: str
    width: float | None = None
    height: float | None = None
    annotation: str | None = None  # path relative to the manifest's directory


@dataclass
class Manifest:
    images: list[ImageRecord]
    classes: list[str]
    format: str = "voc"
    root: Path | None = None

    def __post_init__(self):
        ids = [r.image_id for r in self.images]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ConfigError(f"duplicate image ids in manifest: {dupes}")

    @property
    def image_ids(self) -> list[str]:
        return [r.image_id for r in self.images]

    def record(self, image_id: str) -> ImageRecord | None:
        for r in self.images:
            if r.image_id == image_id:
                return r
        return None


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def check_schema(doc, kind: str, source=None) -> dict:
    if not isinstance(doc, dict):
        raise ParseError(f"expected a JSON object for {kind}", source=source)
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaVersionError(
            f"{source or kind}: schema_version {version!r} not supported (expected {SCHEMA_VERSION})"
        )
    if doc.get("kind", kind) != kind:
        raise ParseError(f"document kind {doc.get('kind')!r}, expected {kind!r}", source=source)
    return doc


def load_json_text(text: str | bytes, source=None):
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as e:
            raise ParseError(f"not valid UTF-8 ({e.reason})", source=source) from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, source=source, line=e.lineno, column=e.colno) from None


# --- VOC XML ---------------------------------------------------------------


def _text(elem, tag, where, source):
    child = elem.find(tag)
    if child is None or child.text is None or not child.text.strip():
        raise ParseError(f"{where}: missing <{tag}>", source=source)
    return child.text.strip()


def _number(value: str, where: str, source) -> float:
    try:
        return float(value)
    except ValueError:
        raise ParseError(f"{where}: {value!r} is not a number", source=source) from None


def parse_voc_annotation(
    document: str | bytes, image_id: str | None = None, source=None
) -> tuple[ImageRecord, list[GroundTruth]]:
    """Parse one VOC annotation document into its image record and GT boxes.

    ``image_id`` defaults to the stem of the ``<filename>`` element.
    Coordinates are read as reals with no pixel-centre adjustment.
    """
    try:
        root = ET.fromstring(document)
    except ET.ParseError as e:
        line, col = e.position
        raise ParseError(f"malformed XML: {e}", source=source, line=line, column=col + 1) from None
    except (ValueError, UnicodeError) as e:
        raise ParseError(f"unreadable XML: {e}", source=source) from None

    if image_id is None:
        fname = root.findtext("filename")
        image_id = Path(fname.strip()).stem if fname and fname.strip() else "image"
    width = height = None
    size = root.find("size")
    if size is not None:
        w, h = size.findtext("width"), size.findtext("height")
        width = _number(w, "size/width", source) if w and w.strip() else None
        height = _number(h, "size/height", source) if h and h.strip() else None

    gts = []
    for idx, obj in enumerate(root.iter("object")):
        where = f"object {idx}"
        name = _text(obj, "name", where, source)
        bndbox = obj.find("bndbox")
        if bndbox is None:
            raise ParseError(f"{where}: missing <bndbox>", source=source)
        coords = [_number(_text(bndbox, t, where, source), f"{where}/{t}", source)
                  for t in ("xmin", "ymin", "xmax", "ymax")]
        try:
            box = Box(*coords)
        except InvalidBoxError as e:
            prefix = f"{source}: " if source else ""
            raise InvalidBoxError(f"{prefix}{where} ({name}): {e}") from None
        gts.append(GroundTruth(image_id, name, box))
    return ImageRecord(image_id, width, height), gts


def parse_voc_gt(document: str | bytes, image_id: str | None = None, source=None) -> list[GroundTruth]:
    return parse_voc_annotation(document, image_id, source)[1]


def format_voc_annotation(record: ImageRecord, gts: Sequence[GroundTruth]) -> str:
    root = ET.Element("annotation")
    ET.SubElement(root, "filename").text = f"{record.image_id}.jpg"
    if record.width is not None and record.height is not None:
        size = ET.SubElement(root, "size")
        ET.SubElement(size, "width").text = repr(float(record.width))
        ET.SubElement(size, "height").text = repr(float(record.height))
        ET.SubElement(size, "depth").text = "3"
    for g in gts:
        obj = ET.SubElement(root, "object")
        ET.SubElement(obj, "name").text = g.class_id
        ET.SubElement(obj, "difficult").text = "0"
        bb = ET.SubElement(obj, "bndbox")
        for tag, v in zip(("xmin", "ymin", "xmax", "ymax"), g.box.as_tuple()):
            ET.SubElement(bb, tag).text = repr(v)
    ET.indent(root)
    return ET.tostring(root, encoding="unicode") + "\n"


# --- per-class detection text ------------------------------------------------


def parse_detections(stream: str | bytes | IO, class_id: str, source=None) -> list[Detection]:
    """Parse a per-class detection file; see the module docstring for the format."""
    if hasattr(stream, "read"):
        stream = stream.read()
    if isinstance(stream, bytes):
        try:
            stream = stream.decode("utf-8")
        except UnicodeDecodeError as e:
            line = stream.count(b"\n", 0, e.start) + 1
            raise ParseError(f"not valid UTF-8 ({e.reason})", source=source, line=line) from None
    dets = []
    for lineno, raw in enumerate(io.StringIO(stream), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) != 6:
            raise ParseError(f"expected 6 fields, got {len(fields)}", source=source, line=lineno)
        image_id = fields[0]
        try:
            conf, *coords = (float(f) for f in fields[1:])
        except ValueError:
            bad = next(f for f in fields[1:] if not _is_float(f))
            raise ParseError(f"{bad!r} is not a number", source=source, line=lineno) from None
        if not (0.0 <= conf <= 1.0):
            raise ParseError(f"confidence {fields[1]} outside [0, 1]", source=source, line=lineno)
        try:
            box = Box(*coords)
        except InvalidBoxError as e:
            prefix = f"{source}, " if source else ""
            raise InvalidBoxError(f"{prefix}line {lineno}: {e}") from None
        dets.append(Detection(image_id, class_id, box, conf))
    return dets


def _is_float(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def format_detections(dets: Iterable[Detection]) -> str:
    lines = [
        " ".join([d.image_id, repr(d.confidence), *(repr(v) for v in d.box.as_tuple())])
        for d in dets
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def detections_to_json(dets: Iterable[Detection]) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "detections",
        "detections": [
            {"image_id": d.image_id, "class_id": d.class_id, "confidence": d.confidence,
             "box": list(d.box.as_tuple())}
            for d in dets
        ],
    }


def detections_from_json(doc, source=None) -> list[Detection]:
    doc = check_schema(doc, "detections", source)
    out = []
    for i, item in enumerate(doc.get("detections", [])):
        try:
            out.append(Detection(str(item["image_id"]), str(item["class_id"]),
                                 Box(*item["box"]), item["confidence"]))
        except (KeyError, TypeError) as e:
            raise ParseError(f"detection {i}: malformed entry ({e})", source=source) from None
        except CovEvalError as e:
            raise type(e)(f"{source or 'detections'}: detection {i}: {e}") from None
    return out


# --- scenes ------------------------------------------------------------------


def _curve_to_dict(c: PolyCurve) -> dict:
    return {
        "depth": c.depth,
        "seed": c.seed,
        "params": c.params.to_dict(),
        "window": [c.window[0], c.window[1]],
        "points": [
            [float(x), float(y), int(n), int(k), float(t)]
            for (x, y), n, k, t in zip(c.xy, c.n, c.k, c.t_order)
        ],
    }


def _curve_from_dict(d: dict) -> PolyCurve:
    pts = d["points"]
    return PolyCurve(
        xy=np.array([[p[0], p[1]] for p in pts], dtype=np.float64).reshape(-1, 2),
        n=np.array([p[2] for p in pts], dtype=np.int64),
        k=np.array([p[3] for p in pts], dtype=np.int64),
        t_order=np.array([p[4] for p in pts], dtype=np.float64),
        depth=int(d["depth"]),
        params=TransformParams(**d["params"]),
        seed=d["seed"],
        window=(float(d["window"][0]), float(d["window"][1])),
    )


def scene_to_dict(scene: SyntheticScene) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "scene",
        "image_id": scene.image_id,
        "class_id": scene.class_id,
        "width": scene.width,
        "height": scene.height,
        "seed": scene.seed,
        "box_size": scene.box_size,
        "stride": scene.stride,
        "noise": scene.noise.to_dict(),
        "curve": _curve_to_dict(scene.curve),
        "ground_truths": [list(g.box.as_tuple()) for g in scene.gt_boxes],
        "detections": [
            {"box": list(d.box.as_tuple()), "confidence": d.confidence} for d in scene.det_boxes
        ],
    }


def scene_from_dict(doc, source=None) -> SyntheticScene:
    doc = check_schema(doc, "scene", source)
    try:
        image_id, class_id = doc["image_id"], doc["class_id"]
        return SyntheticScene(
            image_id=image_id,
            class_id=class_id,
            width=doc["width"],
            height=doc["height"],
            curve=_curve_from_dict(doc["curve"]),
            gt_boxes=[GroundTruth(image_id, class_id, Box(*b)) for b in doc["ground_truths"]],
            det_boxes=[
                Detection(image_id, class_id, Box(*d["box"]), d["confidence"]) for d in doc["detections"]
            ],
            noise=NoiseModel(**doc["noise"]),
            box_size=doc["box_size"],
            stride=doc["stride"],
            seed=doc["seed"],
        )
    except (KeyError, TypeError, IndexError, ValueError, AttributeError) as e:
        raise ParseError(f"malformed scene document ({type(e).__name__}: {e})", source=source) from None


def write_scene(scene: SyntheticScene, path: str | os.PathLike | None = None) -> str:
    text = dump_json(scene_to_dict(scene))
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def read_scene(source: str | os.PathLike | bytes) -> SyntheticScene:
    """Read a scene from a path, or from JSON text given as ``str``/``bytes``."""
    if isinstance(source, (bytes, str)) and (isinstance(source, bytes) or source.lstrip().startswith("{")):
        return scene_from_dict(load_json_text(source))
    path = Path(source)
    return scene_from_dict(load_json_text(path.read_bytes(), source=path), source=path)


# --- manifests and directories --------------------------------------------------


def manifest_to_dict(m: Manifest) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "manifest",
        "format": m.format,
        "classes": list(m.classes),
        "images": [
            {"image_id": r.image_id, "width": r.width, "height": r.height, "annotation": r.annotation}
            for r in m.images
        ],
    }


def manifest_from_dict(doc, root=None, source=None) -> Manifest:
    doc = check_schema(doc, "manifest", source)
    try:
        images = [
            ImageRecord(str(r["image_id"]), r.get("width"), r.get("height"), r.get("annotation"))
            for r in doc["images"]
        ]
        return Manifest(images, [str(c) for c in doc["classes"]], doc.get("format", "voc"),
                        Path(root) if root else None)
    except (KeyError, TypeError, AttributeError) as e:
        raise ParseError(f"malformed manifest ({type(e).__name__}: {e})", source=source) from None


def write_manifest(m: Manifest, path) -> None:
    Path(path).write_text(dump_json(manifest_to_dict(m)), encoding="utf-8")


def load_manifest(path) -> Manifest:
    path = Path(path)
    m = manifest_from_dict(load_json_text(path.read_bytes(), path), root=path.parent, source=path)
    for r in m.images:
        if r.annotation is not None and not (path.parent / r.annotation).is_file():
            raise ConfigError(f"{path}: annotation for image {r.image_id!r} not found: {r.annotation}")
    return m


def load_ground_truth_dir(directory) -> tuple[Manifest, list[GroundTruth]]:
    """Load VOC annotations from a directory.

    With a ``manifest.json`` the manifest fixes the image list and classes;
    otherwise every ``*.xml`` file is one image named by its file stem and the
    classes are those that occur.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise ConfigError(f"ground-truth directory not found: {directory}")
    manifest_path = directory / MANIFEST_NAME
    gts: list[GroundTruth] = []
    if manifest_path.is_file():
        manifest = load_manifest(manifest_path)
        records = []
        for r in manifest.images:
            if r.annotation is None:
                records.append(r)
                continue
            p = directory / r.annotation
            rec, boxes = parse_voc_annotation(p.read_bytes(), r.image_id, source=p)
            records.append(ImageRecord(r.image_id, r.width if r.width is not None else rec.width,
                                       r.height if r.height is not None else rec.height, r.annotation))
            gts.extend(boxes)
        manifest.images = records
        return manifest, gts

    records = []
    for p in sorted(directory.glob("*.xml")):
        rec, boxes = parse_voc_annotation(p.read_bytes(), p.stem, source=p)
        records.append(ImageRecord(rec.image_id, rec.width, rec.height, p.name))
        gts.extend(boxes)
    classes = sorted({g.class_id for g in gts})
    return Manifest(records, classes, "voc", directory), gts


def load_detection_dir(path, classes: Sequence[str]) -> list[Detection]:
    """Load detections for ``classes`` from a directory or a unified JSON file.

    Every requested class needs its own ``<class>.txt`` file (it may be empty)
    unless a ``detections.json`` is present.
    """
    path = Path(path)
    if path.is_file():
        return detections_from_json(load_json_text(path.read_bytes(), path), source=path)
    if not path.is_dir():
        raise ConfigError(f"detection path not found: {path}")
    unified = path / UNIFIED_DETECTIONS_NAME
    if unified.is_file():
        return detections_from_json(load_json_text(unified.read_bytes(), unified), source=unified)
    dets = []
    for c in classes:
        f = path / f"{c}.txt"
        if not f.is_file():
            raise MissingDetectionsError(c, path)
        dets.extend(parse_detections(f.read_bytes(), c, source=f))
    return dets


# --- validation ----------------------------------------------------------------


@dataclass
class ValidationReport:
    unknown_images: list[str] = field(default_factory=list)
    unknown_classes: list[str] = field(default_factory=list)
    out_of_extent: list[str] = field(default_factory=list)
    duplicate_gts: list[str] = field(default_factory=list)

    @property
    def is_empty(self) -> bool:
        return not (self.unknown_images or self.unknown_classes or self.out_of_extent or self.duplicate_gts)

    def messages(self) -> list[str]:
        out = [f"detections reference unknown image {i!r}" for i in self.unknown_images]
        out += [f"detections reference unknown class {c!r}" for c in self.unknown_classes]
        out += self.out_of_extent + self.duplicate_gts
        return out


def _outside(box: Box, rec: ImageRecord | None) -> bool:
    if rec is None or rec.width is None or rec.height is None:
        return False
    return box.x1 < 0 or box.y1 < 0 or box.x2 > rec.width or box.y2 > rec.height


def validate_inputs(
    manifest: Manifest,
    detections: Iterable[Detection],
    ground_truths: Iterable[GroundTruth] = (),
) -> ValidationReport:
    """Collect warnings about inputs that parse fine but look suspicious.

    Reports detections on images or classes missing from the manifest, boxes
    outside their image, and GT boxes listed twice. Nothing here is fatal.
    """
    report = ValidationReport()
    known_images = set(manifest.image_ids)
    known_classes = set(manifest.classes)
    records = {r.image_id: r for r in manifest.images}

    for d in detections:
        if d.image_id not in known_images and d.image_id not in report.unknown_images:
            report.unknown_images.append(d.image_id)
        if d.class_id not in known_classes and d.class_id not in report.unknown_classes:
            report.unknown_classes.append(d.class_id)
        if _outside(d.box, records.get(d.image_id)):
            report.out_of_extent.append(
                f"detection {d.box.as_tuple()} exceeds the extent of image {d.image_id!r}"
            )

    seen = set()
    for g in ground_truths:
        if _outside(g.box, records.get(g.image_id)):
            report.out_of_extent.append(f"GT box {g.box.as_tuple()} exceeds the extent of image {g.image_id!r}")
        key = (g.image_id, g.class_id, g.box)
        if key in seen:
            report.duplicate_gts.append(f"duplicate GT box {g.box.as_tuple()} ({g.class_id}) in image {g.image_id!r}")
        seen.add(key)
    for msg in report.messages():
        log.warning(msg)
    return report
