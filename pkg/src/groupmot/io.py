"""MOTChallenge text files.

Every line is ``frame,id,left,top,width,height,conf[,class[,visibility[,...]]]``.
Raw detections use ``id = -1``. Boxes are converted to center form on read
and back to edge form on write, with two decimals so files are byte-stable.
"""

from __future__ import annotations

import logging
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, NamedTuple

from groupmot.errors import ParseError
from groupmot.model import BBox, Detection, bbox_to_ltwh

logger = logging.getLogger(__name__)


class MotRecord(NamedTuple):
    frame: int
    id: int
    bbox: BBox
    conf: float
    class_id: int
    visibility: float


def _parse_line(line: str, path, lineno: int) -> MotRecord:
    parts = [p.strip() for p in line.split(",")]
    if not 7 <= len(parts) <= 10:
        raise ParseError(f"expected 7 to 10 comma-separated fields, got {len(parts)}", str(path), lineno)
    try:
        frame = int(float(parts[0]))
        tid = int(float(parts[1]))
        left, top, w, h, conf = (float(p) for p in parts[2:7])
        cls = int(float(parts[7])) if len(parts) > 7 else 1
        vis = float(parts[8]) if len(parts) > 8 else 1.0
    except ValueError as exc:
        raise ParseError(f"non-numeric field ({exc})", str(path), lineno) from None
    if cls < 0:
        cls = 1
    if frame < 1:
        raise ParseError(f"frame must be >= 1, got {frame}", str(path), lineno)
    if not all(math.isfinite(v) for v in (left, top, w, h, conf)):
        raise ParseError("non-finite value", str(path), lineno)
    if w <= 0 or h <= 0:
        raise ParseError(f"box size must be positive, got {w}x{h}", str(path), lineno)
    return MotRecord(frame, tid, BBox.from_ltwh(left, top, w, h), conf, cls, vis)


def read_mot(path) -> list[MotRecord]:
    """Parse a MOT text file; records come back sorted by frame then id."""
    records = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            records.append(_parse_line(line, path, lineno))
    frames = [r.frame for r in records]
    if any(b < a for a, b in zip(frames, frames[1:])):
        logger.warning("%s: frames are not monotonic, re-sorting", path)
    # stable sort keeps file order among equal keys
    return sorted(records, key=lambda r: (r.frame, r.id))


def read_detections(path) -> dict[int, list[Detection]]:
    out: dict[int, list[Detection]] = {}
    for rec in read_mot(path):
        if not 0.0 <= rec.conf <= 1.0:
            raise ParseError(f"detection confidence {rec.conf} outside [0, 1]", str(path))
        out.setdefault(rec.frame, []).append(Detection(rec.frame, rec.bbox, rec.conf, rec.class_id))
    return out


def read_tracks(path, skip_ignored: bool = False) -> dict[int, list[tuple[int, BBox]]]:
    """Ground truth or tracker output as ``frame -> [(id, box)]``.

    With ``skip_ignored`` lines whose conf column is 0 (MOT17 ignore flag)
    are dropped.
    """
    out: dict[int, list[tuple[int, BBox]]] = {}
    for rec in read_mot(path):
        if skip_ignored and rec.conf == 0:
            continue
        out.setdefault(rec.frame, []).append((rec.id, rec.bbox))
    return out


def format_line(frame: int, tid: int, box: BBox, conf: float = 1.0, class_id: int = 1,
                visibility: float = 1.0) -> str:
    left, top, w, h = bbox_to_ltwh(box)
    return f"{frame},{tid},{left:.2f},{top:.2f},{w:.2f},{h:.2f},{conf:.2f},{class_id},{visibility:g}"


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_tracks(path, outputs: Iterable) -> None:
    """Write tracker outputs (objects with frame, track_id, bbox, class_id)."""
    rows = sorted(outputs, key=lambda o: (o.frame, o.track_id))
    text = "".join(format_line(o.frame, o.track_id, o.bbox, 1.0, o.class_id) + "\n" for o in rows)
    atomic_write_text(path, text)


def write_boxes(path, frames: dict[int, list[tuple[int, BBox]]]) -> None:
    """Write ``frame -> [(id, box)]`` (ground truth) with conf 1."""
    lines = []
    for f in sorted(frames):
        for tid, box in sorted(frames[f], key=lambda x: x[0]):
            lines.append(format_line(f, tid, box) + "\n")
    atomic_write_text(path, "".join(lines))


def write_detections(path, frames: dict[int, list[Detection]]) -> None:
    lines = []
    for f in sorted(frames):
        for d in frames[f]:
            lines.append(format_line(f, -1, d.bbox, d.score, d.class_id) + "\n")
    atomic_write_text(path, "".join(lines))
