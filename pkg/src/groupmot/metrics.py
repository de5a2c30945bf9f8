"""CLEAR-MOT and identity metrics.

Ground truth and hypotheses are both given as ``frame -> list of (id, BBox)``
mappings. Boxes match when IoU >= 0.5.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np

from groupmot.assignment import gated_assignment, hungarian
from groupmot.errors import NoMatches, ZeroGT
from groupmot.model import BBox, iou_matrix

IOU_THRESHOLD = 0.5

FrameBoxes = Mapping[int, Sequence[tuple[int, BBox]]]


@dataclass
class FrameMatchState:
    matches: dict[int, list[tuple[int, int, float]]] = field(default_factory=dict)
    tp: int = 0
    fp: int = 0
    fn: int = 0
    idsw: int = 0
    n_gt: int = 0
    n_hyp: int = 0
    per_frame: dict[int, dict[str, int]] = field(default_factory=dict)

    @property
    def ious(self) -> list[float]:
        return [m[2] for f in sorted(self.matches) for m in self.matches[f]]


@dataclass
class EvalReport:
    MOTA: float
    MOTP: float
    IDF1: float
    IDP: float
    IDR: float
    FP: int
    FN: int
    IDSW: int
    GT: int
    IDTP: int
    IDFP: int
    IDFN: int
    MT: int
    ML: int
    n_gt_tracks: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def _arrays(items):
    ids = np.array([i for i, _ in items], dtype=int)
    boxes = np.array([b.to_array() for _, b in items], dtype=float).reshape(-1, 4)
    return ids, boxes


def match_frames(gt: FrameBoxes, hyp: FrameBoxes, threshold: float = IOU_THRESHOLD) -> FrameMatchState:
    state = FrameMatchState()
    prev: dict[int, int] = {}
    last_matched: dict[int, int] = {}
    for frame in sorted(set(gt) | set(hyp)):
        g_ids, g_boxes = _arrays(gt.get(frame, []))
        h_ids, h_boxes = _arrays(hyp.get(frame, []))
        ious = iou_matrix(g_boxes, h_boxes)
        g_index = {g: i for i, g in enumerate(g_ids)}
        h_index = {h: j for j, h in enumerate(h_ids)}
        pairs = []
        used_g, used_h = set(), set()
        # keep last frame's correspondences that still overlap
        for g, h in prev.items():
            if g in g_index and h in h_index:
                i, j = g_index[g], h_index[h]
                if ious[i, j] >= threshold and i not in used_g and j not in used_h:
                    pairs.append((i, j))
                    used_g.add(i)
                    used_h.add(j)
        free_g = [i for i in range(len(g_ids)) if i not in used_g]
        free_h = [j for j in range(len(h_ids)) if j not in used_h]
        if free_g and free_h:
            sub = ious[np.ix_(free_g, free_h)]
            for a, b in gated_assignment(1.0 - sub, sub >= threshold):
                pairs.append((free_g[a], free_h[b]))
        frame_idsw = 0
        cur = {}
        matches = []
        for i, j in sorted(pairs):
            g, h = int(g_ids[i]), int(h_ids[j])
            if g in last_matched and last_matched[g] != h:
                frame_idsw += 1
            last_matched[g] = h
            cur[g] = h
            matches.append((g, h, float(ious[i, j])))
        tp = len(pairs)
        fp = len(h_ids) - tp
        fn = len(g_ids) - tp
        state.matches[frame] = matches
        state.per_frame[frame] = {"tp": tp, "fp": fp, "fn": fn, "idsw": frame_idsw}
        state.tp += tp
        state.fp += fp
        state.fn += fn
        state.idsw += frame_idsw
        state.n_gt += len(g_ids)
        state.n_hyp += len(h_ids)
        prev = cur
    return state


def mota(fn: int, fp: int, idsw: int, gt: int) -> float:
    if gt <= 0:
        raise ZeroGT("MOTA needs at least one ground-truth box")
    return 1.0 - (fn + fp + idsw) / gt


def motp(state: FrameMatchState) -> float:
    ious = state.ious
    if not ious:
        raise NoMatches("MOTP needs at least one match")
    return float(sum(ious) / len(ious))


def _by_track(frames: FrameBoxes) -> dict[int, dict[int, BBox]]:
    out: dict[int, dict[int, BBox]] = defaultdict(dict)
    for f, items in frames.items():
        for tid, box in items:
            out[int(tid)][int(f)] = box
    return dict(out)


def overlap_counts(gt_tracks: Mapping[int, Mapping[int, BBox]], hyp_tracks: Mapping[int, Mapping[int, BBox]],
                   threshold: float = IOU_THRESHOLD) -> tuple[list[int], list[int], np.ndarray]:
    """Number of co-present frames with IoU >= threshold for every (gt, hyp) pair."""
    g_ids = sorted(gt_tracks)
    h_ids = sorted(hyp_tracks)
    counts = np.zeros((len(g_ids), len(h_ids)), dtype=int)
    if not g_ids or not h_ids:
        return g_ids, h_ids, counts
    per_frame: dict[int, tuple[list, list]] = defaultdict(lambda: ([], []))
    for i, g in enumerate(g_ids):
        for f, box in gt_tracks[g].items():
            per_frame[f][0].append((i, box))
    for j, h in enumerate(h_ids):
        for f, box in hyp_tracks[h].items():
            per_frame[f][1].append((j, box))
    for f, (gs, hs) in per_frame.items():
        if not gs or not hs:
            continue
        gi, gb = _arrays(gs)
        hi, hb = _arrays(hs)
        hit = iou_matrix(gb, hb) >= threshold
        counts[np.ix_(gi, hi)] += hit
    return g_ids, h_ids, counts


def idf1(gt_tracks, hyp_tracks, threshold: float = IOU_THRESHOLD):
    """Identity F1 from the trajectory pairing that maximizes ID true positives.

    Returns ``(IDF1, IDP, IDR, IDTP, IDFP, IDFN)``.
    """
    n_gt = sum(len(v) for v in gt_tracks.values())
    n_hyp = sum(len(v) for v in hyp_tracks.values())
    _, _, counts = overlap_counts(gt_tracks, hyp_tracks, threshold)
    idtp = 0
    if counts.size:
        pairs = hungarian(-counts.astype(float))
        idtp = int(sum(counts[i, j] for i, j in pairs))
    idfp = n_hyp - idtp
    idfn = n_gt - idtp
    denom = 2 * idtp + idfp + idfn
    f1 = 2 * idtp / denom if denom else 0.0
    idp = idtp / (idtp + idfp) if idtp + idfp else 0.0
    idr = idtp / (idtp + idfn) if idtp + idfn else 0.0
    return f1, idp, idr, idtp, idfp, idfn


def mt_ml(gt_tracks: Mapping[int, Mapping[int, BBox]], state: FrameMatchState) -> tuple[int, int]:
    tracked = defaultdict(int)
    for matches in state.matches.values():
        for g, _, _ in matches:
            tracked[g] += 1
    mt = ml = 0
    for g, frames in gt_tracks.items():
        if not frames:
            continue
        ratio = tracked[g] / len(frames)
        if ratio > 0.8:
            mt += 1
        elif ratio < 0.2:
            ml += 1
    return mt, ml


def evaluate(gt: FrameBoxes, hyp: FrameBoxes) -> EvalReport:
    state = match_frames(gt, hyp)
    gt_tracks = _by_track(gt)
    hyp_tracks = _by_track(hyp)
    f1, idp, idr, idtp, idfp, idfn = idf1(gt_tracks, hyp_tracks)
    mt, ml = mt_ml(gt_tracks, state)
    motp_value = motp(state) if state.tp else 0.0
    return EvalReport(
        MOTA=mota(state.fn, state.fp, state.idsw, state.n_gt),
        MOTP=motp_value,
        IDF1=f1, IDP=idp, IDR=idr,
        FP=state.fp, FN=state.fn, IDSW=state.idsw, GT=state.n_gt,
        IDTP=idtp, IDFP=idfp, IDFN=idfn, MT=mt, ML=ml,
        n_gt_tracks=len(gt_tracks),
    )


def format_report(report: EvalReport, name: str = "sequence") -> str:
    """Human-readable one-row table; fractions shown as percentages."""
    cols = ["MOTA", "MOTP", "IDF1", "IDP", "IDR", "MT", "ML", "FP", "FN", "IDSW", "GT"]
    d = report.to_dict()
    cells = []
    for c in cols:
        v = d[c]
        cells.append(f"{100 * v:.1f}" if isinstance(v, float) else str(v))
    widths = [max(len(c), len(v)) for c, v in zip(cols, cells)]
    head = f"{'name':<12} " + " ".join(c.rjust(w) for c, w in zip(cols, widths))
    row = f"{name[:12]:<12} " + " ".join(v.rjust(w) for v, w in zip(cells, widths))
    return head + "\n" + row
