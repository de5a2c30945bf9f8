"""Per-frame data association and track lifecycle.

One call to :meth:`Tracker.step` runs the whole frame:

1. predict every live track;
2. match Confirmed and Lost tracks to high-score detections;
3. match the still-unmatched Confirmed tracks to low-score detections with a
   tighter IoU gate;
4. match Tentative tracks to the leftover high-score detections;
5. for Confirmed tracks that are still unmatched, synthesize a pseudo
   observation from co-moving neighbours (group motion compensation) or, when
   no neighbour qualifies, from the LSTM predictor; otherwise let them coast;
6. spawn Tentative tracks from unused high-score detections;
7. age out Lost tracks and emit the Confirmed ones.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from groupmot import gmcs, stmp
from groupmot.assignment import gated_assignment
from groupmot.errors import (
    CovarianceNotPSD,
    FrameOrderError,
    MissingHistory,
    SingularInnovation,
    WindowTooShort,
)
from groupmot.model import BBox, Detection, SequenceMeta, Track, TrackStatus, iou_matrix
from groupmot.vackf import VACKF

logger = logging.getLogger(__name__)


@dataclass
class AssocConfig:
    tau_high: float = 0.6
    tau_low: float = 0.1
    iou_gate_first: float = 0.2
    iou_gate_second: float = 0.5
    iou_gate_unconfirmed: float = 0.3
    track_buffer: int = 30
    min_hits: int = 3
    gmcs_sim_threshold: float = 0.5
    max_pseudo_frames: int = 8

    def __post_init__(self):
        if not 0.0 <= self.tau_low < self.tau_high <= 1.0:
            raise ValueError(f"need 0 <= tau_low < tau_high <= 1, got {self.tau_low}, {self.tau_high}")
        for name in ("iou_gate_first", "iou_gate_second", "iou_gate_unconfirmed"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.track_buffer < 1 or self.min_hits < 1 or self.max_pseudo_frames < 0:
            raise ValueError("track_buffer and min_hits must be >= 1, max_pseudo_frames >= 0")


@dataclass
class Assignment:
    matched: list[tuple[int, int]] = field(default_factory=list)
    unmatched_tracks: list[int] = field(default_factory=list)
    unmatched_dets: list[int] = field(default_factory=list)


class TrackOutput(NamedTuple):
    frame: int
    track_id: int
    bbox: BBox
    class_id: int


def split_detections(dets: Sequence[Detection], cfg: AssocConfig) -> tuple[list[Detection], list[Detection]]:
    high = [d for d in dets if d.score >= cfg.tau_high]
    low = [d for d in dets if cfg.tau_low <= d.score < cfg.tau_high]
    return high, low


def associate(track_boxes, track_classes, dets: Sequence[Detection], gate: float) -> Assignment:
    """IoU matching of predicted track boxes against detections.

    Pairs with IoU below ``gate`` or with different classes are forbidden.
    """
    track_boxes = np.asarray(track_boxes, dtype=float).reshape(-1, 4)
    n_t, n_d = len(track_boxes), len(dets)
    if n_t == 0 or n_d == 0:
        return Assignment([], list(range(n_t)), list(range(n_d)))
    det_boxes = np.array([d.bbox.to_array() for d in dets])
    ious = iou_matrix(track_boxes, det_boxes)
    same_class = np.asarray(track_classes)[:, None] == np.array([d.class_id for d in dets])[None, :]
    allowed = (ious >= gate) & (ious > 0.0) & same_class
    matched = gated_assignment(1.0 - ious, allowed)
    mt = {t for t, _ in matched}
    md = {d for _, d in matched}
    return Assignment(matched,
                      [i for i in range(n_t) if i not in mt],
                      [j for j in range(n_d) if j not in md])


def _box_of(state) -> np.ndarray:
    box = state.x[:4].copy()
    box[2:] = np.maximum(box[2:], 1.0)
    return box


class Tracker:
    """Tracking state for one sequence.

    ``motion`` is a filter object (``VACKF`` or ``LinearKF``); ``stmp_net``
    enables the LSTM fallback and needs ``meta`` for coordinate scaling.
    """

    def __init__(self, cfg: AssocConfig | None = None, motion=None, use_gmcs: bool = True,
                 stmp_net: stmp.CascadeNet | None = None, meta: SequenceMeta | None = None):
        self.cfg = cfg or AssocConfig()
        self.motion = motion or VACKF()
        self.use_gmcs = use_gmcs
        self.stmp_net = stmp_net
        if stmp_net is not None and meta is None:
            raise ValueError("the LSTM predictor needs sequence metadata")
        self.meta = meta
        self.tracks: list[Track] = []
        self.frame = 0
        self._next_id = 1
        self.stats = {"gmcs": 0, "stmp": 0, "coast": 0}

    # -- helpers -----------------------------------------------------------
    def _spawn(self, det: Detection, frame: int) -> Track:
        state = self.motion.initiate(det.bbox)
        t = Track(self._next_id, det.class_id, state, TrackStatus.TENTATIVE,
                  hits=1, start_frame=frame, last_frame=frame, score=det.score)
        self._next_id += 1
        t.record(frame, state.x[:2], state.x[4:6])
        return t

    def _apply_detection(self, t: Track, det: Detection, frame: int) -> None:
        t.filter = self.motion.update(t.filter, det.bbox)
        t.hits += 1
        t.frames_since_update = 0
        t.last_frame = frame
        t.score = det.score
        if t.status == TrackStatus.LOST:
            t.status = TrackStatus.CONFIRMED
        elif t.status == TrackStatus.TENTATIVE and t.hits >= self.cfg.min_hits:
            t.status = TrackStatus.CONFIRMED
        t.record(frame, t.filter.x[:2], t.filter.x[4:6])

    def _snapshot(self, t: Track, frame: int) -> gmcs.MotionSnapshot:
        # the last record before this frame, bridging at most a one-frame gap
        prev = t.entry_at(frame - 1)
        if prev is None:
            prev = t.entry_at(frame - 2)
        return gmcs.MotionSnapshot(
            t.id, t.class_id, t.filter.x[:2].copy(), t.filter.x[4:6].copy(),
            None if prev is None else np.asarray(prev.position),
            None if prev is None else np.asarray(prev.velocity),
        )

    def _pseudo_center(self, t: Track, frame: int, neighbours) -> tuple[float, float] | None:
        if self.use_gmcs:
            target = self._snapshot(t, frame)
            chosen = gmcs.select_neighbors(target, float(t.filter.x[2]), neighbours,
                                           self.cfg.gmcs_sim_threshold)
            if chosen:
                try:
                    comp = gmcs.compensate(target.prev_position, target.prev_velocity, chosen)
                except MissingHistory:
                    comp = None
                if comp is not None:
                    self.stats["gmcs"] += 1
                    return comp.center
        if self.stmp_net is not None:
            try:
                center = stmp.predict_center(self.stmp_net, t, self.meta, frame)
            except WindowTooShort:
                return None
            self.stats["stmp"] += 1
            return center
        return None

    # -- main loop ---------------------------------------------------------
    def step(self, frame: int, dets: Sequence[Detection]) -> list[TrackOutput]:
        if frame <= self.frame:
            raise FrameOrderError(f"frame {frame} does not follow frame {self.frame}")
        for d in dets:
            if d.frame != frame:
                raise ValueError(f"detection for frame {d.frame} passed with frame {frame}")
        cfg = self.cfg
        steps = frame - self.frame if self.frame else 1
        self.frame = frame

        live = []
        for t in self.tracks:
            try:
                for _ in range(steps):
                    t.filter = self.motion.predict(t.filter)
            except CovarianceNotPSD:
                logger.warning("dropping track %d: covariance blew up", t.id)
                t.status = TrackStatus.REMOVED
                continue
            live.append(t)
        self.tracks = live

        high, low = split_detections(dets, cfg)
        pool = [t for t in self.tracks if t.status in (TrackStatus.CONFIRMED, TrackStatus.LOST)]
        tentative = [t for t in self.tracks if t.status == TrackStatus.TENTATIVE]

        # first association: confirmed + lost vs high
        a1 = associate([_box_of(t.filter) for t in pool], [t.class_id for t in pool], high,
                       cfg.iou_gate_first)
        first_matched = []
        for ti, di in a1.matched:
            self._apply_detection(pool[ti], high[di], frame)
            first_matched.append(pool[ti])
        rest = [pool[i] for i in a1.unmatched_tracks]
        high_left = [high[j] for j in a1.unmatched_dets]

        # second association: still-active confirmed tracks vs low
        active = [t for t in rest if t.status == TrackStatus.CONFIRMED]
        a2 = associate([_box_of(t.filter) for t in active], [t.class_id for t in active], low,
                       cfg.iou_gate_second)
        matched2 = set()
        for ti, di in a2.matched:
            self._apply_detection(active[ti], low[di], frame)
            matched2.add(active[ti].id)
        unmatched = [t for t in rest if t.id not in matched2]

        # tentative tracks vs leftover high detections
        a3 = associate([_box_of(t.filter) for t in tentative], [t.class_id for t in tentative],
                       high_left, cfg.iou_gate_unconfirmed)
        for ti, di in a3.matched:
            self._apply_detection(tentative[ti], high_left[di], frame)
        for ti in a3.unmatched_tracks:
            tentative[ti].status = TrackStatus.REMOVED
        spawn_from = [high_left[j] for j in a3.unmatched_dets]

        # unmatched tracks: pseudo observation or coast
        neighbours = [self._snapshot(t, frame) for t in first_matched
                      if t.status == TrackStatus.CONFIRMED]
        neighbours = [n for n in neighbours if n.prev_velocity is not None]
        for t in unmatched:
            t.frames_since_update += 1
            center = None
            if t.frames_since_update <= cfg.max_pseudo_frames:
                center = self._pseudo_center(t, frame, neighbours)
            if center is not None:
                z = np.array([center[0], center[1], t.filter.x[2], t.filter.x[3]])
                try:
                    t.filter = self.motion.update(t.filter, z)
                except (SingularInnovation, CovarianceNotPSD):
                    center = None
            if center is not None:
                t.status = TrackStatus.CONFIRMED
            else:
                self.stats["coast"] += 1
                t.status = TrackStatus.LOST
            # coasted states are recorded too, so history stays contiguous
            t.record(frame, t.filter.x[:2], t.filter.x[4:6])
            if t.frames_since_update > cfg.track_buffer:
                t.status = TrackStatus.REMOVED

        for det in spawn_from:
            self.tracks.append(self._spawn(det, frame))

        self.tracks = [t for t in self.tracks if t.status != TrackStatus.REMOVED]
        out = []
        for t in sorted(self.tracks, key=lambda t: t.id):
            if t.status == TrackStatus.CONFIRMED:
                out.append(TrackOutput(frame, t.id, BBox.from_array(_box_of(t.filter)), t.class_id))
        return out

    def run(self, frames: dict[int, list[Detection]], n_frames: int | None = None) -> list[TrackOutput]:
        """Track a whole sequence given ``frame -> detections``; empty frames are stepped too."""
        last = n_frames or (max(frames) if frames else 0)
        out = []
        for f in range(1, last + 1):
            out.extend(self.step(f, frames.get(f, [])))
        return out
