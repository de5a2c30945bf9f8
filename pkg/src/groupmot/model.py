"""Domain types and axis-aligned box geometry.

Boxes are stored center-based (``x_center, y_center, width, height``) which
matches the filter state layout; the edge-based ``ltwh`` form only appears at
file boundaries.
"""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Any, NamedTuple

import numpy as np

HISTORY_LEN = 30


@dataclass(frozen=True)
class BBox:
    x_center: float
    y_center: float
    width: float
    height: float

    def __post_init__(self):
        vals = (self.x_center, self.y_center, self.width, self.height)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite box {vals}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"box must have positive size, got w={self.width} h={self.height}")

    @classmethod
    def from_ltwh(cls, left: float, top: float, width: float, height: float) -> "BBox":
        return cls(left + width / 2.0, top + height / 2.0, width, height)

    @classmethod
    def from_array(cls, arr) -> "BBox":
        return cls(float(arr[0]), float(arr[1]), float(arr[2]), float(arr[3]))

    def to_array(self) -> np.ndarray:
        return np.array([self.x_center, self.y_center, self.width, self.height], dtype=float)

    @property
    def center(self) -> tuple[float, float]:
        return (self.x_center, self.y_center)

    def tlbr(self) -> tuple[float, float, float, float]:
        hw, hh = self.width / 2.0, self.height / 2.0
        return (self.x_center - hw, self.y_center - hh, self.x_center + hw, self.y_center + hh)


@dataclass(frozen=True)
class Detection:
    frame: int
    bbox: BBox
    score: float
    class_id: int = 1

    def __post_init__(self):
        if self.frame < 1:
            raise ValueError(f"frames are 1-based, got {self.frame}")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must lie in [0, 1], got {self.score}")


@dataclass(frozen=True)
class SequenceMeta:
    image_width: float
    image_height: float
    frame_count: int
    frame_rate: float = 30.0

    def __post_init__(self):
        if min(self.image_width, self.image_height, self.frame_count, self.frame_rate) <= 0:
            raise ValueError("sequence metadata must be positive")


class TrackStatus(enum.Enum):
    TENTATIVE = "Tentative"
    CONFIRMED = "Confirmed"
    LOST = "Lost"
    REMOVED = "Removed"


class HistoryEntry(NamedTuple):
    frame: int
    position: tuple[float, float]
    velocity: tuple[float, float]


@dataclass
class Track:
    """One identity, its filter state and a short motion history.

    ``filter`` is whatever state object the motion model produces (a
    :class:`groupmot.vackf.FilterState` for both supported filters).
    """

    id: int
    class_id: int
    filter: Any
    status: TrackStatus = TrackStatus.TENTATIVE
    hits: int = 1
    frames_since_update: int = 0
    start_frame: int = 1
    last_frame: int = 1
    score: float = 1.0
    history: deque = field(default_factory=lambda: deque(maxlen=HISTORY_LEN))

    def record(self, frame: int, position, velocity) -> None:
        """Append a history entry; frames must strictly increase."""
        if self.history and frame <= self.history[-1].frame:
            raise ValueError(f"history frame {frame} not after {self.history[-1].frame}")
        self.history.append(
            HistoryEntry(
                int(frame),
                (float(position[0]), float(position[1])),
                (float(velocity[0]), float(velocity[1])),
            )
        )

    def entry_at(self, frame: int) -> HistoryEntry | None:
        for entry in reversed(self.history):
            if entry.frame == frame:
                return entry
            if entry.frame < frame:
                return None
        return None

    def consecutive_positions(self, end_frame: int, length: int) -> np.ndarray | None:
        """Positions for frames ``end_frame - length + 1 .. end_frame`` or None."""
        if len(self.history) < length:
            return None
        tail = list(self.history)[-length:]
        frames = [e.frame for e in tail]
        if frames[-1] != end_frame or frames[0] != end_frame - length + 1:
            return None
        return np.array([e.position for e in tail], dtype=float)


def iou(a: BBox, b: BBox) -> float:
    if a == b:
        return 1.0
    ax0, ay0, ax1, ay1 = a.tlbr()
    bx0, by0, bx1, by1 = b.tlbr()
    iw = min(ax1, bx1) - max(ax0, bx0)
    ih = min(ay1, by1) - max(ay0, by0)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = a.width * a.height + b.width * b.height - inter
    return float(min(1.0, inter / union))


def iou_matrix(boxes_a: np.ndarray, boxes_b: np.ndarray) -> np.ndarray:
    """Pairwise IoU between two ``(N, 4)`` / ``(M, 4)`` arrays of center boxes."""
    a = np.asarray(boxes_a, dtype=float).reshape(-1, 4)
    b = np.asarray(boxes_b, dtype=float).reshape(-1, 4)
    if len(a) == 0 or len(b) == 0:
        return np.zeros((len(a), len(b)))
    a0 = a[:, :2] - a[:, 2:] / 2.0
    a1 = a[:, :2] + a[:, 2:] / 2.0
    b0 = b[:, :2] - b[:, 2:] / 2.0
    b1 = b[:, :2] + b[:, 2:] / 2.0
    lo = np.maximum(a0[:, None, :], b0[None, :, :])
    hi = np.minimum(a1[:, None, :], b1[None, :, :])
    wh = np.clip(hi - lo, 0.0, None)
    inter = wh[..., 0] * wh[..., 1]
    area_a = a[:, 2] * a[:, 3]
    area_b = b[:, 2] * b[:, 3]
    union = area_a[:, None] + area_b[None, :] - inter
    return np.clip(inter / union, 0.0, 1.0)


def bbox_to_ltwh(b: BBox) -> tuple[float, float, float, float]:
    return (b.x_center - b.width / 2.0, b.y_center - b.height / 2.0, b.width, b.height)


def ltwh_to_bbox(left: float, top: float, width: float, height: float) -> BBox:
    return BBox.from_ltwh(left, top, width, height)
