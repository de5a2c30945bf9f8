"""Group motion compensation for tracks that missed their detection.

Co-moving tracks that were matched this frame act as motion references: if a
neighbour kept a fixed velocity offset to the unmatched track in the previous
frame, the unmatched track is assumed to keep that offset now. Each neighbour
yields one position estimate and the estimates are averaged with similarity
weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from groupmot.errors import MissingHistory, ZeroVelocity

MIN_SPEED = 1e-6
COINCIDENT_WEIGHT = 1e6


class MotionSnapshot(NamedTuple):
    """Read-only view of a track used for neighbour scoring.

    ``prev_*`` are the most recent history values strictly before the current
    frame, or None when the track has no record for the previous frame.
    """

    track_id: int
    class_id: int
    position: np.ndarray
    velocity: np.ndarray
    prev_position: np.ndarray | None = None
    prev_velocity: np.ndarray | None = None


@dataclass(frozen=True)
class NeighborScore:
    d_sim: float
    v_sim: float
    s: float


@dataclass(frozen=True)
class Compensation:
    center: tuple[float, float]
    contributors: tuple[tuple[int, float], ...]
    total_weight: float


def similarity(t_pos, t_vel, width: float, h_pos, h_vel) -> NeighborScore:
    """Score how well a matched track ``h`` describes the motion of ``t``.

    Raises ZeroVelocity when either speed is too small for a heading.
    """
    t_vel = np.asarray(t_vel, dtype=float)
    h_vel = np.asarray(h_vel, dtype=float)
    nt = float(np.hypot(*t_vel))
    nh = float(np.hypot(*h_vel))
    if nt < MIN_SPEED or nh < MIN_SPEED:
        raise ZeroVelocity("velocity cosine undefined for a stationary track")
    d_sim = float(np.hypot(*(np.asarray(t_pos, dtype=float) - np.asarray(h_pos, dtype=float)))) / width
    cos = float(np.dot(t_vel, h_vel)) / (nt * nh)
    v_sim = 2.0 - min(1.0, max(-1.0, cos))
    if v_sim >= 2.0:
        s = -math.inf
    elif d_sim == 0.0:
        s = COINCIDENT_WEIGHT
    else:
        s = 1.0 / (d_sim * v_sim)
    return NeighborScore(d_sim, v_sim, s)


def select_neighbors(target: MotionSnapshot, width: float,
                     candidates: Sequence[MotionSnapshot],
                     threshold: float) -> list[tuple[MotionSnapshot, float]]:
    """Same-class candidates whose similarity exceeds ``threshold``, ordered by id."""
    chosen = []
    for cand in sorted(candidates, key=lambda c: c.track_id):
        if cand.class_id != target.class_id or cand.track_id == target.track_id:
            continue
        try:
            score = similarity(target.position, target.velocity, width, cand.position, cand.velocity)
        except ZeroVelocity:
            continue
        if math.isfinite(score.s) and score.s > threshold:
            chosen.append((cand, score.s))
    return chosen


def compensate(prev_position, prev_velocity,
               neighbors: Sequence[tuple[MotionSnapshot, float]],
               dt: float = 1.0) -> Compensation:
    """Similarity-weighted position estimate from neighbour velocity offsets."""
    if not neighbors:
        raise ValueError("compensate needs at least one neighbour")
    if prev_position is None or prev_velocity is None:
        raise MissingHistory("target has no previous-frame record")
    p_bar = np.asarray(prev_position, dtype=float)
    v_bar = np.asarray(prev_velocity, dtype=float)
    acc = np.zeros(2)
    total = 0.0
    contributors = []
    for nb, s in neighbors:
        if nb.prev_velocity is None:
            raise MissingHistory(f"neighbour {nb.track_id} has no previous-frame record")
        estimate = p_bar + (v_bar - np.asarray(nb.prev_velocity)) * dt + np.asarray(nb.velocity) * dt
        acc += estimate * s
        total += s
        contributors.append((nb.track_id, float(s)))
    center = acc / total
    return Compensation((float(center[0]), float(center[1])), tuple(contributors), float(total))
