"""Offline multi-object tracking with group motion priors.

Turns per-frame detection files into identity-consistent trajectories using a
velocity adaptive cubature Kalman filter, group motion compensation for
unmatched tracks and a cascaded LSTM fallback predictor.
"""

from groupmot.model import BBox, Detection, SequenceMeta, Track, TrackStatus, iou

__all__ = ["BBox", "Detection", "SequenceMeta", "Track", "TrackStatus", "iou"]
__version__ = "0.1.0"
