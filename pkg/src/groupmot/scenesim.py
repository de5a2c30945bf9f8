"""Seeded synthetic scenes: group-coherent ground truth plus degraded detections.

Targets move in groups. Every group follows one base trajectory with speed
changes and turns, members keep a loosely jittered formation around it.
Solo targets are groups of one. Detections are noisy copies of the ground
truth boxes, removed inside occlusion windows and at random, plus uniformly
placed clutter.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from groupmot.errors import ConfigError
from groupmot.model import BBox, Detection, SequenceMeta

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SceneConfig:
    n_groups: int = 3
    targets_per_group: int = 5
    solo_targets: int = 4
    frames: int = 300
    image_width: int = 1280
    image_height: int = 720
    speed_min: float = 1.5
    speed_max: float = 6.0
    group_spacing: float = 30.0
    jitter_std: float = 0.15
    accel_prob: float = 0.03
    accel_magnitude: float = 0.25
    turn_prob: float = 0.02
    turn_rate_max: float = 0.06
    turn_frames: tuple[int, int] = (10, 30)
    border_turn_rate: float = 0.08
    width_min: float = 14.0
    width_max: float = 26.0
    aspect_min: float = 0.6
    aspect_max: float = 1.0
    occlusion_rate: float = 0.15
    occlusion_len: tuple[int, int] = (4, 14)
    occlusions: tuple[tuple[int, int, int], ...] = ()
    miss_rate: float = 0.02
    fp_rate: float = 0.01
    bbox_noise_std: float = 0.8
    score_mean: float = 0.85
    score_std: float = 0.08
    clutter_score_mean: float = 0.3
    clutter_score_std: float = 0.1
    frame_rate: float = 30.0
    seed: int = 0

    @property
    def n_targets(self) -> int:
        return self.n_groups * self.targets_per_group + self.solo_targets

    def validate(self) -> None:
        for name in ("occlusion_rate", "miss_rate", "fp_rate", "accel_prob", "turn_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")
        if self.frames < 9:
            raise ConfigError("scenes need at least 9 frames")
        if self.n_targets < 1:
            raise ConfigError("scene has no targets")
        if self.speed_min < 0 or self.speed_max < self.speed_min:
            raise ConfigError("bad speed range")
        if self.width_min <= 0 or self.width_max < self.width_min:
            raise ConfigError("bad width range")
        if min(self.jitter_std, self.bbox_noise_std) < 0:
            raise ConfigError("noise levels must be non-negative")
        lo, hi = self.occlusion_len
        if lo < 1 or hi < lo:
            raise ConfigError(f"bad occlusion length range {self.occlusion_len}")
        for span in self.occlusions:
            if len(span) != 3:
                raise ConfigError(f"occlusion spans are (target, start, end), got {span}")
            target, start, end = span
            if not 1 <= target <= self.n_targets:
                raise ConfigError(f"occlusion target {target} out of range 1..{self.n_targets}")
            if not 1 <= start <= end <= self.frames:
                raise ConfigError(f"occlusion span {start}..{end} outside 1..{self.frames}")

    def replace(self, **kw) -> "SceneConfig":
        return dataclasses.replace(self, **kw)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["turn_frames"] = list(self.turn_frames)
        d["occlusion_len"] = list(self.occlusion_len)
        d["occlusions"] = [list(s) for s in self.occlusions]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SceneConfig":
        d = dict(d)
        unknown = set(d) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ConfigError(f"unknown scene keys: {sorted(unknown)}")
        for key in ("turn_frames", "occlusion_len"):
            if key in d:
                d[key] = tuple(d[key])
        if "occlusions" in d:
            d["occlusions"] = tuple(tuple(int(v) for v in s) for s in d["occlusions"])
        return cls(**d)


class Scene(NamedTuple):
    gt: dict[int, list[tuple[int, BBox]]]
    detections: dict[int, list[Detection]]
    meta: SequenceMeta
    occluded: dict[int, list[tuple[int, int]]]
    group_of: dict[int, int]


class _Mover:
    """Base trajectory with speed events and turns."""

    def __init__(self, rng, cfg: SceneConfig, pos, margin):
        self.rng = rng
        self.cfg = cfg
        self.pos = np.asarray(pos, dtype=float)
        self.speed = rng.uniform(cfg.speed_min, cfg.speed_max)
        self.heading = rng.uniform(0, 2 * math.pi)
        self.target_speed = self.speed
        self.turn = 0.0
        self.turn_left = 0
        self.margin = margin

    def step(self) -> np.ndarray:
        cfg, rng = self.cfg, self.rng
        if rng.random() < cfg.accel_prob:
            self.target_speed = rng.uniform(cfg.speed_min, cfg.speed_max)
        if rng.random() < cfg.turn_prob and self.turn_left == 0:
            self.turn = rng.uniform(-cfg.turn_rate_max, cfg.turn_rate_max)
            self.turn_left = int(rng.integers(cfg.turn_frames[0], cfg.turn_frames[1] + 1))
        dv = self.target_speed - self.speed
        self.speed += float(np.clip(dv, -cfg.accel_magnitude, cfg.accel_magnitude))
        if self.turn_left > 0:
            self.heading += self.turn
            self.turn_left -= 1
        # steer back towards the middle when close to the border
        W, H = cfg.image_width, cfg.image_height
        m = self.margin
        x, y = self.pos
        if x < m or x > W - m or y < m or y > H - m:
            want = math.atan2(H / 2 - y, W / 2 - x)
            diff = (want - self.heading + math.pi) % (2 * math.pi) - math.pi
            self.heading += float(np.clip(diff, -cfg.border_turn_rate, cfg.border_turn_rate))
        vel = self.speed * np.array([math.cos(self.heading), math.sin(self.heading)])
        self.pos = self.pos + vel
        return self.pos.copy()


def _occlusion_windows(rng, cfg: SceneConfig, n_targets: int) -> dict[int, list[tuple[int, int]]]:
    spans: dict[int, list[tuple[int, int]]] = {t: [] for t in range(1, n_targets + 1)}
    lo, hi = cfg.occlusion_len
    budget = int(round(cfg.occlusion_rate * cfg.frames))
    for t in range(1, n_targets + 1):
        hidden = 0
        tries = 0
        while hidden < budget and tries < 100:
            tries += 1
            remaining = budget - hidden
            if remaining < lo:
                break
            length = min(int(rng.integers(lo, hi + 1)), remaining)
            start = int(rng.integers(10, max(11, cfg.frames - length)))
            end = start + length - 1
            if end > cfg.frames:
                continue
            # keep a visible gap around every window so tracks can re-lock
            if any(start <= e + 10 and end >= s - 10 for s, e in spans[t]):
                continue
            spans[t].append((start, end))
            hidden += length
        spans[t].sort()
    for target, start, end in cfg.occlusions:
        spans[target].append((start, end))
        spans[target].sort()
    return spans


def generate(cfg: SceneConfig) -> Scene:
    """Build one scene. Identical configs give identical scenes."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    W, H = cfg.image_width, cfg.image_height
    margin = 0.15 * min(W, H)
    n_movers = cfg.n_groups + cfg.solo_targets

    movers = [_Mover(rng, cfg, rng.uniform([margin * 2, margin * 2], [W - 2 * margin, H - 2 * margin]), margin)
              for _ in range(n_movers)]
    members = []  # (target id, mover index, home offset, size)
    tid = 1
    for g in range(n_movers):
        size = cfg.targets_per_group if g < cfg.n_groups else 1
        cols = math.ceil(math.sqrt(size))
        for k in range(size):
            w = rng.uniform(cfg.width_min, cfg.width_max)
            h = w * rng.uniform(cfg.aspect_min, cfg.aspect_max)
            # loose grid formation centred on the group's base point
            row, col = divmod(k, cols)
            home = np.array([col - (cols - 1) / 2.0, row - (math.ceil(size / cols) - 1) / 2.0])
            home = (home + rng.uniform(-0.15, 0.15, 2)) * cfg.group_spacing if size > 1 else np.zeros(2)
            members.append((tid, g, home, (w, h)))
            tid += 1
    n_targets = len(members)
    offsets = {m[0]: m[2].copy() for m in members}
    occluded = _occlusion_windows(rng, cfg, n_targets)

    gt: dict[int, list[tuple[int, BBox]]] = {}
    dets: dict[int, list[Detection]] = {}
    for frame in range(1, cfg.frames + 1):
        centers = [mv.pos.copy() if frame == 1 else mv.step() for mv in movers]
        boxes = []
        for t, g, home, (w, h) in members:
            if frame > 1 and cfg.jitter_std > 0:
                offsets[t] += -0.05 * (offsets[t] - home) + rng.normal(0.0, cfg.jitter_std, 2)
            c = centers[g] + offsets[t]
            c = np.clip(c, [0.0, 0.0], [W, H])
            boxes.append((t, BBox(float(c[0]), float(c[1]), float(w), float(h))))
        gt[frame] = boxes

        frame_dets = []
        for t, box in boxes:
            if any(s <= frame <= e for s, e in occluded[t]):
                continue
            if cfg.miss_rate > 0 and rng.random() < cfg.miss_rate:
                continue
            arr = box.to_array()
            if cfg.bbox_noise_std > 0:
                arr = arr + rng.normal(0.0, cfg.bbox_noise_std, 4)
                arr[2:] = np.maximum(arr[2:], 2.0)
            score = cfg.score_mean if cfg.score_std == 0 else rng.normal(cfg.score_mean, cfg.score_std)
            frame_dets.append(Detection(frame, BBox.from_array(arr), float(np.clip(score, 0.0, 1.0))))
        n_clutter = int(rng.binomial(n_targets, cfg.fp_rate)) if cfg.fp_rate > 0 else 0
        for _ in range(n_clutter):
            w = rng.uniform(cfg.width_min, cfg.width_max)
            h = w * rng.uniform(cfg.aspect_min, cfg.aspect_max)
            x = rng.uniform(w / 2, W - w / 2)
            y = rng.uniform(h / 2, H - h / 2)
            score = rng.normal(cfg.clutter_score_mean, cfg.clutter_score_std)
            frame_dets.append(Detection(frame, BBox(x, y, w, h), float(np.clip(score, 0.0, 1.0))))
        dets[frame] = frame_dets

    meta = SequenceMeta(W, H, cfg.frames, cfg.frame_rate)
    group_of = {t: g for t, g, _, _ in members}
    return Scene(gt, dets, meta, occluded, group_of)


def gt_centers(scene: Scene) -> dict[int, list[tuple[int, float, float]]]:
    """Per-target ``(frame, x, y)`` records, the input of ``stmp.extract_windows``."""
    out: dict[int, list[tuple[int, float, float]]] = {}
    for frame in sorted(scene.gt):
        for tid, box in scene.gt[frame]:
            out.setdefault(tid, []).append((frame, box.x_center, box.y_center))
    return out


def sample_tracks(cfg: SceneConfig, n_tracks: int, length: int, seed: int = 0):
    """Short single-target center tracks for predictor training.

    Tracks start anywhere in the image with the scene's speed, turn and
    acceleration model, so the whole coordinate range is covered even when
    tracks are short. Returns ``{id: [(frame, x, y)]}``.
    """
    rng = np.random.default_rng(seed)
    W, H = cfg.image_width, cfg.image_height
    margin = 0.15 * min(W, H)
    out = {}
    for k in range(1, n_tracks + 1):
        mv = _Mover(rng, cfg, rng.uniform([0.0, 0.0], [W, H]), margin)
        # start mid-manoeuvre as often as the scene would
        mv.speed = rng.uniform(cfg.speed_min, cfg.speed_max)
        if rng.random() < 0.5:
            mv.turn = rng.uniform(-cfg.turn_rate_max, cfg.turn_rate_max)
            mv.turn_left = int(rng.integers(cfg.turn_frames[0], cfg.turn_frames[1] + 1))
        offset = np.zeros(2)
        rows = []
        for f in range(1, length + 1):
            pos = mv.pos.copy() if f == 1 else mv.step()
            if f > 1 and cfg.jitter_std > 0:
                offset += -0.05 * offset + rng.normal(0.0, cfg.jitter_std, 2)
            c = np.clip(pos + offset, [0.0, 0.0], [W, H])
            rows.append((f, float(c[0]), float(c[1])))
        out[k] = rows
    return out


VARIANTS = ("baseline-KF", "+VACKF", "+GMCS", "+STMP")
RATIO_KEYS = ("MOTA", "MOTP", "IDF1", "IDP", "IDR")


@dataclass
class BenchResult:
    seeds: list[int]
    reports: dict[str, list] = field(default_factory=dict)

    def mean(self, variant: str, key: str) -> float:
        return float(np.mean([getattr(r, key) for r in self.reports[variant]]))

    def table(self, keys=("IDSW", "MOTA", "IDF1")) -> str:
        lines = [f"{'variant':<12} " + " ".join(f"{k:>8}" for k in keys)]
        for v in self.reports:
            cells = []
            for k in keys:
                m = self.mean(v, k)
                # ratios print as percentages, counts as they are
                cells.append(f"{100 * m:8.2f}" if k in RATIO_KEYS else f"{m:8.2f}")
            lines.append(f"{v:<12} " + " ".join(cells))
        return "\n".join(lines)


def train_predictor(cfg: SceneConfig, n_tracks: int = 12000, length: int = 9, epochs: int = 100,
                    net_config=None, train_seed: int = 0, data_seed: int = 1):
    """Train the LSTM predictor on simulator tracks drawn from ``cfg``'s motion model.

    Short tracks spread over the whole image generalize better than a few
    long scene tracks, because the predictor works in absolute coordinates.
    """
    from groupmot import stmp

    net_config = net_config or stmp.CascadeConfig()
    meta = SequenceMeta(cfg.image_width, cfg.image_height, length, cfg.frame_rate)
    tracks = sample_tracks(cfg, n_tracks, length, seed=data_seed)
    samples = stmp.extract_windows(tracks, meta, history=net_config.history)
    net = stmp.init_net(net_config, seed=train_seed)
    return stmp.train(net, samples, epochs=epochs, seed=train_seed)


def run_variant(scene: Scene, variant: str, assoc_cfg=None, noise=None, stmp_net=None):
    """Track ``scene`` with one ablation variant and return its EvalReport."""
    from groupmot.association import AssocConfig, Tracker
    from groupmot.metrics import evaluate
    from groupmot.vackf import LinearKF, VACKF

    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    assoc_cfg = assoc_cfg or AssocConfig()
    motion = LinearKF(noise) if variant == "baseline-KF" else VACKF(noise)
    use_gmcs = variant in ("+GMCS", "+STMP")
    net = stmp_net if variant == "+STMP" else None
    if variant == "+STMP" and net is None:
        raise ValueError("the +STMP variant needs a trained predictor")
    tracker = Tracker(assoc_cfg, motion, use_gmcs=use_gmcs, stmp_net=net, meta=scene.meta)
    outputs = tracker.run(scene.detections, scene.meta.frame_count)
    hyp: dict[int, list] = {}
    for o in outputs:
        hyp.setdefault(o.frame, []).append((o.track_id, o.bbox))
    return evaluate(scene.gt, hyp)


def ablation_bench(cfg: SceneConfig, n_seeds: int, stmp_net=None, assoc_cfg=None, noise=None,
                   variants=VARIANTS, seed_offset: int = 0) -> BenchResult:
    """Run every variant on ``n_seeds`` scenes derived from ``cfg``.

    Scenes use seeds ``cfg.seed + seed_offset + k``; results are kept in seed
    order so the means are reproducible.
    """
    seeds = [cfg.seed + seed_offset + k for k in range(n_seeds)]
    result = BenchResult(seeds, {v: [] for v in variants})
    for s in seeds:
        scene = generate(cfg.replace(seed=s))
        for v in variants:
            result.reports[v].append(run_variant(scene, v, assoc_cfg, noise, stmp_net))
    return result
