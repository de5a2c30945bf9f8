"""Command-line entry points: track, eval, simulate, train-stmp, bench.

Exit codes: 0 success, 1 runtime or data error, 2 usage error (argparse).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from groupmot import config as config_mod
from groupmot import io as mot_io
from groupmot import stmp
from groupmot.association import Tracker
from groupmot.errors import ConfigError, ParseError, TrackingError
from groupmot.metrics import evaluate, format_report
from groupmot.model import SequenceMeta
from groupmot.vackf import VACKF, LinearKF

logger = logging.getLogger("groupmot")


# -- track -------------------------------------------------------------------

def _track_one(cfg: config_mod.RunConfig, det_path: str, out_path: str) -> tuple[int, int]:
    """Track one sequence; returns (number of track ids, number of frames)."""
    frames = mot_io.read_detections(det_path)
    n_frames = max(frames) if frames else 0
    meta = SequenceMeta(cfg.image_width, cfg.image_height, max(n_frames, 1), cfg.frame_rate)
    motion = VACKF(cfg.noise) if cfg.use_vackf else LinearKF(cfg.noise)
    net = None
    if cfg.use_stmp and cfg.stmp_checkpoint:
        net = stmp.load(cfg.stmp_checkpoint)
    elif cfg.use_stmp:
        logger.info("no stmp_checkpoint configured, LSTM fallback disabled")
    tracker = Tracker(cfg.assoc, motion, use_gmcs=cfg.use_gmcs, stmp_net=net, meta=meta)
    outputs = tracker.run(frames, n_frames)
    mot_io.write_tracks(out_path, outputs)
    mot_io.atomic_write_text(str(out_path) + ".config.txt", cfg.dumps())
    return len({o.track_id for o in outputs}), n_frames


def _track_job(args):
    cfg, det, out = args
    return _track_one(cfg, det, out)


def cmd_track(args) -> int:
    cfg = config_mod.load(args.config)
    if args.disable_vackf:
        cfg.use_vackf = False
    if args.disable_gmcs:
        cfg.use_gmcs = False
    if args.disable_stmp:
        cfg.use_stmp = False
    dets = list(args.det)
    if len(dets) == 1 and not Path(args.out).is_dir():
        jobs = [(cfg, dets[0], args.out)]
    else:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        jobs = [(cfg, d, str(out_dir / (Path(d).stem + ".txt"))) for d in dets]
    start = time.perf_counter()
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_track_job, jobs))
    else:
        results = [_track_job(j) for j in jobs]
    elapsed = time.perf_counter() - start
    for (_, det, out), (n_tracks, n_frames) in zip(jobs, results):
        print(f"{det}: tracks={n_tracks} frames={n_frames} -> {out}")
    print(f"done: sequences={len(jobs)} time={elapsed:.2f}s")
    return 0


# -- eval --------------------------------------------------------------------

def cmd_eval(args) -> int:
    gt = mot_io.read_tracks(args.gt, skip_ignored=args.skip_ignored)
    hyp = mot_io.read_tracks(args.result)
    gt_last = max(gt) if gt else 0
    hyp_last = max(hyp) if hyp else 0
    if hyp_last > gt_last:
        raise ValueError(f"sequence length mismatch: result runs to frame {hyp_last}, "
                         f"ground truth ends at frame {gt_last}")
    report = evaluate(gt, hyp)
    print(format_report(report, Path(args.result).stem))
    if args.report:
        lines = [f"{k}={v!r}" if isinstance(v, float) else f"{k}={v}" for k, v in report.to_dict().items()]
        mot_io.atomic_write_text(args.report, "\n".join(lines) + "\n")
    return 0


# -- simulate ----------------------------------------------------------------

def _scene_config(path, seed=None):
    from groupmot.scenesim import SceneConfig

    cfg = SceneConfig()
    if path:
        with open(path) as fh:
            cfg = SceneConfig.from_dict(json.load(fh))
    if seed is not None:
        cfg = cfg.replace(seed=seed)
    cfg.validate()
    return cfg


def cmd_simulate(args) -> int:
    from groupmot.scenesim import generate

    cfg = _scene_config(args.scene_config, args.seed)
    scene = generate(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    mot_io.write_boxes(out / "gt.txt", scene.gt)
    mot_io.write_detections(out / "det.txt", scene.detections)
    info = {"scene": cfg.to_dict(),
            "meta": {"image_width": scene.meta.image_width, "image_height": scene.meta.image_height,
                     "frame_count": scene.meta.frame_count, "frame_rate": scene.meta.frame_rate},
            "occlusions": {str(k): [list(s) for s in v] for k, v in sorted(scene.occluded.items())},
            "groups": {str(k): v for k, v in sorted(scene.group_of.items())}}
    mot_io.atomic_write_text(out / "scene.json", json.dumps(info, indent=2, sort_keys=True) + "\n")
    n_det = sum(len(v) for v in scene.detections.values())
    print(f"scene seed={cfg.seed} targets={cfg.n_targets} frames={cfg.frames} detections={n_det} -> {out}")
    return 0


# -- train-stmp --------------------------------------------------------------

def cmd_train_stmp(args) -> int:
    net_cfg = stmp.CascadeConfig(tuple(args.hidden), tuple(args.windows), args.fc_hidden)
    if args.gt:
        samples = []
        for path in args.gt:
            tracks = mot_io.read_tracks(path, skip_ignored=True)
            traj: dict[int, list] = {}
            for f, items in tracks.items():
                for tid, box in items:
                    traj.setdefault(tid, []).append((f, box.x_center, box.y_center))
            meta = SequenceMeta(args.image_width, args.image_height, max(tracks) if tracks else 1)
            samples.extend(stmp.extract_windows(traj, meta, history=net_cfg.history))
        if not samples:
            raise ValueError("ground-truth files hold no run of consecutive frames long enough")
        result = stmp.train(stmp.init_net(net_cfg, seed=args.seed), samples, epochs=args.epochs,
                            lr0=args.lr, seed=args.seed)
    else:
        from groupmot.scenesim import train_predictor

        cfg = _scene_config(args.scene_config)
        result = train_predictor(cfg, n_tracks=args.n_tracks, length=args.length, epochs=args.epochs,
                                 net_config=net_cfg, train_seed=args.seed, data_seed=args.seed + 1)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    stmp.save(result.net, args.out)
    print(f"trained epochs={len(result.losses)} final_loss={result.losses[-1]:.3e} -> {args.out}")
    return 0


# -- bench -------------------------------------------------------------------

def cmd_bench(args) -> int:
    from groupmot.scenesim import ablation_bench, train_predictor

    cfg = _scene_config(args.scene_config)
    run_cfg = config_mod.load(args.config) if args.config else config_mod.RunConfig()
    if args.checkpoint:
        net = stmp.load(args.checkpoint)
    else:
        start = time.perf_counter()
        net = train_predictor(cfg, epochs=args.epochs).net
        print(f"trained predictor in {time.perf_counter() - start:.1f}s")
    start = time.perf_counter()
    result = ablation_bench(cfg, args.seeds, stmp_net=net, assoc_cfg=run_cfg.assoc, noise=run_cfg.noise)
    table = result.table(("IDSW", "MOTA", "IDF1"))
    print(table)
    print(f"bench seeds={args.seeds} time={time.perf_counter() - start:.1f}s")
    if args.out:
        mot_io.atomic_write_text(args.out, table + "\n")
    return 0


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="groupmot", description="Group-aware multi-object tracking.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("track", help="track detection files")
    t.add_argument("--config", required=True, help="key = value run configuration")
    t.add_argument("--det", required=True, nargs="+", help="MOT detection file(s)")
    t.add_argument("--out", required=True, help="output file, or directory for several inputs")
    t.add_argument("--disable-vackf", action="store_true", help="use the linear constant-velocity filter")
    t.add_argument("--disable-gmcs", action="store_true", help="no group motion compensation")
    t.add_argument("--disable-stmp", action="store_true", help="no LSTM fallback")
    t.add_argument("--jobs", type=int, default=1, help="worker processes across sequences")
    t.set_defaults(func=cmd_track)

    e = sub.add_parser("eval", help="score a result file against ground truth")
    e.add_argument("--gt", required=True)
    e.add_argument("--result", required=True)
    e.add_argument("--report", help="write key=value metrics here")
    e.add_argument("--skip-ignored", action="store_true", help="drop gt lines with conf 0")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("simulate", help="write a synthetic scene")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--scene-config", help="JSON file with SceneConfig fields")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("train-stmp", help="train the LSTM predictor")
    r.add_argument("--out", required=True, help="checkpoint path (.npz)")
    r.add_argument("--gt", nargs="*", help="train on these ground-truth files instead of the simulator")
    r.add_argument("--image-width", type=float, default=1920.0)
    r.add_argument("--image-height", type=float, default=1080.0)
    r.add_argument("--scene-config", help="JSON SceneConfig for simulator training data")
    r.add_argument("--n-tracks", type=int, default=12000)
    r.add_argument("--length", type=int, default=9)
    r.add_argument("--epochs", type=int, default=100)
    r.add_argument("--lr", type=float, default=0.01)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--hidden", type=int, nargs="+", default=[64, 32, 16])
    r.add_argument("--windows", type=int, nargs="+", default=[8, 4, 2])
    r.add_argument("--fc-hidden", type=int, default=32)
    r.set_defaults(func=cmd_train_stmp)

    b = sub.add_parser("bench", help="ablation benchmark on simulated scenes")
    b.add_argument("--seeds", type=int, default=20)
    b.add_argument("--scene-config", help="JSON SceneConfig")
    b.add_argument("--config", help="run configuration for tracker settings")
    b.add_argument("--checkpoint", help="use this predictor instead of training one")
    b.add_argument("--epochs", type=int, default=100)
    b.add_argument("--out", help="write the table here")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "track" and not Path(args.config).is_file():
        parser.error(f"config file not found: {args.config}")
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc.strerror}: {exc.filename}", file=sys.stderr)
    except (ParseError, ConfigError, TrackingError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
