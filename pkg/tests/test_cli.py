import pytest

from groupmot import cli
from groupmot import io as mot_io


@pytest.fixture
def scene_dir(tmp_path):
    cfg = tmp_path / "scene.json"
    cfg.write_text('{"frames": 40, "n_groups": 1, "targets_per_group": 3, "solo_targets": 1}')
    out = tmp_path / "scene"
    assert cli.main(["simulate", "--out", str(out), "--seed", "3", "--scene-config", str(cfg)]) == 0
    return out


@pytest.fixture
def run_cfg(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("image_width = 1280\nimage_height = 720\n")
    return p


def test_missing_config_is_usage_error(tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(["track", "--config", str(tmp_path / "nope.cfg"), "--det", "x", "--out", "y"])
    assert info.value.code == 2


def test_no_subcommand_is_usage_error():
    with pytest.raises(SystemExit) as info:
        cli.main([])
    assert info.value.code == 2


def test_simulate_writes_files(scene_dir):
    assert {p.name for p in scene_dir.iterdir()} == {"gt.txt", "det.txt", "scene.json"}
    assert max(mot_io.read_tracks(scene_dir / "gt.txt")) == 40


def test_track_then_eval(scene_dir, run_cfg, tmp_path, capsys):
    out = tmp_path / "res.txt"
    rc = cli.main(["track", "--config", str(run_cfg), "--det", str(scene_dir / "det.txt"),
                   "--out", str(out)])
    assert rc == 0
    assert "tracks=" in capsys.readouterr().out
    assert "image_width = 1280.0" in (tmp_path / "res.txt.config.txt").read_text()
    report = tmp_path / "rep.txt"
    rc = cli.main(["eval", "--gt", str(scene_dir / "gt.txt"), "--result", str(out), "--report", str(report)])
    assert rc == 0
    kv = dict(line.split("=", 1) for line in report.read_text().splitlines())
    assert 0.0 < float(kv["MOTA"]) <= 1.0


def test_eval_perfect(scene_dir, tmp_path):
    report = tmp_path / "rep.txt"
    gt = str(scene_dir / "gt.txt")
    assert cli.main(["eval", "--gt", gt, "--result", gt, "--report", str(report)]) == 0
    kv = dict(line.split("=", 1) for line in report.read_text().splitlines())
    assert float(kv["MOTA"]) == 1.0 and float(kv["IDF1"]) == 1.0 and int(kv["IDSW"]) == 0


def test_eval_length_mismatch(scene_dir, tmp_path, capsys):
    res = tmp_path / "long.txt"
    res.write_text("999,1,0,0,10,10,1,1,1\n")
    assert cli.main(["eval", "--gt", str(scene_dir / "gt.txt"), "--result", str(res)]) == 1
    assert "mismatch" in capsys.readouterr().err


def test_bad_input_exit_code(run_cfg, tmp_path, capsys):
    det = tmp_path / "det.txt"
    det.write_text("1,-1,oops\n")
    assert cli.main(["track", "--config", str(run_cfg), "--det", str(det), "--out", str(tmp_path / "o.txt")]) == 1
    assert "error" in capsys.readouterr().err


def test_track_is_byte_identical_and_flags_apply(scene_dir, run_cfg, tmp_path):
    outs = []
    for name in ("a", "b"):
        o = tmp_path / f"{name}.txt"
        cli.main(["track", "--config", str(run_cfg), "--det", str(scene_dir / "det.txt"), "--out", str(o)])
        outs.append(o.read_bytes())
    assert outs[0] == outs[1]
    o = tmp_path / "kf.txt"
    cli.main(["track", "--config", str(run_cfg), "--det", str(scene_dir / "det.txt"), "--out", str(o),
              "--disable-vackf", "--disable-gmcs"])
    echo = (tmp_path / "kf.txt.config.txt").read_text()
    assert "use_vackf = false" in echo and "use_gmcs = false" in echo


def test_track_several_inputs(scene_dir, run_cfg, tmp_path):
    det2 = tmp_path / "other.txt"
    det2.write_bytes((scene_dir / "det.txt").read_bytes())
    out = tmp_path / "outdir"
    out.mkdir()
    rc = cli.main(["track", "--config", str(run_cfg), "--det", str(scene_dir / "det.txt"), str(det2),
                   "--out", str(out)])
    assert rc == 0
    assert (out / "det.txt").read_bytes() == (out / "other.txt").read_bytes()


def test_train_stmp_from_gt(scene_dir, tmp_path):
    ckpt = tmp_path / "net.npz"
    rc = cli.main(["train-stmp", "--out", str(ckpt), "--gt", str(scene_dir / "gt.txt"), "--epochs", "2",
                   "--hidden", "4", "4", "4", "--fc-hidden", "4", "--image-width", "1280",
                   "--image-height", "720"])
    assert rc == 0 and ckpt.is_file()
