import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from groupmot import io as mot_io
from groupmot.errors import ParseError
from groupmot.model import BBox, Detection


def write(tmp_path, text, name="f.txt"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_parse_example_line(tmp_path):
    frames = mot_io.read_detections(write(tmp_path, "1,-1,10,20,30,40,0.9,1,1\n"))
    (d,) = frames[1]
    assert (d.bbox.x_center, d.bbox.y_center, d.bbox.width, d.bbox.height) == (25.0, 40.0, 30.0, 40.0)
    assert d.score == 0.9 and d.class_id == 1


def test_seven_field_line_and_negative_class(tmp_path):
    recs = mot_io.read_mot(write(tmp_path, "2,5,0,0,10,10,1\n3,6,0,0,10,10,1,-1,-1\n"))
    assert recs[0].class_id == 1 and recs[0].visibility == 1.0
    assert recs[1].class_id == 1


def test_empty_and_comment_only_files(tmp_path):
    assert mot_io.read_detections(write(tmp_path, "")) == {}
    assert mot_io.read_tracks(write(tmp_path, "# nothing\n\n", "g.txt")) == {}


@pytest.mark.parametrize("bad", [
    "1,-1,10,20,30\n",
    "1,-1,a,20,30,40,0.9\n",
    "0,-1,10,20,30,40,0.9\n",
    "1,-1,10,20,0,40,0.9\n",
    "1,-1,10,20,nan,40,0.9\n",
])
def test_malformed_line_reports_line_number(tmp_path, bad):
    p = write(tmp_path, "1,-1,10,20,30,40,0.9\n" + bad)
    with pytest.raises(ParseError) as info:
        mot_io.read_mot(p)
    assert info.value.line == 2
    assert ":2:" in str(info.value)


def test_detection_confidence_range(tmp_path):
    with pytest.raises(ParseError):
        mot_io.read_detections(write(tmp_path, "1,-1,10,20,30,40,1.5\n"))


def test_unsorted_file_is_resorted_with_warning(tmp_path, caplog):
    p = write(tmp_path, "3,1,0,0,5,5,1\n1,2,0,0,5,5,1\n1,1,0,0,5,5,1\n")
    with caplog.at_level(logging.WARNING):
        recs = mot_io.read_mot(p)
    assert [(r.frame, r.id) for r in recs] == [(1, 1), (1, 2), (3, 1)]
    assert "re-sorting" in caplog.text


def test_skip_ignored(tmp_path):
    p = write(tmp_path, "1,1,0,0,5,5,1\n1,2,0,0,5,5,0\n")
    assert [i for i, _ in mot_io.read_tracks(p)[1]] == [1, 2]
    assert [i for i, _ in mot_io.read_tracks(p, skip_ignored=True)[1]] == [1]


box_st = st.builds(BBox, st.floats(-500, 2000), st.floats(-500, 2000), st.floats(1, 400), st.floats(1, 400))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 50), st.integers(1, 30), box_st), min_size=1, max_size=20,
                unique_by=lambda t: (t[0], t[1])))
def test_track_round_trip(tmp_path_factory, rows):
    frames = {}
    for f, tid, box in rows:
        frames.setdefault(f, []).append((tid, box))
    p = tmp_path_factory.mktemp("rt") / "gt.txt"
    mot_io.write_boxes(p, frames)
    back = mot_io.read_tracks(p)
    assert sorted(back) == sorted(frames)
    for f in frames:
        want = dict(frames[f])
        for tid, box in back[f]:
            assert np.allclose(box.to_array(), want[tid].to_array(), atol=1e-2)


def test_detection_round_trip_is_byte_stable(tmp_path):
    dets = {1: [Detection(1, BBox(25, 40, 30, 40), 0.9, 1)], 2: [Detection(2, BBox(1.234, 5.678, 9, 9), 0.456, 2)]}
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    mot_io.write_detections(a, dets)
    mot_io.write_detections(b, mot_io.read_detections(a))
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().splitlines()[0] == "1,-1,10.00,20.00,30.00,40.00,0.90,1,1"


def test_empty_write(tmp_path):
    p = tmp_path / "sub" / "out.txt"
    mot_io.write_tracks(p, [])
    assert p.read_text() == ""
