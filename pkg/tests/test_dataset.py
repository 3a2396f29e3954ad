"""Dataset codec: byte-stable round trips, a hand-authored golden line, and
line-numbered rejection of malformed input."""

import json

import numpy as np
import pytest

from locoforecast.dataset import DatasetFormatError, load_dataset, save_dataset

IDENTITY = [1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]


def _frame(index, base, depth, transform):
    kps = ",".join(f"[{base + 2 * j}.0,{base + 2 * j + 1}.0,0.5]" for j in range(25))
    tr = ",".join(str(x) for x in transform)
    return (f'{{"index":{index},"keypoints":[{kps}],"anchor_depth":{depth},'
            f'"transform":[{tr}],"width":1280,"height":720}}')


def _golden_line():
    # assembled by string formatting, never by the codec under test
    shifted = list(IDENTITY)
    shifted[3] = 0.25
    return ('{"schema_version":1,"pedestrian_id":"ped00042","t_p":1,"t_f":1,'
            f'"frames":[{_frame(0, 100, 7.5, IDENTITY)},{_frame(1, 200, 8.5, shifted)}]}}')


def test_empty_file_loads_empty(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    assert load_dataset(path) == []


def test_round_trip_preserves_every_field(tmp_path, small_dataset):
    noisy, _ = small_dataset
    path = tmp_path / "roundtrip.jsonl"
    save_dataset(path, noisy)
    back = load_dataset(path)
    assert len(back) == len(noisy)
    for a, b in zip(noisy, back):
        assert np.array_equal(a.coords, b.coords)
        assert np.array_equal(a.conf, b.conf)
        assert np.array_equal(a.anchor_depth, b.anchor_depth)
        assert np.array_equal(a.transforms, b.transforms)
        assert (a.t_p, a.t_f, a.frame_size, a.pedestrian_id) == \
               (b.t_p, b.t_f, b.frame_size, b.pedestrian_id)


def test_save_load_save_is_fixed_point(tmp_path, small_dataset):
    noisy, _ = small_dataset
    first = tmp_path / "first.jsonl"
    second = tmp_path / "second.jsonl"
    save_dataset(first, noisy)
    save_dataset(second, load_dataset(first))
    assert first.read_bytes() == second.read_bytes()


def test_golden_line_parses_to_literals(tmp_path):
    path = tmp_path / "golden.jsonl"
    path.write_text(_golden_line() + "\n")
    (rec,) = load_dataset(path)
    assert rec.pedestrian_id == "ped00042"
    assert (rec.t_p, rec.t_f, rec.frame_size) == (1, 1, (1280, 720))
    assert rec.coords[0, 0].tolist() == [100.0, 101.0]
    assert rec.coords[1, 24].tolist() == [248.0, 249.0]
    assert np.all(rec.conf == 0.5)
    assert rec.anchor_depth.tolist() == [7.5, 8.5]
    assert rec.transforms[1, 0, 3] == 0.25
    assert np.array_equal(rec.transforms[0], np.hstack([np.eye(3), np.zeros((3, 1))]))


def test_blank_lines_are_skipped(tmp_path):
    path = tmp_path / "gaps.jsonl"
    path.write_text("\n" + _golden_line() + "\n\n" + _golden_line() + "\n")
    assert len(load_dataset(path)) == 2


def _expect_error(tmp_path, lines, match):
    path = tmp_path / "bad.jsonl"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(DatasetFormatError, match=match):
        load_dataset(path)


def test_invalid_json_reports_line(tmp_path):
    _expect_error(tmp_path, [_golden_line(), "{not json"], r"bad\.jsonl:2: invalid JSON")


def test_unknown_record_key_rejected(tmp_path):
    obj = json.loads(_golden_line())
    obj["extra"] = 1
    _expect_error(tmp_path, [json.dumps(obj)], r":1: unknown record keys \['extra'\]")


def test_unknown_frame_key_rejected(tmp_path):
    obj = json.loads(_golden_line())
    obj["frames"][0]["mystery"] = 1
    _expect_error(tmp_path, [json.dumps(obj)], r"frame 0: unknown keys \['mystery'\]")


def test_wrong_schema_version_rejected(tmp_path):
    obj = json.loads(_golden_line())
    obj["schema_version"] = 99
    _expect_error(tmp_path, [json.dumps(obj)], "unsupported schema_version 99")


def test_keypoint_count_rejected(tmp_path):
    obj = json.loads(_golden_line())
    del obj["frames"][1]["keypoints"][0]
    _expect_error(tmp_path, [json.dumps(obj)], r"frame 1: need 25 \[u, v, c\] keypoints")


def test_transform_length_rejected(tmp_path):
    obj = json.loads(_golden_line())
    obj["frames"][1]["transform"] = obj["frames"][1]["transform"][:11]
    _expect_error(tmp_path, [json.dumps(obj)], "frame 1: transform needs 12 values")


def test_non_increasing_indices_rejected(tmp_path):
    obj = json.loads(_golden_line())
    obj["frames"][1]["index"] = 0
    _expect_error(tmp_path, [json.dumps(obj)], "strictly increasing")


def test_frame_size_change_rejected(tmp_path):
    obj = json.loads(_golden_line())
    obj["frames"][1]["width"] = 640
    _expect_error(tmp_path, [json.dumps(obj)], "frame size changed mid-record")


def test_frame_count_mismatch_rejected(tmp_path):
    obj = json.loads(_golden_line())
    obj["t_f"] = 3
    _expect_error(tmp_path, [json.dumps(obj)], "expected 4 frames, got 2")


def test_non_identity_first_transform_rejected(tmp_path):
    obj = json.loads(_golden_line())
    obj["frames"][0]["transform"][3] = 0.5
    _expect_error(tmp_path, [json.dumps(obj)], r":1: .*identity")
