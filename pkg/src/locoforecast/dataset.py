"""Line-delimited JSON codec for pedestrian track records.

One record per line: pedestrian id, t_p/t_f split, and per frame the 25
keypoint triples, anchor depth, the row-major 3x4 start-to-frame camera
transform, and the frame dimensions.  Saving is canonical (frame indices
renumbered from 0, compact separators, shortest-round-trip floats), so
save(load(x)) == x for canonical files and save-load-save is a fixed point.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .pose import N_JOINTS, LocomotionSequence

SCHEMA_VERSION = 1

_RECORD_KEYS = {"schema_version", "pedestrian_id", "t_p", "t_f", "frames"}
_FRAME_KEYS = {"index", "keypoints", "anchor_depth", "transform", "width", "height"}


class DatasetFormatError(ValueError):
    """Malformed dataset line; message carries path and line number."""


def _record_to_dict(seq: LocomotionSequence) -> dict:
    frames = []
    for i in range(seq.frames):
        frames.append({
            "index": i,
            "keypoints": [[float(u), float(v), float(c)]
                          for (u, v), c in zip(seq.coords[i], seq.conf[i])],
            "anchor_depth": float(seq.anchor_depth[i]),
            "transform": [float(x) for x in seq.transforms[i].reshape(12)],
            "width": int(seq.frame_size[0]),
            "height": int(seq.frame_size[1]),
        })
    return {
        "schema_version": SCHEMA_VERSION,
        "pedestrian_id": seq.pedestrian_id,
        "t_p": seq.t_p,
        "t_f": seq.t_f,
        "frames": frames,
    }


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise DatasetFormatError(msg)


def _record_from_dict(obj: dict) -> LocomotionSequence:
    _require(isinstance(obj, dict), "record is not an object")
    unknown = set(obj) - _RECORD_KEYS
    _require(not unknown, f"unknown record keys {sorted(unknown)}")
    _require(obj.get("schema_version") == SCHEMA_VERSION,
             f"unsupported schema_version {obj.get('schema_version')!r}")
    for key in ("pedestrian_id", "t_p", "t_f", "frames"):
        _require(key in obj, f"missing key {key!r}")
    frames = obj["frames"]
    t_p, t_f = obj["t_p"], obj["t_f"]
    _require(isinstance(frames, list) and len(frames) == t_p + t_f,
             f"expected {t_p + t_f} frames, got {len(frames) if isinstance(frames, list) else '?'}")
    T = len(frames)
    coords = np.zeros((T, N_JOINTS, 2))
    conf = np.zeros((T, N_JOINTS))
    depth = np.zeros(T)
    tf = np.zeros((T, 3, 4))
    last_index = None
    width = height = None
    for i, fr in enumerate(frames):
        _require(isinstance(fr, dict), f"frame {i} is not an object")
        unknown = set(fr) - _FRAME_KEYS
        _require(not unknown, f"frame {i}: unknown keys {sorted(unknown)}")
        for key in _FRAME_KEYS:
            _require(key in fr, f"frame {i}: missing key {key!r}")
        _require(last_index is None or fr["index"] > last_index,
                 f"frame {i}: indices must be strictly increasing")
        last_index = fr["index"]
        kps = fr["keypoints"]
        _require(isinstance(kps, list) and len(kps) == N_JOINTS and
                 all(isinstance(k, list) and len(k) == 3 for k in kps),
                 f"frame {i}: need {N_JOINTS} [u, v, c] keypoints")
        arr = np.asarray(kps, dtype=np.float64)
        coords[i] = arr[:, :2]
        conf[i] = arr[:, 2]
        depth[i] = fr["anchor_depth"]
        tr = fr["transform"]
        _require(isinstance(tr, list) and len(tr) == 12, f"frame {i}: transform needs 12 values")
        tf[i] = np.asarray(tr, dtype=np.float64).reshape(3, 4)
        if width is None:
            width, height = fr["width"], fr["height"]
        else:
            _require((fr["width"], fr["height"]) == (width, height),
                     f"frame {i}: frame size changed mid-record")
    try:
        return LocomotionSequence(coords, conf, depth, tf, t_p, t_f,
                                  (width, height), obj["pedestrian_id"])
    except ValueError as e:
        raise DatasetFormatError(str(e)) from e


def save_dataset(path: str | Path, records: list[LocomotionSequence]) -> None:
    lines = [json.dumps(_record_to_dict(r), separators=(",", ":")) for r in records]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""))


def load_dataset(path: str | Path) -> list[LocomotionSequence]:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise DatasetFormatError(f"{path}:{lineno}: invalid JSON ({e})") from e
            try:
                out.append(_record_from_dict(obj))
            except DatasetFormatError as e:
                raise DatasetFormatError(f"{path}:{lineno}: {e}") from e
    return out
