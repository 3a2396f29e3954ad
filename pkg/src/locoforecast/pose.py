"""2D pose and sequence containers plus the displacement-error metric.

Joint order follows the 25-point body layout used by common detectors:
0 nose, 1 neck, 2-4 right arm, 5-7 left arm, 8 mid hip, 9-11 right leg,
12-14 left leg, 15/16 eyes, 17/18 ears, 19-21 left foot, 22-24 right foot.
The neck is the anchor joint for stream decomposition.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

N_JOINTS = 25
ANCHOR = 1

# (parent, child) pairs of the 25-point skeleton, used for drawing and for
# the kinematic walker.
SKELETON_EDGES: tuple[tuple[int, int], ...] = (
    (1, 0), (1, 2), (2, 3), (3, 4), (1, 5), (5, 6), (6, 7), (1, 8),
    (8, 9), (9, 10), (10, 11), (8, 12), (12, 13), (13, 14),
    (0, 15), (15, 17), (0, 16), (16, 18),
    (14, 19), (19, 20), (14, 21), (11, 22), (22, 23), (11, 24),
)


class Keypoint(NamedTuple):
    u: float
    v: float
    c: float


@dataclass(frozen=True)
class Pose:
    """One frame's 25 keypoints: coords (25, 2) pixels, conf (25,) in [0, 1].

    A missing joint is encoded exactly as c == 0 with coords == (0, 0).
    """

    coords: np.ndarray
    conf: np.ndarray
    frame_size: tuple[int, int] = (1280, 720)

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=np.float64)
        conf = np.asarray(self.conf, dtype=np.float64)
        if coords.shape != (N_JOINTS, 2):
            raise ValueError(f"coords must be ({N_JOINTS}, 2), got {coords.shape}")
        if conf.shape != (N_JOINTS,):
            raise ValueError(f"conf must be ({N_JOINTS},), got {conf.shape}")
        if not np.isfinite(coords).all():
            raise ValueError("non-finite coordinates")
        if np.any(conf < 0.0) or np.any(conf > 1.0):
            raise ValueError("confidences must lie in [0, 1]")
        missing = conf == 0.0
        if np.any(coords[missing] != 0.0):
            raise ValueError("missing joints (c == 0) must have coords (0, 0)")
        w, h = self.frame_size
        if w <= 0 or h <= 0:
            raise ValueError(f"frame size must be positive, got {self.frame_size}")
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "conf", conf)

    def keypoint(self, i: int) -> Keypoint:
        return Keypoint(self.coords[i, 0], self.coords[i, 1], self.conf[i])

    def is_complete(self) -> bool:
        return bool(np.all(self.conf > 0.0))

    @classmethod
    def from_keypoints(cls, kps: Sequence[Keypoint], frame_size=(1280, 720)) -> "Pose":
        arr = np.asarray(kps, dtype=np.float64)
        return cls(arr[:, :2], arr[:, 2], frame_size)


@dataclass(frozen=True)
class LocomotionSequence:
    """A pedestrian track over t_p observed plus t_f future frames.

    transforms[i] maps camera coordinates of frame 0 to those of frame i
    (3x4, row-major); transforms[0] is the identity.
    """

    coords: np.ndarray        # (T, 25, 2) pixels
    conf: np.ndarray          # (T, 25)
    anchor_depth: np.ndarray  # (T,) metres
    transforms: np.ndarray    # (T, 3, 4)
    t_p: int
    t_f: int
    frame_size: tuple[int, int] = (1280, 720)
    pedestrian_id: str = ""

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=np.float64)
        conf = np.asarray(self.conf, dtype=np.float64)
        depth = np.asarray(self.anchor_depth, dtype=np.float64)
        tf = np.asarray(self.transforms, dtype=np.float64)
        T = self.t_p + self.t_f
        if self.t_p < 1 or self.t_f < 0:
            raise ValueError(f"need t_p >= 1 and t_f >= 0, got {self.t_p}, {self.t_f}")
        if coords.shape != (T, N_JOINTS, 2):
            raise ValueError(f"coords must be ({T}, {N_JOINTS}, 2), got {coords.shape}")
        if conf.shape != (T, N_JOINTS):
            raise ValueError(f"conf must be ({T}, {N_JOINTS}), got {conf.shape}")
        if depth.shape != (T,):
            raise ValueError(f"anchor_depth must be ({T},), got {depth.shape}")
        if tf.shape != (T, 3, 4):
            raise ValueError(f"transforms must be ({T}, 3, 4), got {tf.shape}")
        if np.any(depth <= 0.0):
            raise ValueError("anchor depth must be positive")
        eye = np.hstack([np.eye(3), np.zeros((3, 1))])
        if not np.array_equal(tf[0], eye):
            raise ValueError("transforms[0] must be the identity")
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "conf", conf)
        object.__setattr__(self, "anchor_depth", depth)
        object.__setattr__(self, "transforms", tf)

    @property
    def frames(self) -> int:
        return self.t_p + self.t_f

    def pose(self, i: int) -> Pose:
        return Pose(self.coords[i], self.conf[i], self.frame_size)

    def poses(self) -> list[Pose]:
        return [self.pose(i) for i in range(self.frames)]

    def history(self) -> "LocomotionSequence":
        """The observed prefix as a standalone sequence (t_f == 0)."""
        return LocomotionSequence(
            self.coords[: self.t_p], self.conf[: self.t_p],
            self.anchor_depth[: self.t_p], self.transforms[: self.t_p],
            self.t_p, 0, self.frame_size, self.pedestrian_id)

    def future_coords(self) -> np.ndarray:
        return self.coords[self.t_p:]


def confidence_filter(poses: Iterable[Pose], alpha_c: float = 0.25) -> list[Pose]:
    """Keep only poses whose joints are all strictly above the threshold."""
    if not (0.0 < alpha_c < 1.0):
        raise ValueError(f"alpha_c must lie in (0, 1), got {alpha_c}")
    return [p for p in poses if np.all(p.conf > alpha_c)]


def _coerce_track(x) -> np.ndarray:
    if isinstance(x, np.ndarray):
        arr = np.asarray(x, dtype=np.float64)
    elif len(x) and isinstance(x[0], Pose):
        arr = np.stack([p.coords for p in x]).astype(np.float64)
    else:
        arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, None, :]
    if arr.ndim != 3 or arr.shape[-1] != 2:
        raise ValueError(f"expected (frames, joints, 2) coordinates, got {arr.shape}")
    return arr


def kde(pred, truth, norm: str = "l2") -> float:
    """Keypoint displacement error: per-frame joint distances summed over
    joints, averaged over frames.  ``norm`` picks the per-joint distance."""
    p = _coerce_track(pred)
    t = _coerce_track(truth)
    if p.shape != t.shape:
        raise ValueError(f"prediction {p.shape} and truth {t.shape} disagree")
    if p.shape[0] == 0:
        raise ValueError("no frames to score")
    d = p - t
    if norm == "l2":
        per_joint = np.sqrt(d[..., 0] ** 2 + d[..., 1] ** 2)
    elif norm == "l1":
        per_joint = np.abs(d[..., 0]) + np.abs(d[..., 1])
    else:
        raise ValueError(f"norm must be 'l2' or 'l1', got {norm!r}")
    return float(per_joint.sum(axis=1).mean())


def mean_kde(pred, truth, norm: str = "l2") -> float:
    """kde averaged over joints as well as frames."""
    p = _coerce_track(pred)
    return kde(p, truth, norm) / p.shape[1]
