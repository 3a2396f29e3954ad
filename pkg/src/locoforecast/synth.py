"""Synthetic egocentric pedestrian scenes with a controllable detector model.

World frame: x right, y down, z forward as seen from the frame-0 camera.
Pixel coordinates are snapped to a 1/256 px grid, mimicking the quantized
output of real detectors; on that grid anchor-relative offsets add and
subtract exactly, which keeps stream decomposition invertible bit-for-bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .pose import ANCHOR, N_JOINTS, SKELETON_EDGES, LocomotionSequence

COORD_GRID = 256.0  # subpixel quantization denominator
ORTHO_TOL = 1e-9


def snap(values: np.ndarray) -> np.ndarray:
    """Quantize pixel values to the detector grid."""
    return np.round(np.asarray(values) * COORD_GRID) / COORD_GRID


class SceneRejected(RuntimeError):
    """Sampled scene geometry put the pedestrian outside the usable view."""


# ---------------------------------------------------------------------------
# rigid transforms


def rotation_from_axis_angle(vec: np.ndarray) -> np.ndarray:
    """Rodrigues formula; the vector's norm is the rotation angle."""
    vec = np.asarray(vec, dtype=np.float64)
    angle = float(np.linalg.norm(vec))
    if angle < 1e-12:
        return np.eye(3)
    k = vec / angle
    kx = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + math.sin(angle) * kx + (1.0 - math.cos(angle)) * (kx @ kx)


@dataclass(frozen=True)
class TransformSE3:
    """Rigid motion y = R x + t with a validated rotation."""

    rotation: np.ndarray     # (3, 3)
    translation: np.ndarray  # (3,)

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64)
        if r.shape != (3, 3) or t.shape != (3,):
            raise ValueError(f"expected (3,3) rotation and (3,) translation, got {r.shape}, {t.shape}")
        if np.abs(r.T @ r - np.eye(3)).max() > ORTHO_TOL:
            raise ValueError("rotation is not orthonormal within 1e-9")
        if abs(np.linalg.det(r) - 1.0) > ORTHO_TOL:
            raise ValueError("rotation determinant is not 1 within 1e-9")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "TransformSE3":
        return cls(np.eye(3), np.zeros(3))

    def apply(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64)
        return pts @ self.rotation.T + self.translation

    def inverse(self) -> "TransformSE3":
        rt = self.rotation.T
        return TransformSE3(nearest_rotation(rt), -(rt @ self.translation))

    def as_matrix34(self) -> np.ndarray:
        return np.hstack([self.rotation, self.translation[:, None]])

    def as_matrix44(self) -> np.ndarray:
        out = np.eye(4)
        out[:3, :3] = self.rotation
        out[:3, 3] = self.translation
        return out

    @classmethod
    def from_matrix34(cls, m: np.ndarray) -> "TransformSE3":
        m = np.asarray(m, dtype=np.float64)
        return cls(m[:, :3], m[:, 3])


def nearest_rotation(m: np.ndarray) -> np.ndarray:
    """Orthonormal projection of a near-rotation matrix via SVD."""
    u, _, vt = np.linalg.svd(m)
    r = u @ vt
    if np.linalg.det(r) < 0.0:
        r = u @ np.diag([1.0, 1.0, -1.0]) @ vt
    return r


def compose(after: TransformSE3, before: TransformSE3) -> TransformSE3:
    """The motion 'before' followed by 'after' (matrix product after @ before)."""
    rot = after.rotation @ before.rotation
    tr = after.rotation @ before.translation + after.translation
    return TransformSE3(nearest_rotation(rot), tr)


def chain_transforms(steps: list[TransformSE3]) -> TransformSE3:
    """Compose per-step motions in time order: result = step_n o ... o step_1.

    Each intermediate rotation is re-orthonormalized so long chains cannot
    drift away from the manifold.
    """
    if not steps:
        return TransformSE3.identity()
    acc = steps[0]
    for step in steps[1:]:
        acc = compose(step, acc)
    return acc


# ---------------------------------------------------------------------------
# kinematic walker

# rest offsets parent -> joint, metres, in the walker's body frame
# (x lateral-left, y down, z along heading); root is the mid hip.
def _parents_from_root(root: int) -> dict[int, int]:
    adj: dict[int, list[int]] = {}
    for a, b in SKELETON_EDGES:
        adj.setdefault(a, []).append(b)
        adj.setdefault(b, []).append(a)
    parent: dict[int, int] = {}
    frontier = [root]
    seen = {root}
    while frontier:
        node = frontier.pop()
        for nb in adj[node]:
            if nb not in seen:
                seen.add(nb)
                parent[nb] = node
                frontier.append(nb)
    return parent


_ROOT = 8
_JOINT_PARENT = _parents_from_root(_ROOT)
_REST_OFFSETS: dict[int, tuple[float, float, float]] = {
    1: (0.0, -0.50, 0.0),      # mid hip -> neck
    0: (0.0, -0.17, 0.02),     # neck -> nose
    2: (-0.19, 0.02, 0.0),     # neck -> right shoulder
    3: (-0.02, 0.28, 0.0),
    4: (-0.01, 0.26, 0.0),
    5: (0.19, 0.02, 0.0),      # neck -> left shoulder
    6: (0.02, 0.28, 0.0),
    7: (0.01, 0.26, 0.0),
    8: (0.0, 0.0, 0.0),        # root
    9: (-0.10, 0.02, 0.0),
    10: (-0.01, 0.42, 0.0),
    11: (-0.01, 0.42, 0.0),
    12: (0.10, 0.02, 0.0),
    13: (0.01, 0.42, 0.0),
    14: (0.01, 0.42, 0.0),
    15: (-0.035, -0.03, 0.03),
    16: (0.035, -0.03, 0.03),
    17: (-0.045, 0.01, -0.05),
    18: (0.045, 0.01, -0.05),
    19: (0.01, 0.07, 0.14),    # left ankle -> big toe
    20: (0.03, 0.0, 0.02),
    21: (0.0, 0.07, -0.06),
    22: (-0.01, 0.07, 0.14),   # right ankle -> big toe
    23: (-0.03, 0.0, 0.02),
    24: (0.0, 0.07, -0.06),
}
_FK_ORDER = (8, 1, 0, 15, 16, 17, 18, 2, 3, 4, 5, 6, 7, 9, 10, 11, 12, 13, 14, 19, 20, 21, 22, 23, 24)


def _default_swing(speed: float, step_hz: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    amp = np.zeros(N_JOINTS)
    freq = np.full(N_JOINTS, step_hz)
    phase = np.zeros(N_JOINTS)
    gait = 0.55 * min(speed, 1.6) / 1.6
    # legs swing in antiphase; arms oppose the same-side leg
    for j, a, ph in ((10, gait, 0.0), (11, 1.2 * gait, 0.3), (13, gait, math.pi), (14, 1.2 * gait, math.pi + 0.3),
                     (3, 0.55 * gait, math.pi), (4, 0.7 * gait, math.pi + 0.2),
                     (6, 0.55 * gait, 0.0), (7, 0.7 * gait, 0.2)):
        amp[j] = a
        phase[j] = ph
    return amp, freq, phase


@dataclass(frozen=True)
class WalkerConfig:
    """Parametric walking pedestrian: straight-line root plus limb swings."""

    root_speed: float = 1.2          # m/s along heading
    heading: float = math.pi / 2.0   # radians in the ground plane; pi/2 = away from camera
    start_position: tuple[float, float, float] = (0.0, 0.55, 9.0)  # root, metres
    segment_scale: float = 1.0
    swing_amplitude: np.ndarray = field(default=None)  # (25,) radians
    swing_frequency: np.ndarray = field(default=None)  # (25,) Hz
    swing_phase: np.ndarray = field(default=None)      # (25,) radians

    def __post_init__(self):
        amp, freq, phase = _default_swing(self.root_speed, 1.6 + 0.3 * self.root_speed)
        if self.swing_amplitude is None:
            object.__setattr__(self, "swing_amplitude", amp)
        if self.swing_frequency is None:
            object.__setattr__(self, "swing_frequency", freq)
        if self.swing_phase is None:
            object.__setattr__(self, "swing_phase", phase)
        for name in ("swing_amplitude", "swing_frequency", "swing_phase"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != (N_JOINTS,):
                raise ValueError(f"{name} must have shape ({N_JOINTS},), got {arr.shape}")
            object.__setattr__(self, name, arr)
        if self.root_speed < 0.0:
            raise ValueError("root speed must be non-negative")
        if self.segment_scale <= 0.0:
            raise ValueError("segment lengths must be positive")
        if np.any(self.swing_frequency <= 0.0):
            raise ValueError("swing frequencies must be positive")
        if np.any(self.swing_amplitude < 0.0):
            raise ValueError("swing amplitudes must be non-negative")


def walker_joints(cfg: WalkerConfig, t: float) -> np.ndarray:
    """World positions (25, 3) of all joints at time t seconds."""
    ch, sh = math.cos(cfg.heading), math.sin(cfg.heading)
    # body frame: z_b = heading in the xz ground plane, y_b = world y (down)
    z_b = np.array([ch, 0.0, sh])
    y_b = np.array([0.0, 1.0, 0.0])
    x_b = np.cross(y_b, z_b)
    basis = np.stack([x_b, y_b, z_b], axis=1)  # body -> world
    root = np.asarray(cfg.start_position) + cfg.root_speed * t * z_b
    pos = np.empty((N_JOINTS, 3))
    pos[8] = root
    for j in _FK_ORDER:
        if j == 8:
            continue
        off = np.asarray(_REST_OFFSETS[j]) * cfg.segment_scale
        theta = cfg.swing_amplitude[j] * math.sin(2.0 * math.pi * cfg.swing_frequency[j] * t + cfg.swing_phase[j])
        if theta != 0.0:
            # swing about the body lateral axis: rotate (y, z) components
            cth, sth = math.cos(theta), math.sin(theta)
            off = np.array([off[0], cth * off[1] - sth * off[2], sth * off[1] + cth * off[2]])
        pos[j] = pos[_JOINT_PARENT[j]] + basis @ off
    return pos


# ---------------------------------------------------------------------------
# camera


@dataclass(frozen=True)
class PinholeCamera:
    fx: float = 1000.0
    fy: float = 1000.0
    cx: float = 640.0
    cy: float = 360.0
    width: int = 1280
    height: int = 720

    def project(self, pts_cam: np.ndarray) -> np.ndarray:
        z = pts_cam[:, 2]
        if np.any(z <= 0.0):
            raise SceneRejected("joint behind the camera")
        u = self.fx * pts_cam[:, 0] / z + self.cx
        v = self.fy * pts_cam[:, 1] / z + self.cy
        return np.stack([u, v], axis=1)


def camera_path(profile: str, frames: int, fps: float, rng: np.random.Generator) -> list[TransformSE3]:
    """World-to-camera transform per frame for a named ego-motion profile."""
    if profile == "static":
        return [TransformSE3.identity() for _ in range(frames)]
    if profile == "default":
        speed = rng.uniform(0.5, 6.0)
        yaw_rate = rng.uniform(-0.06, 0.06)
        sway = rng.uniform(0.0, 0.05)
        sway_hz = rng.uniform(0.5, 1.2)
    elif profile == "heavy":
        speed = rng.uniform(3.0, 9.0)
        yaw_rate = 0.0
        sway = rng.uniform(0.1, 0.25)
        sway_hz = rng.uniform(0.3, 0.7)
    else:
        raise ValueError(f"unknown camera profile {profile!r}")
    yaw_amp = rng.uniform(0.12, 0.3) if profile == "heavy" else 0.0
    yaw_hz = rng.uniform(0.25, 0.55) if profile == "heavy" else 0.0
    out = []
    for i in range(frames):
        t = i / fps
        yaw = yaw_rate * t + yaw_amp * math.sin(2.0 * math.pi * yaw_hz * t)
        pos = np.array([sway * math.sin(2.0 * math.pi * sway_hz * t), 0.0, speed * t])
        r = rotation_from_axis_angle(np.array([0.0, yaw, 0.0]))  # camera yaw about world y
        # world -> camera: x_cam = R^T (x_world - pos)
        out.append(TransformSE3(nearest_rotation(r.T), -(r.T @ pos)))
    return out


# ---------------------------------------------------------------------------
# scene synthesis and detector noise


def generate_scene(walker: WalkerConfig, cam_path: list[TransformSE3],
                   camera: PinholeCamera, frame_count: int, fps: float = 30.0,
                   t_p: int | None = None, margin: float = 40.0,
                   pedestrian_id: str = "") -> LocomotionSequence:
    """Project the walker through the camera path into a clean pose track.

    Raises SceneRejected when any joint falls behind the camera or the anchor
    leaves the frame margin.
    """
    if len(cam_path) < frame_count:
        raise ValueError(f"camera path has {len(cam_path)} frames, need {frame_count}")
    if t_p is None:
        t_p = frame_count
    coords = np.empty((frame_count, N_JOINTS, 2))
    depth = np.empty(frame_count)
    transforms = np.empty((frame_count, 3, 4))
    inv0 = cam_path[0].inverse()
    for i in range(frame_count):
        pts_cam = cam_path[i].apply(walker_joints(walker, i / fps))
        uv = camera.project(pts_cam)
        au, av = uv[ANCHOR]
        if not (margin <= au <= camera.width - margin and margin <= av <= camera.height - margin):
            raise SceneRejected(f"anchor at ({au:.0f}, {av:.0f}) outside frame margin at frame {i}")
        coords[i] = snap(uv)
        depth[i] = pts_cam[ANCHOR, 2]
        rel = compose(cam_path[i], inv0) if i else TransformSE3.identity()
        transforms[i] = rel.as_matrix34()
    return LocomotionSequence(coords, np.ones((frame_count, N_JOINTS)), depth, transforms,
                              t_p, frame_count - t_p, (camera.width, camera.height), pedestrian_id)


@dataclass(frozen=True)
class NoiseConfig:
    """Detector and egomotion corruption model."""

    dropout_p: float = 0.05      # per-joint missing probability
    jitter_sigma: float = 3.0    # px, per coordinate
    conf_cap: float = 12.0       # px of jitter at which confidence hits 0
    rot_jitter: float = 0.002    # rad RMS per egomotion step
    trans_jitter: float = 0.01   # m RMS per egomotion step
    depth_sigma: float = 0.05    # relative depth noise

    def __post_init__(self):
        if not (0.0 <= self.dropout_p < 1.0):
            raise ValueError(f"dropout_p must lie in [0, 1), got {self.dropout_p}")
        for name in ("jitter_sigma", "conf_cap", "rot_jitter", "trans_jitter", "depth_sigma"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be non-negative")
        if self.conf_cap == 0.0 and self.jitter_sigma > 0.0:
            raise ValueError("conf_cap must be positive when jitter is enabled")


def perturbed_step(step: TransformSE3, noise: NoiseConfig, rng: np.random.Generator) -> TransformSE3:
    """Left-compose a small random rigid motion onto a true egomotion step."""
    rot_vec = rng.normal(0.0, noise.rot_jitter / math.sqrt(3.0), 3)
    trans = rng.normal(0.0, noise.trans_jitter / math.sqrt(3.0), 3)
    wobble = TransformSE3(rotation_from_axis_angle(rot_vec), trans)
    return compose(wobble, step)


def annotate_noisy(gt: LocomotionSequence, noise: NoiseConfig, seed) -> LocomotionSequence:
    """Corrupt a clean track the way a detector and visual odometry would.

    Joints drop out independently; surviving joints get Gaussian pixel jitter
    with confidence falling as the jitter grows; depth gets relative noise;
    per-step camera motions get small rigid perturbations before re-chaining,
    so egomotion drift grows with distance from the first frame.
    """
    rng = np.random.default_rng(seed)
    T = gt.frames
    coords = np.zeros_like(gt.coords)
    conf = np.zeros_like(gt.conf)
    for i in range(T):
        for j in range(N_JOINTS):
            if rng.random() < noise.dropout_p:
                continue
            jit = rng.normal(0.0, noise.jitter_sigma, 2) if noise.jitter_sigma > 0.0 else np.zeros(2)
            c = 1.0 - float(np.hypot(jit[0], jit[1])) / noise.conf_cap if noise.conf_cap > 0.0 else 1.0
            if c <= 0.0:
                continue  # ruined detection counts as missing
            coords[i, j] = snap(gt.coords[i, j] + jit)
            conf[i, j] = min(c, 1.0)
    depth = gt.anchor_depth * np.maximum(1.0 + rng.normal(0.0, noise.depth_sigma, T), 0.01)
    transforms = np.empty_like(gt.transforms)
    transforms[0] = gt.transforms[0]
    acc = TransformSE3.identity()
    for i in range(1, T):
        prev = TransformSE3.from_matrix34(gt.transforms[i - 1])
        cur = TransformSE3.from_matrix34(gt.transforms[i])
        true_step = compose(cur, prev.inverse())
        acc = compose(perturbed_step(true_step, noise, rng), acc)
        transforms[i] = acc.as_matrix34()
    return LocomotionSequence(coords, conf, depth, transforms, gt.t_p, gt.t_f,
                              gt.frame_size, gt.pedestrian_id)


# ---------------------------------------------------------------------------
# dataset sampling


def sample_walker(rng: np.random.Generator) -> WalkerConfig:
    x = rng.uniform(-3.5, 3.5)
    z = rng.uniform(6.0, 16.0)
    heading = rng.uniform(0.0, 2.0 * math.pi)
    speed = rng.uniform(0.5, 1.8)
    scale = rng.uniform(0.9, 1.1)
    return WalkerConfig(root_speed=speed, heading=heading,
                        start_position=(x, 0.55 * scale, z), segment_scale=scale)


def sample_scene(rng: np.random.Generator, camera: PinholeCamera, frame_count: int,
                 t_p: int, fps: float = 30.0, profile: str = "default",
                 pedestrian_id: str = "", max_tries: int = 200) -> LocomotionSequence:
    """Draw walker and camera configs until the projected scene is usable."""
    for _ in range(max_tries):
        walker = sample_walker(rng)
        path = camera_path(profile, frame_count, fps, rng)
        try:
            return generate_scene(walker, path, camera, frame_count, fps, t_p,
                                  pedestrian_id=pedestrian_id)
        except SceneRejected:
            continue
    raise SceneRejected(f"no usable scene after {max_tries} draws")


def make_dataset(n_records: int, t_p: int, t_f: int, noise: NoiseConfig, seed,
                 profile: str = "default", camera: PinholeCamera | None = None,
                 fps: float = 30.0) -> tuple[list[LocomotionSequence], list[LocomotionSequence]]:
    """Seeded corpus of (noisy, clean-truth) sequence pairs.

    Each scene owns a private child stream of the seed, so records are
    independent of generation order.
    """
    camera = camera or PinholeCamera()
    noisy: list[LocomotionSequence] = []
    clean: list[LocomotionSequence] = []
    streams = np.random.SeedSequence(seed).spawn(n_records)
    for i, ss in enumerate(streams):
        rng = np.random.default_rng(ss)
        gt = sample_scene(rng, camera, t_p + t_f, t_p, fps, profile, pedestrian_id=f"ped{i:05d}")
        noisy.append(annotate_noisy(gt, noise, rng))
        clean.append(gt)
    return noisy, clean
