"""Split a pose track into a camera-facing global stream and body-local offsets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pose import ANCHOR, N_JOINTS, LocomotionSequence

# local index j <-> body joint (skipping the anchor)
LOCAL_TO_JOINT = np.array([j for j in range(N_JOINTS) if j != ANCHOR])


class IncompleteSequenceError(ValueError):
    """Decomposition asked for on a sequence that still has missing joints."""


@dataclass(frozen=True)
class GlobalStream:
    """Anchor-joint track: pixel coords, depth, egomotion, confidence."""

    coords: np.ndarray      # (T, 2)
    depth: np.ndarray       # (T,)
    transforms: np.ndarray  # (T, 3, 4)
    conf: np.ndarray        # (T,)

    def __post_init__(self):
        T = self.coords.shape[0]
        if self.coords.shape != (T, 2) or self.depth.shape != (T,) \
                or self.transforms.shape != (T, 3, 4) or self.conf.shape != (T,):
            raise ValueError("inconsistent global stream field shapes")

    @property
    def frames(self) -> int:
        return self.coords.shape[0]


@dataclass(frozen=True)
class LocalStream:
    """Per-joint offsets from the anchor, anchor itself excluded."""

    offsets: np.ndarray  # (T, 24, 2)
    conf: np.ndarray     # (T, 24)

    def __post_init__(self):
        T = self.offsets.shape[0]
        if self.offsets.shape != (T, N_JOINTS - 1, 2) or self.conf.shape != (T, N_JOINTS - 1):
            raise ValueError("inconsistent local stream field shapes")

    @property
    def frames(self) -> int:
        return self.offsets.shape[0]


def decompose(seq: LocomotionSequence, require_complete: bool = True) -> tuple[GlobalStream, LocalStream]:
    """Split into anchor track and anchor-relative offsets.

    With require_complete (the normal path) any joint still marked missing is
    an error; the relaxed form exists for the no-completion ablation only.
    """
    if require_complete:
        missing = np.argwhere(seq.conf <= 0.0)
        if missing.size:
            f, j = missing[0]
            raise IncompleteSequenceError(
                f"sequence {seq.pedestrian_id or '?'} has missing joints "
                f"(first at frame {f}, joint {j}); complete it before decomposing")
    anchor = seq.coords[:, ANCHOR, :]
    g = GlobalStream(anchor.copy(), seq.anchor_depth.copy(),
                     seq.transforms.copy(), seq.conf[:, ANCHOR].copy())
    offsets = seq.coords[:, LOCAL_TO_JOINT, :] - anchor[:, None, :]
    l = LocalStream(offsets, seq.conf[:, LOCAL_TO_JOINT].copy())
    return g, l


def recombine(g, l) -> np.ndarray:
    """Inverse of decompose: absolute (T, 25, 2) pixel coordinates.

    Accepts the stream types or plain arrays ((T, 2) anchor, (T, 24, 2)
    offsets), so predicted tracks recombine the same way as observed ones.
    """
    anchor = g.coords if isinstance(g, GlobalStream) else np.asarray(g, dtype=np.float64)
    offsets = l.offsets if isinstance(l, LocalStream) else np.asarray(l, dtype=np.float64)
    if anchor.shape[0] != offsets.shape[0]:
        raise ValueError(f"stream lengths disagree: {anchor.shape[0]} vs {offsets.shape[0]}")
    if anchor.shape != (anchor.shape[0], 2) or offsets.shape != (anchor.shape[0], N_JOINTS - 1, 2):
        raise ValueError(f"bad stream shapes {anchor.shape}, {offsets.shape}")
    out = np.empty((anchor.shape[0], N_JOINTS, 2))
    out[:, ANCHOR, :] = anchor
    out[:, LOCAL_TO_JOINT, :] = anchor[:, None, :] + offsets
    return out
