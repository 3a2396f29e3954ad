"""Velocity extrapolation baselines over raw keypoint tracks.

All three operate on whatever coordinates they are given; the evaluation
harness feeds them raw detections by default (missing joints included), and
optionally completed poses for pipeline-equivalence checks.
"""

from __future__ import annotations

import numpy as np

from .pose import _coerce_track


def _check(hist: np.ndarray, t_f: int, need: int) -> None:
    if t_f < 1:
        raise ValueError(f"need t_f >= 1, got {t_f}")
    if hist.shape[0] < need:
        raise ValueError(f"history of {hist.shape[0]} frames is too short, need {need}")


def zero_velocity(hist, t_f: int) -> np.ndarray:
    """Repeat the last observed pose."""
    h = _coerce_track(hist)
    _check(h, t_f, 1)
    return np.repeat(h[-1:], t_f, axis=0)


def constant_velocity(hist, t_f: int) -> np.ndarray:
    """Roll out the average observed per-frame velocity."""
    h = _coerce_track(hist)
    _check(h, t_f, 2)
    v = np.diff(h, axis=0).mean(axis=0)
    steps = np.arange(1, t_f + 1).reshape(t_f, 1, 1)
    return h[-1] + v * steps


def last_observed_velocity(hist, t_f: int) -> np.ndarray:
    """Roll out the final observed per-frame velocity."""
    h = _coerce_track(hist)
    _check(h, t_f, 2)
    v = h[-1] - h[-2]
    steps = np.arange(1, t_f + 1).reshape(t_f, 1, 1)
    return h[-1] + v * steps


BASELINES = {
    "zero-velocity": zero_velocity,
    "constant-velocity": constant_velocity,
    "last-observed-velocity": last_observed_velocity,
}
