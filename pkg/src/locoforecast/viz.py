"""Deterministic SVG rendering of sequences and forecasts.

Hand-rolled markup with fixed number formatting so that identical inputs
produce byte-identical files; matplotlib is reserved for report figures.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .pose import ANCHOR, SKELETON_EDGES, LocomotionSequence

HISTORY_COLOR = "#4878a8"
PREDICTION_COLOR = "#c44e52"
TRUTH_COLOR = "#55a868"
SKELETON_COLOR = "#999999"


def _fmt(x: float) -> str:
    return f"{float(x):.2f}"


def _polyline(points: np.ndarray, color: str, width: float, dash: str = "") -> str:
    pts = " ".join(f"{_fmt(p[0])},{_fmt(p[1])}" for p in points)
    extra = f' stroke-dasharray="{dash}"' if dash else ""
    return (f'<polyline points="{pts}" fill="none" stroke="{color}"'
            f' stroke-width="{_fmt(width)}"{extra}/>')


def _skeleton(coords: np.ndarray, conf: np.ndarray, color: str, opacity: float) -> list[str]:
    out = []
    for a, b in SKELETON_EDGES:
        if conf[a] <= 0.0 or conf[b] <= 0.0:
            continue
        out.append(f'<line x1="{_fmt(coords[a, 0])}" y1="{_fmt(coords[a, 1])}"'
                   f' x2="{_fmt(coords[b, 0])}" y2="{_fmt(coords[b, 1])}"'
                   f' stroke="{color}" stroke-width="1.00"'
                   f' opacity="{_fmt(opacity)}"/>')
    return out


def _anchor_track(pred: np.ndarray) -> np.ndarray:
    pred = np.asarray(pred, dtype=np.float64)
    if pred.ndim == 2 and pred.shape[1] == 2:
        return pred
    if pred.ndim == 3 and pred.shape[1] == 1:
        return pred[:, 0, :]
    if pred.ndim == 3 and pred.shape[1] == 25:
        return pred[:, ANCHOR, :]
    raise ValueError(f"prediction must be (T, 2), (T, 1, 2) or (T, 25, 2), got {pred.shape}")


def render_svg(record: LocomotionSequence, prediction: np.ndarray | None = None,
               show_truth: bool = False) -> str:
    """One frame-sized SVG: history skeletons, anchor tracks, optional forecast.

    An empty or absent prediction renders the history alone; full-pose
    predictions additionally draw the final predicted skeleton.
    """
    w, h = record.frame_size
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{int(w)}" height="{int(h)}"'
        f' viewBox="0 0 {int(w)} {int(h)}">',
        f'<rect width="{int(w)}" height="{int(h)}" fill="#ffffff"/>',
    ]
    for i in range(record.t_p):
        fade = 0.15 + 0.55 * (i + 1) / record.t_p
        parts.extend(_skeleton(record.coords[i], record.conf[i], SKELETON_COLOR, fade))
    parts.append(_polyline(record.coords[: record.t_p, ANCHOR, :], HISTORY_COLOR, 2.0))
    if show_truth and record.t_f > 0:
        parts.append(_polyline(record.coords[record.t_p:, ANCHOR, :], TRUTH_COLOR, 2.0))
    if prediction is not None:
        pred = np.asarray(prediction, dtype=np.float64)
        if pred.size > 0:
            parts.append(_polyline(_anchor_track(pred), PREDICTION_COLOR, 2.0, dash="4,3"))
            if pred.ndim == 3 and pred.shape[1] == 25:
                ones = np.ones(25)
                parts.extend(_skeleton(pred[-1], ones, PREDICTION_COLOR, 0.9))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def save_svg(markup: str, path: str | Path) -> None:
    Path(path).write_text(markup, encoding="utf-8")
