"""SVG export: well-formedness, layer toggles, and a byte-golden fixture."""

import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest

from locoforecast.baselines import zero_velocity
from locoforecast.pose import LocomotionSequence
from locoforecast.synth import NoiseConfig, make_dataset
from locoforecast.viz import (HISTORY_COLOR, PREDICTION_COLOR, TRUTH_COLOR,
                              render_svg, save_svg)

GOLDEN = Path(__file__).parent / "data" / "walker.svg"


def _record():
    noise = NoiseConfig(dropout_p=0.0, jitter_sigma=0.0, rot_jitter=0.0,
                        trans_jitter=0.0, depth_sigma=0.0)
    _, clean = make_dataset(1, 5, 3, noise, seed=21)
    return clean[0]


def test_svg_is_well_formed_xml():
    rec = _record()
    markup = render_svg(rec, zero_velocity(rec.coords[:rec.t_p], rec.t_f),
                        show_truth=True)
    root = ET.fromstring(markup)
    assert root.tag.endswith("svg")
    assert root.attrib["width"] == str(rec.frame_size[0])


def test_empty_prediction_renders_history_only():
    rec = _record()
    bare = render_svg(rec)
    empty = render_svg(rec, np.zeros((0, 25, 2)))
    assert bare == empty
    assert PREDICTION_COLOR not in bare
    assert HISTORY_COLOR in bare


def test_full_pose_prediction_draws_track_and_final_skeleton():
    rec = _record()
    pred = zero_velocity(rec.coords[:rec.t_p], rec.t_f)
    markup = render_svg(rec, pred)
    assert f'stroke="{PREDICTION_COLOR}" stroke-width="2.00" stroke-dasharray="4,3"' in markup
    assert f'stroke="{PREDICTION_COLOR}" stroke-width="1.00"' in markup

    anchor_only = render_svg(rec, pred[:, 1, :])
    assert "stroke-dasharray" in anchor_only
    assert f'<line' not in anchor_only.split("</svg>")[0].split("stroke-dasharray")[1]


def test_truth_layer_toggle():
    rec = _record()
    assert TRUTH_COLOR in render_svg(rec, show_truth=True)
    assert TRUTH_COLOR not in render_svg(rec, show_truth=False)


def test_dropped_joints_suppress_skeleton_edges():
    rec = _record()
    conf = rec.conf.copy()
    conf[0, :10] = 0.0
    sparse = LocomotionSequence(rec.coords, conf, rec.anchor_depth, rec.transforms,
                                rec.t_p, rec.t_f, rec.frame_size, rec.pedestrian_id)
    assert render_svg(sparse).count("<line ") < render_svg(rec).count("<line ")


def test_bad_prediction_shape_rejected():
    rec = _record()
    with pytest.raises(ValueError, match="prediction must be"):
        render_svg(rec, np.zeros((3, 7, 2)))


def test_save_svg_round_trip(tmp_path):
    rec = _record()
    markup = render_svg(rec)
    out = tmp_path / "frame.svg"
    save_svg(markup, out)
    assert out.read_text(encoding="utf-8") == markup


def test_golden_fixture_bytes():
    rec = _record()
    markup = render_svg(rec, zero_velocity(rec.coords[:rec.t_p], rec.t_f),
                        show_truth=True)
    assert markup.encode("utf-8") == GOLDEN.read_bytes()
