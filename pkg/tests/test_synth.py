"""Scene synthesis against geometric oracles: homogeneous-matrix products,
bone-length preservation, projection closed forms, and noise statistics."""

import math

import numpy as np
import pytest

from locoforecast.pose import ANCHOR, N_JOINTS, LocomotionSequence
from locoforecast.synth import (COORD_GRID, NoiseConfig, PinholeCamera, SceneRejected,
                                TransformSE3, WalkerConfig, annotate_noisy, camera_path,
                                chain_transforms, compose, generate_scene,
                                make_dataset, nearest_rotation, perturbed_step,
                                rotation_from_axis_angle, sample_scene, snap,
                                walker_joints)
from locoforecast.synth import _JOINT_PARENT, _REST_OFFSETS


def _random_transform(rng, rot_scale=1.0, trans_scale=2.0):
    r = rotation_from_axis_angle(rng.normal(0.0, rot_scale, 3))
    return TransformSE3(nearest_rotation(r), rng.normal(0.0, trans_scale, 3))


# ---------------------------------------------------------------------------
# rigid transforms


def test_snap_grid_properties():
    rng = np.random.default_rng(20)
    x = rng.uniform(-2000, 2000, size=1000)
    s = snap(x)
    assert np.allclose(s * COORD_GRID, np.round(s * COORD_GRID), atol=1e-9)
    assert np.array_equal(snap(s), s)
    assert np.abs(s - x).max() <= 0.5 / COORD_GRID + 1e-12


def test_rodrigues_quarter_turn():
    r = rotation_from_axis_angle(np.array([0.0, 0.0, math.pi / 2.0]))
    assert np.allclose(r @ np.array([1.0, 0.0, 0.0]), [0.0, 1.0, 0.0], atol=1e-12)
    assert np.allclose(rotation_from_axis_angle(np.zeros(3)), np.eye(3))


def test_rodrigues_small_angle_linearization():
    vec = np.array([1e-7, -2e-7, 1.5e-7])
    kx = np.array([[0.0, -vec[2], vec[1]], [vec[2], 0.0, -vec[0]], [-vec[1], vec[0], 0.0]])
    assert np.allclose(rotation_from_axis_angle(vec), np.eye(3) + kx, atol=1e-13)


def test_rodrigues_always_orthonormal():
    rng = np.random.default_rng(21)
    for _ in range(200):
        r = rotation_from_axis_angle(rng.normal(0.0, 2.0, 3))
        assert np.abs(r.T @ r - np.eye(3)).max() < 1e-12
        assert abs(np.linalg.det(r) - 1.0) < 1e-12


def test_transform_validation():
    with pytest.raises(ValueError, match="orthonormal"):
        TransformSE3(np.eye(3) * 1.01, np.zeros(3))
    with pytest.raises(ValueError, match="determinant"):
        TransformSE3(np.diag([1.0, 1.0, -1.0]), np.zeros(3))
    with pytest.raises(ValueError):
        TransformSE3(np.eye(3), np.zeros(2))


def test_transform_apply_and_inverse():
    rng = np.random.default_rng(22)
    for _ in range(50):
        m = _random_transform(rng)
        pts = rng.normal(size=(7, 3))
        back = m.inverse().apply(m.apply(pts))
        assert np.allclose(back, pts, atol=1e-12)
        rt = m.inverse()
        assert np.allclose(compose(rt, m).as_matrix44(), np.eye(4), atol=1e-12)


def test_matrix_round_trip():
    rng = np.random.default_rng(23)
    m = _random_transform(rng)
    again = TransformSE3.from_matrix34(m.as_matrix34())
    assert np.allclose(again.rotation, m.rotation)
    assert np.allclose(again.translation, m.translation)
    m44 = m.as_matrix44()
    assert np.array_equal(m44[3], [0.0, 0.0, 0.0, 1.0])


def test_compose_matches_homogeneous_product():
    rng = np.random.default_rng(24)
    for _ in range(100):
        a = _random_transform(rng)
        b = _random_transform(rng)
        got = compose(a, b).as_matrix44()
        want = a.as_matrix44() @ b.as_matrix44()
        assert np.abs(got - want).max() < 1e-12


def test_chain_matches_homogeneous_product_30_steps():
    rng = np.random.default_rng(25)
    for trial in range(20):
        steps = [_random_transform(rng, rot_scale=0.3, trans_scale=0.5) for _ in range(30)]
        got = chain_transforms(steps).as_matrix44()
        want = np.eye(4)
        for s in steps:
            want = s.as_matrix44() @ want
        assert np.abs(got - want).max() < 1e-9, f"trial {trial}"
    assert np.allclose(chain_transforms([]).as_matrix44(), np.eye(4))


def test_nearest_rotation_restores_manifold():
    rng = np.random.default_rng(26)
    r = rotation_from_axis_angle(rng.normal(size=3))
    dirty = r + rng.normal(0.0, 1e-6, size=(3, 3))
    fixed = nearest_rotation(dirty)
    assert np.abs(fixed.T @ fixed - np.eye(3)).max() < 1e-12
    assert np.abs(fixed - r).max() < 1e-5


# ---------------------------------------------------------------------------
# walker


def test_walker_bone_lengths_never_change():
    # limb swings are rotations, so every segment keeps its rest length
    cfg = WalkerConfig(root_speed=1.5)
    for t in np.linspace(0.0, 3.0, 17):
        pos = walker_joints(cfg, float(t))
        for j, parent in _JOINT_PARENT.items():
            want = np.linalg.norm(_REST_OFFSETS[j]) * cfg.segment_scale
            got = np.linalg.norm(pos[j] - pos[parent])
            assert got == pytest.approx(want, abs=1e-12), f"joint {j} at t={t}"


def test_walker_scale_scales_bones():
    a = walker_joints(WalkerConfig(segment_scale=1.0), 0.4)
    b = walker_joints(WalkerConfig(segment_scale=1.1), 0.4)
    da = np.linalg.norm(a[1] - a[8])
    db = np.linalg.norm(b[1] - b[8])
    assert db == pytest.approx(1.1 * da, rel=1e-12)


def test_walker_root_moves_at_speed_along_heading():
    cfg = WalkerConfig(root_speed=1.3, heading=0.7)
    p0 = walker_joints(cfg, 0.0)[8]
    p2 = walker_joints(cfg, 2.0)[8]
    step = p2 - p0
    assert np.linalg.norm(step) == pytest.approx(2.6, abs=1e-12)
    assert step[1] == 0.0
    assert math.atan2(step[2], step[0]) == pytest.approx(0.7)


def test_walker_stature_is_human_scale():
    pos = walker_joints(WalkerConfig(), 0.0)
    height = pos[:, 1].max() - pos[:, 1].min()
    assert 1.3 < height < 2.1


def test_walker_legs_swing_in_antiphase():
    cfg = WalkerConfig(root_speed=1.2)
    assert cfg.swing_phase[13] - cfg.swing_phase[10] == pytest.approx(math.pi)
    # knees displace along heading in opposite directions at peak swing
    t = 1.0 / (4.0 * cfg.swing_frequency[10])
    pos = walker_joints(cfg, float(t))
    root = pos[8]
    right = pos[10] - pos[9]
    left = pos[13] - pos[12]
    assert np.sign(right[2]) != np.sign(left[2])
    assert root is not None


def test_walker_config_validation():
    with pytest.raises(ValueError):
        WalkerConfig(root_speed=-1.0)
    with pytest.raises(ValueError):
        WalkerConfig(segment_scale=0.0)
    with pytest.raises(ValueError):
        WalkerConfig(swing_amplitude=np.zeros(3))


# ---------------------------------------------------------------------------
# camera


def test_pinhole_projection_closed_form():
    cam = PinholeCamera()
    uv = cam.project(np.array([[0.0, 0.0, 5.0], [1.0, -1.0, 5.0]]))
    assert np.allclose(uv[0], [640.0, 360.0])
    assert np.allclose(uv[1], [640.0 + 200.0, 360.0 - 200.0])
    with pytest.raises(SceneRejected):
        cam.project(np.array([[0.0, 0.0, -1.0]]))


def test_camera_path_profiles():
    rng = np.random.default_rng(27)
    static = camera_path("static", 5, 30.0, rng)
    for m in static:
        assert np.allclose(m.as_matrix44(), np.eye(4))
    for profile in ("default", "heavy"):
        path = camera_path(profile, 10, 30.0, rng)
        assert len(path) == 10
        assert np.allclose(path[0].as_matrix44(), np.eye(4), atol=1e-12)
    with pytest.raises(ValueError):
        camera_path("drone", 5, 30.0, rng)


def test_heavy_profile_moves_more_than_default():
    rng = np.random.default_rng(28)
    d = np.mean([np.linalg.norm(camera_path("default", 30, 30.0, rng)[-1].translation)
                 for _ in range(20)])
    h = np.mean([np.linalg.norm(camera_path("heavy", 30, 30.0, rng)[-1].translation)
                 for _ in range(20)])
    assert h > d


# ---------------------------------------------------------------------------
# scene generation


def _static_scene(frames=10, t_p=None, speed=1.2):
    walker = WalkerConfig(root_speed=speed, heading=math.pi / 2.0,
                          start_position=(0.0, 0.55, 9.0))
    cam = PinholeCamera()
    path = camera_path("static", frames, 30.0, np.random.default_rng(0))
    return generate_scene(walker, path, cam, frames, 30.0, t_p, pedestrian_id="pX")


def test_generate_scene_static_depth_closed_form():
    seq = _static_scene(frames=12, speed=1.2)
    # neck sits directly above the root: depth grows exactly with root motion
    want = 9.0 + 1.2 * np.arange(12) / 30.0
    assert np.allclose(seq.anchor_depth, want, atol=1e-12)
    # on the optical axis: u stays at the principal point
    assert np.allclose(seq.coords[:, ANCHOR, 0], 640.0)


def test_generate_scene_snaps_to_grid():
    seq = _static_scene()
    scaled = seq.coords * COORD_GRID
    assert np.allclose(scaled, np.round(scaled), atol=1e-9)
    assert np.all(seq.conf == 1.0)
    eye = np.hstack([np.eye(3), np.zeros((3, 1))])
    for i in range(seq.frames):
        assert np.allclose(seq.transforms[i], eye)


def test_generate_scene_rejects_out_of_frame():
    walker = WalkerConfig(root_speed=0.0, heading=0.0, start_position=(20.0, 0.55, 9.0))
    cam = PinholeCamera()
    path = camera_path("static", 5, 30.0, np.random.default_rng(0))
    with pytest.raises(SceneRejected):
        generate_scene(walker, path, cam, 5)


def test_generate_scene_transforms_relative_to_first_frame():
    rng = np.random.default_rng(29)
    walker = WalkerConfig(root_speed=1.0, heading=math.pi / 2.0,
                          start_position=(0.0, 0.55, 10.0))
    cam = PinholeCamera()
    path = camera_path("default", 8, 30.0, rng)
    seq = generate_scene(walker, path, cam, 8)
    eye = np.hstack([np.eye(3), np.zeros((3, 1))])
    assert np.array_equal(seq.transforms[0], eye)
    # oracle: cam_i after undoing cam_0
    for i in range(1, 8):
        want = path[i].as_matrix44() @ np.linalg.inv(path[0].as_matrix44())
        assert np.abs(seq.transforms[i] - want[:3]).max() < 1e-9


# ---------------------------------------------------------------------------
# detector noise


def _clean_track(frames=40):
    rng = np.random.default_rng(30)
    coords = snap(rng.uniform(100, 600, size=(frames, N_JOINTS, 2)))
    tf = np.tile(np.hstack([np.eye(3), np.zeros((3, 1))]), (frames, 1, 1))
    return LocomotionSequence(coords, np.ones((frames, N_JOINTS)), np.full(frames, 8.0),
                              tf, frames, 0, (1280, 720), "pN")


def test_zero_noise_is_identity():
    gt = _clean_track()
    quiet = NoiseConfig(dropout_p=0.0, jitter_sigma=0.0, conf_cap=12.0,
                        rot_jitter=0.0, trans_jitter=0.0, depth_sigma=0.0)
    noisy = annotate_noisy(gt, quiet, 5)
    assert np.array_equal(noisy.coords, gt.coords)
    assert np.array_equal(noisy.conf, gt.conf)
    assert np.array_equal(noisy.anchor_depth, gt.anchor_depth)
    assert np.allclose(noisy.transforms, gt.transforms, atol=1e-15)


def test_dropout_rate_matches_binomial():
    gt = _clean_track(frames=80)
    cfg = NoiseConfig(dropout_p=0.3, jitter_sigma=0.0, rot_jitter=0.0,
                      trans_jitter=0.0, depth_sigma=0.0)
    noisy = annotate_noisy(gt, cfg, 6)
    n = gt.frames * N_JOINTS
    missing = int((noisy.conf == 0.0).sum())
    sigma = math.sqrt(n * 0.3 * 0.7)
    assert abs(missing - 0.3 * n) < 3.0 * sigma
    # missing joints use the exact (0, 0, 0) encoding
    gone = noisy.conf == 0.0
    assert np.all(noisy.coords[gone] == 0.0)


def test_confidence_tracks_jitter_magnitude():
    gt = _clean_track(frames=60)
    cfg = NoiseConfig(dropout_p=0.0, jitter_sigma=3.0, conf_cap=12.0,
                      rot_jitter=0.0, trans_jitter=0.0, depth_sigma=0.0)
    noisy = annotate_noisy(gt, cfg, 7)
    kept = noisy.conf > 0.0
    assert np.all(noisy.conf[kept] <= 1.0)
    # snap moves a coordinate by at most half a grid cell, so the jitter
    # magnitude is recoverable from the displacement up to that tolerance
    disp = np.linalg.norm(noisy.coords - gt.coords, axis=2)[kept]
    want_conf = 1.0 - disp / 12.0
    assert np.abs(noisy.conf[kept] - want_conf).max() < 1e-3
    demoted = ~kept
    assert demoted.mean() < 0.01  # P(|jitter| > 12 px) is tiny at sigma 3


def test_depth_noise_keeps_positive():
    gt = _clean_track()
    cfg = NoiseConfig(dropout_p=0.0, jitter_sigma=0.0, rot_jitter=0.0,
                      trans_jitter=0.0, depth_sigma=5.0)
    noisy = annotate_noisy(gt, cfg, 8)
    assert np.all(noisy.anchor_depth > 0.0)


def test_egomotion_drift_follows_sqrt_k():
    # static true path, translation jitter only: RMS drift at step k is tau*sqrt(k)
    tau = 0.01
    cfg = NoiseConfig(dropout_p=0.0, jitter_sigma=0.0, rot_jitter=0.0,
                      trans_jitter=tau, depth_sigma=0.0)
    gt = _clean_track(frames=31)
    ks = (5, 15, 30)
    acc = {k: 0.0 for k in ks}
    n = 200
    for seed in range(n):
        noisy = annotate_noisy(gt, cfg, seed)
        for k in ks:
            acc[k] += np.sum(noisy.transforms[k, :, 3] ** 2)
    for k in ks:
        rms = math.sqrt(acc[k] / n)
        want = tau * math.sqrt(k)
        assert abs(rms - want) / want < 0.15, f"k={k}: rms {rms:.5f} vs {want:.5f}"
    # and drift grows monotonically in k
    assert acc[5] < acc[15] < acc[30]


def test_perturbed_step_zero_noise_is_exact():
    rng = np.random.default_rng(31)
    step = _random_transform(rng)
    quiet = NoiseConfig(rot_jitter=0.0, trans_jitter=0.0)
    again = perturbed_step(step, quiet, rng)
    assert np.allclose(again.as_matrix44(), step.as_matrix44(), atol=1e-12)


def test_noise_config_validation():
    with pytest.raises(ValueError):
        NoiseConfig(dropout_p=1.0)
    with pytest.raises(ValueError):
        NoiseConfig(jitter_sigma=-1.0)
    with pytest.raises(ValueError):
        NoiseConfig(jitter_sigma=2.0, conf_cap=0.0)


# ---------------------------------------------------------------------------
# dataset sampling


def test_make_dataset_alignment_and_determinism():
    noise = NoiseConfig()
    a_noisy, a_clean = make_dataset(4, 6, 6, noise, seed=42)
    b_noisy, b_clean = make_dataset(4, 6, 6, noise, seed=42)
    assert len(a_noisy) == len(a_clean) == 4
    for i, (n1, c1, n2) in enumerate(zip(a_noisy, a_clean, b_noisy)):
        assert n1.pedestrian_id == c1.pedestrian_id == f"ped{i:05d}"
        assert n1.t_p == c1.t_p == 6 and n1.t_f == c1.t_f == 6
        assert np.all(c1.conf == 1.0)
        assert np.array_equal(n1.coords, n2.coords)
        assert np.array_equal(n1.transforms, n2.transforms)
    c_noisy, _ = make_dataset(4, 6, 6, noise, seed=43)
    assert not np.array_equal(a_noisy[0].coords, c_noisy[0].coords)


def test_sample_scene_rejection_terminates():
    rng = np.random.default_rng(33)
    cam = PinholeCamera()
    seq = sample_scene(rng, cam, 12, 6, profile="default", pedestrian_id="s")
    assert seq.frames == 12 and seq.t_p == 6
    margin = 40.0
    u = seq.coords[:, ANCHOR, 0]
    v = seq.coords[:, ANCHOR, 1]
    assert np.all((u >= margin) & (u <= cam.width - margin))
    assert np.all((v >= margin) & (v <= cam.height - margin))
