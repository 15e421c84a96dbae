"""Forward model: vignette, shading, rig layout and scan corruption."""

import numpy as np
import pytest

from matscan import scenes
from matscan.geometry import look_at
from matscan.simulator import (GroundTruthMaterial, NoiseConfig, ScanConfig,
                               default_camera, eval_ground_truth_brdf,
                               ir_frame_times, make_default_rig,
                               render_ir_intensity, simulate_scan, vignette)

from conftest import make_scan_config


class TestMaterialModel:
    def test_color_normalized(self):
        m = GroundTruthMaterial(np.array([0.5, 0.5, 0.5]), 0.2, 10.0,
                                np.array([2.0, 0.0, 0.0]))
        np.testing.assert_allclose(m.color, [1, 0, 0])

    def test_lambertian_is_constant(self):
        m = GroundTruthMaterial(np.array([0.3, 0.6, 0.9]), 0.0, 1.0,
                                np.array([1.0, 1.0, 1.0]))
        th = np.linspace(0, 90, 20)
        np.testing.assert_allclose(eval_ground_truth_brdf(m, th), 0.6, atol=1e-12)

    def test_lobe_peaks_at_zero_half_angle(self):
        m = GroundTruthMaterial(np.array([0.2, 0.2, 0.2]), 0.7, 40.0,
                                np.array([1.0, 1.0, 1.0]))
        vals = eval_ground_truth_brdf(m, np.array([0.0, 10.0, 45.0]))
        assert vals[0] > vals[1] > vals[2]
        assert vals[0] == pytest.approx(0.9)

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            GroundTruthMaterial(np.array([1.5, 0, 0]), 0.0, 1.0,
                                np.array([1.0, 0, 0]))
        with pytest.raises(ValueError):
            GroundTruthMaterial(np.array([0.5, 0, 0]), -0.1, 1.0,
                                np.array([1.0, 0, 0]))


class TestVignette:
    def test_unity_at_principal_point(self):
        cam = default_camera()
        assert vignette((cam.cx, cam.cy), cam) == pytest.approx(1.0)

    def test_matches_cos4_closed_form(self):
        cam = default_camera()
        px, py = 500.0, 100.0
        dx = (px - cam.cx) / cam.fx
        dy = (py - cam.cy) / cam.fy
        expected = (1.0 / np.sqrt(1.0 + dx * dx + dy * dy)) ** 4
        assert vignette((px, py), cam) == pytest.approx(expected, rel=1e-12)

    def test_monotone_falloff(self):
        cam = default_camera()
        xs = cam.cx + np.linspace(0, 300, 30)
        vals = vignette((xs, np.full(30, cam.cy)), cam)
        assert np.all(np.diff(vals) < 0)


class TestScalarShading:
    def test_inverse_square_falloff(self):
        m = GroundTruthMaterial(np.array([0.5, 0.5, 0.5]), 0.0, 1.0,
                                np.array([1.0, 1.0, 1.0]))
        pose = look_at([0.0, 0.0, -1.0], [0.0, 0.0, 0.0])
        p = np.zeros(3)
        n = np.array([0.0, 0.0, -1.0])
        i1 = render_ir_intensity(p, n, m, [0, 0, -0.5], 1.0, pose, 1.0)
        i2 = render_ir_intensity(p, n, m, [0, 0, -1.0], 1.0, pose, 1.0)
        assert i1 / i2 == pytest.approx(4.0, rel=1e-12)

    def test_back_facing_is_dark(self):
        m = GroundTruthMaterial(np.array([0.5, 0.5, 0.5]), 0.0, 1.0,
                                np.array([1.0, 1.0, 1.0]))
        pose = look_at([0.0, 0.0, -1.0], [0.0, 0.0, 0.0])
        out = render_ir_intensity(np.zeros(3), np.array([0.0, 0.0, 1.0]), m,
                                  [0, 0, -0.5], 1.0, pose, 1.0)
        assert out == 0.0

    def test_brightness_scales_linearly(self):
        m = GroundTruthMaterial(np.array([0.5, 0.5, 0.5]), 0.3, 12.0,
                                np.array([1.0, 1.0, 1.0]))
        pose = look_at([0.0, 0.1, -1.0], [0.0, 0.0, 0.0])
        n = np.array([0.0, 0.0, -1.0])
        a = render_ir_intensity(np.zeros(3), n, m, [0.1, 0, -0.6], 1.0, pose, 0.9)
        b = render_ir_intensity(np.zeros(3), n, m, [0.1, 0, -0.6], 2.5, pose, 0.9)
        assert b == pytest.approx(2.5 * a, rel=1e-12)


class TestRig:
    def test_layout(self):
        rig = make_default_rig()
        assert len(rig) == 10
        np.testing.assert_allclose(rig.brightness, 1.0)
        radii = np.linalg.norm(rig.positions[:8], axis=1)
        np.testing.assert_allclose(radii, 0.16, atol=1e-12)
        assert np.linalg.norm(rig.positions[8]) == pytest.approx(0.08)
        np.testing.assert_allclose(rig.positions[9], [-0.28, 0.0, 0.0])


class TestScan:
    def test_frame_times_inside_span(self):
        traj = scenes.arc_trajectory(10, 4.0)
        cfg = make_scan_config(traj, NoiseConfig(), 32)
        times = ir_frame_times(cfg)
        assert len(times) == 32
        assert times[0] > traj[0].timestamp
        assert times[-1] < traj[-1].timestamp

    def test_deterministic_per_seed(self):
        scene = scenes.make_scene("two-sphere", 300, 1)
        traj = scenes.arc_trajectory(10, 4.0)
        noise = NoiseConfig(normal_jitter_deg=1.0,
                            intensity_multiplicative_sigma=0.05,
                            outlier_fraction=0.02, dropout_fraction=0.05,
                            rng_seed=9)
        cfg = make_scan_config(traj, noise, 30)
        ir1, rgb1 = simulate_scan(scene, cfg)
        ir2, rgb2 = simulate_scan(scene, cfg)
        np.testing.assert_array_equal(ir1.vertex_id, ir2.vertex_id)
        np.testing.assert_array_equal(ir1.intensity, ir2.intensity)
        np.testing.assert_array_equal(rgb1.rgb, rgb2.rgb)

    def test_seed_changes_noise(self):
        scene = scenes.make_scene("two-sphere", 300, 1)
        traj = scenes.arc_trajectory(10, 4.0)
        cfg1 = make_scan_config(traj, NoiseConfig(
            intensity_multiplicative_sigma=0.05, rng_seed=1), 30)
        cfg2 = make_scan_config(traj, NoiseConfig(
            intensity_multiplicative_sigma=0.05, rng_seed=2), 30)
        ir1, _ = simulate_scan(scene, cfg1)
        ir2, _ = simulate_scan(scene, cfg2)
        assert not np.array_equal(ir1.intensity, ir2.intensity)

    def test_noiseless_matches_scalar_reference(self, noiseless_two_sphere):
        run = noiseless_two_sphere
        ir = run["ir"]
        scene = run["scene"]
        cfg = run["config"]
        from matscan.geometry import interpolate_trajectory
        rng = np.random.default_rng(0)
        rows = rng.choice(len(ir), size=64, replace=False)
        for r in rows:
            pose = interpolate_trajectory(run["trajectory"],
                                          float(ir.frame_time[r]))
            vid = int(ir.vertex_id[r])
            led = int(ir.led_index[r])
            vig = float(vignette((ir.pixel[r, 0], ir.pixel[r, 1]), cfg.camera))
            ref = render_ir_intensity(
                scene.positions[vid], scene.normals[vid],
                scene.materials[scene.material_ids[vid]],
                pose.transform(cfg.rig.positions[led]),
                float(cfg.rig.brightness[led]), pose, vig)
            assert ir.intensity[r] == pytest.approx(min(ref, cfg.saturation_level),
                                                    rel=1e-12)

    def test_saturation_clips(self):
        scene = scenes.make_scene("two-sphere", 300, 1)
        traj = scenes.arc_trajectory(10, 4.0)
        cfg = make_scan_config(traj, NoiseConfig(outlier_fraction=0.5,
                                                 rng_seed=3), 30)
        cfg.saturation_level = 0.01
        ir, _ = simulate_scan(scene, cfg)
        assert np.all(ir.intensity <= 0.01 + 1e-15)

    def test_dropout_reduces_sample_count(self):
        scene = scenes.make_scene("two-sphere", 500, 1)
        traj = scenes.arc_trajectory(10, 4.0)
        full, _ = simulate_scan(scene, make_scan_config(traj, NoiseConfig(), 30))
        dropped, _ = simulate_scan(scene, make_scan_config(
            traj, NoiseConfig(dropout_fraction=0.4, rng_seed=1), 30))
        assert len(dropped) < 0.75 * len(full)

    def test_leds_cycle(self, noiseless_two_sphere):
        ir = noiseless_two_sphere["ir"]
        times = np.unique(ir.frame_time)
        leds = [int(ir.led_index[ir.frame_time == t][0]) for t in times[:12]]
        assert leds == [i % 10 for i in range(12)]

    def test_empty_scene_rejected(self):
        traj = scenes.arc_trajectory(10, 4.0)
        cfg = make_scan_config(traj, NoiseConfig(), 10)
        empty = scenes.make_scene("two-sphere", 2, 1)
        import dataclasses
        bad = dataclasses.replace(empty, positions=np.zeros((0, 3)),
                                  normals=np.zeros((0, 3)),
                                  material_ids=np.zeros(0, int))
        with pytest.raises(ValueError):
            simulate_scan(bad, cfg)
