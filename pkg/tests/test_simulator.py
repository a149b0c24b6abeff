"""Scene spawning, rendering, sponge sweeps, metrics and episode runs.

The sweep physics has one hand-checkable invariant: a particle nearly on the
sweep axis exits at the sponge radius, and halving the sub-step changes the
exit point by far less than a millimeter.
"""

import numpy as np
import pytest

import tabletop_lfd as T
from tabletop_lfd.geometry import table_to_virtual, virtual_to_table
from tabletop_lfd.simulator import quadratic_through
from tabletop_lfd.tpgmm import EmConfig, Trajectory

CORNER_PX = np.array([180.0, 180.0])


def line_traj(p0, p1, n=200):
    t = np.linspace(0.0, 1.0, n)
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    xy = p0 + np.outer(t, p1 - p0)
    return Trajectory(np.column_stack([t, xy]))


def row_scene(row=120, c0=80, c1=160, value=1.0):
    ink = np.zeros((240, 240))
    ink[row, c0:c1 + 1] = value
    return T.Scene(T.DirtType.MARKER, ink=ink)


class TestSpawn:
    def test_marker_deterministic(self):
        a = T.spawn_scene(T.DirtType.MARKER, None, np.random.default_rng(5))
        b = T.spawn_scene(T.DirtType.MARKER, None, np.random.default_rng(5))
        assert np.array_equal(a.ink, b.ink)
        assert a.ink.any()

    def test_lentils_deterministic_and_bounded(self):
        a = T.spawn_scene(T.DirtType.LENTILS, None, np.random.default_rng(5))
        b = T.spawn_scene(T.DirtType.LENTILS, None, np.random.default_rng(5))
        assert np.array_equal(a.particles, b.particles)
        assert len(a.particles) == T.LentilSpawnParams().count
        bd = a.table.bounds
        assert (a.particles[:, 0] >= bd.x_min).all()
        assert (a.particles[:, 0] <= bd.x_max).all()
        assert (a.particles[:, 1] >= bd.y_min).all()
        assert (a.particles[:, 1] <= bd.y_max).all()

    def test_ink_confined_to_table_cells(self):
        for seed in range(6):
            sc = T.spawn_scene(T.DirtType.MARKER, None, np.random.default_rng(seed))
            rr, cc = np.nonzero(sc.ink)
            assert rr.min() >= 60 and rr.max() <= 179
            assert cc.min() >= 60 and cc.max() <= 179

    def test_bad_params_rejected(self):
        rng = np.random.default_rng(0)
        with pytest.raises(T.ParamsOutOfBounds):
            T.spawn_scene(T.DirtType.LENTILS, T.LentilSpawnParams(count=0), rng)
        with pytest.raises(T.ParamsOutOfBounds):
            T.spawn_scene(T.DirtType.LENTILS, T.LentilSpawnParams(sigma=0.0), rng)
        with pytest.raises(T.ParamsOutOfBounds):
            T.spawn_scene(T.DirtType.LENTILS, T.LentilSpawnParams(margin=0.3), rng)
        with pytest.raises(T.ParamsOutOfBounds):
            T.spawn_scene(T.DirtType.MARKER,
                          T.MarkerSpawnParams(stroke_width=-0.1), rng)
        with pytest.raises(T.ParamsOutOfBounds):
            T.spawn_scene(T.DirtType.MARKER,
                          T.MarkerSpawnParams(seg_len_min=0.2, seg_len_max=0.1), rng)

    def test_scene_validation(self):
        with pytest.raises(T.InvariantViolation):
            T.Scene(T.DirtType.MARKER, ink=np.zeros((100, 100)))
        with pytest.raises(T.InvariantViolation):
            T.Scene(T.DirtType.MARKER, ink=np.full((240, 240), 1.5))
        with pytest.raises(T.InvariantViolation):
            T.Scene(T.DirtType.LENTILS, particles=np.array([[0.5, 0.0]]))


class TestQuadratic:
    def test_hits_anchors(self):
        b1, b2, b3 = np.array([0.0, 0.0]), np.array([0.5, 0.3]), np.array([1.0, -0.2])
        curve = quadratic_through(b1, b2, b3)
        assert np.allclose(curve(0.0), b1, atol=1e-12)
        assert np.allclose(curve(0.5), b2, atol=1e-12)
        assert np.allclose(curve(1.0), b3, atol=1e-12)

    def test_collinear_anchors_give_straight_line(self):
        curve = quadratic_through([0.0, 0.0], [0.5, 0.5], [1.0, 1.0])
        t = np.linspace(0, 1, 17)
        pts = curve(t)
        assert np.allclose(pts[:, 0], pts[:, 1], atol=1e-12)


class TestRender:
    def test_flat_colors_exact(self):
        img = T.render_scene(row_scene())
        px = img.pixels
        assert np.array_equal(px[0, 0], T.DEFAULT_RENDER.background_rgb)
        assert np.array_equal(px[70, 70], T.DEFAULT_RENDER.table_rgb)
        assert np.array_equal(px[120, 100], T.DEFAULT_RENDER.ink_rgb)

    def test_partial_ink_blends_linearly(self):
        scene = row_scene(value=0.25)
        px = T.render_scene(scene).pixels
        want = 0.75 * np.array(T.DEFAULT_RENDER.table_rgb) \
            + 0.25 * np.array(T.DEFAULT_RENDER.ink_rgb)
        assert np.allclose(px[120, 100], want, atol=1e-12)

    def test_lentil_blob_lands_on_projected_pixel(self):
        p = np.array([-0.52, -0.17])
        scene = T.Scene(T.DirtType.LENTILS, particles=p[None, :])
        mask = T.segment_dirt(T.render_scene(scene))
        assert mask.count > 0
        rr, cc = np.nonzero(mask.bits)
        u, v = table_to_virtual(p, 240.0)
        assert abs(cc.mean() - u) <= 1.0
        assert abs(rr.mean() - v) <= 1.0

    def test_lentils_never_paint_off_the_table(self):
        bd = T.DEFAULT_TABLE.bounds
        pts = np.array([[bd.x_min, bd.y_min], [bd.x_max, bd.y_max],
                        [bd.x_min, bd.y_max], [-0.5, bd.y_min]])
        mask = T.segment_dirt(T.render_scene(T.Scene(T.DirtType.LENTILS,
                                                     particles=pts)))
        rr, cc = np.nonzero(mask.bits)
        assert rr.min() >= 60 and rr.max() <= 179
        assert cc.min() >= 60 and cc.max() <= 179


class TestSweep:
    def test_straight_pass_erases_the_stroke(self):
        scene = row_scene()
        lo = np.array([*virtual_to_table((80.0, 120.0), 240.0)])
        hi = np.array([*virtual_to_table((160.0, 120.0), 240.0)])
        out = T.execute_trajectory(scene, line_traj(lo, hi))
        assert out.ink.sum() == 0.0
        assert scene.ink.sum() > 0  # input scene untouched

    def test_cells_outside_the_capsule_survive(self):
        ink = np.zeros((240, 240))
        ink[120, 80:161] = 1.0
        ink[70, 80:161] = 1.0  # second stroke 50 px (~0.21 m) away
        scene = T.Scene(T.DirtType.MARKER, ink=ink)
        lo = np.array([*virtual_to_table((80.0, 120.0), 240.0)])
        hi = np.array([*virtual_to_table((160.0, 120.0), 240.0)])
        out = T.execute_trajectory(scene, line_traj(lo, hi))
        assert np.array_equal(out.ink[70], scene.ink[70])
        assert out.ink[120].sum() == 0.0

    def test_ink_mass_never_increases(self):
        rng = np.random.default_rng(12)
        scene = T.spawn_scene(T.DirtType.MARKER, None, rng)
        mass = scene.ink.sum()
        for _ in range(4):
            a = rng.uniform([-0.7, -0.38], [-0.3, 0.05], 2)
            b = rng.uniform([-0.7, -0.38], [-0.3, 0.05], 2)
            scene = T.execute_trajectory(scene, line_traj(a, b))
            assert scene.ink.sum() <= mass + 1e-12
            mass = scene.ink.sum()

    def test_near_axis_particle_exits_at_sponge_radius(self):
        traj = Trajectory(np.array([[0.0, -0.5, -0.35], [1.0, -0.5, -0.05]]))
        r = T.DEFAULT_SPONGE_RADIUS
        for y0 in (0.001, -0.002, 0.003):
            scene = T.Scene(T.DirtType.LENTILS,
                            particles=np.array([[-0.5 + y0, -0.2]]))
            coarse = T.execute_trajectory(scene, traj, step_frac=0.5).particles[0]
            fine = T.execute_trajectory(scene, traj, step_frac=0.05).particles[0]
            d_coarse = abs(coarse[0] + 0.5)
            d_fine = abs(fine[0] + 0.5)
            assert abs(d_coarse - d_fine) < 1e-3
            assert abs(d_coarse - r) < 2e-3
            assert np.sign(coarse[0] + 0.5) == np.sign(y0)

    def test_particles_stay_on_the_table(self):
        corner = np.array(T.DEFAULT_TABLE.target_corner)
        pts = corner - np.array([[0.02, 0.02], [0.05, 0.01], [0.01, 0.05]])
        scene = T.Scene(T.DirtType.LENTILS, particles=pts)
        out = T.execute_trajectory(scene, line_traj(corner - 0.3, corner))
        bd = scene.table.bounds
        assert (out.particles[:, 0] <= bd.x_max + 1e-15).all()
        assert (out.particles[:, 1] <= bd.y_max + 1e-15).all()

    def test_particle_count_conserved(self):
        rng = np.random.default_rng(3)
        scene = T.spawn_scene(T.DirtType.LENTILS, None, rng)
        out = T.execute_trajectory(scene, line_traj([-0.7, -0.4], [-0.3, 0.05]))
        assert len(out.particles) == len(scene.particles)

    def test_untouched_particles_do_not_move(self):
        pts = np.array([[-0.3, 0.05], [-0.65, -0.38]])
        scene = T.Scene(T.DirtType.LENTILS, particles=pts)
        out = T.execute_trajectory(scene, line_traj([-0.5, -0.35], [-0.5, -0.3]))
        assert np.array_equal(out.particles, pts)


class TestMetrics:
    def test_m1_percentages(self):
        series = T.metric_m1([200, 100, 50])
        assert series.name == "m1"
        assert np.array_equal(series.values, [100.0, 50.0, 25.0])

    def test_m1_needs_initial_dirt(self):
        with pytest.raises(T.ZeroInitialArea):
            T.metric_m1([0, 0])

    def test_m2_from_single_pixel_masks(self):
        a = np.zeros((240, 240), dtype=bool)
        a[180, 60] = True  # 120 px from the corner pixel (180, 180)
        b = np.zeros((240, 240), dtype=bool)
        b[180, 120] = True  # 60 px away
        series = T.metric_m2([a, b], CORNER_PX)
        assert np.array_equal(series.values, [100.0, 50.0])

    def test_m2_distance_is_mask_sum(self):
        m = np.zeros((240, 240), dtype=bool)
        m[180, 60] = True
        m[60, 180] = True
        assert T.mask_corner_distance(m, CORNER_PX) == 240.0

    def test_m2_needs_initial_distance(self):
        with pytest.raises(T.ZeroInitialDistance):
            T.metric_m2_from_distances([0.0, 1.0])

    def test_series_must_start_at_hundred(self):
        with pytest.raises(T.InvariantViolation):
            T.MetricSeries("m1", np.array([99.0, 50.0]))
        with pytest.raises(T.InvariantViolation):
            T.MetricSeries("m1", np.array([]))


def straight_line_pipeline():
    """Model trained on one straight demo over the 80..160 pixel row."""
    lo = np.array([*virtual_to_table((80.0, 120.0), 240.0)])
    hi = np.array([*virtual_to_table((160.0, 120.0), 240.0)])
    demo = T.Demonstration.build(None, line_traj(lo, hi), T.DirtType.MARKER)
    model = T.em_fit([demo], 3, EmConfig(seed=0))
    return T.Pipeline(T.BaselineFramePredictor(), model)


class TestRunEpisode:
    def test_marker_episode_cleans_and_keeps_counting(self):
        pipe = straight_line_pipeline()
        log = []
        series, trajs = T.run_episode(row_scene(), pipe, n_reps=3, scene_log=log)
        assert np.array_equal(series.values, [100.0, 0.0, 0.0])
        assert trajs[0] is not None
        assert trajs[1] is None and trajs[2] is None
        assert len(log) == 4
        assert log[1].ink.sum() == 0.0

    def test_series_starts_at_hundred_exactly(self, trained_model):
        scene = T.spawn_scene(T.DirtType.LENTILS, None, np.random.default_rng(8))
        pipe = T.Pipeline(T.BaselineFramePredictor(), trained_model)
        series, _ = T.run_episode(scene, pipe, n_reps=3)
        assert series.values[0] == 100.0
        assert len(series.values) == 3

    def test_episodes_are_deterministic(self, trained_model):
        pipe = T.Pipeline(T.BaselineFramePredictor(), trained_model)
        runs = []
        for _ in range(2):
            scene = T.spawn_scene(T.DirtType.LENTILS, None, np.random.default_rng(21))
            series, trajs = T.run_episode(scene, pipe, n_reps=3)
            runs.append((series.values, trajs))
        assert np.array_equal(runs[0][0], runs[1][0])
        for ta, tb in zip(runs[0][1], runs[1][1]):
            assert np.array_equal(ta.points, tb.points)

    def test_lentil_count_conserved_across_episode(self, trained_model):
        scene = T.spawn_scene(T.DirtType.LENTILS, None, np.random.default_rng(13))
        pipe = T.Pipeline(T.BaselineFramePredictor(), trained_model)
        log = []
        T.run_episode(scene, pipe, n_reps=3, scene_log=log)
        counts = {len(s.particles) for s in log}
        assert counts == {len(scene.particles)}

    def test_clean_start_rejected(self, trained_model):
        pipe = T.Pipeline(T.BaselineFramePredictor(), trained_model)
        clean = T.Scene(T.DirtType.MARKER, ink=np.zeros((240, 240)))
        with pytest.raises(T.ZeroInitialArea):
            T.run_episode(clean, pipe)
        empty = T.Scene(T.DirtType.LENTILS, particles=np.empty((0, 2)))
        with pytest.raises(T.ZeroInitialDistance):
            T.run_episode(empty, pipe)

    def test_pipeline_errors_carry_the_repetition(self, trained_model):
        class Flaky:
            calls = 0

            def predict_frames(self, img):
                Flaky.calls += 1
                if Flaky.calls >= 2:
                    raise T.AmbiguousColor("sensor glare")
                return T.BaselineFramePredictor().predict_frames(img)

        scene = T.spawn_scene(T.DirtType.MARKER, None, np.random.default_rng(2))
        pipe = T.Pipeline(Flaky(), trained_model)
        with pytest.raises(T.AmbiguousColor, match="repetition 2"):
            T.run_episode(scene, pipe, n_reps=3)

    def test_rep_count_validated(self, trained_model):
        pipe = T.Pipeline(T.BaselineFramePredictor(), trained_model)
        with pytest.raises(T.InvariantViolation):
            T.run_episode(row_scene(), pipe, n_reps=0)
