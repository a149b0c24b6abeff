"""Projective mapping, the metric table-to-pixel convention, and warping.

The pixel convention throughout: a point (u, v) means (column, row), the
center of raster cell (r, c) sits at (u=c, v=r).  The table occupies the
pixel square [60, 180] x [60, 180] at the default scale of 240 px/m:

    u = (y + 2/3) * h        v = (x + 1) * h

so the table corner nearest the robot maps to (0, 0) with h = 240 and the
target corner (x, y) = (-0.25, 1/12) lands on pixel (180, 180).
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tabletop_lfd import (DegenerateConfiguration, FewerThanFourPairs, Homography,
                          InvariantViolation, MissingFile, NonPositiveScale,
                          PointAtInfinity, TablePoint, VirtualImage, apply_homography,
                          estimate_homography, load_homography, read_correspondences,
                          save_homography, table_to_virtual, virtual_to_table,
                          warp_image)


def project(m, p):
    """Reference projective action, written out longhand."""
    x, y = p
    w = m[2, 0] * x + m[2, 1] * y + m[2, 2]
    return np.array([(m[0, 0] * x + m[0, 1] * y + m[0, 2]) / w,
                     (m[1, 0] * x + m[1, 1] * y + m[1, 2]) / w])


def unit_scale(m):
    return m / m[2, 2]


SQUARE = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]


def random_projective(rng):
    """A well-conditioned random map: affine part plus a mild perspective row."""
    m = np.eye(3)
    m[:2, :2] = rng.uniform(-1.0, 1.0, (2, 2)) + 2.0 * np.eye(2)
    m[:2, 2] = rng.uniform(-50.0, 50.0, 2)
    m[2, :2] = rng.uniform(-0.05, 0.05, 2)
    return m


class TestEstimate:
    def test_four_exact_points_recover_the_map(self):
        rng = np.random.default_rng(11)
        for _ in range(25):
            m = random_projective(rng)
            pairs = [(p, project(m, p)) for p in SQUARE]
            h = estimate_homography(pairs)
            assert np.max(np.abs(unit_scale(h.m) - unit_scale(m))) < 1e-9

    def test_overdetermined_exact_points(self):
        m = random_projective(np.random.default_rng(5))
        pts = [(0.0, 0.0), (2.0, 0.1), (1.9, 2.2), (-0.1, 2.0), (0.7, 1.1), (1.3, 0.4)]
        pairs = [(p, project(m, p)) for p in pts]
        h = estimate_homography(pairs)
        for p in pts:
            assert np.allclose(apply_homography(h, p), project(m, p), atol=1e-8)

    def test_large_coordinates_stay_conditioned(self):
        # translating everything far from the origin must not hurt accuracy
        m = random_projective(np.random.default_rng(7))
        pts = [(1e4 + u, 2e4 + v) for u, v in SQUARE]
        pairs = [(p, project(m, p)) for p in pts]
        h = estimate_homography(pairs)
        for p in pts:
            assert np.allclose(apply_homography(h, p), project(m, p), atol=1e-6)

    def test_noisy_reprojection_rms(self):
        rng = np.random.default_rng(23)
        m = random_projective(rng)
        pts = [(0.0, 0.0), (4.0, 0.0), (4.0, 4.0), (0.0, 4.0),
               (2.0, 0.5), (3.5, 2.2), (1.1, 3.0), (0.6, 1.4)]
        targets = np.array([project(m, p) for p in pts])
        errs = []
        for _ in range(100):
            noisy = targets + rng.normal(0.0, 0.2, targets.shape)
            h = estimate_homography(list(zip(pts, noisy)))
            back = np.array([apply_homography(h, p) for p in pts])
            errs.append(np.sqrt(np.mean(np.sum((back - targets) ** 2, axis=1))))
        assert np.mean(errs) < 0.5

    def test_accepts_flat_rows(self):
        m = random_projective(np.random.default_rng(2))
        rows = np.array([[u, v, *project(m, (u, v))] for u, v in SQUARE])
        h = estimate_homography(rows)
        assert np.allclose(apply_homography(h, (0.5, 0.25)),
                           project(m, (0.5, 0.25)), atol=1e-8)

    def test_three_pairs_rejected(self):
        with pytest.raises(FewerThanFourPairs):
            estimate_homography([((0, 0), (0, 0)), ((1, 0), (1, 0)), ((0, 1), (0, 1))])

    def test_collinear_sources_rejected(self):
        pts = [(0.0, 0.0), (1.0, 1.0), (2.0, 2.0), (0.0, 1.0)]
        pairs = [(p, p) for p in pts]
        with pytest.raises(DegenerateConfiguration):
            estimate_homography(pairs)

    def test_collinear_targets_rejected(self):
        pairs = [((0, 0), (0.0, 0.0)), ((1, 0), (1.0, 0.0)),
                 ((1, 1), (2.0, 0.0)), ((0, 1), (0.0, 1.0))]
        with pytest.raises(DegenerateConfiguration):
            estimate_homography(pairs)


class TestApply:
    def test_identity(self):
        h = Homography(np.eye(3))
        assert np.allclose(apply_homography(h, (3.0, -2.0)), (3.0, -2.0))

    def test_batch_shape(self):
        h = Homography(np.diag([2.0, 2.0, 1.0]))
        out = apply_homography(h, np.array([[1.0, 1.0], [2.0, 3.0]]))
        assert out.shape == (2, 2)
        assert np.allclose(out, [[2.0, 2.0], [4.0, 6.0]])

    def test_point_mapped_to_infinity(self):
        # valid map (det = -1) whose vanishing line is x = 1
        m = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, -1.0]])
        with pytest.raises(PointAtInfinity):
            apply_homography(Homography(m), (1.0, 5.0))

    def test_inverse_round_trip(self):
        m = random_projective(np.random.default_rng(3))
        h = Homography(m)
        p = (0.4, 1.7)
        assert np.allclose(apply_homography(h.inverse(), apply_homography(h, p)),
                           p, atol=1e-9)

    def test_singular_matrix_rejected(self):
        with pytest.raises(InvariantViolation):
            Homography(np.ones((3, 3)))


class TestTableToVirtual:
    def test_origin_corner(self):
        assert tuple(table_to_virtual((-1.0, -2.0 / 3.0), 240.0)) == (0.0, 0.0)

    def test_target_corner(self):
        u, v = table_to_virtual((-0.25, 1.0 / 12.0), 240.0)
        assert math.isclose(u, 180.0, abs_tol=1e-9)
        assert math.isclose(v, 180.0, abs_tol=1e-9)

    def test_table_center(self):
        u, v = table_to_virtual((-0.5, -1.0 / 6.0), 240.0)
        assert math.isclose(u, 120.0, abs_tol=1e-9)
        assert math.isclose(v, 120.0, abs_tol=1e-9)

    def test_scale_doubles_with_h(self):
        u1, v1 = table_to_virtual((-0.6, 0.0), 240.0)
        u2, v2 = table_to_virtual((-0.6, 0.0), 480.0)
        assert math.isclose(u2, 2 * u1) and math.isclose(v2, 2 * v1)

    def test_batch(self):
        pts = np.array([[-1.0, -2.0 / 3.0], [-0.25, 1.0 / 12.0]])
        px = table_to_virtual(pts, 240.0)
        assert px.shape == (2, 2)
        assert np.allclose(px, [[0.0, 0.0], [180.0, 180.0]])

    def test_nonpositive_scale_rejected(self):
        with pytest.raises(NonPositiveScale):
            table_to_virtual((0.0, 0.0), 0.0)
        with pytest.raises(NonPositiveScale):
            virtual_to_table((0.0, 0.0), -1.0)

    def test_inverse_returns_table_point(self):
        pt = virtual_to_table(np.array([180.0, 180.0]), 240.0)
        assert isinstance(pt, TablePoint)
        assert math.isclose(pt.x, -0.25, abs_tol=1e-12)
        assert math.isclose(pt.y, 1.0 / 12.0, abs_tol=1e-12)

    @given(st.floats(-2.0, 2.0), st.floats(-2.0, 2.0),
           st.floats(10.0, 1000.0))
    @settings(max_examples=60, deadline=None)
    def test_round_trip(self, x, y, h):
        px = table_to_virtual((x, y), h)
        back = virtual_to_table(np.asarray(px), h)
        assert math.isclose(back.x, x, abs_tol=1e-9)
        assert math.isclose(back.y, y, abs_tol=1e-9)


def checkerboard(size, period=8):
    r, c = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    v = (((r // period) + (c // period)) % 2).astype(float)
    return VirtualImage(np.stack([v, 0.5 * v, 1.0 - v], axis=-1), float(size))


class TestWarp:
    def test_identity_leaves_pixels(self):
        img = checkerboard(64)
        out = warp_image(img, Homography(np.eye(3)), 64)
        assert np.array_equal(out.pixels, img.pixels)

    def test_pure_translation_shifts_content(self):
        img = checkerboard(64)
        m = np.array([[1.0, 0.0, 5.0], [0.0, 1.0, 3.0], [0.0, 0.0, 1.0]])
        out = warp_image(img, Homography(m), 64)
        # target pixel (u,v) pulls from source (u-5, v-3)
        assert np.array_equal(out.pixels[3:, 5:], img.pixels[:-3, :-5])

    def test_out_of_range_gets_fill(self):
        img = checkerboard(32)
        m = np.array([[1.0, 0.0, 40.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        out = warp_image(img, Homography(m), 32, fill=(0.25, 0.5, 0.75))
        assert np.allclose(out.pixels[:, :8], [0.25, 0.5, 0.75])

    def test_forward_then_inverse_is_near_identity(self):
        # smooth content: the residual is interpolation loss, not edge aliasing
        g = np.linspace(0.0, 2 * np.pi, 96)
        u, v = np.meshgrid(g, g)
        smooth = 0.5 + 0.25 * np.sin(u) * np.cos(v)
        img = VirtualImage(np.stack([smooth, smooth ** 2, 1.0 - smooth], axis=-1), 96.0)
        rng = np.random.default_rng(9)
        m = np.eye(3)
        m[:2, :2] += rng.uniform(-0.05, 0.05, (2, 2))
        m[:2, 2] = rng.uniform(-3.0, 3.0, 2)
        h = Homography(m)
        twice = warp_image(warp_image(img, h, 96), h.inverse(), 96)
        inner = (slice(8, 88), slice(8, 88))
        mad = np.mean(np.abs(twice.pixels[inner] - img.pixels[inner]))
        assert mad < 0.02


class TestSerialization:
    def test_homography_round_trip_bits(self, tmp_path):
        m = random_projective(np.random.default_rng(31))
        h = Homography(m)
        path = tmp_path / "h.txt"
        save_homography(h, path)
        back = load_homography(path)
        assert np.array_equal(back.m, h.m)

    def test_correspondence_file(self, tmp_path):
        path = tmp_path / "pairs.txt"
        path.write_text("# comment line\n0 0 10 20\n1 0 30 20\n"
                        "1 1 30 40\n0 1 10 40\n")
        pairs = read_correspondences(path)
        assert pairs.shape == (4, 4)
        assert np.allclose(pairs[2], [1, 1, 30, 40])

    def test_correspondence_bad_line(self, tmp_path):
        path = tmp_path / "pairs.txt"
        path.write_text("0 0 10\n")
        with pytest.raises(InvariantViolation):
            read_correspondences(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(MissingFile):
            read_correspondences(tmp_path / "nope.txt")
        with pytest.raises(MissingFile):
            load_homography(tmp_path / "nope.txt")
