"""Virtual bird-view camera geometry.

A planar homography maps raw camera pixels onto a virtual top-down view of
the tabletop plane, so that one pixel corresponds to a fixed metric patch:
``u = (y + 2/3) * scale_h`` and ``v = (x + 1) * scale_h`` for a table point
``(x, y)`` in meters.  Pixel points are ``(u, v)`` = (column, row), raster
cell ``(r, c)`` has its center at ``(u, v) = (c, r)``.

Estimation uses the direct linear transform on centroid/scale normalized
points; warping inverse-maps the output grid with bilinear sampling.
"""

from dataclasses import dataclass
from itertools import combinations
import os

import numpy as np

from .errors import (DegenerateConfiguration, FewerThanFourPairs, InvariantViolation,
                     MissingFile, NonInvertibleHomography, NonPositiveScale,
                     PointAtInfinity)


@dataclass(frozen=True)
class TablePoint:
    """A point on the tabletop plane, in meters."""

    x: float
    y: float

    def __iter__(self):
        yield self.x
        yield self.y


@dataclass(frozen=True)
class Homography:
    """3x3 projective map between pixel planes.

    ``m[2, 2]`` is 1 unless the matrix is affine-degenerate, in which case it
    is Frobenius-normalized and flagged.
    """

    m: np.ndarray
    affine_degenerate: bool = False

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float)
        if m.shape != (3, 3) or not np.all(np.isfinite(m)):
            raise InvariantViolation("homography must be a finite 3x3 matrix")
        if abs(np.linalg.det(m)) < 1e-15 * max(np.linalg.norm(m) ** 3, 1e-30):
            raise InvariantViolation("homography must have nonzero determinant")
        object.__setattr__(self, "m", m)

    def inverse(self) -> "Homography":
        try:
            inv = np.linalg.inv(self.m)
        except np.linalg.LinAlgError as e:
            raise NonInvertibleHomography(str(e)) from e
        return Homography(_normalized_matrix(inv)[0], self.affine_degenerate)


def _normalized_matrix(m):
    """Scale-normalize: by m[2,2] when it carries weight, else by Frobenius."""
    fro = np.linalg.norm(m)
    if abs(m[2, 2]) >= 1e-9 * fro:
        return m / m[2, 2], False
    m = m / fro
    # fix the overall sign so the representation is unique
    k = int(np.argmax(np.abs(m)))
    if m.flat[k] < 0:
        m = -m
    return m, True


def _conditioning_transform(pts):
    """Translate centroid to origin and scale mean distance to sqrt(2)."""
    centroid = pts.mean(axis=0)
    mean_dist = np.linalg.norm(pts - centroid, axis=1).mean()
    if mean_dist < 1e-12:
        raise DegenerateConfiguration("all points coincide")
    s = np.sqrt(2.0) / mean_dist
    return np.array([[s, 0.0, -s * centroid[0]],
                     [0.0, s, -s * centroid[1]],
                     [0.0, 0.0, 1.0]])


def _check_no_collinear_triple(pts, label):
    # areas measured after conditioning so the threshold is scale free
    t = _conditioning_transform(pts)
    q = pts * t[0, 0] + t[:2, 2]
    for i, j, k in combinations(range(len(q)), 3):
        a, b = q[j] - q[i], q[k] - q[i]
        area = 0.5 * abs(a[0] * b[1] - a[1] * b[0])
        if area < 1e-9:
            raise DegenerateConfiguration(
                f"{label} points {i},{j},{k} are collinear")


def estimate_homography(pairs) -> Homography:
    """Fit the homography taking source pixels to target pixels.

    ``pairs`` is an iterable of ((sx, sy), (tx, ty)) or an (N, 4) array; at
    least four correspondences with no three collinear points on either side.
    """
    arr = np.asarray([[p[0][0], p[0][1], p[1][0], p[1][1]] if len(p) == 2 else p
                      for p in pairs], dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 4:
        raise InvariantViolation("correspondences must be (source, target) pairs")
    if len(arr) < 4:
        raise FewerThanFourPairs(f"got {len(arr)} pairs, need at least 4")
    src, tgt = arr[:, :2], arr[:, 2:]
    _check_no_collinear_triple(src, "source")
    _check_no_collinear_triple(tgt, "target")

    t_src = _conditioning_transform(src)
    t_tgt = _conditioning_transform(tgt)
    s = src * t_src[0, 0] + t_src[:2, 2]
    t = tgt * t_tgt[0, 0] + t_tgt[:2, 2]

    a = np.zeros((2 * len(s), 9))
    a[0::2, 0] = -s[:, 0]
    a[0::2, 1] = -s[:, 1]
    a[0::2, 2] = -1.0
    a[0::2, 6] = t[:, 0] * s[:, 0]
    a[0::2, 7] = t[:, 0] * s[:, 1]
    a[0::2, 8] = t[:, 0]
    a[1::2, 3] = -s[:, 0]
    a[1::2, 4] = -s[:, 1]
    a[1::2, 5] = -1.0
    a[1::2, 6] = t[:, 1] * s[:, 0]
    a[1::2, 7] = t[:, 1] * s[:, 1]
    a[1::2, 8] = t[:, 1]

    _, _, vt = np.linalg.svd(a)
    h_cond = vt[-1].reshape(3, 3)
    h = np.linalg.inv(t_tgt) @ h_cond @ t_src
    m, degenerate = _normalized_matrix(h)
    return Homography(m, degenerate)


def _apply_matrix(m, pts):
    pts = np.asarray(pts, dtype=float)
    single = pts.ndim == 1
    p = np.atleast_2d(pts)
    ph = np.column_stack([p, np.ones(len(p))])
    q = ph @ m.T
    return q[:, :2], q[:, 2], single


def apply_homography(h: Homography, points):
    """Map pixel point(s) through ``h``; accepts (2,) or (N, 2)."""
    xy, z, single = _apply_matrix(h.m, points)
    if np.any(np.abs(z) < 1e-12):
        raise PointAtInfinity("homogeneous scale vanished")
    out = xy / z[:, None]
    return out[0] if single else out


def table_to_virtual(point, scale_h: float):
    """Project a table point (meters) to its virtual-image pixel (u, v)."""
    if scale_h <= 0:
        raise NonPositiveScale(f"scale_h = {scale_h}")
    p = np.asarray(tuple(point) if isinstance(point, TablePoint) else point, dtype=float)
    x, y = p[..., 0], p[..., 1]
    return np.stack([(y + 2.0 / 3.0) * scale_h, (x + 1.0) * scale_h], axis=-1)


def virtual_to_table(pixel, scale_h: float):
    """Invert the table-to-pixel map; returns TablePoint for a single pixel."""
    if scale_h <= 0:
        raise NonPositiveScale(f"scale_h = {scale_h}")
    q = np.asarray(pixel, dtype=float)
    u, v = q[..., 0], q[..., 1]
    x = v / scale_h - 1.0
    y = u / scale_h - 2.0 / 3.0
    if q.ndim == 1:
        return TablePoint(float(x), float(y))
    return np.stack([x, y], axis=-1)


@dataclass
class VirtualImage:
    """Square RGB raster of the virtual view; channels in [0, 1]."""

    pixels: np.ndarray
    scale_h: float

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=float)
        if px.ndim != 3 or px.shape[0] != px.shape[1] or px.shape[2] != 3:
            raise InvariantViolation(f"expected square RGB raster, got {px.shape}")
        if not np.all(np.isfinite(px)):
            raise InvariantViolation("image has non-finite channel values")
        if px.min() < -1e-9 or px.max() > 1.0 + 1e-9:
            raise InvariantViolation("channel values must lie in [0, 1]")
        if self.scale_h <= 0:
            raise NonPositiveScale(f"scale_h = {self.scale_h}")
        self.pixels = np.clip(px, 0.0, 1.0)

    @property
    def size(self) -> int:
        return self.pixels.shape[0]

    def copy(self) -> "VirtualImage":
        return VirtualImage(self.pixels.copy(), self.scale_h)


def warp_image(src, h: Homography, out_size: int, fill=(0.0, 0.0, 0.0),
               scale_h: float | None = None) -> VirtualImage:
    """Warp ``src`` by ``h`` onto an out_size x out_size canvas.

    Every output pixel is inverse-mapped into the source and sampled
    bilinearly; pixels falling outside get the fill color.  Output rows are
    independent, so the computation is order free.
    """
    if out_size <= 0:
        raise NonPositiveScale(f"out_size = {out_size}")
    pixels = src.pixels if isinstance(src, VirtualImage) else np.asarray(src, dtype=float)
    if pixels.ndim != 3 or pixels.shape[2] != 3:
        raise InvariantViolation("source image must be RGB")
    try:
        inv = np.linalg.inv(h.m)
    except np.linalg.LinAlgError as e:
        raise NonInvertibleHomography(str(e)) from e

    cols, rows = np.meshgrid(np.arange(out_size, dtype=float),
                             np.arange(out_size, dtype=float))
    xy, z, _ = _apply_matrix(inv, np.column_stack([cols.ravel(), rows.ravel()]))
    finite = np.abs(z) >= 1e-12
    zsafe = np.where(finite, z, 1.0)
    u = xy[:, 0] / zsafe
    v = xy[:, 1] / zsafe

    hgt, wdt = pixels.shape[:2]
    inside = finite & (u >= 0) & (u <= wdt - 1) & (v >= 0) & (v <= hgt - 1)
    u = np.clip(u, 0, wdt - 1)
    v = np.clip(v, 0, hgt - 1)
    u0 = np.floor(u).astype(int)
    v0 = np.floor(v).astype(int)
    u1 = np.minimum(u0 + 1, wdt - 1)
    v1 = np.minimum(v0 + 1, hgt - 1)
    fu = (u - u0)[:, None]
    fv = (v - v0)[:, None]
    top = pixels[v0, u0] * (1 - fu) + pixels[v0, u1] * fu
    bot = pixels[v1, u0] * (1 - fu) + pixels[v1, u1] * fu
    out = top * (1 - fv) + bot * fv
    out[~inside] = np.asarray(fill, dtype=float)
    out = out.reshape(out_size, out_size, 3)
    return VirtualImage(np.clip(out, 0.0, 1.0),
                        float(scale_h if scale_h is not None else out_size))


def read_correspondences(path):
    """Read 'sx sy tx ty' lines; '#' starts a comment, blank lines ignored."""
    if not os.path.exists(path):
        raise MissingFile(str(path))
    rows = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            parts = body.split()
            if len(parts) != 4:
                raise InvariantViolation(f"{path}:{lineno}: expected 4 numbers")
            try:
                rows.append([float(p) for p in parts])
            except ValueError as e:
                raise InvariantViolation(f"{path}:{lineno}: {e}") from e
    return np.asarray(rows, dtype=float).reshape(-1, 4)


def save_homography(h: Homography, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        if h.affine_degenerate:
            f.write("# affine_degenerate\n")
        for row in h.m:
            f.write(" ".join(repr(float(x)) for x in row) + "\n")


def load_homography(path) -> Homography:
    if not os.path.exists(path):
        raise MissingFile(str(path))
    degenerate = False
    values = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if line.strip().startswith("#"):
                degenerate = degenerate or "affine_degenerate" in line
                continue
            values.extend(float(p) for p in line.split())
    if len(values) != 9:
        raise InvariantViolation(f"{path}: expected 9 matrix entries, got {len(values)}")
    return Homography(np.asarray(values).reshape(3, 3), degenerate)
