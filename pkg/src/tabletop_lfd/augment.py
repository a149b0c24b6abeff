"""Dataset augmentation: illumination jitter, translation, procedural textures.

Three per-sample strategies, applied with per-copy RNG streams derived from a
master seed so the result is reproducible regardless of processing order:

1. per-channel illumination offsets, uniform in [-0.15, 0.15];
2. integer pixel translations that keep every dirt pixel in frame, with the
   trajectory labels shifted by the matching metric displacement;
3. replacement of table and background with two independent gradient-noise
   textures, leaving dirt pixels untouched.
"""

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from . import dataset_io
from .config import DEFAULT_COLORS, DEFAULT_TABLE, ColorConfig, TableConfig
from .errors import EmptyDirtMask, InvariantViolation, MaskOutsideTable, ToolkitError
from .geometry import VirtualImage, table_to_virtual
from .perception import segment_dirt
from .tpgmm import Trajectory

_SQ2 = np.sqrt(0.5)
_GRADIENTS = np.array([
    (1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0),
    (_SQ2, _SQ2), (-_SQ2, _SQ2), (_SQ2, -_SQ2), (-_SQ2, -_SQ2),
])
_GRAD_X = np.ascontiguousarray(_GRADIENTS[:, 0])
_GRAD_Y = np.ascontiguousarray(_GRADIENTS[:, 1])


@lru_cache(maxsize=128)
def _perm_table(seed: int) -> np.ndarray:
    perm = np.random.default_rng(seed).permutation(256)
    return np.concatenate([perm, perm])


def _fade(t):
    # quintic: zero first and second derivative at 0 and 1
    return t * t * t * (t * (t * 6.0 - 15.0) + 10.0)


def perlin2(x, y, seed: int = 0):
    """Classic 2D gradient noise in [-1, 1]; exactly 0 on the integer lattice.

    Accepts scalars or broadcastable arrays.  The gradient at each lattice
    corner is keyed by a permutation table derived from ``seed`` only, so
    equal seeds give identical fields.
    """
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    scalar = xa.ndim == 0 and ya.ndim == 0
    xi = np.floor(xa).astype(int)
    yi = np.floor(ya).astype(int)
    xf = xa - xi
    yf = ya - yi
    xi &= 255
    yi &= 255
    perm = _perm_table(seed)
    px0 = perm[xi]
    px1 = perm[xi + 1]

    def corner(hashed, dx, dy):
        h = hashed & 7
        return _GRAD_X[h] * dx + _GRAD_Y[h] * dy

    n00 = corner(perm[px0 + yi], xf, yf)
    n10 = corner(perm[px1 + yi], xf - 1.0, yf)
    n01 = corner(perm[px0 + yi + 1], xf, yf - 1.0)
    n11 = corner(perm[px1 + yi + 1], xf - 1.0, yf - 1.0)
    u = _fade(xf)
    v = _fade(yf)
    nx0 = n00 + u * (n10 - n00)
    nx1 = n01 + u * (n11 - n01)
    val = nx0 + v * (nx1 - nx0)
    return float(val) if scalar else val


@dataclass(frozen=True)
class PerlinParams:
    """Fractal noise configuration plus the two colors to map it onto."""

    frequency: float = 8.0
    octaves: int = 3
    persistence: float = 0.5
    seed: int = 0
    color_a: tuple = (0.0, 0.0, 0.0)
    color_b: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if self.frequency <= 0 or self.octaves < 1 or not (0 < self.persistence <= 1):
            raise InvariantViolation(f"bad noise parameters {self}")


DEFAULT_TABLE_NOISE = PerlinParams(color_a=(0.75, 0.75, 0.7), color_b=(0.95, 0.95, 0.9))
DEFAULT_BACKGROUND_NOISE = PerlinParams(color_a=(0.2, 0.3, 0.45), color_b=(0.6, 0.7, 0.85))


@lru_cache(maxsize=64)
def _octave_lattice(size: int, freq: float):
    """Seed-independent lattice data for one texture octave (1D, both axes)."""
    coord = np.arange(size, dtype=float) / size * freq
    idx = np.floor(coord).astype(int)
    frac = coord - idx
    idx &= 255
    return idx, frac, _fade(frac)


def _texture_octave(size: int, freq: float, seed: int) -> np.ndarray:
    """One octave of ``perlin2`` sampled on the size x size pixel grid.

    Equals perlin2(cols / size * freq, rows / size * freq, seed) bit for bit;
    the separable lattice work is shared across seeds.
    """
    idx, frac, faded = _octave_lattice(size, freq)
    perm = _perm_table(seed)
    px0 = perm[idx][None, :]
    px1 = perm[idx + 1][None, :]
    yi = idx[:, None]
    xf, yf = frac[None, :], frac[:, None]
    h00 = perm[px0 + yi] & 7
    h10 = perm[px1 + yi] & 7
    h01 = perm[px0 + yi + 1] & 7
    h11 = perm[px1 + yi + 1] & 7
    n00 = _GRAD_X[h00] * xf + _GRAD_Y[h00] * yf
    n10 = _GRAD_X[h10] * (xf - 1.0) + _GRAD_Y[h10] * yf
    n01 = _GRAD_X[h01] * xf + _GRAD_Y[h01] * (yf - 1.0)
    n11 = _GRAD_X[h11] * (xf - 1.0) + _GRAD_Y[h11] * (yf - 1.0)
    u, v = faded[None, :], faded[:, None]
    nx0 = n00 + u * (n10 - n00)
    nx1 = n01 + u * (n11 - n01)
    return nx0 + v * (nx1 - nx0)


def perlin_texture(size: int, params: PerlinParams) -> np.ndarray:
    """Octave-summed noise raster mapped linearly between the two colors."""
    if size <= 0:
        raise InvariantViolation(f"size = {size}")
    total = np.zeros((size, size))
    norm = 0.0
    for o in range(params.octaves):
        freq = params.frequency * (2.0 ** o)
        amp = params.persistence ** o
        total += amp * _texture_octave(size, freq, params.seed)
        norm += amp
    value = 0.5 * (1.0 + total / norm)
    a = np.asarray(params.color_a, dtype=float)
    b = np.asarray(params.color_b, dtype=float)
    return np.clip(a + value[:, :, None] * (b - a), 0.0, 1.0)


MAX_ILLUMINATION_DELTA = 0.15


def apply_illumination(img: VirtualImage, deltas) -> VirtualImage:
    deltas = np.asarray(deltas, dtype=float).reshape(3)
    return VirtualImage(np.clip(img.pixels + deltas, 0.0, 1.0), img.scale_h)


def jitter_illumination(img: VirtualImage, rng: np.random.Generator,
                        max_delta: float = MAX_ILLUMINATION_DELTA) -> VirtualImage:
    """Add one uniform offset per RGB channel, clamped back to [0, 1]."""
    return apply_illumination(img, rng.uniform(-max_delta, max_delta, size=3))


def _mask_bits(mask):
    bits = np.asarray(getattr(mask, "bits", mask))
    if bits.dtype != bool:
        bits = bits.astype(bool)
    return bits


def sample_translation(mask, rng: np.random.Generator) -> tuple[int, int]:
    """Uniform integer (dx, dy) among shifts keeping all dirt pixels in frame."""
    bits = _mask_bits(mask)
    rows, cols = np.nonzero(bits)
    if rows.size == 0:
        raise EmptyDirtMask("cannot pick a translation without dirt pixels")
    s_v, s_u = bits.shape
    dx = int(rng.integers(-cols.min(), s_u - 1 - cols.max() + 1))
    dy = int(rng.integers(-rows.min(), s_v - 1 - rows.max() + 1))
    return dx, dy


def shift_raster(arr: np.ndarray, dx: int, dy: int, fill) -> np.ndarray:
    """Shift rows/columns by integer amounts, filling exposed pixels."""
    out = np.empty_like(arr)
    out[...] = fill
    h, w = arr.shape[:2]
    ww, hh = w - abs(dx), h - abs(dy)
    if ww <= 0 or hh <= 0:
        return out
    xs, xd = (0, dx) if dx >= 0 else (-dx, 0)
    ys, yd = (0, dy) if dy >= 0 else (-dy, 0)
    out[yd:yd + hh, xd:xd + ww] = arr[ys:ys + hh, xs:xs + ww]
    return out


def apply_translation(img: VirtualImage, traj: Trajectory, dx: int, dy: int,
                      fill=(0.0, 0.0, 0.0)) -> tuple[VirtualImage, Trajectory]:
    """Shift the image by (dx, dy) pixels and the labels by the metric twin.

    A pixel shift (dx, dy) moves a table point by dy/scale_h along x and
    dx/scale_h along y, matching the virtual-camera axis pairing.
    """
    shifted = VirtualImage(shift_raster(img.pixels, dx, dy, np.asarray(fill, dtype=float)),
                           img.scale_h)
    pts = traj.points.copy()
    pts[:, 1] += dy / img.scale_h
    pts[:, 2] += dx / img.scale_h
    return shifted, Trajectory(pts)


def translate_sample(img: VirtualImage, traj: Trajectory, mask,
                     rng: np.random.Generator, fill=(0.0, 0.0, 0.0)):
    """Random admissible translation applied consistently to image and labels."""
    dx, dy = sample_translation(mask, rng)
    return apply_translation(img, traj, dx, dy, fill)


def _points_in_convex_polygon(poly: np.ndarray, size: int) -> np.ndarray:
    """Boolean raster of pixel centers (u=c, v=r) inside the convex polygon."""
    cols, rows = np.meshgrid(np.arange(size, dtype=float), np.arange(size, dtype=float))
    edges = np.roll(poly, -1, axis=0) - poly
    a, b = poly - poly[0], np.roll(poly, -1, axis=0) - poly[0]
    orient = np.sign((a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]).sum())
    if orient == 0:
        raise InvariantViolation("table polygon is degenerate")
    inside = np.ones((size, size), dtype=bool)
    for (px, py), (ex, ey) in zip(poly, edges):
        cross = ex * (rows - py) - ey * (cols - px)
        inside &= orient * cross >= 0
    return inside


def table_polygon_px(table: TableConfig = DEFAULT_TABLE) -> np.ndarray:
    """Pixel-space corners of the table rectangle."""
    return np.stack([table_to_virtual(c, table.scale_h) for c in table.bounds.corners()])


def perlin_background(img: VirtualImage, mask, table_poly, rng: np.random.Generator,
                      table_params: PerlinParams | None = None,
                      bg_params: PerlinParams | None = None,
                      vertex_jitter_frac: float = 0.05) -> VirtualImage:
    """Replace table interior and exterior with two noise textures.

    Dirt pixels keep their original values.  Polygon vertices are jittered
    uniformly by ``vertex_jitter_frac`` of the image side to vary the
    apparent table placement.
    """
    bits = _mask_bits(mask)
    if bits.shape != img.pixels.shape[:2]:
        raise InvariantViolation("mask and image sizes differ")
    if bits.all():
        return img.copy()
    poly = np.asarray(table_poly, dtype=float)
    if poly.ndim != 2 or poly.shape[1] != 2 or len(poly) < 3:
        raise InvariantViolation("table polygon needs at least 3 (u, v) vertices")
    size = img.size
    inside0 = _points_in_convex_polygon(poly, size)
    rr, cc = np.nonzero(bits)
    if not inside0[rr, cc].all():
        raise MaskOutsideTable("dirt pixels outside the table polygon")

    jitter = rng.uniform(-vertex_jitter_frac * size, vertex_jitter_frac * size, poly.shape)
    seeds = rng.integers(0, 2 ** 62, size=2)
    t_par = replace(table_params or DEFAULT_TABLE_NOISE, seed=int(seeds[0]))
    b_par = replace(bg_params or DEFAULT_BACKGROUND_NOISE, seed=int(seeds[1]))

    inside = _points_in_convex_polygon(poly + jitter, size)
    out = np.where(inside[:, :, None], perlin_texture(size, t_par),
                   perlin_texture(size, b_par))
    out[bits] = img.pixels[bits]
    return VirtualImage(out, img.scale_h)


@dataclass(frozen=True)
class AugmentPlan:
    """How many copies of each flavor to add per original sample."""

    n_translate_illum: int = 10
    n_perlin: int = 10
    master_seed: int = 0

    def __post_init__(self):
        if self.n_translate_illum < 0 or self.n_perlin < 0:
            raise InvariantViolation("copy counts must be nonnegative")

    @property
    def copies_per_sample(self) -> int:
        return self.n_translate_illum + self.n_perlin


def copy_rng(plan: AugmentPlan, sample_index: int, copy_index: int,
             perlin: bool) -> np.random.Generator:
    """Independent, order-free RNG stream for one augmented copy."""
    return np.random.default_rng([plan.master_seed, sample_index, copy_index, int(perlin)])


def augment_sample(demo, plan: AugmentPlan, sample_index: int,
                   colors: ColorConfig = DEFAULT_COLORS,
                   table: TableConfig = DEFAULT_TABLE) -> list:
    """All augmented copies of one demonstration, in canonical order."""
    base_poly = table_polygon_px(table)
    out = []
    for perlin in (False, True):
        n = plan.n_perlin if perlin else plan.n_translate_illum
        for c in range(n):
            rng = copy_rng(plan, sample_index, c, perlin)
            try:
                mask = segment_dirt(demo.image, colors)
                img = jitter_illumination(demo.image, rng)
                dx, dy = sample_translation(mask, rng)
                img, traj = apply_translation(img, demo.trajectory, dx, dy)
                if perlin:
                    bits = shift_raster(mask.bits, dx, dy, False)
                    img = perlin_background(img, bits, base_poly + (dx, dy), rng)
                out.append(dataset_io.Demonstration.build(img, traj, demo.dirt_type))
            except ToolkitError as e:
                raise type(e)(f"sample {sample_index} copy {c}: {e}") from e
    return out


def augment_dataset(ds, plan: AugmentPlan, colors: ColorConfig = DEFAULT_COLORS,
                    table: TableConfig = DEFAULT_TABLE):
    """Originals plus per-sample copies; output order is originals first.

    Every copy's randomness is keyed on (master_seed, sample, copy), so the
    result is bit-reproducible and independent of evaluation order.  Memory
    scales with the output size; the command line front end streams instead.
    """
    samples = [d for d in ds.samples]
    for s, demo in enumerate(ds.samples):
        samples.extend(augment_sample(demo, plan, s, colors, table))
    return dataset_io.Dataset(scale_h=ds.scale_h, image_size=ds.image_size,
                              samples=samples, colors=ds.colors, seed=ds.seed)
