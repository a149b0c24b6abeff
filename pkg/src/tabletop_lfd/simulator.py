"""2D tabletop cleaning simulator and cleaning-performance metrics.

Marker dirt lives on an ink-intensity grid aligned with the virtual image;
lentils are point particles in meters.  A sweep drags a round sponge along a
trajectory: ink inside the swept capsule is erased, particles are pushed
radially out of the moving disc.  Performance is tracked as percentages of
the initial dirty area (m1) and of the initial pixel distance to the target
corner (m2).

Scenes are treated as immutable by every function here: sweeps and episodes
return updated copies, so concurrent episodes never share mutable state.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .config import (DEFAULT_COLORS, DEFAULT_RENDER, DEFAULT_SPONGE_RADIUS,
                     DEFAULT_TABLE, ColorConfig, RenderConfig, TableConfig)
from .errors import (EmptyDirtMask, InvariantViolation, ParamsOutOfBounds,
                     ToolkitError, ZeroInitialArea, ZeroInitialDistance)
from .geometry import VirtualImage, table_to_virtual, virtual_to_table
from .perception import DirtMask, DirtType, FramePredictor, segment_dirt
from .tpgmm import TpGmmModel, Trajectory, gmr_trajectory, make_frames


@dataclass
class Scene:
    """Dirt state on the table: an ink grid (marker) or particles (lentils)."""

    kind: DirtType
    table: TableConfig = field(default_factory=lambda: DEFAULT_TABLE)
    sponge_radius: float = DEFAULT_SPONGE_RADIUS
    ink: np.ndarray | None = None
    particles: np.ndarray | None = None

    def __post_init__(self):
        if self.sponge_radius <= 0:
            raise InvariantViolation("sponge radius must be positive")
        if self.kind is DirtType.MARKER:
            ink = np.asarray(self.ink, dtype=float)
            s = self.table.size
            if ink.shape != (s, s):
                raise InvariantViolation(f"ink grid must be {s}x{s}")
            if ink.min() < 0 or ink.max() > 1:
                raise InvariantViolation("ink intensities must lie in [0, 1]")
            self.ink = ink
        else:
            pts = np.asarray(self.particles, dtype=float).reshape(-1, 2)
            b = self.table.bounds
            if len(pts) and not (
                    (pts[:, 0] >= b.x_min).all() and (pts[:, 0] <= b.x_max).all()
                    and (pts[:, 1] >= b.y_min).all() and (pts[:, 1] <= b.y_max).all()):
                raise InvariantViolation("particles must stay on the table")
            self.particles = pts

    def copy(self) -> "Scene":
        return Scene(self.kind, self.table, self.sponge_radius,
                     None if self.ink is None else self.ink.copy(),
                     None if self.particles is None else self.particles.copy())


@lru_cache(maxsize=8)
def _cell_centers(table: TableConfig):
    """Metric coordinates of every raster cell center (x and y planes)."""
    idx = np.arange(table.size, dtype=float)
    cols, rows = np.meshgrid(idx, idx)
    xy = virtual_to_table(np.stack([cols, rows], axis=-1), table.scale_h)
    return xy[..., 0], xy[..., 1]


@lru_cache(maxsize=8)
def _table_cell_mask(table: TableConfig):
    x, y = _cell_centers(table)
    b = table.bounds
    return (x >= b.x_min) & (x < b.x_max) & (y >= b.y_min) & (y < b.y_max)


@dataclass(frozen=True)
class MarkerSpawnParams:
    stroke_width: float = 0.02
    seg_len_min: float = 0.08
    seg_len_max: float = 0.16
    turn_max_deg: float = 60.0
    margin: float = 0.06


@dataclass(frozen=True)
class LentilSpawnParams:
    count: int = 80
    sigma: float = 0.03
    margin: float = 0.06


def spawn_scene(kind: DirtType, params, rng: np.random.Generator,
                table: TableConfig = DEFAULT_TABLE,
                sponge_radius: float = DEFAULT_SPONGE_RADIUS) -> Scene:
    """Random dirt: a smooth ink stroke or a Gaussian particle cluster."""
    b = table.bounds
    if kind is DirtType.MARKER:
        p = params or MarkerSpawnParams()
        if (p.stroke_width <= 0 or p.seg_len_min <= 0
                or p.seg_len_max < p.seg_len_min or p.margin < 0):
            raise ParamsOutOfBounds(f"bad marker params {p}")
        inner = _shrunk(b, p.margin)
        waypts = [np.array([rng.uniform(inner.x_min, inner.x_max),
                            rng.uniform(inner.y_min, inner.y_max)])]
        heading = rng.uniform(0.0, 2.0 * np.pi)
        for _ in range(2):
            heading += np.deg2rad(rng.uniform(-p.turn_max_deg, p.turn_max_deg))
            step = rng.uniform(p.seg_len_min, p.seg_len_max)
            nxt = waypts[-1] + step * np.array([np.cos(heading), np.sin(heading)])
            waypts.append(np.array([np.clip(nxt[0], inner.x_min, inner.x_max),
                                    np.clip(nxt[1], inner.y_min, inner.y_max)]))
        curve = quadratic_through(*waypts)
        pts = curve(np.linspace(0.0, 1.0, 60))
        ink = np.zeros((table.size, table.size))
        _paint_polyline(ink, pts, p.stroke_width / 2.0, table, value=1.0)
        ink[~_table_cell_mask(table)] = 0.0
        if not ink.any():
            raise ParamsOutOfBounds("stroke rasterized to nothing")
        return Scene(kind, table, sponge_radius, ink=ink)

    p = params or LentilSpawnParams()
    if p.count < 1 or p.sigma <= 0 or p.margin < 0:
        raise ParamsOutOfBounds(f"bad lentil params {p}")
    inner = _shrunk(b, p.margin)
    center = np.array([rng.uniform(inner.x_min, inner.x_max),
                       rng.uniform(inner.y_min, inner.y_max)])
    pts = center + p.sigma * rng.standard_normal((p.count, 2))
    pts[:, 0] = np.clip(pts[:, 0], b.x_min, b.x_max)
    pts[:, 1] = np.clip(pts[:, 1], b.y_min, b.y_max)
    return Scene(kind, table, sponge_radius, particles=pts)


def _shrunk(b, margin):
    if b.x_min + margin >= b.x_max - margin or b.y_min + margin >= b.y_max - margin:
        raise ParamsOutOfBounds(f"margin {margin} leaves no room on the table")
    return b.shrink(margin)


def quadratic_through(b1, b2, b3):
    """The quadratic curve through b1, b2, b3 at t = 0, 0.5, 1."""
    b1, b2, b3 = (np.asarray(v, dtype=float) for v in (b1, b2, b3))

    def curve(t):
        t = np.asarray(t, dtype=float)[..., None]
        return (b1 * (2 * t * t - 3 * t + 1) + b2 * (4 * t - 4 * t * t)
                + b3 * (2 * t * t - t))

    return curve


def _segment_cells(a, bpt, radius, table):
    """Row/col window and metric distances of cells near segment a->bpt."""
    x, y = _cell_centers(table)
    h = table.scale_h
    x_lo, x_hi = sorted((a[0], bpt[0]))
    y_lo, y_hi = sorted((a[1], bpt[1]))
    r0 = max(int(np.floor((x_lo - radius + 1.0) * h)) - 1, 0)
    r1 = min(int(np.ceil((x_hi + radius + 1.0) * h)) + 1, table.size - 1)
    c0 = max(int(np.floor((y_lo - radius + 2.0 / 3.0) * h)) - 1, 0)
    c1 = min(int(np.ceil((y_hi + radius + 2.0 / 3.0) * h)) + 1, table.size - 1)
    if r0 > r1 or c0 > c1:
        return None
    xs = x[r0:r1 + 1, c0:c1 + 1]
    ys = y[r0:r1 + 1, c0:c1 + 1]
    d = bpt - a
    len2 = d @ d
    if len2 < 1e-24:
        frac = 0.0
    else:
        frac = np.clip(((xs - a[0]) * d[0] + (ys - a[1]) * d[1]) / len2, 0.0, 1.0)
    dist2 = (xs - a[0] - frac * d[0]) ** 2 + (ys - a[1] - frac * d[1]) ** 2
    return (slice(r0, r1 + 1), slice(c0, c1 + 1)), dist2


def _paint_polyline(ink, pts, radius, table, value):
    for a, bpt in zip(pts[:-1], pts[1:]):
        hit = _segment_cells(a, bpt, radius, table)
        if hit is None:
            continue
        window, dist2 = hit
        patch = ink[window]
        patch[dist2 <= radius * radius] = value
        ink[window] = patch


def render_scene(scene: Scene, render: RenderConfig = DEFAULT_RENDER) -> VirtualImage:
    """Flat-color view: background, table plate, then dirt on top."""
    s = scene.table.size
    px = np.empty((s, s, 3))
    px[...] = np.asarray(render.background_rgb, dtype=float)
    on_table = _table_cell_mask(scene.table)
    px[on_table] = np.asarray(render.table_rgb, dtype=float)
    if scene.kind is DirtType.MARKER:
        alpha = scene.ink[:, :, None]
        px = px * (1.0 - alpha) + np.asarray(render.ink_rgb, dtype=float) * alpha
    else:
        rad = render.lentil_px_radius
        color = np.asarray(render.lentil_rgb, dtype=float)
        for part in scene.particles:
            u, v = table_to_virtual(part, scene.table.scale_h)
            c0 = max(int(np.floor(u - rad)), 0)
            c1 = min(int(np.ceil(u + rad)), s - 1)
            r0 = max(int(np.floor(v - rad)), 0)
            r1 = min(int(np.ceil(v + rad)), s - 1)
            if r0 > r1 or c0 > c1:
                continue
            cols, rows = np.meshgrid(np.arange(c0, c1 + 1), np.arange(r0, r1 + 1))
            disc = (cols - u) ** 2 + (rows - v) ** 2 <= rad * rad
            # discs never paint past the table edge
            disc &= on_table[r0:r1 + 1, c0:c1 + 1]
            px[rows[disc], cols[disc]] = color
    return VirtualImage(np.clip(px, 0.0, 1.0), scene.table.scale_h)


def execute_trajectory(scene: Scene, traj: Trajectory,
                       step_frac: float = 0.5) -> Scene:
    """Sweep the sponge along the trajectory; returns the updated scene.

    Ink is erased inside the swept capsule.  Particles are pushed radially to
    the rim of the moving disc, advancing at most ``step_frac * radius`` per
    sub-step, and are clamped to the table bounds.
    """
    out = scene.copy()
    r = scene.sponge_radius
    path = np.asarray(traj.xy, dtype=float)
    if scene.kind is DirtType.MARKER:
        for a, bpt in zip(path[:-1], path[1:]):
            hit = _segment_cells(a, bpt, r, scene.table)
            if hit is None:
                continue
            window, dist2 = hit
            patch = out.ink[window]
            patch[dist2 <= r * r] = 0.0
            out.ink[window] = patch
        return out

    pts = out.particles
    b = scene.table.bounds
    lo = np.array([b.x_min, b.y_min])
    hi = np.array([b.x_max, b.y_max])
    max_step = step_frac * r
    for a, bpt in zip(path[:-1], path[1:]):
        seg = bpt - a
        length = float(np.linalg.norm(seg))
        n_sub = max(int(np.ceil(length / max_step)), 1)
        for s_i in range(n_sub + 1):
            center = a + seg * (s_i / n_sub)
            delta = pts - center
            dist = np.linalg.norm(delta, axis=1)
            inside = dist < r
            if not inside.any():
                continue
            d = dist[inside][:, None]
            push = np.where(d > 1e-12, delta[inside] / np.maximum(d, 1e-12),
                            _unit(seg))
            pts[inside] = center + r * push
            np.clip(pts[:, 0], lo[0], hi[0], out=pts[:, 0])
            np.clip(pts[:, 1], lo[1], hi[1], out=pts[:, 1])
    return Scene(out.kind, out.table, out.sponge_radius, particles=pts)


def _unit(v):
    n = np.linalg.norm(v)
    return v / n if n > 1e-12 else np.array([1.0, 0.0])


def dirt_area(scene: Scene) -> int:
    """Number of dirty cells in a marker scene."""
    if scene.kind is not DirtType.MARKER:
        raise InvariantViolation("area metric needs a marker scene")
    return int(np.count_nonzero(scene.ink))


def ink_mass(scene: Scene) -> float:
    return float(scene.ink.sum())


@dataclass
class MetricSeries:
    """Metric values per repetition, as percentages of repetition 1."""

    name: str
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or len(vals) < 1:
            raise InvariantViolation("metric series must be a nonempty vector")
        if vals[0] != 100.0:
            raise InvariantViolation("series must start at exactly 100")
        self.values = vals


def metric_m1(areas) -> MetricSeries:
    """Dirty-area percentages: 100 * A(r) / A(1)."""
    areas = np.asarray(areas, dtype=float)
    if len(areas) < 1 or areas[0] <= 0:
        raise ZeroInitialArea("initial dirty area must be positive")
    return MetricSeries("m1", 100.0 * (areas / areas[0]))


def mask_corner_distance(mask, corner_px) -> float:
    """Sum of pixel distances from mask pixels to the target corner."""
    bits = mask.bits if isinstance(mask, DirtMask) else np.asarray(mask, dtype=bool)
    rr, cc = np.nonzero(bits)
    return float(np.hypot(cc - corner_px[0], rr - corner_px[1]).sum())


def metric_m2(masks, corner_px) -> MetricSeries:
    """Dirt-to-corner distance percentages: 100 * D(r) / D(1)."""
    return metric_m2_from_distances(
        [mask_corner_distance(m, corner_px) for m in masks])


def metric_m2_from_distances(dists) -> MetricSeries:
    dists = np.asarray(dists, dtype=float)
    if len(dists) < 1 or dists[0] <= 0:
        raise ZeroInitialDistance("initial dirt distance must be positive")
    return MetricSeries("m2", 100.0 * (dists / dists[0]))


@dataclass
class Pipeline:
    """Perception plus trajectory model, as used on the robot."""

    predictor: FramePredictor
    model: TpGmmModel


def run_episode(scene: Scene, pipeline: Pipeline, n_reps: int = 5,
                colors: ColorConfig = DEFAULT_COLORS,
                render: RenderConfig = DEFAULT_RENDER,
                scene_log: list | None = None):
    """Look, predict, reproduce and sweep ``n_reps`` times.

    The metric is measured at every look, before that repetition's sweep, so
    the series starts at exactly 100.  A clean table mid-episode records an
    unchanged metric and skips the sweep; other pipeline errors propagate
    with the repetition index attached.  Pass a list as ``scene_log`` to
    collect a copy of every observed scene state plus the final one.
    """
    if n_reps < 1:
        raise InvariantViolation(f"n_reps = {n_reps}")
    areas = []
    masks = []
    trajs = []
    corner_px = table_to_virtual(scene.table.target_corner, scene.table.scale_h)
    for rep in range(1, n_reps + 1):
        if scene_log is not None:
            scene_log.append(scene.copy())
        img = render_scene(scene, render)
        if scene.kind is DirtType.MARKER:
            area = dirt_area(scene)
            if rep == 1 and area == 0:
                raise ZeroInitialArea("marker scene is already clean")
            areas.append(area)
        else:
            m = segment_dirt(img, colors)
            if rep == 1 and mask_corner_distance(m, corner_px) == 0.0:
                raise ZeroInitialDistance("lentil scene is already clean")
            masks.append(m)
        try:
            pred = pipeline.predictor.predict_frames(img)
            frames = make_frames(pred.b1, pred.b2, pred.b3)
            traj = gmr_trajectory(pipeline.model, frames)
        except EmptyDirtMask:
            trajs.append(None)
            continue
        except ToolkitError as e:
            raise type(e)(f"repetition {rep}: {e}") from e
        trajs.append(traj)
        scene = execute_trajectory(scene, traj)
    if scene_log is not None:
        scene_log.append(scene.copy())
    series = (metric_m1(areas) if scene.kind is DirtType.MARKER
              else metric_m2(masks, corner_px))
    return series, trajs
