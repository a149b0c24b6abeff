"""Dirt perception: segmentation, classification and frame prediction.

This is the pluggable stand-in for a learned end-to-end predictor: any object
with ``predict_frames(image) -> FramePrediction`` can drive the cleaning
pipeline.  The baseline here segments dirt by configured RGB boxes, tells
marker from lentils by mean hue, and places the three task-frame anchors
geometrically (principal axis for scribbles, a sweep through the cluster
toward the target corner for particles).
"""

from dataclasses import dataclass
import enum
from typing import Protocol

import numpy as np

from .config import (DEFAULT_COLORS, DEFAULT_SPONGE_RADIUS, DEFAULT_TABLE,
                     ColorConfig, TableConfig)
from .errors import AmbiguousColor, EmptyDirtMask, InvariantViolation
from .geometry import VirtualImage, virtual_to_table


class DirtType(enum.Enum):
    MARKER = "marker"
    LENTILS = "lentils"


@dataclass
class DirtMask:
    """Boolean dirt raster; ``count`` is always the number of set bits."""

    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim != 2 or bits.dtype != bool:
            raise InvariantViolation("mask must be a 2D boolean raster")
        self.bits = bits

    @property
    def count(self) -> int:
        return int(self.bits.sum())


def segment_dirt(img: VirtualImage, colors: ColorConfig = DEFAULT_COLORS) -> DirtMask:
    """Mark pixels inside any configured RGB dirt box."""
    px = img.pixels
    bits = np.zeros(px.shape[:2], dtype=bool)
    for box in colors.boxes:
        lo = np.asarray(box.rgb_min, dtype=float)
        hi = np.asarray(box.rgb_max, dtype=float)
        bits |= np.all((px >= lo) & (px <= hi), axis=2)
    return DirtMask(bits)


def _hues(rgb):
    """Hue in [0, 1) per pixel; NaN where the color is achromatic."""
    maxc = rgb.max(axis=-1)
    minc = rgb.min(axis=-1)
    delta = maxc - minc
    safe = np.where(delta > 0, delta, 1.0)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    h = np.where(maxc == r, (g - b) / safe,
                 np.where(maxc == g, (b - r) / safe + 2.0, (r - g) / safe + 4.0))
    h = (h / 6.0) % 1.0
    return np.where(delta > 0, h, np.nan)


def mean_hue(rgb) -> float:
    """Circular mean hue of the given colors; NaN if none is chromatic."""
    h = _hues(np.asarray(rgb, dtype=float))
    h = h[np.isfinite(h)]
    if h.size == 0:
        return float("nan")
    ang = 2.0 * np.pi * h
    return float((np.arctan2(np.sin(ang).mean(), np.cos(ang).mean())
                  / (2.0 * np.pi)) % 1.0)


def classify_dirt(img: VirtualImage, mask: DirtMask,
                  colors: ColorConfig = DEFAULT_COLORS) -> DirtType:
    """Decide the dirt class from the mean hue of the masked pixels."""
    if mask.count == 0:
        raise EmptyDirtMask("nothing to classify")
    hue = mean_hue(img.pixels[mask.bits])
    if np.isfinite(hue):
        for box in colors.boxes:
            try:
                kind = DirtType(box.name)
            except ValueError:
                continue
            if box.contains_hue(hue):
                return kind
    raise AmbiguousColor(f"mean hue {hue:.4f} matches no dirt class")


@dataclass(frozen=True)
class FramePrediction:
    """Anchor points (meters) for the start, middle and end task frames."""

    b1: np.ndarray
    b2: np.ndarray
    b3: np.ndarray
    dirt_type: DirtType | None = None

    def __post_init__(self):
        for name in ("b1", "b2", "b3"):
            v = np.asarray(getattr(self, name), dtype=float).reshape(2)
            if not np.all(np.isfinite(v)):
                raise InvariantViolation(f"{name} is not finite")
            object.__setattr__(self, name, v)


class FramePredictor(Protocol):
    def predict_frames(self, img: VirtualImage) -> FramePrediction: ...


def frame_triplet_from_points(xy, kind: DirtType,
                              table: TableConfig = DEFAULT_TABLE,
                              sponge_radius: float = DEFAULT_SPONGE_RADIUS):
    """Anchor triplet for a dirt point cloud (meters).

    Marker: b1/b3 sit at the extreme projections onto the principal axis of
    the cloud (b1 at the smaller x-then-y end), b2 at the centroid.  Fewer
    than 3 points fall back to the image-horizontal axis.

    Lentils: a straight sweep through the centroid toward the target corner,
    entering and leaving the cluster by its radius plus the sponge radius.
    """
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    if len(xy) == 0:
        raise EmptyDirtMask("no dirt points")
    centroid = xy.mean(axis=0)

    if kind is DirtType.MARKER:
        axis = np.array([0.0, 1.0])  # image-horizontal: the metric y axis
        if len(xy) >= 3:
            centered = xy - centroid
            cov = centered.T @ centered / len(xy)
            evals, evecs = np.linalg.eigh(cov)
            if evals[-1] > 1e-18:
                axis = evecs[:, -1]
        proj = (xy - centroid) @ axis
        lo = xy[int(np.argmin(proj))]
        hi = xy[int(np.argmax(proj))]
        b1, b3 = ((lo, hi) if (lo[0], lo[1]) <= (hi[0], hi[1]) else (hi, lo))
        return b1.copy(), centroid, b3.copy()

    corner = np.asarray(table.target_corner, dtype=float)
    d = corner - centroid
    n = np.linalg.norm(d)
    direction = d / n if n > 1e-12 else np.array([np.sqrt(0.5), np.sqrt(0.5)])
    radius = float(np.linalg.norm(xy - centroid, axis=1).max())
    off = (radius + sponge_radius) * direction
    lo = np.array([table.bounds.x_min, table.bounds.y_min])
    hi = np.array([table.bounds.x_max, table.bounds.y_max])
    b1 = np.clip(centroid - off, lo, hi)
    b3 = np.clip(centroid + off, lo, hi)
    return b1, centroid, b3


@dataclass
class BaselineFramePredictor:
    """Color-segmentation + geometric-rule predictor (the CNN stand-in)."""

    colors: ColorConfig = DEFAULT_COLORS
    table: TableConfig = DEFAULT_TABLE
    sponge_radius: float = DEFAULT_SPONGE_RADIUS

    def predict_frames(self, img: VirtualImage) -> FramePrediction:
        mask = segment_dirt(img, self.colors)
        if mask.count == 0:
            raise EmptyDirtMask("no dirt pixels found")
        kind = classify_dirt(img, mask, self.colors)
        rr, cc = np.nonzero(mask.bits)
        xy = virtual_to_table(np.column_stack([cc, rr]).astype(float), img.scale_h)
        b1, b2, b3 = frame_triplet_from_points(xy, kind, self.table, self.sponge_radius)
        return FramePrediction(b1, b2, b3, kind)


def predict_frames(img: VirtualImage, predictor: FramePredictor) -> FramePrediction:
    """Run the given predictor; the seam where a learned model plugs in."""
    return predictor.predict_frames(img)
