"""Shared scene, color and rendering configuration.

The canonical setup views a 1 m x 1 m patch of the tabletop plane through a
virtual top-down camera of ``scale_h`` pixels per meter, with a 0.5 m square
table centered in the view.  All defaults below are plain module constants so
they can be overridden per call.
"""

from dataclasses import dataclass, field
import json
import os

from .errors import InvariantViolation, MissingFile


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle in table coordinates (meters)."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise InvariantViolation(f"empty rectangle {self}")

    def contains(self, x, y, margin: float = 0.0) -> bool:
        return (self.x_min + margin <= x <= self.x_max - margin
                and self.y_min + margin <= y <= self.y_max - margin)

    def shrink(self, margin: float) -> "Rect":
        return Rect(self.x_min + margin, self.x_max - margin,
                    self.y_min + margin, self.y_max - margin)

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    def corners(self):
        """The four corners, counterclockwise from (x_min, y_min)."""
        return [(self.x_min, self.y_min), (self.x_max, self.y_min),
                (self.x_max, self.y_max), (self.x_min, self.y_max)]


@dataclass(frozen=True)
class TableConfig:
    """Table placement inside the virtual view.

    ``scale_h`` is the pixel-per-meter scale of the virtual camera and equals
    the image height in pixels, ``size`` the (square) image side.  The target
    corner is where swept dirt should end up: the corner of the table that
    maps to the bottom-right of the virtual image.
    """

    size: int = 240
    scale_h: float = 240.0
    bounds: Rect = field(default_factory=lambda: Rect(-0.75, -0.25, -5.0 / 12.0, 1.0 / 12.0))
    target_corner: tuple = (-0.25, 1.0 / 12.0)

    def __post_init__(self):
        if self.size <= 0 or self.scale_h <= 0:
            raise InvariantViolation("table config needs a positive size and scale")


DEFAULT_TABLE = TableConfig()

# Sponge footprint used by the simulator and the lentil sweep heuristic.
DEFAULT_SPONGE_RADIUS = 0.04


@dataclass(frozen=True)
class ColorBox:
    """One named dirt class: an inclusive RGB box plus a hue interval.

    ``hue_range`` is (lo, hi) on the hue circle in [0, 1); lo > hi means the
    interval wraps through zero (reds).
    """

    name: str
    rgb_min: tuple
    rgb_max: tuple
    hue_range: tuple

    def contains_rgb(self, rgb) -> bool:
        return all(lo <= v <= hi for lo, v, hi in zip(self.rgb_min, rgb, self.rgb_max))

    def contains_hue(self, hue: float) -> bool:
        lo, hi = self.hue_range
        if lo <= hi:
            return lo <= hue <= hi
        return hue >= lo or hue <= hi


@dataclass(frozen=True)
class ColorConfig:
    boxes: tuple

    @classmethod
    def from_file(cls, path) -> "ColorConfig":
        if not os.path.exists(path):
            raise MissingFile(str(path))
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
        boxes = tuple(ColorBox(name=b["name"],
                               rgb_min=tuple(b["rgb_min"]),
                               rgb_max=tuple(b["rgb_max"]),
                               hue_range=tuple(b["hue_range"])) for b in raw)
        return cls(boxes=boxes)

    def to_file(self, path) -> None:
        raw = [{"name": b.name, "rgb_min": list(b.rgb_min), "rgb_max": list(b.rgb_max),
                "hue_range": list(b.hue_range)} for b in self.boxes]
        with open(path, "w", encoding="utf-8") as f:
            json.dump(raw, f, indent=2)


DEFAULT_COLORS = ColorConfig(boxes=(
    ColorBox("marker", rgb_min=(0.5, 0.0, 0.0), rgb_max=(1.0, 0.3, 0.3),
             hue_range=(0.95, 0.05)),
    ColorBox("lentils", rgb_min=(0.25, 0.1, 0.0), rgb_max=(0.65, 0.45, 0.25),
             hue_range=(0.05, 0.15)),
))


@dataclass(frozen=True)
class RenderConfig:
    """Flat colors used by the scene renderer.

    Chosen so that dirt colors stay inside their ColorBox and table/background
    stay outside it even after per-channel illumination jitter of +/-0.15.
    """

    background_rgb: tuple = (0.55, 0.65, 0.8)
    table_rgb: tuple = (0.92, 0.92, 0.92)
    ink_rgb: tuple = (0.8, 0.0, 0.0)
    lentil_rgb: tuple = (0.45, 0.27, 0.07)
    lentil_px_radius: float = 1.5


DEFAULT_RENDER = RenderConfig()

THREADS_ENV_VAR = "TABLETOP_LFD_THREADS"


def worker_count() -> int:
    """Worker cap from the environment; 0 or unset means automatic."""
    raw = os.environ.get(THREADS_ENV_VAR, "0")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n < 0:
        n = 0
    if n == 0:
        n = min(4, os.cpu_count() or 1)
    return n
