"""Demonstration datasets on disk and synthetic demonstration generation.

A dataset directory holds ``manifest.json``, 8-bit RGB PNGs under ``imgs/``
and per-sample CSV trajectories (header ``n,t,x,y``, 200 rows) under
``traj/``.  Floats are serialized with full round-trip precision, so
trajectories survive a save/load cycle bit-exactly; images round-trip at
8-bit depth.

Synthetic demonstrations spawn a random scene, derive the three anchor
points with the baseline geometric rule, perturb them with Gaussian noise
and record a smooth quadratic sweep through them.
"""

from dataclasses import dataclass, field
import json
import os

import numpy as np
from PIL import Image

from .config import DEFAULT_RENDER, DEFAULT_SPONGE_RADIUS, DEFAULT_TABLE, RenderConfig, TableConfig
from .errors import InvariantViolation, MissingFile, SchemaVersionMismatch
from .perception import DirtType, frame_triplet_from_points
from .simulator import (LentilSpawnParams, MarkerSpawnParams, Scene, _cell_centers,
                        quadratic_through, render_scene, spawn_scene)
from .tpgmm import TRAJECTORY_LEN, Trajectory, make_frames
from .geometry import VirtualImage

MANIFEST_SCHEMA_VERSION = 1
_TRAJ_HEADER = "n,t,x,y"


@dataclass
class Demonstration:
    """One recorded cleaning motion with its image and derived task frames."""

    trajectory: Trajectory
    dirt_type: DirtType
    frames: tuple
    image: VirtualImage | None = None
    image_path: str | None = None

    @classmethod
    def build(cls, image, trajectory: Trajectory, dirt_type,
              image_path=None) -> "Demonstration":
        """Derive the frames from the trajectory start, middle and end."""
        if len(trajectory) != TRAJECTORY_LEN:
            raise InvariantViolation(
                f"trajectory has {len(trajectory)} samples, expected {TRAJECTORY_LEN}")
        if isinstance(dirt_type, str):
            try:
                dirt_type = DirtType(dirt_type)
            except ValueError as e:
                raise InvariantViolation(f"unknown dirt type {dirt_type!r}") from e
        mid = (len(trajectory) - 1) // 2
        xy = trajectory.xy
        frames = make_frames(xy[0], xy[mid], xy[-1])
        return cls(trajectory=trajectory, dirt_type=dirt_type, frames=frames,
                   image=image, image_path=image_path)


@dataclass
class Dataset:
    scale_h: float
    image_size: int
    samples: list
    colors: str | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.scale_h <= 0 or self.image_size <= 0:
            raise InvariantViolation("dataset needs positive scale and image size")

    def __len__(self) -> int:
        return len(self.samples)


def save_png(img: VirtualImage, path) -> None:
    arr = np.round(img.pixels * 255.0).astype(np.uint8)
    Image.fromarray(arr, "RGB").save(path, format="PNG")


def load_png(path, scale_h: float) -> VirtualImage:
    if not os.path.exists(path):
        raise MissingFile(str(path))
    arr = np.asarray(Image.open(path).convert("RGB"), dtype=float) / 255.0
    return VirtualImage(arr, scale_h)


def save_trajectory_csv(traj: Trajectory, path) -> None:
    lines = [_TRAJ_HEADER]
    for i, (t, x, y) in enumerate(traj.points):
        lines.append(f"{i},{float(t)!r},{float(x)!r},{float(y)!r}")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")


def load_trajectory_csv(path) -> Trajectory:
    with open(path, "r", encoding="utf-8") as f:
        lines = [ln.strip() for ln in f if ln.strip()]
    if not lines or lines[0] != _TRAJ_HEADER:
        raise InvariantViolation(f"{path}: expected header '{_TRAJ_HEADER}'")
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 4:
            raise InvariantViolation(f"{path}: expected 4 columns, got {len(parts)}")
        rows.append([float(parts[1]), float(parts[2]), float(parts[3])])
    if len(rows) != TRAJECTORY_LEN:
        raise InvariantViolation(
            f"{path}: {len(rows)} trajectory rows, expected {TRAJECTORY_LEN}")
    return Trajectory(np.asarray(rows, dtype=float))


class DatasetWriter:
    """Incrementally write samples so huge datasets never sit in memory."""

    def __init__(self, out_dir, scale_h: float, image_size: int,
                 colors: str | None = None, seed: int | None = None):
        self.out_dir = str(out_dir)
        self.meta = {"version": MANIFEST_SCHEMA_VERSION, "scale_h": scale_h,
                     "image_size": image_size}
        if colors is not None:
            self.meta["colors"] = colors
        if seed is not None:
            self.meta["seed"] = seed
        self.entries = []
        os.makedirs(os.path.join(self.out_dir, "imgs"), exist_ok=True)
        os.makedirs(os.path.join(self.out_dir, "traj"), exist_ok=True)

    def add(self, demo: Demonstration) -> None:
        i = len(self.entries)
        img_rel = f"imgs/{i:05d}.png"
        traj_rel = f"traj/{i:05d}.csv"
        img = demo.image
        if img is None:
            if demo.image_path is None:
                raise InvariantViolation(f"sample {i} has no image data or path")
            img = load_png(demo.image_path, self.meta["scale_h"])
        save_png(img, os.path.join(self.out_dir, img_rel))
        save_trajectory_csv(demo.trajectory, os.path.join(self.out_dir, traj_rel))
        self.entries.append({"image": img_rel, "trajectory": traj_rel,
                             "dirt_type": demo.dirt_type.value})

    def close(self) -> str:
        manifest = dict(self.meta)
        manifest["samples"] = self.entries
        path = os.path.join(self.out_dir, "manifest.json")
        with open(path, "w", encoding="utf-8") as f:
            json.dump(manifest, f, indent=1)
        return path


def save_dataset(ds: Dataset, out_dir) -> str:
    """Write the dataset directory; returns the manifest path."""
    writer = DatasetWriter(out_dir, ds.scale_h, ds.image_size, ds.colors, ds.seed)
    for demo in ds.samples:
        writer.add(demo)
    return writer.close()


def load_dataset(path, load_images: bool = True) -> Dataset:
    """Read a dataset from a manifest path or its directory."""
    manifest_path = path
    if os.path.isdir(path):
        manifest_path = os.path.join(path, "manifest.json")
    if not os.path.exists(manifest_path):
        raise MissingFile(str(manifest_path))
    with open(manifest_path, "r", encoding="utf-8") as f:
        manifest = json.load(f)
    if manifest.get("version") != MANIFEST_SCHEMA_VERSION:
        raise SchemaVersionMismatch(f"manifest schema {manifest.get('version')!r}")
    try:
        scale_h = float(manifest["scale_h"])
        image_size = int(manifest["image_size"])
        entries = manifest["samples"]
    except (KeyError, TypeError, ValueError) as e:
        raise InvariantViolation(f"malformed manifest: {e}") from e
    base = os.path.dirname(os.path.abspath(manifest_path))
    samples = []
    for entry in entries:
        img_path = os.path.join(base, entry["image"])
        traj_path = os.path.join(base, entry["trajectory"])
        if not os.path.exists(img_path):
            raise MissingFile(img_path)
        if not os.path.exists(traj_path):
            raise MissingFile(traj_path)
        traj = load_trajectory_csv(traj_path)
        img = None
        if load_images:
            img = load_png(img_path, scale_h)
            if img.size != image_size:
                raise InvariantViolation(
                    f"{img_path}: size {img.size} != manifest {image_size}")
        samples.append(Demonstration.build(img, traj, entry["dirt_type"],
                                           image_path=img_path))
    return Dataset(scale_h=scale_h, image_size=image_size, samples=samples,
                   colors=manifest.get("colors"), seed=manifest.get("seed"))


@dataclass(frozen=True)
class NoiseConfig:
    """Gaussian perturbations applied while synthesizing demonstrations."""

    frame_sigma: float = 0.01
    path_sigma: float = 0.002

    def __post_init__(self):
        if self.frame_sigma < 0 or self.path_sigma < 0:
            raise InvariantViolation("noise deviations must be nonnegative")


def scene_dirt_points(scene: Scene) -> np.ndarray:
    """Ground-truth dirt positions in meters."""
    if scene.kind is DirtType.MARKER:
        x, y = _cell_centers(scene.table)
        sel = scene.ink > 0
        return np.column_stack([x[sel], y[sel]])
    return scene.particles.copy()


def synthesize_demo(scene: Scene, noise: NoiseConfig, rng: np.random.Generator,
                    render: RenderConfig = DEFAULT_RENDER) -> Demonstration:
    """One synthetic demonstration for an existing scene."""
    pts = scene_dirt_points(scene)
    b1, b2, b3 = frame_triplet_from_points(pts, scene.kind, scene.table,
                                           scene.sponge_radius)
    anchors = [b + noise.frame_sigma * rng.standard_normal(2) for b in (b1, b2, b3)]
    curve = quadratic_through(*anchors)
    t = np.linspace(0.0, 1.0, TRAJECTORY_LEN)
    xy = curve(t) + noise.path_sigma * rng.standard_normal((TRAJECTORY_LEN, 2))
    traj = Trajectory(np.column_stack([t, xy]))
    return Demonstration.build(render_scene(scene, render), traj, scene.kind)


def generate_synthetic_demos(n: int, kind, rng: np.random.Generator,
                             noise: NoiseConfig | None = None,
                             table: TableConfig = DEFAULT_TABLE,
                             sponge_radius: float = DEFAULT_SPONGE_RADIUS,
                             render: RenderConfig = DEFAULT_RENDER,
                             marker_params: MarkerSpawnParams | None = None,
                             lentil_params: LentilSpawnParams | None = None) -> Dataset:
    """Spawn ``n`` random scenes and demonstrate a cleaning sweep on each.

    ``kind`` is a DirtType or the string "mixed" for a random blend.
    """
    noise = noise or NoiseConfig()
    if isinstance(kind, str) and kind != "mixed":
        kind = DirtType(kind)
    samples = []
    for _ in range(n):
        k = kind
        if kind == "mixed":
            k = DirtType.MARKER if rng.random() < 0.5 else DirtType.LENTILS
        params = marker_params if k is DirtType.MARKER else lentil_params
        scene = spawn_scene(k, params, rng, table, sponge_radius)
        samples.append(synthesize_demo(scene, noise, rng, render))
    return Dataset(scale_h=table.scale_h, image_size=table.size, samples=samples)


def split_dataset(ds: Dataset, train_frac: float = 0.8,
                  seed: int = 0) -> tuple[Dataset, Dataset]:
    """Reproducible random train/validation split, preserving sample order."""
    if not (0.0 < train_frac < 1.0):
        raise InvariantViolation(f"train_frac = {train_frac}")
    perm = np.random.default_rng(seed).permutation(len(ds.samples))
    n_train = int(round(train_frac * len(ds.samples)))
    train_idx = np.sort(perm[:n_train])
    val_idx = np.sort(perm[n_train:])

    def subset(idx):
        return Dataset(scale_h=ds.scale_h, image_size=ds.image_size,
                       samples=[ds.samples[i] for i in idx],
                       colors=ds.colors, seed=ds.seed)

    return subset(train_idx), subset(val_idx)
