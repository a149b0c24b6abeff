"""Command line front end.

Exit codes: 0 on success, 1 on a domain error (printed as
``ERROR <code>: <message>``), 2 on a usage error.  Commands that draw random
numbers take ``--seed`` (default a fixed constant, never wall clock) and
print the effective seed.  File formats are UTF-8 with comma-separated CSV
and point decimals regardless of locale.
"""

import argparse
from concurrent.futures import ThreadPoolExecutor
import sys

import numpy as np

from . import dataset_io
from .augment import AugmentPlan, augment_sample
from .config import DEFAULT_COLORS, DEFAULT_SPONGE_RADIUS, ColorConfig, TableConfig, worker_count
from .errors import ToolkitError
from .experiment import demos_curve
from .geometry import (estimate_homography, load_homography, read_correspondences,
                       save_homography, warp_image)
from .perception import BaselineFramePredictor, DirtType
from .simulator import Pipeline, metric_m1, metric_m2_from_distances, run_episode, spawn_scene
from .tpgmm import EmConfig, em_fit, gmr_trajectory, load_model, make_frames, save_model

DEFAULT_SEED = 7


def _table_for(size: int) -> TableConfig:
    return TableConfig() if size == 240 else TableConfig(size=size, scale_h=float(size))


def _colors_arg(path) -> ColorConfig:
    return ColorConfig.from_file(path) if path else DEFAULT_COLORS


def _cmd_calibrate(args) -> int:
    pairs = read_correspondences(args.pairs)
    h = estimate_homography(pairs)
    save_homography(h, args.out)
    print(f"calibrated from {len(pairs)} correspondences -> {args.out}")
    return 0


def _cmd_warp(args) -> int:
    img = dataset_io.load_png(args.image, scale_h=float(args.size))
    h = load_homography(args.homography)
    out = warp_image(img, h, args.size)
    dataset_io.save_png(out, args.out)
    print(f"warped {args.image} -> {args.out}")
    return 0


def _cmd_augment(args) -> int:
    print(f"seed: {args.seed}")
    plan = AugmentPlan(n_translate_illum=args.n_translate, n_perlin=args.n_perlin,
                       master_seed=args.seed)
    colors = _colors_arg(args.colors)
    ds = dataset_io.load_dataset(args.manifest, load_images=False)
    table = _table_for(ds.image_size)
    writer = dataset_io.DatasetWriter(args.out, ds.scale_h, ds.image_size,
                                      colors=ds.colors, seed=args.seed)
    for s, demo in enumerate(ds.samples):
        demo.image = dataset_io.load_png(demo.image_path, ds.scale_h)
        writer.add(demo)
        for copy in augment_sample(demo, plan, s, colors, table):
            writer.add(copy)
        demo.image = None
    manifest = writer.close()
    total = len(ds.samples) * (1 + plan.copies_per_sample)
    print(f"wrote {total} samples -> {manifest}")
    return 0


def _cmd_gen_demos(args) -> int:
    print(f"seed: {args.seed}")
    rng = np.random.default_rng(args.seed)
    noise = dataset_io.NoiseConfig(frame_sigma=args.frame_sigma,
                                   path_sigma=args.path_sigma)
    table = _table_for(args.size)
    writer = dataset_io.DatasetWriter(args.out, table.scale_h, table.size,
                                      seed=args.seed)
    for _ in range(args.n):
        kind = (DirtType(args.kind) if args.kind != "mixed"
                else (DirtType.MARKER if rng.random() < 0.5 else DirtType.LENTILS))
        scene = spawn_scene(kind, None, rng, table, DEFAULT_SPONGE_RADIUS)
        writer.add(dataset_io.synthesize_demo(scene, noise, rng))
    manifest = writer.close()
    print(f"wrote {args.n} demonstrations -> {manifest}")
    return 0


def _cmd_fit_gmm(args) -> int:
    print(f"seed: {args.seed}")
    ds = dataset_io.load_dataset(args.manifest, load_images=False)
    cfg = EmConfig(max_iter=args.max_iter, tol=args.tol, init=args.init,
                   seed=args.seed)
    model = em_fit(ds.samples, args.k, cfg)
    save_model(model, args.out)
    print(f"fitted K={args.k} on {len(ds.samples)} demos, "
          f"{len(model.ll_history)} iterations, objective {model.ll_history[-1]:.3f}"
          f" -> {args.out}")
    return 0


def _cmd_predict(args) -> int:
    img = dataset_io.load_png(args.image, scale_h=float(args.scale_h))
    predictor = BaselineFramePredictor(colors=_colors_arg(args.colors))
    pred = predictor.predict_frames(img)
    line = " ".join(repr(float(v)) for b in (pred.b1, pred.b2, pred.b3) for v in b)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(line + "\n")
    print(line)
    return 0


def _cmd_gen_traj(args) -> int:
    model = load_model(args.model)
    vals = [float(v) for v in args.frames.replace(",", " ").split()]
    if len(vals) != 6:
        raise ToolkitError(f"--frames needs 6 numbers, got {len(vals)}")
    frames = make_frames(vals[0:2], vals[2:4], vals[4:6])
    traj = gmr_trajectory(model, frames, n_samples=args.samples)
    dataset_io.save_trajectory_csv(traj, args.out)
    print(f"wrote {len(traj)}-sample trajectory -> {args.out}")
    return 0


def _run_one_episode(model, kind, seed, episode, reps, colors):
    rng = np.random.default_rng([seed, episode])
    scene = spawn_scene(kind, None, rng)
    pipeline = Pipeline(BaselineFramePredictor(colors=colors), model)
    series, _ = run_episode(scene, pipeline, n_reps=reps, colors=colors)
    return episode, series


def _cmd_simulate(args) -> int:
    print(f"seed: {args.seed}")
    model = load_model(args.model)
    kind = DirtType(args.kind)
    colors = _colors_arg(args.colors)
    jobs = [(model, kind, args.seed, ep, args.reps, colors)
            for ep in range(args.episodes)]
    workers = min(worker_count(), max(len(jobs), 1))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda j: _run_one_episode(*j), jobs))
    else:
        results = [_run_one_episode(*j) for j in jobs]
    results.sort(key=lambda r: r[0])
    lines = ["episode,repetition,metric,value"]
    finals = []
    for episode, series in results:
        for rep, value in enumerate(series.values, start=1):
            lines.append(f"{episode},{rep},{series.name},{float(value)!r}")
        finals.append(series.values[-1])
    with open(args.out, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
    print(f"{args.episodes} episodes x {args.reps} repetitions -> {args.out}")
    print(f"mean final {results[0][1].name}: {np.mean(finals):.2f}%")
    return 0


def _cmd_metrics(args) -> int:
    values = [float(v) for v in args.values.split(",") if v.strip()]
    series = (metric_m1(values) if args.kind == "m1"
              else metric_m2_from_distances(values))
    line = ",".join(repr(float(v)) for v in series.values)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(f"{series.name}\n{line}\n")
    print(f"{series.name}: {line}")
    return 0


def _cmd_demos_curve(args) -> int:
    print(f"seed: {args.seed}")
    ds = dataset_io.load_dataset(args.manifest, load_images=False)
    counts = [int(c) for c in args.counts.split(",") if c.strip()]
    points = demos_curve(ds, counts, trials=args.trials, k=args.k, seed=args.seed)
    lines = ["count,mean_rmse,stddev_rmse"]
    for p in points:
        lines.append(f"{p.count},{p.mean_error!r},{p.stddev_error!r}")
        print(f"count {p.count}: {p.mean_error:.5f} +/- {p.stddev_error:.5f} m")
    with open(args.out, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="tabletop-lfd",
        description="Tabletop cleaning from demonstrations: calibration, "
                    "augmentation, trajectory models and a cleaning simulator.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="fit a homography from point pairs")
    p.add_argument("--pairs", required=True, help="file of 'sx sy tx ty' lines")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("warp", help="warp an image to the virtual view")
    p.add_argument("--image", required=True)
    p.add_argument("--homography", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--size", type=int, default=240)
    p.set_defaults(func=_cmd_warp)

    p = sub.add_parser("augment", help="expand a dataset with jittered copies")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n-translate", type=int, default=10)
    p.add_argument("--n-perlin", type=int, default=10)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--colors", default=None)
    p.set_defaults(func=_cmd_augment)

    p = sub.add_parser("gen-demos", help="synthesize demonstration datasets")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--kind", choices=["marker", "lentils", "mixed"], default="mixed")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--frame-sigma", type=float, default=0.01)
    p.add_argument("--path-sigma", type=float, default=0.002)
    p.add_argument("--size", type=int, default=240)
    p.set_defaults(func=_cmd_gen_demos)

    p = sub.add_parser("fit-gmm", help="fit the trajectory mixture model")
    p.add_argument("--manifest", required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--out", required=True)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--init", choices=["time_bins", "random"], default="time_bins")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.set_defaults(func=_cmd_fit_gmm)

    p = sub.add_parser("predict", help="predict frame anchors from an image")
    p.add_argument("--image", required=True)
    p.add_argument("--colors", default=None)
    p.add_argument("--scale-h", type=float, default=240.0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("gen-traj", help="reproduce a trajectory for new frames")
    p.add_argument("--model", required=True)
    p.add_argument("--frames", required=True,
                   help="b1x,b1y,b2x,b2y,b3x,b3y (write --frames=... for "
                        "negative values)")
    p.add_argument("--out", required=True)
    p.add_argument("--samples", type=int, default=200)
    p.set_defaults(func=_cmd_gen_traj)

    p = sub.add_parser("simulate", help="run cleaning episodes in the simulator")
    p.add_argument("--model", required=True)
    p.add_argument("--kind", choices=["marker", "lentils"], required=True)
    p.add_argument("--episodes", type=int, default=15)
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--out", required=True)
    p.add_argument("--colors", default=None)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("metrics", help="normalize raw metric values to percent")
    p.add_argument("--kind", choices=["m1", "m2"], required=True)
    p.add_argument("--values", required=True, help="comma separated raw values")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("experiment", help="evaluation experiments")
    esub = p.add_subparsers(dest="experiment", required=True)
    e = esub.add_parser("demos-curve", help="error versus demonstration count")
    e.add_argument("--manifest", required=True)
    e.add_argument("--counts", required=True, help="comma separated counts")
    e.add_argument("--trials", type=int, default=10)
    e.add_argument("--k", type=int, default=5)
    e.add_argument("--seed", type=int, default=DEFAULT_SEED)
    e.add_argument("--out", required=True)
    e.set_defaults(func=_cmd_demos_curve)

    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ToolkitError as e:
        print(f"ERROR {e.code}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
