"""Command-line driver.

One binary, seven subcommands covering the pipeline: render, capture,
learn-angles, reconstruct-mueller, reconstruct-scene, edit-material,
export-plots.  All numeric inputs come from the config file; flags carry
only paths, seeds, and the thread cap.  Every command is deterministic
given config and seed, independent of --threads.

Exit codes: 2 for configuration errors, 3 for I/O errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import ellipsometry, inverse, render, scene, tensorio
from .tensorio import ConfigError, FormatError, RunConfig

log = logging.getLogger("polartof")

_LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING,
               "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging() -> None:
    level = os.environ.get("POLARTOF_LOG", "warn").lower()
    if level not in _LOG_LEVELS:
        raise ConfigError(f"POLARTOF_LOG must be one of "
                          f"{sorted(_LOG_LEVELS)}, got {level!r}")
    logging.basicConfig(level=_LOG_LEVELS[level],
                        format="%(levelname)s %(name)s: %(message)s")


def _apply_thread_cap(threads: int | None):
    if threads is None:
        return None
    if threads < 1:
        raise ConfigError("--threads must be >= 1")
    import threadpoolctl
    return threadpoolctl.threadpool_limits(limits=threads)


# ---------------------------------------------------------------------------
# Config plumbing
# ---------------------------------------------------------------------------

def _sensor_from_config(cfg: RunConfig) -> scene.SensorConfig:
    return scene.SensorConfig(
        bin_width=cfg.get("sensor", "bin_width", 25e-12),
        num_bins=cfg.get("sensor", "num_bins", 512),
        noise_sigma=cfg.get("sensor", "noise_sigma", 1e-4),
        irf_sigma=cfg.get("sensor", "irf_sigma", 0.0))


def _scene_from_config(cfg: RunConfig) -> scene.Scene:
    kind = cfg.require("scene", "kind")
    kwargs = dict(width=cfg.get("scene", "width", 32),
                  height=cfg.get("scene", "height", 32),
                  fov_deg=np.degrees(cfg.get("scene", "fov",
                                             np.radians(30.0))),
                  distance=cfg.get("scene", "distance", 0.35))
    tilt = cfg.get("scene", "tilt")
    if tilt is not None:
        kwargs["tilt_deg"] = np.degrees(tilt)
    radius = cfg.get("scene", "radius")
    if radius is not None:
        kwargs["radius"] = radius
    blob = cfg.get("scene", "blob_radius_frac")
    if blob is not None:
        kwargs["blob_radius_frac"] = blob
    return scene.make_synthetic_scene(kind, **kwargs)


def _view_dirs_from_config(cfg: RunConfig, shape) -> np.ndarray:
    h, w = shape
    fov = np.degrees(cfg.get("scene", "fov", np.radians(30.0)))
    return -scene.camera_rays(w, h, fov)


def _check_input(path, section: str, key: str) -> str:
    if not os.path.exists(path):
        raise ConfigError(f"[{section}] {key}: no such file {path!r}")
    return path


def _schedule_from_config(cfg: RunConfig, seed: int | None):
    path = cfg.get("schedule", "file") or cfg.get("io", "schedule_file")
    if path is not None:
        key = ("schedule", "file") if cfg.get("schedule", "file") \
            else ("io", "schedule_file")
        _check_input(path, *key)
        with open(path, "r", encoding="utf-8") as f:
            return ellipsometry.PolarimetricSchedule.from_text(f.read())
    kind = cfg.get("schedule", "kind", "uniform")
    n = cfg.get("schedule", "n", 20)
    sched_seed = seed if seed is not None else cfg.get("schedule", "seed", 0)
    if kind == "uniform":
        return ellipsometry.uniform_schedule(n)
    if kind == "random":
        return ellipsometry.random_schedule(n, sched_seed)
    if kind == "learned":
        return ellipsometry.learn_schedule(
            n, cfg.get("schedule", "iters", 200), sched_seed,
            lr=cfg.get("schedule", "lr", 0.02))
    raise ConfigError(f"unknown schedule kind {kind!r}")


def _weights_from_config(cfg: RunConfig) -> inverse.WeightConfig:
    defaults = inverse.WeightConfig()
    return inverse.WeightConfig(
        w_diag=cfg.get("weights", "w_diag", defaults.w_diag),
        w_offdiag=cfg.get("weights", "w_offdiag", defaults.w_offdiag),
        edge_threshold=cfg.get("weights", "edge_threshold",
                               defaults.edge_threshold),
        lambda_reg=cfg.get("weights", "lambda_reg", defaults.lambda_reg),
        gauge_weight=cfg.get("weights", "gauge_weight",
                             defaults.gauge_weight))


def _out_dir(cfg: RunConfig, args) -> str:
    out = args.out or cfg.get("io", "out", "out")
    os.makedirs(out, exist_ok=True)
    return out


def _write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, sort_keys=True, indent=2)
        f.write("\n")


def _component_stats(data: np.ndarray) -> dict:
    return {"min": float(np.min(data)), "max": float(np.max(data)),
            "energy": float(np.sum(data * data))}


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_render(cfg: RunConfig, args) -> int:
    sc = _scene_from_config(cfg)
    sensor = _sensor_from_config(cfg)
    out = _out_dir(cfg, args)
    cube = render.render_transient(sc, sensor)
    tensorio.write_tensor(os.path.join(out, "cube.ptf"), cube.data,
                          bin_width=sensor.bin_width)
    # per-bank energies via zero-amplitude counterfactual renders
    mats_no_ss = [m.with_bank("subsurface", m.subsurface.zero_like())
                  for m in sc.materials]
    mats_no_s = [m.with_bank("surface", m.surface.zero_like())
                 for m in sc.materials]
    surf = render.render_transient(sc.with_materials(mats_no_ss), sensor)
    sub = render.render_transient(sc.with_materials(mats_no_s), sensor)
    summary = {"shape": list(cube.data.shape),
               "total": _component_stats(cube.data),
               "surface": _component_stats(surf.data),
               "subsurface": _component_stats(sub.data)}
    _write_json(os.path.join(out, "render_summary.json"), summary)
    print(f"wrote {out}/cube.ptf "
          f"(energy {summary['total']['energy']:.6e})")
    return 0


def cmd_capture(cfg: RunConfig, args) -> int:
    sc = _scene_from_config(cfg)
    sensor = _sensor_from_config(cfg)
    seed = args.seed if args.seed is not None else cfg.get("schedule",
                                                           "seed", 0)
    schedule = _schedule_from_config(cfg, args.seed)
    out = _out_dir(cfg, args)
    cube = render.render_transient(sc, sensor)
    stack = render.simulate_capture(cube, sc, schedule, sensor, seed=seed)
    tensorio.write_tensor(os.path.join(out, "capture.ptf"), stack.data,
                          bin_width=sensor.bin_width)
    with open(os.path.join(out, "schedule.txt"), "w",
              encoding="utf-8") as f:
        f.write(schedule.to_text())
    summary = {"n": schedule.n, "shape": list(stack.data.shape),
               "schedule": schedule.ref,
               "total": _component_stats(stack.data)}
    _write_json(os.path.join(out, "capture_summary.json"), summary)
    print(f"wrote {out}/capture.ptf (N={schedule.n})")
    return 0


def cmd_learn_angles(cfg: RunConfig, args) -> int:
    n = cfg.get("schedule", "n", 20)
    iters = cfg.get("schedule", "iters", 200)
    seed = args.seed if args.seed is not None else cfg.get("schedule",
                                                           "seed", 0)
    lr = cfg.get("schedule", "lr", 0.02)
    out = _out_dir(cfg, args)
    schedule, history = ellipsometry.learn_schedule(
        n, iters, seed, lr=lr, return_history=True)
    with open(os.path.join(out, "schedule.txt"), "w",
              encoding="utf-8") as f:
        f.write(schedule.to_text())
    with open(os.path.join(out, "loss_curve.csv"), "w",
              encoding="utf-8") as f:
        f.write("iter,loss,best_loss\n")
        for i, (val, best) in enumerate(history):
            f.write(f"{i},{float(val)!r},{float(best)!r}\n")
    kappa = ellipsometry.condition_number(schedule)
    print(f"wrote {out}/schedule.txt (condition number {kappa:.3f})")
    return 0


def cmd_reconstruct_mueller(cfg: RunConfig, args) -> int:
    cap_path = _check_input(cfg.require("io", "capture_file"),
                            "io", "capture_file")
    data, header = tensorio.read_tensor(cap_path)
    schedule = _schedule_from_config(cfg, args.seed)
    sensor = _sensor_from_config(cfg)
    bin_width = header.get("bin_width", sensor.bin_width)
    out = _out_dir(cfg, args)
    stack = render.CaptureStack(data, schedule_ref=schedule.ref)
    cube = ellipsometry.reconstruct_mueller(stack, schedule,
                                            bin_width=bin_width)
    tensorio.write_tensor(os.path.join(out, "recon_cube.ptf"), cube.data,
                          bin_width=bin_width)
    summary = {"shape": list(cube.data.shape),
               "total": _component_stats(cube.data)}
    _write_json(os.path.join(out, "recon_summary.json"), summary)
    print(f"wrote {out}/recon_cube.ptf")
    return 0


def cmd_reconstruct_scene(cfg: RunConfig, args) -> int:
    cube_path = _check_input(cfg.require("io", "cube_file"),
                             "io", "cube_file")
    data, header = tensorio.read_tensor(cube_path)
    sensor = _sensor_from_config(cfg)
    if "bin_width" in header and \
            abs(header["bin_width"] - sensor.bin_width) > 1e-18:
        raise ConfigError("cube bin_width disagrees with [sensor] bin_width")
    cube = render.TransientMuellerCube(data, sensor.bin_width)
    view_dirs = _view_dirs_from_config(cfg, data.shape[:2])
    seed = args.seed if args.seed is not None else cfg.get("optimizer",
                                                           "seed", 0)
    out = _out_dir(cfg, args)
    res = inverse.reconstruct_scene(
        cube, view_dirs, sensor,
        k=cfg.get("optimizer", "k", 1),
        iters=cfg.get("optimizer", "iters", 400),
        lr=cfg.get("optimizer", "lr", 1e-2),
        weights=_weights_from_config(cfg), seed=seed,
        freeze_depth=cfg.get("optimizer", "freeze_depth", False))
    params_dir = os.path.join(out, "params")
    tensorio.write_scene_params(params_dir, res.params,
                                cluster_id=res.cluster_id, valid=res.valid)
    # masked pixels become NaN in the exported maps
    depth_map = np.where(res.valid, res.params.depth, np.nan)
    tensorio.write_tensor(os.path.join(out, "depth_map.ptf"), depth_map,
                          units="m")
    normal_map = np.where(res.valid[..., None], res.params.normals, np.nan)
    tensorio.write_tensor(os.path.join(out, "normal_map.ptf"), normal_map)
    best_so_far = np.minimum.accumulate(res.loss_history)
    with open(os.path.join(out, "loss_curve.csv"), "w",
              encoding="utf-8") as f:
        f.write("iter,loss,best_loss\n")
        for i, (val, best) in enumerate(zip(res.loss_history, best_so_far)):
            f.write(f"{i},{float(val)!r},{float(best)!r}\n")
    summary = {"best_loss": res.best_loss,
               "valid_pixels": int(np.sum(res.valid)),
               "clusters": len(res.params.eta),
               "eta": [float(v) for v in res.params.eta],
               "m": [float(v) for v in res.params.m]}
    _write_json(os.path.join(out, "scene_summary.json"), summary)
    print(f"wrote {params_dir} (best loss {res.best_loss:.6e})")
    return 0


def cmd_edit_material(cfg: RunConfig, args) -> int:
    params_dir = _check_input(cfg.require("io", "params_dir"),
                              "io", "params_dir")
    params, cluster_id, valid = tensorio.read_scene_params(params_dir)
    if cluster_id is None:
        raise ConfigError(f"{params_dir} has no cluster_id.ptf")
    sensor = _sensor_from_config(cfg)
    shift_mu = cfg.get("edit", "shift_mu", np.ones(4))
    if len(shift_mu) != 4:
        raise ConfigError("[edit] shift_mu needs exactly 4 factors")
    clusters = cfg.get("edit", "clusters")
    edit = inverse.MaterialEdit(
        bank=cfg.get("edit", "bank", "subsurface"),
        scale_a=cfg.get("edit", "scale_a", 1.0),
        shift_mu=tuple(float(v) for v in shift_mu),
        set_m=cfg.get("edit", "set_m"),
        clusters=None if clusters is None else tuple(int(c)
                                                     for c in clusters))
    try:
        edited = inverse.edit_material(params, edit, sensor)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out = _out_dir(cfg, args)
    view_dirs = _view_dirs_from_config(cfg, params.depth.shape)
    edited_dir = os.path.join(out, "params_edited")
    tensorio.write_scene_params(edited_dir, edited, cluster_id=cluster_id,
                                valid=valid)
    sc = edited.to_scene(cluster_id, view_dirs)
    cube = render.render_transient(sc, sensor)
    tensorio.write_tensor(os.path.join(out, "edited_cube.ptf"), cube.data,
                          bin_width=sensor.bin_width)
    print(f"wrote {edited_dir} and {out}/edited_cube.ptf")
    return 0


def cmd_export_plots(cfg: RunConfig, args) -> int:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    kind = cfg.require("export", "kind")
    path = _check_input(cfg.require("export", "input"),
                        "export", "input")
    data, header = tensorio.read_tensor(path)
    out = _out_dir(cfg, args)

    if kind == "mueller":
        if data.ndim != 5:
            raise ConfigError("mueller export needs an [H,W,T,4,4] cube")
        t_bin = cfg.get("export", "time_bin", 0)
        if not 0 <= t_bin < data.shape[2]:
            raise ConfigError(f"time_bin {t_bin} out of range")
        fig, axes = plt.subplots(4, 4, figsize=(10, 10))
        for j in range(4):
            for k in range(4):
                ax = axes[j][k]
                im = ax.imshow(data[:, :, t_bin, j, k])
                ax.set_title(f"H{j}{k}", fontsize=8)
                ax.axis("off")
                fig.colorbar(im, ax=ax, shrink=0.7)
        fig.suptitle(f"Mueller entries at bin {t_bin}")
        fig.savefig(os.path.join(out, "mueller_maps.png"), dpi=100)
        plt.close(fig)
        print(f"wrote {out}/mueller_maps.png")
    elif kind == "profile":
        if data.ndim != 5:
            raise ConfigError("profile export needs an [H,W,T,4,4] cube")
        pixel = cfg.get("export", "pixel", np.array([0, 0]))
        entry = cfg.get("export", "entry", 0)
        if not 0 <= entry <= 15:
            raise ConfigError(f"Mueller entry index {entry} out of range")
        i, j = int(pixel[0]), int(pixel[1])
        if not (0 <= i < data.shape[0] and 0 <= j < data.shape[1]):
            raise ConfigError(f"pixel ({i}, {j}) out of range")
        profile = data[i, j, :, entry // 4, entry % 4]
        bw = header.get("bin_width", 1.0)
        with open(os.path.join(out, "profile.csv"), "w",
                  encoding="utf-8") as f:
            f.write("bin,time_s,value\n")
            for t, v in enumerate(profile):
                f.write(f"{t},{(t + 0.5) * bw!r},{v!r}\n")
        fig, ax = plt.subplots(figsize=(7, 4))
        ax.plot(np.arange(len(profile)), profile)
        ax.set_xlabel("time bin")
        ax.set_ylabel(f"H{entry // 4}{entry % 4}")
        fig.savefig(os.path.join(out, "profile.png"), dpi=100)
        plt.close(fig)
        print(f"wrote {out}/profile.csv and {out}/profile.png")
    elif kind in ("depth", "normals"):
        fig, ax = plt.subplots(figsize=(6, 5))
        if kind == "depth":
            if data.ndim != 2:
                raise ConfigError("depth export needs an [H,W] map")
            im = ax.imshow(data)
            fig.colorbar(im, ax=ax)
        else:
            if data.ndim != 3 or data.shape[-1] != 3:
                raise ConfigError("normals export needs an [H,W,3] map")
            ax.imshow(np.clip(0.5 * (data + 1.0), 0.0, 1.0))
        ax.set_title(kind)
        fig.savefig(os.path.join(out, f"{kind}_map.png"), dpi=100)
        plt.close(fig)
        print(f"wrote {out}/{kind}_map.png")
    else:
        raise ConfigError(f"unknown export kind {kind!r}")
    return 0


_COMMANDS = {
    "render": cmd_render,
    "capture": cmd_capture,
    "learn-angles": cmd_learn_angles,
    "reconstruct-mueller": cmd_reconstruct_mueller,
    "reconstruct-scene": cmd_reconstruct_scene,
    "edit-material": cmd_edit_material,
    "export-plots": cmd_export_plots,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polartof",
        description="Polarimetric time-of-flight simulation and "
                    "reconstruction toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in _COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__)
        p.add_argument("--config", required=True,
                       help="path to the run configuration file")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--threads", type=int, default=None,
                       help="cap worker threads (results are independent "
                            "of this setting)")
        p.add_argument("--out", default=None,
                       help="override the output directory")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        _setup_logging()
        limiter = _apply_thread_cap(args.threads)
        try:
            cfg = RunConfig.from_file(args.config)
            return _COMMANDS[args.command](cfg, args)
        finally:
            if limiter is not None:
                limiter.unregister()
    except FormatError as exc:
        # checked before ValueError: FormatError is a ValueError subclass
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, scene.InvalidParam, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
