"""Command-line orchestration of the five pipeline stages.

Subcommands: simulate | estimate | segment | render | evaluate | pipeline.
Exit codes: 0 success, 2 config error, 3 missing input, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import brdf_table, estimation, io, render_eval, scenes, segmentation
from .config import ConfigError, PipelineConfig, load_config, serialize_config
from .geometry import PinholeCamera
from .io import MissingInputError
from .simulator import (NoiseConfig, ScanConfig, ir_frame_times, make_default_rig,
                        simulate_scan)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MISSING_INPUT = 3
EXIT_NUMERIC = 4


def _scan_config(cfg: PipelineConfig) -> ScanConfig:
    camera = PinholeCamera(cfg.fx, cfg.fy, cfg.cx, cfg.cy, cfg.width, cfg.height)
    trajectory = scenes.arc_trajectory(
        cfg.n_trajectory_poses, cfg.duration_s, radius=cfg.trajectory_radius_m,
        sweep_deg=cfg.trajectory_sweep_deg)
    noise = NoiseConfig(
        normal_jitter_deg=cfg.normal_jitter_deg,
        pose_translation_jitter_m=cfg.pose_translation_jitter_m,
        pose_rotation_jitter_deg=cfg.pose_rotation_jitter_deg,
        intensity_multiplicative_sigma=cfg.intensity_multiplicative_sigma,
        outlier_fraction=cfg.outlier_fraction,
        dropout_fraction=cfg.dropout_fraction,
        rng_seed=cfg.rng_seed,
    )
    return ScanConfig(camera=camera, rig=make_default_rig(), trajectory=trajectory,
                      noise=noise, saturation_level=cfg.saturation_level,
                      n_ir_frames=cfg.n_ir_frames,
                      rgb_frame_stride=cfg.rgb_frame_stride)


def _make_scene(cfg: PipelineConfig):
    names_by_scene = {
        "two-sphere": ["red_glossy", "blue_matte"],
        "four-material-room": ["gray_wall", "green_floor", "brown_board",
                               "red_glossy"],
        "corner-board": ["gray_wall", "brown_board", "red_glossy"],
    }
    materials = None
    if cfg.lambertian_materials:
        materials = scenes.lambertian_materials(names_by_scene[cfg.scene])
    return scenes.make_scene(cfg.scene, cfg.n_vertices, cfg.rng_seed, materials)


def _paths(out_dir):
    return {
        "config": os.path.join(out_dir, "config.txt"),
        "scene": os.path.join(out_dir, "scene.txt"),
        "materials": os.path.join(out_dir, "materials.txt"),
        "trajectory": os.path.join(out_dir, "trajectory.txt"),
        "ir": os.path.join(out_dir, "ir_observations.txt"),
        "rgb": os.path.join(out_dir, "rgb_observations.txt"),
        "colors": os.path.join(out_dir, "colors.txt"),
        "records": os.path.join(out_dir, "records.npz"),
        "labels": os.path.join(out_dir, "labels.txt"),
        "report": os.path.join(out_dir, "report.txt"),
    }


def cmd_simulate(cfg: PipelineConfig) -> int:
    os.makedirs(cfg.out_dir, exist_ok=True)
    paths = _paths(cfg.out_dir)
    scene = _make_scene(cfg)
    scan = _scan_config(cfg)
    ir, rgb = simulate_scan(scene, scan)
    io.write_scene(paths["scene"], scene)
    io.write_materials(paths["materials"], scene.materials)
    io.write_trajectory(paths["trajectory"], scan.trajectory)
    io.write_ir_observations(paths["ir"], ir)
    io.write_rgb_observations(paths["rgb"], rgb)
    with open(paths["config"], "w") as fh:
        fh.write(serialize_config(cfg))
    if len(ir) == 0:
        print("warning: no IR observations generated", file=sys.stderr)
    print(f"simulate: {len(ir)} IR and {len(rgb)} RGB observations "
          f"for {len(scene)} vertices")
    return EXIT_OK


def cmd_estimate(cfg: PipelineConfig) -> int:
    paths = _paths(cfg.out_dir)
    materials = io.read_materials(paths["materials"])
    scene = io.read_scene(paths["scene"], materials)
    trajectory = io.read_trajectory(paths["trajectory"])
    ir = io.read_ir_observations(paths["ir"])
    rgb = io.read_rgb_observations(paths["rgb"])
    camera = PinholeCamera(cfg.fx, cfg.fy, cfg.cx, cfg.cy, cfg.width, cfg.height)
    colors = estimation.estimate_colors(rgb, cfg.saturation_level)
    records, counts = estimation.accumulate_vertex_tables(
        ir, scene, trajectory, make_default_rig(), colors, camera,
        cfg.saturation_level)
    io.write_colors(paths["colors"], colors)
    io.write_records(paths["records"], records)
    print("estimate: " + " ".join(f"{k}={v}" for k, v in sorted(counts.items())))
    print(f"estimate: {len(records)} vertex records, {len(colors)} colors")
    return EXIT_OK


def cmd_segment(cfg: PipelineConfig) -> int:
    paths = _paths(cfg.out_dir)
    records = io.read_records(paths["records"])
    materials = io.read_materials(paths["materials"])
    scene = io.read_scene(paths["scene"], materials)
    table = segmentation.build_global_table(records, cfg.sample_budget, cfg.rng_seed)
    if cfg.segmentation_mode == "two":
        groups, diag = segmentation.two_material_segmentation(table)
    else:
        groups, diag = segmentation.multi_material_segmentation(table)
    labels = segmentation.diffuse_labels(groups, scene.positions,
                                         table.sampled_ids, cfg.diffusion_radius_m)
    io.write_labels(paths["labels"], labels)
    counts = " ".join(str(len(g)) for g in groups.groups)
    print(f"segment: {len(groups.groups)} groups with counts [{counts}], "
          f"{len(groups.unclassified)} unclassified; {diag}")
    return EXIT_OK


def _merged_tables(records, labels):
    by_group = {}
    for rec in records:
        lab = int(labels[rec.vertex_id]) if rec.vertex_id < len(labels) else -1
        if lab >= 0:
            by_group.setdefault(lab, []).append(rec.table)
    n_groups = max(by_group) + 1 if by_group else 0
    merged = []
    for g in range(n_groups):
        merged.append(brdf_table.merge(by_group[g]) if g in by_group else None)
    return merged


def cmd_render(cfg: PipelineConfig) -> int:
    paths = _paths(cfg.out_dir)
    records = io.read_records(paths["records"])
    labels = io.read_labels(paths["labels"])
    materials = io.read_materials(paths["materials"])
    scene = io.read_scene(paths["scene"], materials)
    trajectory = io.read_trajectory(paths["trajectory"])
    merged = _merged_tables(records, labels)
    completed = []
    light = np.array([0.3, 0.3, 1.0])
    for g, table in enumerate(merged):
        if table is None or table.measured_count < 2:
            completed.append(None)
            continue
        full = brdf_table.complete(table)
        completed.append(full)
        with open(os.path.join(cfg.out_dir, f"material_{g}.brdf"), "w") as fh:
            fh.write(brdf_table.to_text(full))
        img = render_eval.render_material_sphere(full, light)
        render_eval.write_ppm(os.path.join(cfg.out_dir, f"sphere_{g}.ppm"), img)

    camera = PinholeCamera(cfg.fx, cfg.fy, cfg.cx, cfg.cy, cfg.width, cfg.height)
    scan = _scan_config(cfg)
    t0 = float(ir_frame_times(scan)[0])
    tables = [t if t is not None else None for t in completed]
    usable = [t for t in tables if t is not None]
    if usable:
        # render with a Lambertian fallback for groups lacking a table
        render_tables = [t if t is not None else usable[0] for t in tables]
        frame = render_eval.rerender_ir_frame(
            scene, labels, render_tables, trajectory, t0, 0, make_default_rig(),
            camera, exposure=2.0)
        render_eval.write_ppm(os.path.join(cfg.out_dir, "rerender.ppm"), frame)
    print(f"render: {sum(t is not None for t in completed)} material spheres "
          "+ scene re-render")
    return EXIT_OK


def cmd_evaluate(cfg: PipelineConfig) -> int:
    paths = _paths(cfg.out_dir)
    records = io.read_records(paths["records"])
    labels = io.read_labels(paths["labels"])
    materials = io.read_materials(paths["materials"])
    scene = io.read_scene(paths["scene"], materials)
    sampled = set(rec.vertex_id for rec in records)
    groups_list = []
    for g in sorted(set(int(x) for x in labels if x >= 0)):
        groups_list.append(set(int(v) for v in np.nonzero(labels == g)[0]) & sampled)
    groups = segmentation.MaterialGroups(
        groups_list, sampled - set().union(*groups_list) if groups_list else sampled)
    merged = _merged_tables(records, labels)
    merged = [t if t is not None else brdf_table.BrdfTable() for t in merged]
    report = render_eval.evaluate(groups, scene.material_ids, merged,
                                  scene.materials)
    with open(paths["report"], "w") as fh:
        fh.write(report.to_text())
    print("evaluate:\n" + report.to_text().rstrip())
    return EXIT_OK


def cmd_pipeline(cfg: PipelineConfig) -> int:
    for stage in (cmd_simulate, cmd_estimate, cmd_segment, cmd_render, cmd_evaluate):
        rc = stage(cfg)
        if rc != EXIT_OK:
            return rc
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "segment": cmd_segment,
    "render": cmd_render,
    "evaluate": cmd_evaluate,
    "pipeline": cmd_pipeline,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="matscan",
        description="Synthetic appearance-capture pipeline: simulate, estimate, "
                    "segment, render, evaluate.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="path to key = value config file")
    parser.add_argument("--out", help="output directory (overrides config)")
    parser.add_argument("--seed", type=int, help="rng seed (overrides config)")
    parser.add_argument("--threads", type=int, default=0,
                        help="thread budget hint (numpy-managed)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else PipelineConfig().validate()
        if args.out:
            cfg.out_dir = args.out
        if args.seed is not None:
            cfg.rng_seed = args.seed
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING_INPUT
    except (np.linalg.LinAlgError, FloatingPointError, ZeroDivisionError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
