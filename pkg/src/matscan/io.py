"""Plain-text and npz artifact I/O for the pipeline stages."""

from __future__ import annotations

import os

import numpy as np

from .brdf_table import N_D, N_H, BrdfTable
from .estimation import VertexReflectanceRecord
from .geometry import Pose, Quaternion, TimedPose
from .simulator import GroundTruthMaterial, IrObservations, RgbObservations


class MissingInputError(FileNotFoundError):
    pass


def _require(path):
    if not os.path.exists(path):
        raise MissingInputError(f"missing input file: {path}")
    return path


def write_scene(path, scene) -> None:
    with open(path, "w") as fh:
        fh.write("# vertex_id x y z nx ny nz material_id\n")
        for i in range(len(scene)):
            p = scene.positions[i]
            n = scene.normals[i]
            fh.write(f"{i} {p[0]:.17g} {p[1]:.17g} {p[2]:.17g} "
                     f"{n[0]:.17g} {n[1]:.17g} {n[2]:.17g} {scene.material_ids[i]}\n")


def read_scene(path, materials):
    from .scenes import Scene
    data = np.loadtxt(_require(path), comments="#").reshape(-1, 8)
    return Scene(data[:, 1:4], data[:, 4:7], data[:, 7].astype(int), materials)


def write_materials(path, materials) -> None:
    with open(path, "w") as fh:
        fh.write("# material_id albedo_r albedo_g albedo_b strength exponent "
                 "color_r color_g color_b\n")
        for i, m in enumerate(materials):
            a, c = m.diffuse_albedo, m.color
            fh.write(f"{i} {a[0]:.17g} {a[1]:.17g} {a[2]:.17g} "
                     f"{m.specular_strength:.17g} {m.lobe_exponent:.17g} "
                     f"{c[0]:.17g} {c[1]:.17g} {c[2]:.17g}\n")


def read_materials(path):
    data = np.loadtxt(_require(path), comments="#").reshape(-1, 9)
    return [GroundTruthMaterial(diffuse_albedo=row[1:4], specular_strength=row[4],
                                lobe_exponent=row[5], color=row[6:9])
            for row in data]


def write_trajectory(path, trajectory) -> None:
    with open(path, "w") as fh:
        fh.write("# t qw qx qy qz tx ty tz\n")
        for tp in trajectory:
            q = tp.pose.rotation
            t = tp.pose.translation
            fh.write(f"{tp.timestamp:.17g} {q.w:.17g} {q.x:.17g} {q.y:.17g} "
                     f"{q.z:.17g} {t[0]:.17g} {t[1]:.17g} {t[2]:.17g}\n")


def read_trajectory(path):
    data = np.loadtxt(_require(path), comments="#").reshape(-1, 8)
    return [TimedPose(Pose(Quaternion(*row[1:5]), row[5:8]), float(row[0]))
            for row in data]


def write_ir_observations(path, ir: IrObservations) -> None:
    """One record per line: vertex_id frame_time led_index intensity px py."""
    with open(path, "w") as fh:
        fh.write("# vertex_id frame_time led_index intensity px py\n")
        for i in range(len(ir)):
            fh.write(f"{ir.vertex_id[i]} {ir.frame_time[i]:.17g} "
                     f"{ir.led_index[i]} {ir.intensity[i]:.17g} "
                     f"{ir.pixel[i, 0]:.17g} {ir.pixel[i, 1]:.17g}\n")


def read_ir_observations(path) -> IrObservations:
    data = np.loadtxt(_require(path), comments="#").reshape(-1, 6)
    return IrObservations(data[:, 0].astype(int), data[:, 1],
                          data[:, 2].astype(int), data[:, 3], data[:, 4:6])


def write_rgb_observations(path, rgb: RgbObservations) -> None:
    with open(path, "w") as fh:
        fh.write("# vertex_id r g b omega_out_deg\n")
        for i in range(len(rgb)):
            v = rgb.rgb[i]
            fh.write(f"{rgb.vertex_id[i]} {v[0]:.17g} {v[1]:.17g} {v[2]:.17g} "
                     f"{rgb.omega_out_angle[i]:.17g}\n")


def read_rgb_observations(path) -> RgbObservations:
    data = np.loadtxt(_require(path), comments="#").reshape(-1, 5)
    return RgbObservations(data[:, 0].astype(int), data[:, 1:4], data[:, 4])


def write_colors(path, colors: dict) -> None:
    """Per-vertex unit colors: `vertex_id r g b` (Euclidean normalization)."""
    with open(path, "w") as fh:
        fh.write("# vertex_id r g b (unit euclidean norm)\n")
        for v in sorted(colors):
            c = colors[v]
            fh.write(f"{v} {c[0]:.17g} {c[1]:.17g} {c[2]:.17g}\n")


def read_colors(path) -> dict:
    data = np.loadtxt(_require(path), comments="#").reshape(-1, 4)
    return {int(row[0]): row[1:4] for row in data}


def write_records(path, records) -> None:
    """Compact npz with all per-vertex tables."""
    vids, colors = [], []
    row_vid, row_h, row_d, row_count, row_mean = [], [], [], [], []
    for rec in records:
        vids.append(rec.vertex_id)
        colors.append(rec.normalized_color)
        for (h, d), mean, count in rec.table.cells():
            row_vid.append(rec.vertex_id)
            row_h.append(h)
            row_d.append(d)
            row_count.append(count)
            row_mean.append(mean)
    np.savez_compressed(
        path,
        vertex_id=np.array(vids, dtype=int),
        color=np.array(colors).reshape(-1, 3),
        cell_vid=np.array(row_vid, dtype=int),
        cell_h=np.array(row_h, dtype=int),
        cell_d=np.array(row_d, dtype=int),
        cell_count=np.array(row_count, dtype=int),
        cell_mean=np.array(row_mean).reshape(-1, 3),
    )


def read_records(path):
    data = np.load(_require(path))
    colors = {int(v): c for v, c in zip(data["vertex_id"], data["color"])}
    cv = data["cell_vid"]
    order = np.argsort(cv, kind="stable")
    bounds = np.nonzero(np.diff(cv[order]))[0] + 1
    records = []
    for rows in np.split(order, bounds):
        if len(rows) == 0:
            continue
        v = int(cv[rows[0]])
        idx = np.stack([data["cell_h"][rows], data["cell_d"][rows]], axis=1)
        table = BrdfTable.from_cells(idx, data["cell_mean"][rows],
                                     data["cell_count"][rows])
        records.append(VertexReflectanceRecord(v, colors[v], table))
    return records


def write_labels(path, labels: np.ndarray, groups=None) -> None:
    """`vertex_id label` per line (-1 unclassified), with per-group counts in
    a trailing comment summary."""
    with open(path, "w") as fh:
        fh.write("# vertex_id label\n")
        for i, lab in enumerate(labels):
            fh.write(f"{i} {int(lab)}\n")
        labs = np.asarray(labels)
        fh.write("# summary\n")
        for g in sorted(set(int(x) for x in labs if x >= 0)):
            fh.write(f"# group {g} count {int(np.sum(labs == g))}\n")
        fh.write(f"# unclassified {int(np.sum(labs < 0))}\n")


def read_labels(path) -> np.ndarray:
    data = np.loadtxt(_require(path), comments="#").reshape(-1, 2)
    labels = np.full(int(data[:, 0].max()) + 1 if len(data) else 0, -1, dtype=int)
    labels[data[:, 0].astype(int)] = data[:, 1].astype(int)
    return labels
