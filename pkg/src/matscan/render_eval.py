"""Re-rendering from estimated reflectance tables and quantitative
evaluation against ground truth."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import brdf_table
from .brdf_table import BrdfTable, cell_center, lookup_arrays
from .geometry import (LedRig, PinholeCamera, half_diff_angle_arrays,
                       interpolate_trajectory, project_points)
from .simulator import IrObservations, eval_ground_truth_brdf, vignette

LAMBERTIAN_FALLBACK = 0.3  # scalar reflectance for unclassified vertices


def scalar_reflectance(rgb: np.ndarray) -> np.ndarray:
    """IR-band reflectance from an rgb table value; colors are unit vectors,
    so the Euclidean norm recovers the scalar factor."""
    return np.linalg.norm(np.asarray(rgb, dtype=float), axis=-1)


def render_material_sphere(table: BrdfTable, light_direction, resolution: int = 128):
    """Orthographic sphere under a directional light, viewer along +z.
    Returns an (res, res, 3) image in [0, 1], background black."""
    l = np.asarray(light_direction, dtype=float)
    l = l / np.linalg.norm(l)
    xs = (np.arange(resolution) + 0.5) / resolution * 2.0 - 1.0
    x, y = np.meshgrid(xs, xs, indexing="xy")
    r2 = x * x + y * y
    inside = r2 <= 1.0
    img = np.zeros((resolution, resolution, 3))
    nz = np.sqrt(np.clip(1.0 - r2[inside], 0.0, 1.0))
    n = np.stack([x[inside], y[inside], nz], axis=1)
    ndotl = n @ l
    lit = ndotl > 1e-6
    wo = np.tile(np.array([0.0, 0.0, 1.0]), (int(lit.sum()), 1))
    wi = np.tile(l, (int(lit.sum()), 1))
    th, td = half_diff_angle_arrays(n[lit], wi, wo)
    vals = lookup_arrays(table, th, td) * ndotl[lit, None]
    shaded = np.zeros((len(n), 3))
    shaded[lit] = vals
    img[inside] = np.clip(shaded, 0.0, 1.0)
    return img


def rerender_intensities(ir: IrObservations, scene, labels: np.ndarray,
                         material_tables: list, trajectory, rig: LedRig,
                         camera: PinholeCamera) -> np.ndarray:
    """Model intensity for every observation row, using the estimated
    per-material completed tables (Lambertian fallback for label -1)."""
    out = np.zeros(len(ir))
    order = np.argsort(ir.frame_time, kind="stable")
    bounds = np.nonzero(np.diff(ir.frame_time[order]))[0] + 1
    for rows in np.split(order, bounds):
        if len(rows) == 0:
            continue
        pose = interpolate_trajectory(trajectory, float(ir.frame_time[rows[0]]))
        vids = ir.vertex_id[rows]
        pos = scene.positions[vids]
        nrm = scene.normals[vids]
        leds = ir.led_index[rows]
        led_world = pose.transform(rig.positions[leds])
        to_led = led_world - pos
        d = np.linalg.norm(to_led, axis=1)
        l = to_led / d[:, None]
        ndotl = np.einsum("ij,ij->i", nrm, l)
        to_cam = pose.translation - pos
        wo = to_cam / np.linalg.norm(to_cam, axis=1, keepdims=True)
        front = (ndotl > 1e-6) & (np.einsum("ij,ij->i", nrm, wo) > 1e-6)
        if not front.any():
            continue
        th, td = half_diff_angle_arrays(nrm[front], l[front], wo[front])
        f = np.full(int(front.sum()), LAMBERTIAN_FALLBACK)
        lab = labels[vids[front]]
        for gi, table in enumerate(material_tables):
            sel = lab == gi
            if sel.any():
                f[sel] = scalar_reflectance(lookup_arrays(table, th[sel], td[sel]))
        vig = vignette((ir.pixel[rows, 0][front], ir.pixel[rows, 1][front]), camera)
        vals = vig * f * ndotl[front] * rig.brightness[leds[front]] / d[front]**2
        out[rows[front]] = vals
    return out


def rerender_ir_frame(scene, labels, material_tables, trajectory, frame_time: float,
                      led_index: int, rig: LedRig, camera: PinholeCamera,
                      exposure: float = 1.0) -> np.ndarray:
    """Point-splat IR frame: per visible vertex the image formation model with
    the estimated reflectance, written to the nearest pixel (max blend).
    Returns (height, width, 3) grayscale in [0, 1]."""
    pose = interpolate_trajectory(trajectory, frame_time)
    pixels, valid = project_points(camera, pose, scene.positions)
    idx = np.nonzero(valid)[0]
    img = np.zeros((camera.height, camera.width, 3))
    if len(idx) == 0:
        return img
    ir = IrObservations(
        vertex_id=idx,
        frame_time=np.full(len(idx), frame_time),
        led_index=np.full(len(idx), led_index),
        intensity=np.zeros(len(idx)),
        pixel=pixels[idx],
    )
    vals = rerender_intensities(ir, scene, labels, material_tables, trajectory,
                                rig, camera) * exposure
    px = np.clip(pixels[idx, 0].astype(int), 0, camera.width - 1)
    py = np.clip(pixels[idx, 1].astype(int), 0, camera.height - 1)
    gray = np.zeros((camera.height, camera.width))
    np.maximum.at(gray, (py, px), vals)
    img[:, :, 0] = gray
    img[:, :, 1] = img[:, :, 0]
    img[:, :, 2] = img[:, :, 0]
    return np.clip(img, 0.0, 1.0)


@dataclass
class EvalReport:
    group_counts: list
    purity: float
    classified_fraction: float
    brdf_rmse_per_material: list
    matched_labels: dict  # estimated group index -> ground truth material id
    purity_vacuous: bool = False

    def to_text(self) -> str:
        lines = [
            "group_counts " + " ".join(str(c) for c in self.group_counts),
            f"purity {self.purity:.6f}",
            f"purity_vacuous {int(self.purity_vacuous)}",
            f"classified_fraction {self.classified_fraction:.6f}",
            "brdf_rmse " + " ".join(f"{r:.6g}" for r in self.brdf_rmse_per_material),
            "matched_labels " + " ".join(f"{k}:{v}" for k, v in
                                         sorted(self.matched_labels.items())),
        ]
        return "\n".join(lines) + "\n"


def greedy_match(groups: list, gt_labels: np.ndarray) -> dict:
    """Estimated group index -> ground-truth label by repeated maximum
    overlap. Deterministic; ties resolve to the lowest pair."""
    overlaps = {}
    gt_ids = sorted(set(int(m) for m in np.unique(gt_labels)))
    for gi, g in enumerate(groups):
        ids = np.fromiter(g, dtype=int, count=len(g))
        for m in gt_ids:
            overlaps[(gi, m)] = int(np.sum(gt_labels[ids] == m))
    matched = {}
    used_gt = set()
    order = sorted(overlaps.items(), key=lambda kv: (-kv[1], kv[0]))
    for (gi, m), ov in order:
        if gi in matched or m in used_gt or ov == 0:
            continue
        matched[gi] = m
        used_gt.add(m)
    return matched


def evaluate(groups_obj, gt_labels: np.ndarray, estimated_tables: list,
             truth_materials: list) -> EvalReport:
    """Greedy-matched purity, classified fraction and per-material RMSE of
    measured table cells against the ground-truth reflectance."""
    groups = groups_obj.groups
    gt_labels = np.asarray(gt_labels, dtype=int)
    sampled_total = sum(len(g) for g in groups) + len(groups_obj.unclassified)
    classified_total = sum(len(g) for g in groups)
    matched = greedy_match(groups, gt_labels)

    if classified_total == 0:
        purity = 1.0
        vacuous = True
    else:
        vacuous = False
        correct = 0
        for gi, g in enumerate(groups):
            if gi not in matched:
                continue
            ids = np.fromiter(g, dtype=int, count=len(g))
            correct += int(np.sum(gt_labels[ids] == matched[gi]))
        purity = correct / classified_total

    rmses = []
    for gi, table in enumerate(estimated_tables):
        if gi not in matched:
            rmses.append(float("nan"))
            continue
        mat = truth_materials[matched[gi]]
        errs = []
        for (h, d), mean, count in table.cells():
            if count == 0:
                continue  # synthetic cells are not measurements
            th, td = cell_center(h, d)
            truth = mat.color * eval_ground_truth_brdf(mat, th, td)
            errs.append(np.sum((mean - truth) ** 2))
        rmses.append(float(np.sqrt(np.mean(errs))) if errs else float("nan"))

    return EvalReport(
        group_counts=[len(g) for g in groups],
        purity=purity,
        classified_fraction=classified_total / sampled_total if sampled_total else 0.0,
        brdf_rmse_per_material=rmses,
        matched_labels=matched,
        purity_vacuous=vacuous,
    )


def table_rmse(table: BrdfTable, material, color=None) -> float:
    """RMSE of a table's measured cells against the analytic ground truth."""
    if color is None:
        color = material.color
    errs = []
    for (h, d), mean, count in table.cells():
        if count == 0:
            continue
        th, td = cell_center(h, d)
        truth = np.asarray(color) * eval_ground_truth_brdf(material, th, td)
        errs.append(np.sum((mean - truth) ** 2))
    if not errs:
        return float("nan")
    return float(np.sqrt(np.mean(errs)))


def write_ppm(path, image: np.ndarray, gamma: float = 1.0 / 2.2) -> None:
    """Binary PPM (P6, maxval 255); gamma applied at write time."""
    img = np.clip(np.asarray(image, dtype=float), 0.0, 1.0) ** gamma
    data = (img * 255.0 + 0.5).astype(np.uint8)
    h, w = data.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode())
        fh.write(data.tobytes())


def read_ppm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.readline().strip()
        if magic != b"P6":
            raise ValueError("not a P6 PPM file")
        dims = fh.readline().split()
        w, h = int(dims[0]), int(dims[1])
        fh.readline()  # maxval
        data = np.frombuffer(fh.read(w * h * 3), dtype=np.uint8)
    return data.reshape(h, w, 3).astype(float) / 255.0
