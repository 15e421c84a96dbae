"""Inverse pipeline: per-vertex normalized color, inversion of the image
formation model to scalar reflectance samples, and per-vertex table
accumulation."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import brdf_table
from .brdf_table import N_D, BrdfTable
from .geometry import (LedRig, PinholeCamera, Pose, TimedPose,
                       half_diff_angle_arrays, half_diff_angles,
                       interpolate_trajectory)
from .simulator import IrObservations, RgbObservations, vignette

GRAZING_DEG = 60.0
COS_GRAZING = np.cos(np.deg2rad(GRAZING_DEG))
VIGNETTE_FLOOR = 0.05
MIN_COLOR_SAMPLES = 3


class Rejection(enum.Enum):
    SATURATED = "saturated"
    SHADOWED = "shadowed"
    GRAZING_IN = "grazing-in"
    GRAZING_OUT = "grazing-out"
    VIGNETTE_FLOOR = "vignette-floor"


@dataclass
class VertexReflectanceRecord:
    vertex_id: int
    normalized_color: np.ndarray  # (3,) unit
    table: BrdfTable


def estimate_vertex_color(rgb_samples, omega_out_deg, saturation_level: float):
    """Per-channel median of unsaturated, non-grazing samples, normalized to
    unit Euclidean norm. Returns None with fewer than 3 usable samples."""
    rgb = np.asarray(rgb_samples, dtype=float).reshape(-1, 3)
    ang = np.asarray(omega_out_deg, dtype=float).reshape(-1)
    keep = (ang <= GRAZING_DEG) & np.all(rgb < saturation_level, axis=1)
    if keep.sum() < MIN_COLOR_SAMPLES:
        return None
    med = np.median(rgb[keep], axis=0)
    norm = np.linalg.norm(med)
    if norm < 1e-12:
        return None
    return med / norm


def estimate_colors(rgb_obs: RgbObservations, saturation_level: float) -> dict:
    """Vertex id -> unit color for every vertex with enough usable samples."""
    order = np.argsort(rgb_obs.vertex_id, kind="stable")
    vids = rgb_obs.vertex_id[order]
    rgb = rgb_obs.rgb[order]
    ang = rgb_obs.omega_out_angle[order]
    colors = {}
    bounds = np.nonzero(np.diff(vids))[0] + 1
    for chunk_v, chunk_rgb, chunk_ang in zip(
            np.split(vids, bounds), np.split(rgb, bounds), np.split(ang, bounds)):
        c = estimate_vertex_color(chunk_rgb, chunk_ang, saturation_level)
        if c is not None:
            colors[int(chunk_v[0])] = c
    return colors


def invert_image_formation(intensity: float, pixel, vertex_pos, vertex_normal,
                           camera_pose: Pose, led_position, led_brightness: float,
                           camera: PinholeCamera, saturation_level: float):
    """Invert one observation to (HalfDiffAngles, scalar reflectance) or a
    Rejection. `led_position` is in world coordinates."""
    if intensity >= saturation_level:
        return Rejection.SATURATED
    if intensity <= 0.0:
        return Rejection.SHADOWED
    p = np.asarray(vertex_pos, dtype=float)
    n = np.asarray(vertex_normal, dtype=float)
    to_led = np.asarray(led_position, dtype=float) - p
    d = np.linalg.norm(to_led)
    l = to_led / d
    ndotl = float(n @ l)
    if ndotl < COS_GRAZING:
        return Rejection.GRAZING_IN
    to_cam = camera_pose.translation - p
    wo = to_cam / np.linalg.norm(to_cam)
    if float(n @ wo) < COS_GRAZING:
        return Rejection.GRAZING_OUT
    vig = float(vignette(pixel, camera))
    if vig < VIGNETTE_FLOOR:
        return Rejection.VIGNETTE_FLOOR
    angles = half_diff_angles(n, l, wo)
    f = intensity / (vig * ndotl * led_brightness / d**2)
    return angles, f


def invert_observation_arrays(ir: IrObservations, scene, trajectory, rig: LedRig,
                              camera: PinholeCamera, saturation_level: float):
    """Vectorized inversion of a whole observation set.

    Returns (accepted mask, theta_h, theta_d, f, rejection counts dict).
    Angle/f entries are only meaningful where accepted."""
    n = len(ir)
    th = np.zeros(n)
    td = np.zeros(n)
    f = np.zeros(n)
    reason = np.full(n, "", dtype=object)

    order = np.argsort(ir.frame_time, kind="stable")
    sorted_times = ir.frame_time[order]
    bounds = np.nonzero(np.diff(sorted_times))[0] + 1
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
        ndotv = np.einsum("ij,ij->i", nrm, wo)
        vig = vignette((ir.pixel[rows, 0], ir.pixel[rows, 1]), camera)
        inten = ir.intensity[rows]

        rej = np.full(len(rows), "", dtype=object)
        rej[(rej == "") & (inten >= saturation_level)] = Rejection.SATURATED.value
        rej[(rej == "") & (inten <= 0.0)] = Rejection.SHADOWED.value
        rej[(rej == "") & (ndotl < COS_GRAZING)] = Rejection.GRAZING_IN.value
        rej[(rej == "") & (ndotv < COS_GRAZING)] = Rejection.GRAZING_OUT.value
        rej[(rej == "") & (vig < VIGNETTE_FLOOR)] = Rejection.VIGNETTE_FLOOR.value
        ok = rej == ""
        if ok.any():
            a, b = half_diff_angle_arrays(nrm[ok], l[ok], wo[ok])
            th[rows[ok]] = a
            td[rows[ok]] = b
            f[rows[ok]] = inten[ok] / (vig[ok] * ndotl[ok]
                                       * rig.brightness[leds[ok]] / d[ok]**2)
        reason[rows] = rej

    accepted = reason == ""
    counts = {r.value: int(np.sum(reason == r.value)) for r in Rejection}
    counts["accepted"] = int(accepted.sum())
    return accepted, th, td, f, counts


def accumulate_vertex_tables(ir: IrObservations, scene, trajectory, rig: LedRig,
                             colors: dict, camera: PinholeCamera,
                             saturation_level: float):
    """Build one reflectance record (unit color + sparse table) per vertex
    that has a color estimate and at least one accepted inversion.

    Returns (records list, summary dict of acceptance/rejection counts)."""
    accepted, th, td, f, counts = invert_observation_arrays(
        ir, scene, trajectory, rig, camera, saturation_level)

    vids = ir.vertex_id[accepted]
    color_known = np.zeros(len(scene), dtype=bool)
    color_known[list(colors.keys())] = True
    has_color = color_known[vids]
    counts["skipped_no_color"] = int(len(vids) - has_color.sum())
    vids = vids[has_color]
    hb, db = brdf_table.bin_arrays(th[accepted][has_color], td[accepted][has_color])
    fs = f[accepted][has_color]

    color_arr = np.zeros((len(scene), 3))
    for v, c in colors.items():
        color_arr[v] = c
    samples = color_arr[vids] * fs[:, None]

    key = vids.astype(np.int64) * (N_D * brdf_table.N_H) + hb * N_D + db
    uniq, inverse = np.unique(key, return_inverse=True)
    sums = np.zeros((len(uniq), 3))
    np.add.at(sums, inverse, samples)
    cnt = np.bincount(inverse, minlength=len(uniq))
    means = sums / cnt[:, None]

    u_vid = (uniq // (N_D * brdf_table.N_H)).astype(int)
    u_cell = uniq % (N_D * brdf_table.N_H)
    u_h = (u_cell // N_D).astype(int)
    u_d = (u_cell % N_D).astype(int)

    records = []
    bounds = np.nonzero(np.diff(u_vid))[0] + 1
    for rows in np.split(np.arange(len(uniq)), bounds):
        if len(rows) == 0:
            continue
        v = int(u_vid[rows[0]])
        table = BrdfTable.from_cells(
            np.stack([u_h[rows], u_d[rows]], axis=1), means[rows], cnt[rows])
        records.append(VertexReflectanceRecord(v, color_arr[v], table))
    return records, counts
