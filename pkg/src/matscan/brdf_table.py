"""45x48 bivariate reflectance table: binning, running-mean accumulation,
merging, linear completion and continuous lookup.

Cells filled by `complete` carry count 0 and are flagged synthetic: they are
for rendering only, not measurements.
"""

from __future__ import annotations

import numpy as np

from .geometry import HalfDiffAngles

N_H = 45
N_D = 48
H_WIDTH = 90.0 / N_H  # 2.0 degrees
D_WIDTH = 90.0 / N_D  # 1.875 degrees
N_CELLS = N_H * N_D

SERIAL_HEADER = f"brdftable v1 {N_H} {N_D}"


def bin_angles(angles: HalfDiffAngles) -> tuple[int, int]:
    """Map an angle pair to its (h_bin, d_bin) cell index."""
    h = min(int(angles.theta_h / H_WIDTH), N_H - 1)
    d = min(int(angles.theta_d / D_WIDTH), N_D - 1)
    return h, d


def bin_arrays(theta_h: np.ndarray, theta_d: np.ndarray):
    """Vectorized binning; returns (h_bin, d_bin) int arrays."""
    h = np.minimum((theta_h / H_WIDTH).astype(int), N_H - 1)
    d = np.minimum((theta_d / D_WIDTH).astype(int), N_D - 1)
    return h, d


def cell_center(h_bin: int, d_bin: int) -> tuple[float, float]:
    return (h_bin + 0.5) * H_WIDTH, (d_bin + 0.5) * D_WIDTH


class BrdfTable:
    """Sparse 45x48 grid of (running-mean rgb, sample count) cells."""

    def __init__(self):
        # (h, d) -> [r, g, b, count]; count 0 marks a synthetic cell
        self._cells: dict[tuple[int, int], list] = {}
        self._dense = None  # lookup cache, built on demand when complete

    @classmethod
    def from_cells(cls, indices, means, counts) -> "BrdfTable":
        """Build from parallel arrays: indices (k,2) int, means (k,3), counts (k,)."""
        t = cls()
        for (h, d), m, c in zip(np.asarray(indices), np.asarray(means, dtype=float),
                                np.asarray(counts)):
            t._cells[(int(h), int(d))] = [float(m[0]), float(m[1]), float(m[2]), int(c)]
        return t

    def __len__(self) -> int:
        return len(self._cells)

    def __contains__(self, index) -> bool:
        return tuple(index) in self._cells

    def cells(self):
        """Iterate ((h_bin, d_bin), mean (3,), count)."""
        for idx, cell in self._cells.items():
            yield idx, np.array(cell[:3]), cell[3]

    def get(self, index):
        cell = self._cells.get(tuple(index))
        if cell is None:
            return None
        return np.array(cell[:3]), cell[3]

    def insert(self, index, sample) -> None:
        """Streaming mean update of one cell with an rgb sample."""
        sample = np.asarray(sample, dtype=float)
        if sample.shape != (3,) or np.any(sample < 0) or not np.all(np.isfinite(sample)):
            raise ValueError("sample must be a finite nonnegative 3-vector")
        idx = (int(index[0]), int(index[1]))
        if not (0 <= idx[0] < N_H and 0 <= idx[1] < N_D):
            raise ValueError(f"cell index out of range: {idx}")
        cell = self._cells.get(idx)
        if cell is None or cell[3] == 0:
            self._cells[idx] = [sample[0], sample[1], sample[2], 1]
        else:
            cell[3] += 1
            inv = 1.0 / cell[3]
            cell[0] += (sample[0] - cell[0]) * inv
            cell[1] += (sample[1] - cell[1]) * inv
            cell[2] += (sample[2] - cell[2]) * inv
        self._dense = None

    @property
    def measured_count(self) -> int:
        return sum(1 for c in self._cells.values() if c[3] > 0)

    @property
    def is_complete(self) -> bool:
        return len(self._cells) == N_CELLS


def merge(tables: list[BrdfTable]) -> BrdfTable:
    """Count-weighted union of measured cells; synthetic cells contribute nothing."""
    if not tables:
        raise ValueError("merge needs at least one table")
    out = BrdfTable()
    for t in tables:
        for idx, mean, count in t.cells():
            if count == 0:
                continue
            cell = out._cells.get(idx)
            if cell is None:
                out._cells[idx] = [mean[0], mean[1], mean[2], count]
            else:
                total = cell[3] + count
                w = count / total
                cell[0] += (mean[0] - cell[0]) * w
                cell[1] += (mean[1] - cell[1]) * w
                cell[2] += (mean[2] - cell[2]) * w
                cell[3] = total
    return out


def complete(table: BrdfTable) -> BrdfTable:
    """Fill every absent cell by 1D linear interpolation, first along theta_h
    within each d_bin line (constant beyond the ends), then along theta_d for
    lines with no data at all. Filled cells get count 0."""
    if table.measured_count < 2:
        raise ValueError("completion needs at least 2 measured cells")
    values = np.zeros((N_H, N_D, 3))
    present = np.zeros((N_H, N_D), dtype=bool)
    counts = np.zeros((N_H, N_D), dtype=int)
    for (h, d), mean, count in table.cells():
        values[h, d] = mean
        present[h, d] = True
        counts[h, d] = count

    filled = values.copy()
    line_has_data = present.any(axis=0)
    hs = np.arange(N_H, dtype=float)
    for d in range(N_D):
        if not line_has_data[d]:
            continue
        xs = np.nonzero(present[:, d])[0]
        for c in range(3):
            filled[:, d, c] = np.interp(hs, xs.astype(float), values[xs, d, c])
    ds = np.arange(N_D, dtype=float)
    data_lines = np.nonzero(line_has_data)[0]
    for c in range(3):
        for h in range(N_H):
            empty = ~line_has_data
            filled[h, empty, c] = np.interp(ds[empty], data_lines.astype(float),
                                            filled[h, data_lines, c])

    out = BrdfTable()
    for h in range(N_H):
        for d in range(N_D):
            v = filled[h, d]
            out._cells[(h, d)] = [v[0], v[1], v[2], int(counts[h, d])]
    return out


def dense_values(table: BrdfTable) -> np.ndarray:
    """(45, 48, 3) array of cell values; requires all cells present."""
    if not table.is_complete:
        raise ValueError("table is not complete")
    if table._dense is None:
        arr = np.zeros((N_H, N_D, 3))
        for (h, d), mean, _ in table.cells():
            arr[h, d] = mean
        table._dense = arr
    return table._dense


def lookup(table: BrdfTable, angles: HalfDiffAngles) -> np.ndarray:
    """Bilinear interpolation at cell centers, clamped at the table edges."""
    return lookup_arrays(table, np.array([angles.theta_h]),
                         np.array([angles.theta_d]))[0]


def lookup_arrays(table: BrdfTable, theta_h: np.ndarray, theta_d: np.ndarray):
    arr = dense_values(table)
    gh = np.clip(np.asarray(theta_h, dtype=float) / H_WIDTH - 0.5, 0.0, N_H - 1.0)
    gd = np.clip(np.asarray(theta_d, dtype=float) / D_WIDTH - 0.5, 0.0, N_D - 1.0)
    h0 = np.minimum(gh.astype(int), N_H - 2)
    d0 = np.minimum(gd.astype(int), N_D - 2)
    fh = (gh - h0)[:, None]
    fd = (gd - d0)[:, None]
    v00 = arr[h0, d0]
    v10 = arr[h0 + 1, d0]
    v01 = arr[h0, d0 + 1]
    v11 = arr[h0 + 1, d0 + 1]
    return (v00 * (1 - fh) * (1 - fd) + v10 * fh * (1 - fd)
            + v01 * (1 - fh) * fd + v11 * fh * fd)


def to_text(table: BrdfTable) -> str:
    """One line per present cell: `h_bin d_bin count r g b`."""
    lines = [SERIAL_HEADER]
    for (h, d) in sorted(table._cells):
        r, g, b, c = table._cells[(h, d)]
        lines.append(f"{h} {d} {c} {r:.17g} {g:.17g} {b:.17g}")
    return "\n".join(lines) + "\n"


def from_text(text: str) -> BrdfTable:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != SERIAL_HEADER:
        raise ValueError(f"bad table header, expected '{SERIAL_HEADER}'")
    t = BrdfTable()
    for ln in lines[1:]:
        parts = ln.split()
        h, d, c = int(parts[0]), int(parts[1]), int(parts[2])
        t._cells[(h, d)] = [float(parts[3]), float(parts[4]), float(parts[5]), c]
    return t
