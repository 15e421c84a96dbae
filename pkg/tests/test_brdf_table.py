"""Binning, accumulation, merging, completion and lookup of the 45x48 table."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from matscan import brdf_table
from matscan.brdf_table import (D_WIDTH, H_WIDTH, N_CELLS, N_D, N_H, BrdfTable,
                                bin_angles, bin_arrays, cell_center, complete,
                                dense_values, from_text, lookup, lookup_arrays,
                                merge, to_text)
from matscan.geometry import HalfDiffAngles

rgb = st.tuples(st.floats(0.0, 2.0), st.floats(0.0, 2.0), st.floats(0.0, 2.0))


class TestBinning:
    def test_grid_shape(self):
        assert N_H == 45 and N_D == 48 and N_CELLS == 2160
        assert H_WIDTH == pytest.approx(2.0)
        assert D_WIDTH == pytest.approx(1.875)

    def test_bin_of_center_is_identity_everywhere(self):
        for h in range(N_H):
            for d in range(N_D):
                th, td = cell_center(h, d)
                assert bin_angles(HalfDiffAngles(th, td)) == (h, d)

    def test_edge_angles_clamped_into_grid(self):
        assert bin_angles(HalfDiffAngles(90.0, 90.0)) == (N_H - 1, N_D - 1)
        assert bin_angles(HalfDiffAngles(0.0, 0.0)) == (0, 0)

    def test_bin_arrays_matches_scalar(self):
        rng = np.random.default_rng(1)
        th = rng.uniform(0, 90, 500)
        td = rng.uniform(0, 90, 500)
        hs, ds = bin_arrays(th, td)
        for i in range(500):
            assert (hs[i], ds[i]) == bin_angles(HalfDiffAngles(th[i], td[i]))


class TestAccumulation:
    def test_insert_keeps_running_mean_and_count(self):
        t = BrdfTable()
        samples = [np.array([1.0, 2.0, 3.0]), np.array([3.0, 2.0, 1.0]),
                   np.array([2.0, 2.0, 2.0])]
        for s in samples:
            t.insert((4, 7), s)
        mean, count = t.get((4, 7))
        assert count == 3
        np.testing.assert_allclose(mean, np.mean(samples, axis=0), atol=1e-12)

    @given(st.lists(rgb, min_size=1, max_size=20), st.integers(0, 2**32 - 1))
    @settings(max_examples=40)
    def test_insert_order_independent(self, samples, seed):
        a = BrdfTable()
        b = BrdfTable()
        shuffled = list(samples)
        np.random.default_rng(seed).shuffle(shuffled)
        for s in samples:
            a.insert((0, 0), np.array(s))
        for s in shuffled:
            b.insert((0, 0), np.array(s))
        np.testing.assert_allclose(a.get((0, 0))[0], b.get((0, 0))[0], atol=1e-9)
        assert a.get((0, 0))[1] == b.get((0, 0))[1]

    def test_measured_count_ignores_synthetic(self):
        t = BrdfTable.from_cells([(0, 0), (1, 1)], [[1, 1, 1], [2, 2, 2]], [5, 0])
        assert len(t) == 2
        assert t.measured_count == 1


class TestMerge:
    def test_count_weighted_mean(self):
        a = BrdfTable.from_cells([(3, 3)], [[1.0, 0.0, 0.0]], [1])
        b = BrdfTable.from_cells([(3, 3)], [[4.0, 0.0, 0.0]], [3])
        m = merge([a, b])
        mean, count = m.get((3, 3))
        assert count == 4
        assert mean[0] == pytest.approx((1.0 + 3 * 4.0) / 4)

    def test_union_of_cells(self):
        a = BrdfTable.from_cells([(0, 0)], [[1, 1, 1]], [2])
        b = BrdfTable.from_cells([(1, 0)], [[2, 2, 2]], [2])
        m = merge([a, b])
        assert (0, 0) in m and (1, 0) in m

    def test_synthetic_cells_not_merged(self):
        a = BrdfTable.from_cells([(0, 0)], [[1, 1, 1]], [0])
        b = BrdfTable.from_cells([(0, 0)], [[5, 5, 5]], [2])
        m = merge([a, b])
        mean, count = m.get((0, 0))
        assert count == 2
        assert mean[0] == pytest.approx(5.0)

    def test_merge_equals_pooled_accumulation(self):
        rng = np.random.default_rng(2)
        pooled = BrdfTable()
        parts = [BrdfTable() for _ in range(4)]
        for i in range(200):
            s = rng.uniform(0, 1, 3)
            cell = (int(rng.integers(0, 3)), int(rng.integers(0, 3)))
            pooled.insert(cell, s)
            parts[i % 4].insert(cell, s)
        m = merge(parts)
        for (h, d), mean, count in pooled.cells():
            mm, mc = m.get((h, d))
            assert mc == count
            np.testing.assert_allclose(mm, mean, atol=1e-9)


class TestCompletion:
    def test_constant_rows_fill_exactly(self):
        t = BrdfTable()
        val = np.array([0.4, 0.5, 0.6])
        for h in (2, 30):
            for d in (1, 40):
                t.insert((h, d), val)
        c = complete(t)
        assert c.is_complete
        for h in range(N_H):
            for d in range(N_D):
                mean, count = c.get((h, d))
                np.testing.assert_allclose(mean, val, atol=1e-12)
                if (h, d) not in [(2, 1), (2, 40), (30, 1), (30, 40)]:
                    assert count == 0  # synthetic

    def test_interpolates_along_h(self):
        t = BrdfTable()
        t.insert((0, 0), np.array([0.0, 0.0, 0.0]))
        t.insert((4, 0), np.array([4.0, 4.0, 4.0]))
        c = complete(t)
        mean, count = c.get((2, 0))
        assert count == 0
        np.testing.assert_allclose(mean, [2.0, 2.0, 2.0], atol=1e-12)

    def test_needs_at_least_two_measured_cells(self):
        t = BrdfTable()
        t.insert((0, 0), np.array([1.0, 1.0, 1.0]))
        with pytest.raises(ValueError):
            complete(t)

    def test_preserves_measured_cells(self):
        rng = np.random.default_rng(3)
        t = BrdfTable()
        cells = {(int(rng.integers(0, N_H)), int(rng.integers(0, N_D)))
                 for _ in range(40)}
        for cell in cells:
            t.insert(cell, rng.uniform(0, 1, 3))
        c = complete(t)
        for cell in cells:
            np.testing.assert_allclose(c.get(cell)[0], t.get(cell)[0], atol=1e-12)
            assert c.get(cell)[1] == t.get(cell)[1]


class TestLookup:
    def test_constant_table_lookup_constant(self):
        t = BrdfTable()
        val = np.array([0.3, 0.6, 0.9])
        t.insert((0, 0), val)
        t.insert((N_H - 1, N_D - 1), val)
        c = complete(t)
        rng = np.random.default_rng(4)
        th = rng.uniform(0, 90, 200)
        td = rng.uniform(0, 90, 200)
        out = lookup_arrays(c, th, td)
        np.testing.assert_allclose(out, np.tile(val, (200, 1)), atol=1e-12)

    def test_lookup_at_center_returns_cell_value(self):
        rng = np.random.default_rng(5)
        t = BrdfTable()
        for h in range(N_H):
            for d in range(N_D):
                t.insert((h, d), rng.uniform(0, 1, 3))
        for _ in range(50):
            h = int(rng.integers(0, N_H))
            d = int(rng.integers(0, N_D))
            th, td = cell_center(h, d)
            np.testing.assert_allclose(lookup(t, HalfDiffAngles(th, td)),
                                       t.get((h, d))[0], atol=1e-12)

    def test_lookup_requires_complete_table(self):
        t = BrdfTable()
        t.insert((0, 0), np.array([1.0, 1.0, 1.0]))
        with pytest.raises(ValueError):
            lookup(t, HalfDiffAngles(1.0, 1.0))

    def test_dense_values_shape(self):
        t = BrdfTable()
        t.insert((0, 0), np.array([1.0, 1.0, 1.0]))
        t.insert((44, 47), np.array([1.0, 1.0, 1.0]))
        assert dense_values(complete(t)).shape == (N_H, N_D, 3)


class TestSerialization:
    def test_text_round_trip(self):
        rng = np.random.default_rng(6)
        t = BrdfTable()
        for _ in range(30):
            cell = (int(rng.integers(0, N_H)), int(rng.integers(0, N_D)))
            for _ in range(int(rng.integers(1, 4))):
                t.insert(cell, rng.uniform(0, 2, 3))
        back = from_text(to_text(t))
        assert len(back) == len(t)
        for (h, d), mean, count in t.cells():
            bmean, bcount = back.get((h, d))
            assert bcount == count
            np.testing.assert_allclose(bmean, mean, rtol=1e-15)

    def test_bad_header_rejected(self):
        with pytest.raises(ValueError):
            from_text("bogus header\n")
