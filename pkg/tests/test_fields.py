import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_grid
from gpnav.fields import (CompositeSequence, DistanceField, GridGeometry, OccupancyGrid,
                          brute_force_edt, build_composite_sequence, composite_min, compute_edt,
                          disc_field, export_field_csv, load_map, rasterize_disc, sample_field,
                          save_map)


def single_cell_grid(n=5, cell=(2, 2), cs=1.0):
    cells = np.zeros((n, n), bool)
    cells[cell[1], cell[0]] = True
    return OccupancyGrid(GridGeometry((0.0, 0.0), cs, n, n), cells)


class TestGeometry:
    def test_round_trip_inside(self):
        g = GridGeometry((0.05, -1.0), 0.1, 40, 30)
        for ix, iy in [(0, 0), (39, 29), (12, 7)]:
            assert g.world_to_cell(g.cell_to_world(ix, iy)) == (ix, iy)

    @given(st.floats(0.0, 3.95), st.floats(0.0, 2.95))
    def test_point_maps_to_nearest_center(self, x, y):
        g = GridGeometry((0.0, 0.0), 0.1, 40, 30)
        ix, iy = g.world_to_cell((x, y))
        c = g.cell_to_world(ix, iy)
        assert abs(c[0] - x) <= 0.05 + 1e-9 and abs(c[1] - y) <= 0.05 + 1e-9

    @pytest.mark.parametrize("kw", [dict(cell_size=0.0), dict(width=0), dict(height=0)])
    def test_invalid(self, kw):
        args = dict(origin=(0, 0), cell_size=1.0, width=2, height=2) | kw
        with pytest.raises(ValueError):
            GridGeometry(**args)

    def test_cells_shape_checked(self):
        with pytest.raises(ValueError):
            OccupancyGrid(GridGeometry((0, 0), 1.0, 3, 2), np.zeros((3, 2), bool))


class TestEDT:
    def test_single_cell_values(self):
        f = compute_edt(single_cell_grid())
        assert f.values[3, 2] == 1.0  # cell (2, 3)
        assert f.values[3, 3] == pytest.approx(math.sqrt(2), abs=1e-5)
        assert f.values[2, 2] == 0.0

    def test_all_occupied(self):
        g = OccupancyGrid(GridGeometry((0, 0), 1.0, 3, 3), np.ones((3, 3), bool))
        assert np.all(compute_edt(g).values == 0)

    def test_all_free_saturates_at_diagonal(self):
        geom = GridGeometry((0, 0), 0.5, 4, 3)
        f = compute_edt(OccupancyGrid.empty(geom))
        assert np.all(f.values == geom.diagonal)
        assert np.all(brute_force_edt(OccupancyGrid.empty(geom)).values == geom.diagonal)

    def test_cell_size_scales(self):
        a = compute_edt(single_cell_grid(cs=1.0)).values
        b = compute_edt(single_cell_grid(cs=0.25)).values
        assert np.allclose(b, 0.25 * a)

    def test_brute_force_radial(self):
        f = brute_force_edt(single_cell_grid(7, (3, 3)))
        rows, cols = np.indices((7, 7))
        assert np.allclose(f.values, np.hypot(rows - 3, cols - 3))

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_brute_force_bitwise(self, seed):
        grid = random_grid(np.random.default_rng(seed), 24, 17, 0.15, cell_size=0.1)
        assert np.array_equal(compute_edt(grid).values, brute_force_edt(grid).values)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 20), st.integers(2, 20), st.integers(0, 2**32 - 1),
           st.floats(0.01, 0.6))
    def test_properties(self, w, h, seed, density):
        grid = random_grid(np.random.default_rng(seed), w, h, density)
        f = compute_edt(grid)
        assert np.array_equal(f.values, brute_force_edt(grid).values)
        if grid.cells.any():
            assert np.array_equal(f.values == 0, grid.cells)
            # 1-Lipschitz between horizontal and vertical neighbours
            assert np.all(np.abs(np.diff(f.values, axis=0)) <= 1 + 1e-12)
            assert np.all(np.abs(np.diff(f.values, axis=1)) <= 1 + 1e-12)

    def test_output_read_only(self):
        f = compute_edt(single_cell_grid())
        with pytest.raises(ValueError):
            f.values[0, 0] = 1.0


class TestDiscPrimitive:
    def test_radius_point_three(self):
        prim = disc_field(0.3, 0.1, reach=0.8)
        h = prim.half
        assert prim.values[h, h] == 0.0
        rows, cols = np.indices(prim.values.shape)
        d = 0.1 * np.hypot(rows - h, cols - h)
        assert np.all(prim.values[d <= 0.3 + 1e-9] == 0)
        out = d > 0.3 + 1e-9
        assert np.all(np.abs(prim.values[out] - (d[out] - 0.3)) <= 0.1 + 1e-9)

    def test_window_covers_reach(self):
        prim = disc_field(0.3, 0.1, reach=0.8)
        assert prim.reach >= 0.8 + 0.2 - 1e-9
        assert prim.values.shape == (2 * prim.half + 1,) * 2

    def test_half_cell_radius_single_cell(self):
        geom = GridGeometry((0, 0), 0.1, 9, 9)
        mask = rasterize_disc(geom, (0.4, 0.4), 0.05)
        assert mask.sum() == 1 and mask[4, 4]
        tiny = disc_field(0.02, 0.1)
        assert (tiny.values == 0).sum() == 1

    def test_monotone_outside(self):
        prim = disc_field(0.5, 0.1)
        row = prim.values[prim.half, prim.half:]
        assert np.all(np.diff(row) >= 0)

    def test_invalid_radius(self):
        with pytest.raises(ValueError):
            disc_field(0.0, 0.1)

    def test_rasterize_clipped_at_border(self):
        geom = GridGeometry((0, 0), 0.1, 10, 10)
        mask = rasterize_disc(geom, (0.0, 0.0), 0.25)
        rows, cols = np.indices(geom.shape)
        assert np.array_equal(mask, rows ** 2 + cols ** 2 <= 2.5 ** 2 + 1e-9)
        assert not rasterize_disc(geom, (50.0, 50.0), 0.3).any()


def scene(rng, n_obs=2, radius=0.3, size=40):
    geom = GridGeometry((0.0, 0.0), 0.1, size, size)
    grid = random_grid(rng, size, size, 0.01, cell_size=0.1)
    grid = OccupancyGrid(geom, grid.cells)
    centers = [tuple(rng.uniform(0.0, 0.1 * (size - 1), 2)) for _ in range(n_obs)]
    return grid, centers


class TestComposite:
    def test_no_overlays_is_identity(self, rng):
        env = compute_edt(random_grid(rng, 20, 20, 0.1, 0.1))
        assert np.array_equal(composite_min(env, []).values, env.values)

    def test_constant_env(self):
        geom = GridGeometry((0, 0), 0.1, 60, 60)
        env = DistanceField(geom, np.full(geom.shape, 5.0))
        prim = disc_field(0.3, 0.1)
        out = composite_min(env, [(prim, (3.0, 3.0))])
        assert out.values[30, 30] == 0.0
        assert out.values[0, 0] == 5.0 and out.values[59, 59] == 5.0

    def test_matches_pointwise_oracle(self, rng):
        for _ in range(5):
            grid, centers = scene(rng, 3)
            env = compute_edt(grid)
            prim = disc_field(0.3, 0.1)
            out = composite_min(env, [(prim, c) for c in centers]).values
            oracle = env.values.copy()
            h = prim.half
            for c in centers:
                cx, cy = env.geometry.world_to_cell(c)
                for iy in range(grid.geometry.height):
                    for ix in range(grid.geometry.width):
                        u, v = ix - cx + h, iy - cy + h
                        if 0 <= u <= 2 * h and 0 <= v <= 2 * h:
                            oracle[iy, ix] = min(oracle[iy, ix], prim.values[v, u])
            assert np.array_equal(out, oracle)

    def test_algebra(self, rng):
        grid, centers = scene(rng, 3)
        env = compute_edt(grid)
        prim = disc_field(0.3, 0.1)
        ov = [(prim, c) for c in centers]
        a = composite_min(env, ov)
        assert np.array_equal(composite_min(env, ov[::-1]).values, a.values)
        assert np.array_equal(composite_min(composite_min(env, ov[:1]), ov[1:]).values, a.values)
        assert np.array_equal(composite_min(a, ov).values, a.values)
        assert np.all(a.values <= env.values)

    def test_sampling_commutes_with_min(self, rng):
        grid, centers = scene(rng, 2)
        env = compute_edt(grid)
        prim = disc_field(0.3, 0.1)
        both = composite_min(env, [(prim, c) for c in centers])
        singles = [composite_min(env, [(prim, c)]) for c in centers]
        for _ in range(20):
            iy, ix = rng.integers(0, 40, 2)
            assert both.values[iy, ix] == min(s.values[iy, ix] for s in singles)

    def test_close_to_full_recompute(self, rng):
        prim = disc_field(0.3, 0.1, reach=0.8)
        for _ in range(5):
            grid, centers = scene(rng, 2)
            env = compute_edt(grid)
            comp = composite_min(env, [(prim, c) for c in centers]).values
            full = compute_edt(grid.with_discs(centers, 0.3)).values
            sat = prim.reach
            assert np.all(np.abs(np.minimum(comp, sat) - np.minimum(full, sat)) <= 0.1 + 1e-9)

    def test_overlay_off_grid_is_clipped(self):
        env = DistanceField(GridGeometry((0, 0), 0.1, 20, 20), np.full((20, 20), 9.0))
        prim = disc_field(0.3, 0.1)
        out = composite_min(env, [(prim, (-0.5, 1.0))])
        assert out.values[10, 0] == pytest.approx(0.2)
        assert np.array_equal(composite_min(env, [(prim, (50.0, 50.0))]).values, env.values)

    def test_cell_size_mismatch(self):
        env = DistanceField(GridGeometry((0, 0), 0.1, 5, 5), np.ones((5, 5)))
        with pytest.raises(ValueError):
            composite_min(env, [(disc_field(0.3, 0.2), (0.2, 0.2))])


class TestSequence:
    def setup_method(self):
        geom = GridGeometry((0, 0), 0.1, 50, 50)
        self.env = compute_edt(OccupancyGrid.empty(geom).with_discs([(0.5, 0.5)], 0.2))
        self.prim = disc_field(0.3, 0.1)

    def test_stationary_identical(self):
        seq = build_composite_sequence(self.env, [[(2.5, 2.5)] * 4], self.prim, 4, 0.5)
        assert len(seq) == 4
        assert all(np.array_equal(f.values, seq[0].values) for f in seq.fields)

    def test_entries_match_independent_calls(self):
        traj = [(1.0 + 0.3 * i, 2.0) for i in range(5)]
        seq = build_composite_sequence(self.env, [traj], self.prim, 5, 0.5, t0=2.0)
        for i, p in enumerate(traj):
            assert np.array_equal(seq[i].values, composite_min(self.env, [(self.prim, p)]).values)
        assert seq.t0 == 2.0 and seq.dt == 0.5

    def test_padding_and_at_index(self):
        traj = [(1.0, 2.0), (1.5, 2.0)]
        seq = build_composite_sequence(self.env, [traj], self.prim, 20, 0.5)
        assert len(seq) == 20  # 10 s of fields at dt = 0.5
        assert np.array_equal(seq[19].values, seq[1].values)
        assert seq.at_index(50) is seq[19]

    def test_zero_length(self):
        seq = build_composite_sequence(self.env, [[(1.0, 1.0)]], self.prim, 0, 0.5)
        assert len(seq) == 0

    def test_geometry_shared(self):
        other = DistanceField(GridGeometry((0, 0), 0.1, 3, 3), np.ones((3, 3)))
        with pytest.raises(ValueError):
            CompositeSequence((self.env, other), 0.5)


class TestSampling:
    def test_cell_center(self, rng):
        f = compute_edt(random_grid(rng, 10, 8, 0.2, 0.5, origin=(1.0, -2.0)))
        for ix, iy in [(0, 0), (3, 5), (9, 7)]:
            d, _, oob = sample_field(f, f.geometry.cell_to_world(ix, iy))
            assert d == pytest.approx(f.values[iy, ix]) and not oob

    def test_constant_field(self):
        f = DistanceField(GridGeometry((0, 0), 0.1, 5, 5), np.full((5, 5), 2.0))
        d, g, _ = sample_field(f, (0.23, 0.17))
        assert d == 2.0 and np.all(g == 0)

    def test_gradient_finite_differences(self, rng):
        f = compute_edt(random_grid(rng, 30, 30, 0.05, 0.1))
        h = 1e-4
        checked = 0
        while checked < 50:
            p = rng.uniform(0.2, 2.7, 2)
            frac = (p / 0.1) % 1.0
            if np.any(np.abs(frac) < 1e-3) or np.any(np.abs(frac - 1) < 1e-3):
                continue  # the bilinear gradient jumps on cell lines
            _, g, _ = sample_field(f, p)
            fd = [(sample_field(f, p + e)[0] - sample_field(f, p - e)[0]) / (2 * h)
                  for e in (np.array([h, 0]), np.array([0, h]))]
            assert np.allclose(g, fd, rtol=1e-3, atol=1e-6)
            checked += 1

    def test_out_of_bounds_clamps(self):
        vals = np.arange(12, dtype=float).reshape(3, 4)
        f = DistanceField(GridGeometry((0, 0), 1.0, 4, 3), vals)
        d, g, oob = sample_field(f, (-5.0, 1.0))
        assert oob and d == vals[1, 0] and np.all(g == 0)
        assert not sample_field(f, (3.4, 2.4))[2]
        assert sample_field(f, (3.6, 0.0))[2]


class TestFiles:
    def test_map_round_trip(self, tmp_path, rng):
        grid = random_grid(rng, 13, 7, 0.3, 0.25, origin=(-1.5, 2.0))
        save_map(grid, tmp_path / "m.txt")
        back = load_map(tmp_path / "m.txt")
        assert back.geometry == grid.geometry
        assert np.array_equal(back.cells, grid.cells)

    def test_first_row_is_top(self, tmp_path):
        (tmp_path / "m.txt").write_text("3 2 1.0 0 0\n100\n000\n")
        grid = load_map(tmp_path / "m.txt")
        assert grid.cells[1, 0] and grid.cells.sum() == 1

    @pytest.mark.parametrize("text", ["", "3 2 1.0 0\n000\n000\n", "3 2 1.0 0 0\n000\n",
                                      "2 1 1 0 0\n0x\n"])
    def test_bad_maps(self, tmp_path, text):
        (tmp_path / "m.txt").write_text(text)
        with pytest.raises(ValueError):
            load_map(tmp_path / "m.txt")

    def test_field_csv(self, tmp_path):
        f = compute_edt(single_cell_grid(3, (0, 0)))
        export_field_csv(f, tmp_path / "f.csv")
        lines = (tmp_path / "f.csv").read_text().splitlines()
        assert lines[0] == "0.000000,1.000000,2.000000"
        assert lines[1].startswith("1.000000,1.414214")
