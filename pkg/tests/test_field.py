import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from terrain_ipp.field import (
    GridGeometry,
    GroundTruthField,
    generate_binary_field,
    generate_gaussian_field,
    generate_split_field,
    load_field_csv,
    save_field_csv,
)


def test_geometry_shape_and_indexing():
    g = GridGeometry(30.0, 30.0, 0.75)
    assert g.shape == (40, 40) and g.n_cells == 1600
    c = g.cell_center(3, 5)
    np.testing.assert_allclose(c, [5.5 * 0.75, 3.5 * 0.75])
    assert g.cell_of(*c) == (3, 5)
    assert g.row_col(g.flat_index(3, 5)) == (3, 5)
    np.testing.assert_allclose(g.centers()[g.flat_index(3, 5)], c)


@pytest.mark.parametrize("kw", [dict(resolution=0.0), dict(resolution=-1.0), dict(width=0.0)])
def test_geometry_rejects_bad_sizes(kw):
    args = dict(width=10.0, height=10.0, resolution=1.0) | kw
    with pytest.raises(ValueError):
        GridGeometry(**args)


def test_gaussian_field_spans_full_range(ref_grid):
    f = generate_gaussian_field(ref_grid, (1, 3), (0, 100), seed=7)
    assert f.values.shape == (40, 40)
    assert f.values.min() == 0.0 and f.values.max() == 100.0


def test_gaussian_field_degenerate_range(ref_grid):
    f = generate_gaussian_field(ref_grid, value_range=(50, 50), seed=1)
    assert np.all(f.values == 50.0)


def test_gaussian_field_deterministic(ref_grid):
    a = generate_gaussian_field(ref_grid, seed=5)
    b = generate_gaussian_field(ref_grid, seed=5)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, generate_gaussian_field(ref_grid, seed=6).values)


@pytest.mark.parametrize("radii", [(0.0, 1.0), (-1.0, 2.0), (3.0, 1.0)])
def test_gaussian_field_rejects_bad_radius(ref_grid, radii):
    with pytest.raises(ValueError):
        generate_gaussian_field(ref_grid, radii)


def test_gaussian_field_rejects_range_outside_percent(ref_grid):
    with pytest.raises(ValueError):
        generate_gaussian_field(ref_grid, value_range=(-5, 100))


def test_split_field_halves(ref_grid):
    f = generate_split_field(ref_grid, 40.0, seed=3)
    assert np.all(f.values[:, :20] < 40.0)
    assert np.all(f.values[:, 20:] >= 40.0)
    assert np.array_equal(f.values, generate_split_field(ref_grid, 40.0, seed=3).values)


def test_split_field_odd_columns_go_to_interesting_half():
    g = GridGeometry(5.0, 3.0, 1.0)
    f = generate_split_field(g, 40.0, seed=0)
    assert np.sum(f.values[0] >= 40.0) == 3


def test_split_threshold_zero_all_interesting(ref_grid):
    from terrain_ipp.gp_map import GPFieldMap, interesting_cells_continuous

    f = generate_split_field(ref_grid, 0.0, seed=2)
    gmap = GPFieldMap(ref_grid, f.flat, np.eye(ref_grid.n_cells))
    assert interesting_cells_continuous(gmap, 0.0, 0.0).size == ref_grid.n_cells


@pytest.mark.parametrize("frac, expected", [(0.0, 0.0), (1.0, 1.0)])
def test_binary_field_extremes(ref_grid, frac, expected):
    f = generate_binary_field(ref_grid, frac, seed=0)
    assert np.all(f.values == expected)


def test_binary_field_fraction(ref_grid):
    f = generate_binary_field(ref_grid, 0.3, seed=11)
    assert 0.25 <= f.values.mean() <= 0.35


@pytest.mark.parametrize("frac", [-0.1, 1.5])
def test_binary_field_rejects_fraction(ref_grid, frac):
    with pytest.raises(ValueError):
        generate_binary_field(ref_grid, frac)


def test_field_rejects_out_of_range_values():
    g = GridGeometry(2.0, 2.0, 1.0)
    with pytest.raises(ValueError):
        GroundTruthField(g, np.full((2, 2), 120.0))
    with pytest.raises(ValueError):
        GroundTruthField(g, np.full((2, 2), 0.5), kind="binary")


def test_csv_round_trip(tmp_path, ref_grid):
    f = generate_gaussian_field(ref_grid, seed=9)
    save_field_csv(f, tmp_path / "f.csv")
    g = load_field_csv(tmp_path / "f.csv")
    assert g.geometry == f.geometry and g.seed == 9
    assert np.array_equal(g.values, f.values)


@settings(max_examples=25, deadline=None)
@given(
    seed=st.integers(0, 2**31 - 1),
    cols=st.integers(2, 12),
    rows=st.integers(1, 12),
    th=st.floats(1.0, 99.0),
)
def test_split_and_range_properties(seed, cols, rows, th):
    g = GridGeometry(float(cols), float(rows), 1.0)
    f = generate_split_field(g, th, seed=seed)
    split = cols // 2
    assert np.all(f.values[:, :split] < th) and np.all(f.values[:, split:] >= th)
    assert f.values.min() >= 0 and f.values.max() <= 100
    c = generate_gaussian_field(g, seed=seed)
    assert np.array_equal(c.values, generate_gaussian_field(g, seed=seed).values)
    assert c.values.min() >= 0 and c.values.max() <= 100
