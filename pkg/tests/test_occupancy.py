import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from terrain_ipp.field import GridGeometry
from terrain_ipp.occupancy import (
    OccupancyMap,
    binary_entropy,
    entropy,
    interesting_cells_discrete,
    predict_discrete_update,
    update_discrete,
)
from terrain_ipp.sensors import BinaryClassifierModel, CameraConfig, footprint

from oracles import binary_entropy_bits

SYM = BinaryClassifierModel((0.0, 30.0), (0.8, 0.8), (0.2, 0.2))


@pytest.fixture
def occ(ref_grid):
    return OccupancyMap(ref_grid, layers=("target", "other"))


def test_fresh_map(occ):
    assert np.all(occ.layer("target") == 0.0)
    assert np.all(occ.probability("target") == 0.5)
    assert entropy(occ, "target") == pytest.approx(1600.0)


def test_single_update_from_uniform(occ):
    update_discrete(occ, "target", [5], [1], 5.0, SYM)
    assert occ.layer("target")[5] == pytest.approx(math.log(4.0))
    assert occ.probability("target")[5] == pytest.approx(0.8)
    assert np.count_nonzero(occ.layer("target")) == 1
    assert np.all(occ.layer("other") == 0.0)


def test_symmetric_updates_cancel(occ):
    update_discrete(occ, "target", [7], [1], 5.0, SYM)
    update_discrete(occ, "target", [7], [0], 5.0, SYM)
    assert occ.layer("target")[7] == pytest.approx(0.0, abs=1e-15)


def test_uninformative_altitude(occ):
    update_discrete(occ, "target", np.arange(10), np.ones(10, int), 30.0, BinaryClassifierModel())
    assert np.all(occ.layer("target") == 0.0)


def test_unknown_layer(occ):
    with pytest.raises(ValueError):
        update_discrete(occ, "nope", [0], [1], 5.0, SYM)


def test_cells_outside_map(occ):
    with pytest.raises(ValueError):
        update_discrete(occ, "target", [1600], [1], 5.0, SYM)


def test_altitude_outside_validity(occ):
    with pytest.raises(ValueError):
        update_discrete(occ, "target", [0], [1], 40.0, BinaryClassifierModel())


def test_entropy_values():
    assert binary_entropy(0.25) == pytest.approx(binary_entropy_bits(0.25))
    assert binary_entropy(0.25) == pytest.approx(0.8113, abs=1e-4)
    assert binary_entropy(1 - 1e-12) < 1e-9
    assert binary_entropy(0.0) == 0.0 and binary_entropy(1.0) == 0.0


def test_interesting_cells(occ):
    assert interesting_cells_discrete(occ, "target", 0.4).size == 1600
    assert interesting_cells_discrete(occ, "target", 1.0).size == 0
    for _ in range(3):
        update_discrete(occ, "target", [12], [0], 2.0, BinaryClassifierModel())
    assert 12 not in interesting_cells_discrete(occ, "target", 0.4)


def test_predict_fresh_map_uses_occupied_label(occ):
    pose = (15.0, 15.0, 8.0)
    out = predict_discrete_update(occ, "target", pose, CameraConfig(), SYM)
    cells = footprint(pose, CameraConfig(), occ.geometry)
    np.testing.assert_allclose(out.layer("target")[cells], math.log(4.0))
    assert np.all(occ.layer("target") == 0.0)  # input untouched


def test_predict_pushes_likely_cell_higher(occ):
    m = BinaryClassifierModel()
    occ.layer("target")[:] = math.log(9.0)  # p = 0.9
    out = predict_discrete_update(occ, "target", (15.0, 15.0, 3.0), CameraConfig(), m)
    assert out.probability("target").max() > 0.9


def test_predict_outside_map(occ):
    out = predict_discrete_update(occ, "target", (500.0, 500.0, 5.0), CameraConfig(), SYM)
    assert np.array_equal(out.layer("target"), occ.layer("target"))


def test_clamp(ref_grid):
    occ = OccupancyMap(ref_grid, clamp=2.0)
    for _ in range(5):
        update_discrete(occ, "target", [0], [1], 1.0, BinaryClassifierModel())
    assert occ.layer("target")[0] == 2.0


def test_copy_is_independent(occ):
    c = occ.copy()
    update_discrete(c, "target", [0], [1], 5.0, SYM)
    assert occ.layer("target")[0] == 0.0


@settings(max_examples=40, deadline=None)
@given(
    a=st.lists(st.tuples(st.integers(0, 99), st.integers(0, 1)), min_size=1, max_size=20),
    b=st.lists(st.tuples(st.integers(0, 99), st.integers(0, 1)), min_size=1, max_size=20),
    ha=st.floats(0, 30),
    hb=st.floats(0, 30),
)
def test_update_order_independent(a, b, ha, hb):
    g = GridGeometry(10.0, 10.0, 1.0)
    m = BinaryClassifierModel()
    x, y = OccupancyMap(g), OccupancyMap(g)
    ca, la = zip(*a)
    cb, lb = zip(*b)
    update_discrete(x, "target", ca, la, ha, m)
    update_discrete(x, "target", cb, lb, hb, m)
    update_discrete(y, "target", cb, lb, hb, m)
    update_discrete(y, "target", ca, la, ha, m)
    np.testing.assert_allclose(x.layer("target"), y.layer("target"), atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(p=st.floats(1e-9, 1 - 1e-9))
def test_entropy_nonnegative_and_max_at_half(p):
    h = float(binary_entropy(p))
    assert 0.0 <= h <= 1.0
    assert h <= binary_entropy(0.5)
