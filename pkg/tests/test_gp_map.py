import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from terrain_ipp.field import GridGeometry, generate_gaussian_field
from terrain_ipp.gp_map import (
    GPFieldMap,
    MaternKernel,
    NumericalError,
    TraceGainEvaluator,
    build_prior,
    fuse,
    interesting_cells_continuous,
    matern32,
    observation_matrix,
    predict_continuous_update,
    trace_uncertainty,
)
from terrain_ipp.sensors import CameraConfig, ContinuousSensorModel, MeasurementPatch, measurement_layout, simulate_continuous_measurement

from oracles import batch_condition, dense_matern_prior

CAM = CameraConfig()


def patch(members, values, var, scale=1.0):
    members = np.atleast_2d(np.asarray(members))
    return MeasurementPatch(np.asarray(values, float), members, np.full(len(members), var), 5.0, scale)


def test_matern_values():
    k = MaternKernel()
    assert matern32(0.0, k) == pytest.approx(1.82)
    assert matern32(1e6, k) == pytest.approx(0.0, abs=1e-12)
    unit = MaternKernel(sigma_f2=1.0, length_scale=2.5)
    assert matern32(2.5, unit) == pytest.approx((1 + math.sqrt(3)) * math.exp(-math.sqrt(3)))
    assert matern32(2.5, unit) == pytest.approx(0.4834, abs=1e-4)
    d = np.linspace(0, 20, 50)
    assert np.all(np.diff(matern32(d, k)) < 0)
    with pytest.raises(ValueError):
        matern32(-1.0, k)


def test_kernel_validation():
    with pytest.raises(ValueError):
        MaternKernel(sigma_n2=0.0)


def test_prior_2x2_against_dense_oracle():
    g = GridGeometry(2.0, 2.0, 1.0)
    prior = build_prior(g, MaternKernel(), 50.0)
    expected = dense_matern_prior(g.centers().tolist(), 1.82, 3.67, 1.42)
    np.testing.assert_allclose(prior.cov, expected, rtol=1e-12)
    assert np.all(prior.mean == 50.0)


def test_prior_corner_symmetry_and_trace(ref_prior):
    P = ref_prior.cov
    assert P[0, 0] == pytest.approx(P[-1, -1], rel=1e-12)
    assert np.allclose(P, P.T)
    assert trace_uncertainty(ref_prior) == pytest.approx(np.trace(P))


def test_prior_large_noise_limit():
    g = GridGeometry(3.0, 3.0, 1.0)
    k = MaternKernel(sigma_n2=1e12)
    K = matern32(np.linalg.norm(g.centers()[:, None] - g.centers()[None], axis=2), k)
    np.testing.assert_allclose(build_prior(g, k).cov, K, rtol=1e-9)


def test_uninformative_measurement_changes_nothing(ref_prior):
    out = fuse(ref_prior, patch([[100]], [80.0], 1e12))
    np.testing.assert_allclose(out.mean, ref_prior.mean, rtol=1e-6)
    np.testing.assert_allclose(out.cov, ref_prior.cov, rtol=1e-6, atol=1e-12)


def test_scalar_kalman_oracle():
    g = GridGeometry(1.0, 1.0, 1.0)
    m = GPFieldMap(g, [0.0], [[1.0]])
    out = fuse(m, patch([[0]], [2.0], 1.0))
    assert out.cov[0, 0] == pytest.approx(0.5)
    assert out.mean[0] == pytest.approx(1.0)


def test_sequential_equals_batch_two_patches():
    g = GridGeometry(4.0, 4.0, 1.0)
    prior = build_prior(g, MaternKernel(), 50.0)
    a, b = patch([[0], [5]], [60.0, 40.0], 0.1), patch([[5], [10], [15]], [55.0, 45.0, 52.0], 0.2)
    seq = fuse(fuse(prior, a), b)
    H = np.vstack([observation_matrix(a.members, 16), observation_matrix(b.members, 16)])
    mu, P = batch_condition(prior.mean, prior.cov, H, np.r_[a.variances, b.variances], np.r_[a.values, b.values])
    np.testing.assert_allclose(seq.mean, mu, rtol=1e-6)
    np.testing.assert_allclose(seq.cov, P, rtol=1e-6, atol=1e-10)


def test_observation_rows_sum_to_one():
    H = observation_matrix(np.array([[0, 1, 4, 5], [2, 3, 6, 7]]), 16)
    np.testing.assert_allclose(H.sum(axis=1), 1.0)
    assert set(np.unique(H)) == {0.0, 0.25}
    assert set(np.unique(observation_matrix(np.array([[3]]), 16))) == {0.0, 1.0}


def test_fuse_rejects_nonpositive_variance(ref_prior):
    with pytest.raises(NumericalError):
        fuse(ref_prior, patch([[0]], [1.0], 0.0))


def test_trace_strictly_decreases_and_is_additive(ref_prior):
    out = fuse(ref_prior, patch([[10], [11]], [40.0, 60.0], 0.1))
    assert trace_uncertainty(out) < trace_uncertainty(ref_prior)
    A = np.arange(0, 1600, 3)
    rest = np.setdiff1d(np.arange(1600), A)
    assert trace_uncertainty(out) == pytest.approx(trace_uncertainty(out, A) + trace_uncertainty(out, rest))


def test_interesting_cells_continuous(ref_grid):
    n = ref_grid.n_cells
    gmap = GPFieldMap(ref_grid, np.full(n, 50.0), np.eye(n))
    assert interesting_cells_continuous(gmap, 40.0, 0.0).size == n
    gmap.mean[0], gmap.cov[0, 0] = 30.0, 16.0
    assert 0 in interesting_cells_continuous(gmap, 40.0, 3.0)
    assert 0 not in interesting_cells_continuous(gmap, 40.0, 2.0)
    assert interesting_cells_continuous(gmap, 1e6, 3.0).size == 0
    with pytest.raises(ValueError):
        interesting_cells_continuous(gmap, 40.0, -1.0)


def test_prediction_keeps_mean_and_matches_real_fuse(ref_prior):
    model = ContinuousSensorModel()
    start = fuse(ref_prior, patch([[3], [400]], [70.0, 20.0], 0.05))
    for pose in [(10.0, 10.0, 6.0), (20.0, 5.0, 18.0)]:
        pred = predict_continuous_update(start, pose, CAM, model)
        assert np.array_equal(pred.mean, start.mean)
        assert trace_uncertainty(pred) <= trace_uncertainty(start)
        members, var, scale = measurement_layout(pose, CAM, model, start.geometry)
        z = start.mean[members].mean(axis=1)
        real = fuse(start, MeasurementPatch(z, members, np.full(len(z), var), pose[2], scale))
        np.testing.assert_allclose(real.mean, pred.mean, atol=1e-9)
        np.testing.assert_allclose(real.cov, pred.cov, atol=1e-12)


def test_csv_export(tmp_path, ref_prior):
    ref_prior.to_csv(tmp_path / "m.csv")
    data = np.loadtxt(tmp_path / "m.csv", delimiter=",", skiprows=1)
    np.testing.assert_allclose(data[:, 2], np.diag(ref_prior.cov))


def test_gain_evaluator_matches_sequential_prediction(ref_prior):
    model = ContinuousSensorModel()
    poses = np.array([[7.5, 7.5, 8.66], [12.0, 20.0, 14.0], [12.0, 20.0, 14.0], [25.0, 3.0, 4.0], [15, 15, 26.0]])
    seq = ref_prior.copy()
    for p in poses:
        predict_continuous_update(seq, p, CAM, model, inplace=True)
    ev = TraceGainEvaluator(ref_prior, CAM, model)
    assert ev.gain(poses) == pytest.approx(trace_uncertainty(ref_prior) - trace_uncertainty(seq), rel=1e-9)
    subset = np.arange(0, 1600, 7)
    ev_s = TraceGainEvaluator(ref_prior, CAM, model, subset)
    expected = trace_uncertainty(ref_prior, subset) - trace_uncertainty(seq, subset)
    assert ev_s.gain(poses) == pytest.approx(expected, rel=1e-9)
    assert TraceGainEvaluator(ref_prior, CAM, model, np.array([], int)).gain(poses) == 0.0


def _random_patches(g, rng, count):
    model = ContinuousSensorModel(bands=((2.5, 1.0), (math.inf, 0.5)))
    truth = generate_gaussian_field(g, seed=int(rng.integers(1000)))
    out = []
    while len(out) < count:
        pose = (rng.uniform(0, g.width), rng.uniform(0, g.height), rng.uniform(0.5, 5.0))
        p = simulate_continuous_measurement(pose, CAM, model, truth, rng)
        if len(p):
            out.append(p)
    return out


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10_000), side=st.integers(3, 8))
def test_sequential_fusion_is_optimal(seed, side):
    rng = np.random.default_rng(seed)
    g = GridGeometry(float(side), float(side), 1.0)
    prior = build_prior(g, MaternKernel(), 50.0)
    patches = _random_patches(g, rng, 4)
    seq = prior
    for p in patches:
        seq = fuse(seq, p)
    H = np.vstack([observation_matrix(p.members, g.n_cells) for p in patches])
    R = np.concatenate([p.variances for p in patches])
    z = np.concatenate([p.values for p in patches])
    mu, P = batch_condition(prior.mean, prior.cov, H, R, z)
    np.testing.assert_allclose(seq.mean, mu, rtol=1e-6)
    assert np.max(np.abs(seq.cov - P)) <= 1e-6 * np.max(np.abs(P))


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_covariance_stays_psd_and_trace_monotone(seed):
    rng = np.random.default_rng(seed)
    g = GridGeometry(6.0, 6.0, 1.0)
    m = build_prior(g, MaternKernel(), 50.0)
    last = trace_uncertainty(m)
    for p in _random_patches(g, rng, 100):
        fuse(m, p, inplace=True)
        tr = trace_uncertainty(m)
        assert tr <= last
        last = tr
    ev = np.linalg.eigvalsh(m.cov)
    assert np.allclose(m.cov, m.cov.T)
    assert ev.min() >= -1e-8 * ev.max()
