import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qkbandwidth.feature_maps import HamEvoFeatureMap, IqpFeatureMap
from qkbandwidth.kernels import (
    ShotNoiseConfig,
    binomial_sigma,
    cross_gram,
    estimate_shot_sigma,
    gram,
    inject_noise,
    load_gram,
    median_offdiag,
    nearest_psd,
    probe_indices,
    rbf_gram,
    round_inputs,
    save_gram,
    save_gram_csv,
    shot_sigma_from_gram,
)
from qkbandwidth.statevector import CapacityError

from oracles import iqp_dense


def standardized(rng, n, d):
    X = rng.standard_normal((n, d))
    return (X - X.mean(0)) / X.std(0)


def test_gram_single_point():
    np.testing.assert_allclose(gram(IqpFeatureMap(3, 0.5), [[0.1, 0.2, 0.3]]), [[1.0]], atol=1e-12)


def test_gram_duplicate_rows():
    X = np.array([[0.5, -0.2], [0.5, -0.2], [1.0, 0.3]])
    K = gram(HamEvoFeatureMap(2, 0.7, trotter_steps=3), X)
    assert K[0, 1] == pytest.approx(1.0, abs=1e-10)


def test_gram_matches_dense_oracle():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((5, 3))
    lam = 0.8
    states = [iqp_dense(x, lam) for x in X]
    expected = np.array([[abs(np.vdot(a, b)) ** 2 for b in states] for a in states])
    np.testing.assert_allclose(gram(IqpFeatureMap(3, lam), X), expected, atol=1e-10)


@settings(max_examples=12, deadline=None)
@given(
    st.sampled_from(["iqp", "hamevo"]),
    st.sampled_from([0.05, 1.0, 5.0]),
    st.integers(2, 5),
    st.integers(0, 10_000),
)
def test_gram_invariants(kind, scale, d, seed):
    rng = np.random.default_rng(seed)
    X = standardized(rng, 12, d)
    fmap = IqpFeatureMap(d, scale) if kind == "iqp" else HamEvoFeatureMap(d, scale, 4, seed)
    K = gram(fmap, X)
    assert np.array_equal(K, K.T)
    assert np.max(np.abs(np.diag(K) - 1)) <= 1e-9
    assert K.min() >= 0 and K.max() <= 1 + 1e-12
    assert np.linalg.eigvalsh(K).min() >= -1e-8


def test_cross_gram():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((4, 3))
    fmap = IqpFeatureMap(3, 0.4)
    np.testing.assert_allclose(cross_gram(fmap, X, X), gram(fmap, X), atol=1e-12)
    row = cross_gram(fmap, X[2:3], X)
    assert row[0, 2] == pytest.approx(1.0, abs=1e-12)
    Xt = rng.standard_normal((3, 3))
    Xr = rng.standard_normal((2, 3))
    expected = np.array(
        [[abs(np.vdot(iqp_dense(a, 0.4), iqp_dense(b, 0.4))) ** 2 for b in Xr] for a in Xt]
    )
    np.testing.assert_allclose(cross_gram(fmap, Xt, Xr), expected, atol=1e-10)


def test_gram_capacity_error():
    fmap = IqpFeatureMap(10, 1.0)
    with pytest.raises(CapacityError, match="reduce"):
        gram(fmap, np.zeros((10, 10)), memory_budget=1000)


def test_rbf_gram():
    X = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 0.0]])
    K = rbf_gram(X, 0.5)
    assert K[0, 2] == 1.0
    assert np.all(np.diag(K) == 1.0)
    assert K[0, 1] == pytest.approx(np.exp(-1), abs=1e-12)
    assert K[0, 1] == pytest.approx(0.367879, abs=1e-6)
    assert np.all(rbf_gram(np.random.default_rng(0).standard_normal((6, 3)), 1e-12) >= 1 - 1e-9)
    with pytest.raises(ValueError):
        rbf_gram(X, 0.0)


def test_wide_kernel_limit():
    X = standardized(np.random.default_rng(3), 20, 8)
    K = gram(IqpFeatureMap(8, 1e-3), X)
    assert K.min() >= 0.999


def test_concentration_trend():
    rng = np.random.default_rng(4)
    dims = [4, 6, 8, 10, 12]
    meds = [median_offdiag(gram(IqpFeatureMap(d, 1.0), standardized(rng, 40, d))) for d in dims]
    assert all(b <= a for a, b in zip(meds, meds[1:]))
    slope, intercept = np.polyfit(dims, np.log(meds), 1)
    pred = slope * np.array(dims) + intercept
    resid = np.log(meds) - pred
    r2 = 1 - resid @ resid / np.sum((np.log(meds) - np.mean(np.log(meds))) ** 2)
    assert slope < 0 and r2 >= 0.8


# ------------------------------------------------------------ shot noise


def test_binomial_sigma_degenerate():
    rng = np.random.default_rng(0)
    assert np.all(binomial_sigma([0.0, 0.0], 5000, 10, rng) == 0)
    assert np.all(binomial_sigma([1.0], 5000, 10, rng) == 0)
    assert shot_sigma_from_gram(np.ones((5, 5)), ShotNoiseConfig()) == 0.0
    assert shot_sigma_from_gram(np.eye(5), ShotNoiseConfig()) == 0.0


def test_binomial_sigma_matches_variance_formula():
    target = np.sqrt(0.25 / 5000)
    rng = np.random.default_rng(1)
    small = binomial_sigma([0.5], 5000, 10, rng)[0]
    assert abs(small - target) <= 0.5 * target
    big = binomial_sigma([0.5], 5000, 1000, rng)[0]
    assert abs(big - target) <= 0.05 * target


def test_estimate_shot_sigma_runs_on_feature_map():
    rng = np.random.default_rng(2)
    X = standardized(rng, 5, 3)
    cfg = ShotNoiseConfig(shots=5000, repeats=10, rng_seed=3)
    sigma = estimate_shot_sigma(IqpFeatureMap(3, 0.3), X, cfg)
    assert 0 < sigma < np.sqrt(0.25 / 5000) * 2
    assert sigma == estimate_shot_sigma(IqpFeatureMap(3, 0.3), X, cfg)
    with pytest.raises(ValueError):
        estimate_shot_sigma(IqpFeatureMap(3, 0.3), X[:1], cfg)


def test_probe_indices():
    assert list(probe_indices(10, ShotNoiseConfig())) == [0, 1, 2, 3, 4]
    idx = probe_indices(10, ShotNoiseConfig(probe_seed=4))
    assert len(set(idx)) == 5 and list(idx) == list(probe_indices(10, ShotNoiseConfig(probe_seed=4)))
    with pytest.raises(ValueError):
        probe_indices(3, ShotNoiseConfig())


def test_inject_noise():
    K = gram(IqpFeatureMap(3, 0.5), np.random.default_rng(0).standard_normal((6, 3)))
    assert np.array_equal(inject_noise(K, 0.0, 1), K)
    noisy = inject_noise(K, 0.01, 1)
    assert np.array_equal(noisy, noisy.T)
    assert np.array_equal(np.diag(noisy), np.diag(K))
    assert np.array_equal(noisy, inject_noise(K, 0.01, 1))


def test_inject_noise_is_centred():
    n, sigma = 200, 0.05
    K = np.eye(n)
    diff = inject_noise(K, sigma, 7) - K
    vals = diff[np.triu_indices(n, 1)]
    m = n * (n - 1) / 2
    assert abs(vals.mean()) <= 3 * sigma / np.sqrt(m)


# ---------------------------------------------------------- PSD repair


def test_nearest_psd_fixed_points():
    np.testing.assert_array_equal(nearest_psd(np.diag([1.0, -1.0])), np.diag([1.0, 0.0]))
    K = gram(IqpFeatureMap(3, 0.5), np.random.default_rng(0).standard_normal((6, 3)))
    np.testing.assert_allclose(nearest_psd(K), K, atol=1e-10)
    with pytest.raises(ValueError):
        nearest_psd(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_nearest_psd_is_frobenius_projection():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((10, 10))
    S = (A + A.T) / 2
    P = nearest_psd(S)
    assert np.linalg.eigvalsh(P).min() >= -1e-10
    np.testing.assert_allclose(nearest_psd(P), P, atol=1e-10)
    best = np.linalg.norm(S - P)
    for _ in range(50):
        B = rng.standard_normal((10, 10)) * 0.1
        cand = P + B @ B.T  # another PSD matrix near the projection
        assert best <= np.linalg.norm(S - cand) + 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 12), st.integers(0, 10_000))
def test_nearest_psd_idempotent(n, seed):
    A = np.random.default_rng(seed).standard_normal((n, n))
    P = nearest_psd(A + A.T)
    assert np.linalg.eigvalsh(P).min() >= -1e-10
    np.testing.assert_allclose(nearest_psd(P), P, atol=1e-10, rtol=0)


# -------------------------------------------------------------- misc


def test_round_inputs():
    assert round_inputs(np.array([0.12345]), 3)[0] == pytest.approx(0.123, abs=1e-15)
    X = np.random.default_rng(0).standard_normal((4, 3))
    np.testing.assert_allclose(round_inputs(X, 12), X, atol=1e-12)


def test_median_offdiag():
    assert median_offdiag(np.ones((4, 4))) == 1.0
    assert median_offdiag(np.array([[1, 0.3], [0.3, 1]])) == 0.3
    assert median_offdiag(np.eye(5)) == 0.0


def test_gram_serialization(tmp_path):
    K = gram(IqpFeatureMap(3, 0.5), np.random.default_rng(0).standard_normal((5, 3)))
    save_gram(tmp_path / "k.bin", K)
    assert (tmp_path / "k.bin").stat().st_size == 8 + 8 * 15
    np.testing.assert_array_equal(load_gram(tmp_path / "k.bin"), K)
    save_gram_csv(tmp_path / "k.csv", K)
    back = np.loadtxt(tmp_path / "k.csv", delimiter=",")
    np.testing.assert_array_equal(back, K)
