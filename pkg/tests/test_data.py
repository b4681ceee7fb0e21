import numpy as np
import pytest
from hypothesis import given, strategies as st

from l0conic.data import (BUNDLE_SCHEMA, SyntheticConfig, add_noise_and_scale, brownian_bridge_cov,
                          gen_true_signal, instance_bundle, make_synthetic, metrics, rng_from_seed,
                          snr, truncated_normal, windowed_mad)
from l0conic.model import SparsityPriors


def test_bridge_cov_h2():
    np.testing.assert_array_equal(brownian_bridge_cov(2) * 3, [[2, 1], [1, 2]])


@pytest.mark.parametrize("h", [2, 5, 10])
def test_bridge_cov_closed_form(h):
    B = brownian_bridge_cov(h)
    for i in range(1, h + 1):
        for j in range(i, h + 1):
            assert B[i - 1, j - 1] == i * (h + 1 - j) / (h + 1)
            assert B[j - 1, i - 1] == B[i - 1, j - 1]


def test_config_validation():
    with pytest.raises(ValueError):
        SyntheticConfig(10, 3, 4, 0.5)
    with pytest.raises(ValueError):
        SyntheticConfig(10, 1, 2, -0.1)


def test_zero_spikes_give_zero_signal():
    assert not gen_true_signal(SyntheticConfig(50, 0, 5, 0.5)).values.any()


@given(st.integers(1, 8), st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_true_signal_support_bound(s, h, seed):
    cfg = SyntheticConfig(80, s, h, 0.1, seed)
    y = gen_true_signal(cfg).values
    nz = y > 0
    assert nz.sum() <= h * s
    patches = np.sum(np.diff(np.concatenate([[0], nz.astype(int)])) == 1)
    assert patches <= s


def test_seed_pins_every_draw():
    cfg = SyntheticConfig(200, 4, 10, 0.5, seed=7)
    a, b = make_synthetic(cfg), make_synthetic(cfg)
    np.testing.assert_array_equal(a.y.values, b.y.values)
    np.testing.assert_array_equal(a.y_true.values, b.y_true.values)


def test_noise_nonnegative_many_draws():
    rng = rng_from_seed(3)
    y_hat = np.zeros(100_000)
    y_hat[::7] = rng.uniform(0, 2, y_hat[::7].size)
    y = add_noise_and_scale(y_hat, 1.0, seed=4).values
    assert y.min() >= 0 and y.max() == pytest.approx(1.0)


def test_truncated_normal_far_tail():
    rng = rng_from_seed(0)
    lower = np.full(1000, 12.0)
    draws = truncated_normal(lower, 1.0, rng)
    assert np.all(draws >= 12.0) and np.all(draws < 13.0)


def test_truncated_normal_mean_matches_closed_form():
    # E[X | X >= a] for a standard normal is pdf(a) / (1 - cdf(a))
    from scipy.stats import norm

    rng = rng_from_seed(11)
    draws = truncated_normal(np.full(200_000, -0.5), 1.0, rng)
    assert draws.mean() == pytest.approx(norm.pdf(-0.5) / norm.sf(-0.5), abs=5e-3)


def test_zero_noise_only_scales():
    y_hat = np.array([0.0, 2.0, 4.0])
    np.testing.assert_array_equal(add_noise_and_scale(y_hat, 0.0, seed=1).values, [0, 0.5, 1])


def test_all_zero_signal_skips_scaling():
    np.testing.assert_array_equal(add_noise_and_scale(np.zeros(4), 0.0, seed=1).values, 0)


def test_snr_decreases_with_noise():
    cfg = SyntheticConfig(20_000, 100, 10, 0.1, seed=5)
    truth = gen_true_signal(cfg).values
    ratios = []
    for sigma in np.arange(1, 11) / 10:
        rng = rng_from_seed(9)
        from l0conic.data import add_noise
        ratios.append(snr(truth, add_noise(truth, sigma, rng)))
    assert np.all(np.diff(ratios) < 0)


def test_windowed_mad_cases():
    assert not windowed_mad(np.full(40, 3.0)).values.any()
    alt = np.where(np.arange(30) % 2 == 0, 1.0, -1.0)
    np.testing.assert_array_equal(windowed_mad(alt).values, 1.0)
    assert windowed_mad(np.arange(25.0)).n == 2
    with pytest.raises(ValueError):
        windowed_mad(np.arange(5.0), window=1)


def test_metrics_examples():
    y_true = np.array([0.0, 1.0, 2.0, 0.0])
    m = metrics(y_true, y_true)
    assert m["error"] == 0 and m["sparsity_mismatch"] == 0
    m = metrics(np.array([0.5, 0.0, 2.0, 0.0]), y_true)
    assert (m["false_pos"], m["false_neg"], m["sparsity_mismatch"]) == (1, 1, 2)
    assert m["error"] == pytest.approx((0.25 + 1.0) / 5.0)
    assert metrics(np.ones(2), np.zeros(2))["error"] is None
    with pytest.raises(ValueError):
        metrics(np.ones(2), np.ones(3))


def test_metrics_threshold_is_strict():
    m = metrics(np.array([1e-3, 2e-3]), np.zeros(2))
    assert m["nnz"] == 1


def test_bundle_matches_schema():
    jsonschema = pytest.importorskip("jsonschema")
    b = instance_bundle(np.array([0.1, 0.2]), 0.3, SparsityPriors.cardinality(1), y_true=[0, 0.2], seed=4)
    jsonschema.validate(b, BUNDLE_SCHEMA)
    assert b["n"] == 2 and b["priors"]["k"] == 1


def test_truncated_normal_tail_branch_moments():
    from scipy.stats import truncnorm

    draws = truncated_normal(np.full(400_000, 3.0), 1.0, rng_from_seed(2))
    assert draws.mean() == pytest.approx(truncnorm.mean(3, np.inf), abs=2e-3)
    assert draws.var() == pytest.approx(truncnorm.var(3, np.inf), rel=2e-2)
