import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sdpg.distloss import (huber, midpoint_quantiles, pinball_loss, quantile_huber_loss,
                           quantile_huber_loss_and_grad, quantile_huber_loss_grad, sort_ascending,
                           sorted_wasserstein)
from sdpg.netcore import NumericError, ShapeError
from sdpg.oracles import brute_force_ot, brute_force_quantile_huber


def test_midpoint_levels_small_cases():
    assert midpoint_quantiles(1).tau_hat.tolist() == [0.5]
    assert midpoint_quantiles(4).tau_hat.tolist() == [0.125, 0.375, 0.625, 0.875]


def test_midpoint_levels_n51():
    tau = midpoint_quantiles(51).tau_hat
    assert tau.size == 51
    assert tau[0] == pytest.approx(1 / 102, abs=1e-15)
    assert tau[-1] == pytest.approx(101 / 102, abs=1e-15)
    assert np.all(np.diff(tau) > 0)


@pytest.mark.parametrize("n", [1, 2, 7, 51, 200])
def test_midpoint_levels_reflection(n):
    tau = midpoint_quantiles(n).tau_hat
    np.testing.assert_allclose(tau + tau[::-1], 1.0, atol=1e-15)


@pytest.mark.parametrize("bad", [0, -3, 2.5])
def test_midpoint_rejects_bad_n(bad):
    with pytest.raises(ValueError):
        midpoint_quantiles(bad)


def test_huber_values():
    assert huber(0.0, 1.0) == 0.0
    assert huber(0.5, 1.0) == 0.125
    assert huber(2.0, 1.0) == 1.5
    assert huber(-2.0, 1.0) == 1.5


def test_huber_continuous_and_c1_at_threshold():
    for zeta in (0.5, 1.0, 2.0):
        eps = 1e-8
        lo, hi = huber(zeta - eps, zeta), huber(zeta + eps, zeta)
        assert abs(hi - lo) < 3 * zeta * eps
        slope_in = (huber(zeta - eps, zeta) - huber(zeta - 2 * eps, zeta)) / eps
        slope_out = (huber(zeta + 2 * eps, zeta) - huber(zeta + eps, zeta)) / eps
        assert slope_in == pytest.approx(zeta, rel=1e-5)
        assert slope_out == pytest.approx(zeta, rel=1e-5)


def test_loss_zero_only_for_equal_constants():
    g = midpoint_quantiles(5)
    c = np.full(5, 1.3)
    assert quantile_huber_loss(c, c, g) == 0.0
    assert np.all(quantile_huber_loss_grad(c, c, g) == 0.0)
    # every (i, j) pair enters, so a spread-out vector against itself is not zero
    z = np.array([-1.0, 0.0, 0.5, 2.0, 3.0])
    assert quantile_huber_loss(z, z, g) == pytest.approx(brute_force_quantile_huber(z, z, 1.0), abs=1e-14)
    assert quantile_huber_loss(z, z, g) > 0


def test_loss_hand_cases():
    g1 = midpoint_quantiles(1, 1.0)
    assert quantile_huber_loss([0.0], [1.0], g1) == pytest.approx(0.25, abs=1e-15)
    assert quantile_huber_loss_grad([0.0], [1.0], g1).tolist() == pytest.approx([-0.5])
    g2 = midpoint_quantiles(2, 1.0)
    assert quantile_huber_loss([0.0, 0.0], [1.0, 1.0], g2) == pytest.approx(0.25, abs=1e-15)


def test_loss_rejects_mismatch():
    g = midpoint_quantiles(3)
    with pytest.raises(ShapeError):
        quantile_huber_loss([0.0, 1.0, 2.0], [0.0, 1.0], g)
    with pytest.raises(ShapeError):
        quantile_huber_loss([0.0, 1.0], [0.0, 1.0], g)


def test_loss_matches_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(300):
        n = int(rng.integers(1, 9))
        zeta = float(rng.choice([0.5, 1.0, 2.0]))
        z = np.sort(rng.normal(0, 2, n))
        t = rng.normal(0, 2, n)
        assert abs(quantile_huber_loss(z, t, midpoint_quantiles(n, zeta))
                   - brute_force_quantile_huber(z, t, zeta)) <= 1e-10


def test_batched_loss_equals_rowwise():
    rng = np.random.default_rng(1)
    g = midpoint_quantiles(6, 1.0)
    Z = np.sort(rng.normal(size=(10, 6)), axis=1)
    T = rng.normal(size=(10, 6))
    losses, grads = quantile_huber_loss_and_grad(Z, T, g)
    for k in range(10):
        lk, gk = quantile_huber_loss_and_grad(Z[k], T[k], g)
        assert losses[k] == pytest.approx(lk, abs=1e-14)
        np.testing.assert_allclose(grads[k], gk, atol=1e-14)


def test_grad_zero_when_vectors_identical_constant():
    g = midpoint_quantiles(4)
    z = np.full(4, -0.7)
    assert np.array_equal(quantile_huber_loss_grad(z, z, g), np.zeros(4))


def test_grad_matches_finite_differences_n5():
    rng = np.random.default_rng(2)
    h = 1e-6
    checked = 0
    while checked < 50:
        zeta = float(rng.choice([0.5, 1.0, 2.0]))
        g = midpoint_quantiles(5, zeta)
        z = np.sort(rng.normal(0, 2, 5))
        t = rng.normal(0, 2, 5)
        v = t[None, :] - z[:, None]
        if np.min(np.abs(v)) < 1e-3 or np.min(np.abs(np.abs(v) - zeta)) < 1e-3 or np.min(np.diff(z)) < 1e-3:
            continue
        grad = quantile_huber_loss_grad(z, t, g)
        for i in range(5):
            zp, zm = z.copy(), z.copy()
            zp[i] += h
            zm[i] -= h
            fd = (brute_force_quantile_huber(zp, t, zeta) - brute_force_quantile_huber(zm, t, zeta)) / (2 * h)
            assert abs(grad[i] - fd) <= 1e-5 * max(abs(fd), 1e-3)
        checked += 1


def test_small_zeta_limit_is_pinball():
    rng = np.random.default_rng(3)
    for _ in range(20):
        n = int(rng.integers(1, 7))
        z = np.sort(rng.normal(size=n))
        t = rng.normal(size=n)
        ref = pinball_loss(z, t, midpoint_quantiles(n))
        # independent pinball oracle
        tau = (np.arange(n) + 0.5) / n
        manual = sum(abs(tau[i] - (t[j] - z[i] < 0)) * abs(t[j] - z[i])
                     for i in range(n) for j in range(n)) / n ** 2
        assert ref == pytest.approx(manual, abs=1e-12)
        for zeta, tol in ((1e-2, 1e-2), (1e-4, 1e-4)):
            scaled = quantile_huber_loss(z, t, midpoint_quantiles(n, zeta)) / zeta
            assert abs(scaled - manual) <= tol


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=8), st.integers(0, 10_000),
       st.sampled_from([0.5, 1.0, 2.0]))
def test_loss_nonnegative(zs, seed, zeta):
    z = np.sort(np.array(zs))
    t = np.random.default_rng(seed).normal(0, 10, z.size)
    assert quantile_huber_loss(z, t, midpoint_quantiles(z.size, zeta)) >= 0.0


def test_loss_positive_for_different_vectors():
    g = midpoint_quantiles(3)
    assert quantile_huber_loss([0.0, 1.0, 2.0], [0.0, 1.0, 2.5], g) > 0


def test_wasserstein_examples():
    assert sorted_wasserstein([1, 3], [2, 4], 1) == pytest.approx(1.0)
    assert sorted_wasserstein([0, 10], [10, 0], 2) == 0.0
    assert sorted_wasserstein([5, 1, 3], [3, 5, 1], 1) == 0.0


def test_wasserstein_rejects_empty_and_mismatch():
    with pytest.raises(ShapeError):
        sorted_wasserstein([], [], 1)
    with pytest.raises(ShapeError):
        sorted_wasserstein([1.0], [1.0, 2.0], 1)


def test_wasserstein_matches_brute_force():
    rng = np.random.default_rng(4)
    for _ in range(100):
        n = int(rng.integers(1, 7))
        xs, ys = rng.normal(size=n), rng.normal(size=n)
        for p in (1, 2, 3):
            assert abs(sorted_wasserstein(xs, ys, p) - brute_force_ot(xs, ys, p)) <= 1e-10


@settings(max_examples=150, deadline=None)
@given(st.integers(1, 6), st.integers(0, 100_000))
def test_wasserstein_metric_axioms(n, seed):
    rng = np.random.default_rng(seed)
    x, y, z = rng.normal(size=(3, n))
    for p in (1, 2):
        dxy, dyx = sorted_wasserstein(x, y, p), sorted_wasserstein(y, x, p)
        assert dxy == pytest.approx(dyx, abs=1e-15)
        assert sorted_wasserstein(x, rng.permutation(x), p) == 0.0
        assert sorted_wasserstein(x, z, p) <= dxy + sorted_wasserstein(y, z, p) + 1e-12
        if not np.array_equal(np.sort(x), np.sort(y)):
            assert dxy > 0


def test_sort_examples():
    s, perm = sort_ascending([3.0, 1.0, 2.0])
    assert s.tolist() == [1.0, 2.0, 3.0] and perm.tolist() == [1, 2, 0]
    _, perm = sort_ascending([1.0, 2.0, 5.0])
    assert perm.tolist() == [0, 1, 2]
    s, perm = sort_ascending([1.0, 1.0, 0.0])
    assert s.tolist() == [0.0, 1.0, 1.0] and perm.tolist() == [2, 0, 1]


def test_sort_stability_against_oracle():
    rng = np.random.default_rng(5)
    for _ in range(50):
        vals = rng.integers(0, 4, size=9).astype(float)
        _, perm = sort_ascending(vals)
        ref = sorted(range(9), key=lambda i: vals[i])  # Python's sort is stable
        assert perm.tolist() == ref


def test_sort_rejects_nan():
    with pytest.raises(NumericError):
        sort_ascending([1.0, np.nan])


def test_sort_batched_rows():
    X = np.array([[3.0, 1.0, 2.0], [0.0, -1.0, 5.0]])
    s, perm = sort_ascending(X)
    assert np.array_equal(s, np.sort(X, axis=1))
    assert np.array_equal(np.take_along_axis(X, perm, axis=1), s)


def test_ascending_pairing_beats_reversed():
    # low samples on low levels gives the smaller loss on matched data
    t = np.linspace(-3, 3, 8)
    asc = quantile_huber_loss(t, t, midpoint_quantiles(8, 1.0))
    desc = brute_force_quantile_huber(t[::-1], t, 1.0)
    assert asc < desc
