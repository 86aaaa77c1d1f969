import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sdpg.envs import (Bandit, Chain, EnvSpec, Pendulum, make_env, pendulum_reset, pendulum_step,
                       wrap_angle)
from sdpg.netcore import NumericError
from sdpg.oracles import chain_return_law, chain_return_monte_carlo, mixture_cdf


def reference_pendulum(theta, theta_dot, u):
    """Straight transcription of the swing-up equations with scalar math."""
    u = min(max(u, -2.0), 2.0)
    a = ((theta + math.pi) % (2 * math.pi)) - math.pi
    if a == -math.pi:
        a = math.pi
    reward = -(a * a + 0.1 * theta_dot * theta_dot + 0.001 * u * u)
    new_dot = theta_dot + (3 * 10.0 / (2 * 1.0) * math.sin(theta) + 3 * u / (1.0 * 1.0)) * 0.05
    new_dot = min(max(new_dot, -8.0), 8.0)
    return theta + new_dot * 0.05, new_dot, reward


def test_upright_equilibrium():
    state, res = pendulum_step((0.0, 0.0), 0.0)
    assert res.reward == 0.0
    assert state == (0.0, 0.0)


def test_hanging_reward():
    _, res = pendulum_step((math.pi, 0.0), 0.0)
    assert res.reward == pytest.approx(-math.pi ** 2, abs=1e-15)


def test_pendulum_matches_reference_integrator():
    rng = np.random.default_rng(0)
    for _ in range(2000):
        th, thd = rng.uniform(-10, 10), rng.uniform(-9, 9)
        u = rng.uniform(-3, 3)
        (nth, nthd), res = pendulum_step((th, thd), u)
        rth, rthd, rr = reference_pendulum(th, thd, u)
        assert abs(nth - rth) <= 1e-12 and abs(nthd - rthd) <= 1e-12
        assert abs(res.reward - rr) <= 1e-12


def test_pendulum_obs_and_episode_limit():
    env = Pendulum()
    obs = env.reset(3)
    th, thd = env.state
    np.testing.assert_allclose(obs, [math.cos(th), math.sin(th), thd])
    for t in range(200):
        res = env.step([0.5])
        assert res.done == (t == 199)
        assert not res.terminal


def test_pendulum_rejects_non_finite_torque():
    with pytest.raises(NumericError):
        Pendulum().step([np.nan])
    with pytest.raises(NumericError):
        pendulum_step((0.0, 0.0), np.inf)


def test_pendulum_reset_functional_form():
    state, obs = pendulum_reset(4)
    env = Pendulum()
    assert np.array_equal(env.reset(4), obs) and env.state == state
    assert -math.pi <= state[0] <= math.pi and -1 <= state[1] <= 1


@settings(max_examples=300, deadline=None)
@given(st.floats(-50, 50), st.floats(-8, 8), st.floats(-5, 5))
def test_pendulum_reward_bounds(th, thd, u):
    _, res = pendulum_step((th, thd), u)
    assert -(math.pi ** 2 + 0.1 * 64 + 0.001 * 4) < res.reward <= 0.0


def test_wrap_angle_range():
    x = np.linspace(-20, 20, 10001)
    w = wrap_angle(x)
    assert np.all(w > -math.pi - 1e-12) and np.all(w <= math.pi + 1e-12)
    np.testing.assert_allclose(np.cos(w), np.cos(x), atol=1e-9)
    assert wrap_angle(-math.pi) == pytest.approx(math.pi)


def test_determinism_given_seed_and_actions():
    for name, params in (("pendulum", {}), ("chain", {}), ("bandit", {})):
        def run():
            env = make_env(name, **params)
            out = [env.reset(7)]
            for k in range(12):
                res = env.step(np.full(env.spec.action_dim, 0.1 * k - 0.5))
                out.append(np.append(res.next_obs, res.reward))
                if res.done:
                    out.append(env.reset(k))
            return np.concatenate(out)
        assert np.array_equal(run(), run())


def test_chain_point_mass():
    env = Chain(means=[5.0], stds=[0.0])
    env.reset(0)
    res = env.step([0.0])
    assert res.reward == 5.0 and res.done and res.terminal


def test_chain_geometric_sum():
    env = Chain(means=[0.0, 1.0], stds=[0.0, 0.0])
    env.reset(0)
    g = 0.9
    total, k = 0.0, 0
    while True:
        res = env.step([0.0])
        total += g ** k * res.reward
        k += 1
        if res.done:
            break
    assert total == pytest.approx(0.9, abs=1e-15)
    assert env.return_law(0.9) == (pytest.approx(0.9), 0.0)


def test_chain_k3_law_against_monte_carlo():
    means, stds, g = [1.0, 1.0, 1.0], [1.0, 1.0, 1.0], 0.5
    mean, var = Chain(means, stds).return_law(g)
    assert mean == pytest.approx(1.75) and var == pytest.approx(1.3125)
    assert (mean, var) == pytest.approx(chain_return_law(means, stds, g))
    draws = chain_return_monte_carlo(means, stds, g, 1_000_000, seed=1)
    se_mean = math.sqrt(var / draws.size)
    se_var = var * math.sqrt(2.0 / (draws.size - 1))
    assert abs(draws.mean() - mean) < 3 * se_mean
    assert abs(draws.var() - var) < 3 * se_var


def test_chain_env_rollouts_match_law():
    env = Chain([1.0, 2.0, -1.0], [0.5, 1.0, 2.0])
    g = 0.8
    rets = []
    for ep in range(20_000):
        env.reset(ep)
        ret, k, done = 0.0, 0, False
        while not done:
            res = env.step([0.0])
            ret += g ** k * res.reward
            k += 1
            done = res.done
        rets.append(ret)
    mean, var = env.return_law(g)
    assert abs(np.mean(rets) - mean) < 3 * math.sqrt(var / len(rets))


def test_chain_one_hot_observations():
    env = Chain()
    obs = [env.reset(0)]
    for _ in range(3):
        obs.append(env.step([0.0]).next_obs)
    assert np.array_equal(np.array(obs[:3]), np.eye(3))
    assert np.array_equal(obs[3], np.zeros(3))


def test_bandit_constant_reward():
    env = Bandit(weights=[1.0], means=[2.5], stds=[0.0])
    env.reset(0)
    res = env.step([0.3])
    assert res.reward == 2.5 and res.done and res.terminal


def test_bandit_quantiles_invert_cdf():
    env = Bandit()
    lv = np.array([0.01, 0.25, 0.5, 0.75, 0.99])
    q = env.quantile(lv)
    np.testing.assert_allclose(mixture_cdf(q, env.weights, env.means, env.stds), lv, atol=1e-10)
    assert q[2] == pytest.approx(0.0, abs=1e-9)


def test_bandit_samples_follow_mixture():
    from scipy import stats
    env = Bandit()
    env.reset(1)
    r = np.array([env.step([0.0]).reward for _ in range(20_000)])
    ks = stats.kstest(r, lambda x: mixture_cdf(x, env.weights, env.means, env.stds))
    assert ks.pvalue > 0.01


def test_bandit_action_cost_argmax():
    env = Bandit(weights=[1.0], means=[0.0], stds=[0.0], action_cost=1.0)
    env.reset(0)
    grid = np.linspace(-1, 1, 41)
    rewards = [env.step([a]).reward for a in grid]
    assert grid[int(np.argmax(rewards))] == 0.0
    assert env.quantile([0.5], np.array([0.5]))[0] == pytest.approx(-0.25)


def test_snapshot_restore():
    env = Pendulum()
    env.reset(2)
    snap = env.snapshot()
    a = env.step([1.0]).next_obs
    env.restore(snap)
    assert np.array_equal(env.step([1.0]).next_obs, a)


def test_spec_validation_and_registry():
    with pytest.raises(ValueError):
        EnvSpec(1, 1, np.array([1.0]), np.array([1.0]), 10)
    with pytest.raises(ValueError):
        make_env("cartpole")
    with pytest.raises(ValueError):
        Chain(means=[1.0], stds=[1.0, 2.0])
    with pytest.raises(ValueError):
        Bandit(weights=[0.3, 0.3])
