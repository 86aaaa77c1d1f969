"""Bootstrapped return distributions on a three-state chain.

Rewards N(1, 1) at each of three steps, discount 0.5, so the return from
the first state is Normal(1.75, 1.3125). The critic only ever sees one step
at a time and has to assemble that law through its own targets.

Run: python3 demos/03_chain_bellman.py   (a minute or two)
"""
import numpy as np

from sdpg import TrainConfig, train
from sdpg.envs import make_env
from sdpg.trainer import critic_quantile_samples

env = make_env("chain", means=[1.0, 1.0, 1.0], stds=[1.0, 1.0, 1.0])
mean, var = env.return_law(0.5)
print(f"closed form at s0: mean {mean}, std {np.sqrt(var):.4f}")

for n in (11, 51, 101):
    cfg = TrainConfig(env_name="chain", gamma=0.5, n_samples=n, batch_size=32, warmup=32,
                      max_env_steps=12_000, zeta=0.05, beta=1e-3, eval_every=0, train_actor=False)
    fit = train(cfg).of_type("fit")[0]
    print(f"n={n:<4} critic mean {fit['critic_mean']:.3f}  std {fit['critic_std']:.3f}")

# Fewer samples per update give a narrower learned law. Sorting n noise draws
# and matching them to midpoint levels shrinks the spread a little at each
# bootstrap step, and the three steps compound.
from scipy.stats import norm  # noqa: E402

u = (np.arange(100_000) + 0.5) / 100_000
for n in (11, 51, 101, 200):
    # learned law at the fixed point has CDF ((n - 1) u + 0.5) / n at the target's level u
    c = np.std(norm.ppf(((n - 1) * u + 0.5) / n))
    s = c
    for _ in range(2):
        s = c * np.sqrt(1 + 0.25 * s * s)
    print(f"n={n:<4} one-step spread ratio {c:.3f}, predicted std at s0 {s:.3f}")

# samples at s0 at a finer resolution than training used
x0 = env.reset(0)
agent = train(TrainConfig(env_name="chain", gamma=0.5, batch_size=32, warmup=32, max_env_steps=4000,
                          zeta=0.05, beta=1e-3, eval_every=0, train_actor=False)).agent
print(np.round(critic_quantile_samples(agent, x0, agent.act(x0), 9), 3))
