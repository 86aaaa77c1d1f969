"""Learning a bimodal return distribution with a sample-generating critic.

One state, reward drawn from 0.5 N(-1, 0.1^2) + 0.5 N(1, 0.1^2). The critic
turns Gaussian noise into return samples; after training its samples
should show both modes.

Run: python3 demos/02_bandit_distribution.py   (about a minute)
"""
import numpy as np

from sdpg import TrainConfig, train
from sdpg.envs import make_env
from sdpg.trainer import critic_quantile_samples

cfg = TrainConfig(env_name="bandit", n_samples=51, batch_size=32, warmup=32, max_env_steps=10_000,
                  zeta=0.05, alpha=1e-3, beta=1e-3, eval_every=0, train_actor=False, log_every=2000)
rec = train(cfg)
for r in rec.of_type("updates"):
    print(f"updates {r['updates']:>6}  critic loss {r['critic_loss']:.4f}")
fit = rec.of_type("fit")[0]
print(f"W1 to the analytic law: {fit['w1']:.4f} ({fit['w1_relative']:.1%} of the reward range)")

env = make_env("bandit")
x = env.reset(0)
a = rec.agent.act(x)
z = critic_quantile_samples(rec.agent, x, a, 400, noise="random")

# text histogram, critic samples vs draws from the true mixture
bins = np.linspace(-1.5, 1.5, 25)
hc, _ = np.histogram(z, bins)
ht, _ = np.histogram(env.sample_mixture(400), bins)
for lo, c, t in zip(bins[:-1], hc, ht):
    print(f"{lo:+.2f} {'#' * (c // 4):<30} {'*' * (t // 4)}")
print("# critic samples, * reward draws")
