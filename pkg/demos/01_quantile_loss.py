"""The critic loss on its own: quantile levels, the Huber kernel, and 1-D transport.

Run: python3 demos/01_quantile_loss.py
"""
import numpy as np

from sdpg.distloss import midpoint_quantiles, pinball_loss, quantile_huber_loss, sorted_wasserstein

rng = np.random.default_rng(0)

# midpoint levels for five samples
grid = midpoint_quantiles(5, zeta=1.0)
print("levels:", grid.tau_hat)

# loss of a sorted sample vector against target samples
z = np.sort(rng.normal(size=5))
t = rng.normal(1.0, 1.0, size=5)
print("quantile huber:", quantile_huber_loss(z, t, grid))

# shrinking zeta turns the Huber kernel into the pinball loss (scaled by zeta)
for zeta in (1.0, 0.1, 0.01, 0.001):
    g = midpoint_quantiles(5, zeta)
    print(f"zeta={zeta:<6} loss/zeta={quantile_huber_loss(z, t, g) / zeta:.6f}")
print("pinball:           ", pinball_loss(z, t, grid))

# the loss is zero only when every entry is the same constant
c = np.full(4, 2.5)
print("constant vectors:", quantile_huber_loss(c, c, midpoint_quantiles(4)))
v = np.array([0.0, 1.0, 2.0, 3.0])
print("equal but spread:", quantile_huber_loss(v, v, midpoint_quantiles(4)))

# 1-D optimal transport is a sort and an elementwise difference
xs, ys = rng.normal(size=1000), rng.normal(0.5, 1.0, size=1000)
print("W1 between N(0,1) and N(0.5,1) samples:", sorted_wasserstein(xs, ys, 1), "(exact 0.5)")

# Why the acceptance runs use a small zeta: with zeta=1 the fixed point of the
# loss on a bimodal target is biased toward the middle. Minimise the population
# loss for 51 quantiles of 0.5 N(-1, 0.1^2) + 0.5 N(1, 0.1^2) by gradient descent.
from sdpg.distloss import quantile_huber_loss_grad  # noqa: E402
from sdpg.envs import Bandit  # noqa: E402

bandit = Bandit()
target = bandit.quantile((np.arange(2040) + 0.5) / 2040)
for zeta in (1.0, 0.1, 0.05):
    g51 = midpoint_quantiles(51, zeta)
    q = np.linspace(-1, 1, 51)
    for _ in range(3000):
        # the pairwise loss with a long target vector, averaged in chunks of 51
        grad = np.mean([quantile_huber_loss_grad(q, target[k::40], g51) for k in range(40)], axis=0)
        q = np.sort(q - 20.0 * grad)
    exact = bandit.quantile(g51.tau_hat)
    print(f"zeta={zeta:<5} mean |q - true quantile| = {np.mean(np.abs(q - exact)):.3f}")
