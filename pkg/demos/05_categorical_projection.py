"""The categorical baseline's projection step.

A Bellman-shifted categorical distribution lands between support atoms;
its mass is split linearly between neighbours so the result lives on the
fixed support again.

Run: python3 demos/05_categorical_projection.py
"""
import numpy as np

from sdpg.d4pg import categorical_project, make_atoms

atoms = make_atoms(0.0, 4.0, 5)
p = np.array([0.1, 0.2, 0.4, 0.2, 0.1])

for r, gamma in ((0.0, 1.0), (0.5, 1.0), (1.0, 0.5), (10.0, 0.9)):
    shifted = r + gamma * atoms
    q = categorical_project(p, shifted, atoms)
    print(f"r={r:<4} gamma={gamma:<4} shifted {np.round(shifted, 2)} -> {np.round(q, 3)}  "
          f"mass {q.sum():.15f}")

# without clipping the mean survives the projection exactly
shifted = 0.3 + 0.8 * atoms
q = categorical_project(p, shifted, atoms)
print("mean before", p @ shifted, "after", q @ atoms)

# batched over many distributions
rng = np.random.default_rng(0)
P = rng.dirichlet(np.ones(5), size=100_000)
R = rng.uniform(-3, 7, (100_000, 1))
Q = categorical_project(P, R + 0.9 * atoms, atoms)
print("worst mass error over 1e5 projections:", np.abs(Q.sum(1) - 1).max())
