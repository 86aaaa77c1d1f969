"""Swinging up the pendulum with SDPG or the categorical baseline.

Run: python3 demos/04_pendulum.py [sdpg|d4pg] [max_episodes]

A full run to -250 takes roughly a quarter of an hour on one core. The
default here stops after 100 episodes and prints the learning curve so far.
"""
import sys

from sdpg import TrainConfig, train
from sdpg.trainer import episodes_to_threshold

algorithm = sys.argv[1] if len(sys.argv) > 1 else "sdpg"
episodes = int(sys.argv[2]) if len(sys.argv) > 2 else 100

cfg = TrainConfig(algorithm=algorithm, max_episodes=episodes, max_env_steps=200 * episodes,
                  eval_every=5000, eval_episodes=20, stop_return=-250.0)


def show(r):
    if r["type"] == "episode" and r["episode"] % 10 == 0:
        print(f"episode {r['episode']:>4}  return {r['return']:9.1f}")
    elif r["type"] == "eval":
        print(f"   eval after {r['env_steps']} steps: {r['mean']:.1f} +- {r['std']:.1f}")


rec = train(cfg, on_record=show)
print("stopped:", rec.records[-1]["stopped"], f"after {rec.timing['wall_seconds']:.0f}s")
print("episodes until a 10-episode training average of -250:", episodes_to_threshold(rec.episode_returns, -250))
