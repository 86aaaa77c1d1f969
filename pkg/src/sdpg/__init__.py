"""Sample-based distributional policy gradient (SDPG) and a categorical D4PG baseline.

Plain numpy networks, a quantile Huber critic loss, a replay pool, three
small environments with known return laws, and a training loop.
"""
from .agent import SDPGAgent
from .config import TrainConfig, load_config
from .d4pg import D4PGAgent, categorical_project
from .distloss import midpoint_quantiles, quantile_huber_loss, sorted_wasserstein
from .envs import make_env
from .trainer import RunRecord, evaluate, train

__version__ = "0.1.0"

__all__ = [
    "D4PGAgent", "RunRecord", "SDPGAgent", "TrainConfig", "categorical_project", "evaluate",
    "load_config", "make_env", "midpoint_quantiles", "quantile_huber_loss", "sorted_wasserstein",
    "train",
]
