"""The actor/learner training loop, evaluation, and distribution diagnostics."""
from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from ._alloc import keep_heap_allocations
from .agent import SDPGAgent, stratified_normal
from .config import TrainConfig
from .d4pg import D4PGAgent
from .distloss import sorted_wasserstein
from .envs import make_env
from .replay import ReplayPool, Transition


@dataclass
class RunRecord:
    """Append-only list of JSON-serialisable records.

    Wall-clock timings live in ``timing`` and are kept out of ``records`` so
    that the record stream is reproducible byte for byte.
    """
    records: list = field(default_factory=list)
    timing: dict = field(default_factory=dict)
    agent: object = None

    def add(self, kind: str, **fields):
        rec = {"type": kind, **fields}
        self.records.append(rec)
        return rec

    def of_type(self, kind):
        return [r for r in self.records if r["type"] == kind]

    @property
    def episode_returns(self):
        return [r["return"] for r in self.of_type("episode")]

    @property
    def evals(self):
        return self.of_type("eval")

    def lines(self):
        for r in self.records:
            yield json.dumps(r, sort_keys=True)

    def dumps(self) -> str:
        return "".join(line + "\n" for line in self.lines())

    def write(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())


def read_records(path) -> list:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def make_env_from_config(cfg: TrainConfig):
    return make_env(cfg.env_name, **cfg.env_params)


def build_agent(cfg: TrainConfig, env, seed=None):
    s = env.spec
    seed = cfg.seed if seed is None else seed
    common = dict(hidden=cfg.hidden, gamma=cfg.gamma, alpha=cfg.alpha, beta=cfg.beta,
                  optimizer=cfg.optimizer, seed=seed, dtype=cfg.dtype)
    if cfg.algorithm == "sdpg":
        return SDPGAgent.build(s.obs_dim, s.action_dim, s.action_low, s.action_high,
                               n_samples=cfg.n_samples, zeta=cfg.zeta, noise_dim=cfg.noise_dim, **common)
    return D4PGAgent.build(s.obs_dim, s.action_dim, s.action_low, s.action_high,
                           n_atoms=cfg.n_atoms, v_min=cfg.v_min, v_max=cfg.v_max, **common)


def evaluate(agent, env_factory, episodes: int, seeds=None):
    """Mean and std of undiscounted returns of the deterministic policy.

    Episodes run in lockstep on separate environment instances so the actor
    is evaluated on one batch per time step. ``env_factory`` builds a fresh
    environment; ``seeds`` gives the reset seed of each episode.
    """
    if episodes < 1:
        raise ValueError("need at least one evaluation episode")
    seeds = list(range(episodes)) if seeds is None else list(seeds)
    envs = [env_factory() for _ in range(episodes)]
    obs = np.array([e.reset(sd) for e, sd in zip(envs, seeds)])
    returns = np.zeros(episodes)
    live = np.ones(episodes, dtype=bool)
    while live.any():
        idx = np.flatnonzero(live)
        actions = agent.act_batch(obs[idx])
        for k, i in enumerate(idx):
            res = envs[i].step(actions[k])
            returns[i] += res.reward
            obs[i] = res.next_obs
            if res.done:
                live[i] = False
    return float(returns.mean()), float(returns.std()), returns


def _seeds(seed: int):
    ss = np.random.SeedSequence(seed)
    return [int(c.generate_state(1, np.uint64)[0]) for c in ss.spawn(4)]


def _sync(agent, cfg: TrainConfig, updates: int):
    if cfg.target_mode == "soft":
        agent.target_sync("soft", cfg.tau)
    elif updates % cfg.hard_every == 0:
        agent.target_sync("hard")


def _learn(agent, pool, cfg: TrainConfig, updates: int):
    batch = pool.sample(cfg.batch_size)
    closs = agent.critic_update(batch)
    aobj = agent.actor_update(batch.states) if cfg.train_actor else float("nan")
    _sync(agent, cfg, updates + 1)
    return closs, aobj


def train(cfg: TrainConfig, env=None, agent=None, checkpoint_dir=None, on_record=None) -> RunRecord:
    """Run the interleaved actor/learner loop described by ``cfg``.

    Each environment step pushes one transition; once the pool holds
    ``warmup`` transitions every step is followed by ``updates_per_step``
    learner updates (sample, critic step, actor step, target sync). The
    deterministic policy is evaluated every ``eval_every`` environment steps.
    """
    keep_heap_allocations()
    env = env if env is not None else make_env_from_config(cfg)
    init_seed, pool_seed, env_seed, eval_seed = _seeds(cfg.seed)
    agent = agent if agent is not None else build_agent(cfg, env, init_seed)
    rec = RunRecord(agent=agent)
    header = rec.add("config", seed=cfg.seed, config=cfg.to_dict())
    if on_record is not None:
        on_record(header)
    if cfg.threads == 2:
        return _train_threaded(cfg, env, agent, rec, pool_seed, env_seed, eval_seed)
    t_start = time.perf_counter()

    s = env.spec
    pool = ReplayPool(cfg.replay_capacity, s.obs_dim, s.action_dim, seed=pool_seed)
    env_rng = np.random.default_rng(env_seed)
    eval_seeds = np.random.default_rng(eval_seed).integers(0, 2 ** 31, cfg.eval_episodes).tolist()
    factory = lambda: make_env(env.name, **cfg.env_params)  # noqa: E731

    def emit(kind, **fields):
        r = rec.add(kind, **fields)
        if on_record is not None:
            on_record(r)

    steps = updates = episode = 0
    ep_return, ep_len = 0.0, 0
    c_losses, a_objs = [], []
    stopped = "max_env_steps"
    x = env.reset(int(env_rng.integers(2 ** 31))) if cfg.max_env_steps > 0 else None
    while steps < cfg.max_env_steps:
        a = agent.explore_act(x, cfg.delta)
        res = env.step(a)
        pool.push(Transition(x, a, res.reward, res.next_obs, res.terminal))
        steps += 1
        ep_return += res.reward
        ep_len += 1
        x = res.next_obs

        if len(pool) >= cfg.warmup_steps:
            for _ in range(cfg.updates_per_step):
                closs, aobj = _learn(agent, pool, cfg, updates)
                updates += 1
                c_losses.append(closs)
                a_objs.append(aobj)
                if updates % cfg.log_every == 0:
                    emit("updates", updates=updates, env_steps=steps,
                         critic_loss=float(np.mean(c_losses)), actor_objective=float(np.mean(a_objs)))
                    c_losses, a_objs = [], []

        if res.done:
            episode += 1
            emit("episode", episode=episode, env_steps=steps, length=ep_len, **{"return": ep_return})
            ep_return, ep_len = 0.0, 0
            x = env.reset(int(env_rng.integers(2 ** 31)))

        if cfg.eval_every and steps % cfg.eval_every == 0:
            mean, std, _ = evaluate(agent, factory, cfg.eval_episodes, eval_seeds)
            emit("eval", env_steps=steps, episode=episode, updates=updates, mean=mean, std=std,
                 episodes=cfg.eval_episodes)
            if cfg.stop_return is not None and mean >= cfg.stop_return:
                stopped = "stop_return"
                break
        if checkpoint_dir is not None and cfg.checkpoint_every and steps % cfg.checkpoint_every == 0:
            from .checkpoint import save_agent
            save_agent(agent, f"{checkpoint_dir}/agent_{steps:09d}.ckpt")
        if cfg.max_episodes and episode >= cfg.max_episodes:
            stopped = "max_episodes"
            break

    final = fit_report(agent, env, cfg)
    if final:
        emit("fit", env_steps=steps, **final)
    emit("end", env_steps=steps, episodes=episode, updates=updates, stopped=stopped)
    rec.timing = {"wall_seconds": time.perf_counter() - t_start, "env_steps": steps, "updates": updates}
    rec.pool = pool
    return rec


def _train_threaded(cfg, env, agent, rec, pool_seed, env_seed, eval_seed):
    """Actor thread collects with a parameter snapshot; learner thread updates.

    The pool is the only shared structure. Not reproducible: interleaving
    depends on scheduling.
    """
    t_start = time.perf_counter()
    s = env.spec
    pool = ReplayPool(cfg.replay_capacity, s.obs_dim, s.action_dim, seed=pool_seed)
    env_rng = np.random.default_rng(env_seed)
    eval_seeds = np.random.default_rng(eval_seed).integers(0, 2 ** 31, cfg.eval_episodes).tolist()
    factory = lambda: make_env(env.name, **cfg.env_params)  # noqa: E731
    lock = threading.Lock()
    snapshot = {"net": agent.actor.net.copy()}
    done = threading.Event()
    counters = {"updates": 0, "steps": 0}

    def actor_loop():
        from .agent import Actor, explore_act
        episode = 0
        x = env.reset(int(env_rng.integers(2 ** 31)))
        ret = 0.0
        length = 0
        local = Actor(snapshot["net"], snapshot["net"], agent.actor.action_low, agent.actor.action_high)
        while counters["steps"] < cfg.max_env_steps:
            with lock:
                local.net = snapshot["net"]
            a = explore_act(local, x, cfg.delta, agent.noise)
            res = env.step(a)
            pool.push(Transition(x, a, res.reward, res.next_obs, res.terminal))
            counters["steps"] += 1
            ret += res.reward
            length += 1
            x = res.next_obs
            if res.done:
                episode += 1
                with lock:
                    rec.add("episode", episode=episode, env_steps=counters["steps"], length=length,
                            **{"return": ret})
                ret, length = 0.0, 0
                x = env.reset(int(env_rng.integers(2 ** 31)))
            if cfg.eval_every and counters["steps"] % cfg.eval_every == 0:
                mean, std, _ = evaluate(_SnapshotPolicy(local), factory, cfg.eval_episodes, eval_seeds)
                with lock:
                    rec.add("eval", env_steps=counters["steps"], episode=episode,
                            updates=counters["updates"], mean=mean, std=std, episodes=cfg.eval_episodes)
                if cfg.stop_return is not None and mean >= cfg.stop_return:
                    break
        done.set()

    def learner_loop():
        while not done.is_set():
            if len(pool) < cfg.warmup_steps:
                time.sleep(0.001)
                continue
            _learn(agent, pool, cfg, counters["updates"])
            counters["updates"] += 1
            with lock:
                snapshot["net"] = agent.actor.net.copy()

    threads = [threading.Thread(target=actor_loop), threading.Thread(target=learner_loop)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    rec.add("end", env_steps=counters["steps"], episodes=len(rec.of_type("episode")),
            updates=counters["updates"], stopped="threaded")
    rec.timing = {"wall_seconds": time.perf_counter() - t_start}
    rec.pool = pool
    return rec


class _SnapshotPolicy:
    def __init__(self, actor):
        self.actor = actor

    def act_batch(self, X):
        from .agent import act_batch
        return act_batch(self.actor, X)


# -- diagnostics --------------------------------------------------------------

def critic_quantile_samples(agent, x, a, count: int, noise="stratified", rng=None) -> np.ndarray:
    """``count`` return samples at (x, a), sorted ascending.

    ``noise="stratified"`` feeds normal quantiles at the midpoint levels
    instead of random draws, removing Monte-Carlo noise from diagnostics.
    """
    x = np.asarray(x, dtype=float).reshape(1, -1)
    a = np.asarray(a, dtype=float).reshape(1, -1)
    nd = getattr(agent.critic, "noise_dim", 1)
    if noise == "stratified":
        Q = stratified_normal(count, nd)[None]
    else:
        rng = rng if rng is not None else np.random.default_rng(0)
        Q = rng.standard_normal((1, count, nd))
    return np.sort(np.asarray(agent.return_samples(x, a, Q)).reshape(-1).astype(float))


def oracle_quantiles(env, gamma, levels, action=None):
    """Analytic return quantiles from the start state, or None when unknown."""
    if env.name == "bandit":
        return env.quantile(levels, action)
    if env.name == "chain":
        from scipy.stats import norm
        mean, var = env.return_law(gamma)
        return mean + np.sqrt(var) * norm.ppf(levels)
    return None


def reward_range(env, gamma) -> float:
    """Spread between the 0.1% and 99.9% quantiles of the oracle return law."""
    lo, hi = oracle_quantiles(env, gamma, [0.001, 0.999])
    return float(hi - lo)


def distribution_fit_error(agent, env, gamma, count=1000, noise="stratified"):
    """W1 between critic samples at the start state and the oracle quantiles."""
    levels = (np.arange(count) + 0.5) / count
    x0 = env.reset(0)
    a0 = agent.act(x0)
    target = oracle_quantiles(env, gamma, levels, a0)
    if target is None:
        return None
    z = critic_quantile_samples(agent, x0, a0, count, noise)
    return sorted_wasserstein(z, target, 1)


def fit_report(agent, env, cfg: TrainConfig):
    if env.name not in ("bandit", "chain"):
        return None
    x0 = env.reset(0)
    a0 = agent.act(x0)
    z = critic_quantile_samples(agent, x0, a0, 1000)
    w1 = distribution_fit_error(agent, env, cfg.gamma)
    return {"w1": w1, "w1_relative": w1 / reward_range(env, cfg.gamma),
            "critic_mean": float(z.mean()), "critic_std": float(z.std())}


def dump_return_histograms(agent, env, pairs: int, samples_per_pair: int, seed=0,
                           rollout_steps=None, noise="random"):
    """Critic samples next to Bellman-target samples at random visited pairs.

    Pairs are drawn from an exploratory rollout. Target samples re-simulate
    the transition from the stored state ``samples_per_pair`` times, so a
    stochastic reward or successor contributes its spread.
    """
    rng = np.random.default_rng(seed)
    rollout_steps = rollout_steps or max(pairs * 5, env.spec.max_episode_steps)
    visited = []
    x = env.reset(int(rng.integers(2 ** 31)))
    for _ in range(rollout_steps):
        a = agent.act(x)
        a = np.clip(a + 0.3 * rng.standard_normal(a.shape), env.spec.action_low, env.spec.action_high)
        visited.append((x.copy(), a, env.snapshot()))
        res = env.step(a)
        x = res.next_obs
        if res.done:
            x = env.reset(int(rng.integers(2 ** 31)))
    picks = rng.choice(len(visited), size=pairs, replace=len(visited) < pairs)
    nd = getattr(agent.critic, "noise_dim", 1)
    out = []
    for p in picks:
        x, a, snap = visited[p]
        if noise == "stratified":
            Q = stratified_normal(samples_per_pair, nd)
        else:
            Q = rng.standard_normal((samples_per_pair, nd))
        z = np.asarray(agent.return_samples(x[None], a[None], Q[None])).reshape(-1)
        targets = np.empty(samples_per_pair)
        for j in range(samples_per_pair):
            env.restore(snap)
            res = env.step(a)
            if res.terminal:
                targets[j] = res.reward
            else:
                xn = res.next_obs[None]
                an = _target_action(agent, xn)
                qn = rng.standard_normal((1, 1, nd))
                zn = np.asarray(agent.return_samples(xn, an, qn, target=True)).reshape(-1)[0]
                targets[j] = res.reward + agent.gamma * zn
        out.append({"state": x.tolist(), "action": np.asarray(a).tolist(),
                    "critic_samples": [float(v) for v in z],
                    "target_samples": [float(v) for v in targets]})
    env.reset(0)
    return out


def _target_action(agent, X):
    from .agent import act_batch
    return act_batch(agent.actor, X, target=True)


def sample_count_sweep(cfg: TrainConfig, n_values, seeds=(0,)) -> dict:
    """One training run per (n, seed); returns {(n, seed): RunRecord}."""
    out = {}
    for n in n_values:
        for seed in seeds:
            out[(int(n), int(seed))] = train(cfg.replace(n_samples=int(n), seed=int(seed)))
    return out


def episodes_to_threshold(returns, threshold, window=10):
    """Smallest 1-based m with mean(returns[m-1 : m-1+window+1]) >= threshold, else None."""
    r = np.asarray(returns, dtype=float)
    for m in range(len(r) - window):
        if r[m:m + window + 1].mean() >= threshold:
            return m + 1
    return None


def first_eval_reaching(record: RunRecord, threshold):
    """(episode, env_steps) of the first evaluation with mean >= threshold, else None."""
    for e in record.evals:
        if e["mean"] >= threshold:
            return e["episode"], e["env_steps"]
    return None
