"""Q-learning controllers and their training loops.

Single-group agents pick the preamble number directly; the multi-group
scenario is handled either by action aggregation (nine ascend/descend bits
over the current configuration, one value function over 2^9 composite
actions) or by a cooperative ensemble of nine independent DQN agents, one
per configuration variable, trained on a shared reward.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    F_PREA_SET,
    N_RACH_SET,
    N_REPE_SET,
    InvalidActionError,
    SimParams,
    TrainingDiverged,
    TtiConfig,
)
from .env import (
    EpisodeConfig,
    PARAM_SETS,
    Policy,
    UplinkEnv,
    config_from_indices,
    config_indices,
)
from .fapprox import LinearQ, Mlp, RmsProp, features, feature_count, linear_sgd_step

N_ACTION_VARS = 9  # three parameters for each of three CE groups


def argmax_random_tie(values: np.ndarray, rng: np.random.Generator) -> int:
    """Index of the maximum, drawn uniformly among exact ties."""
    values = np.asarray(values)
    best = np.flatnonzero(values == values.max())
    if best.size == 1:
        return int(best[0])
    return int(best[rng.integers(best.size)])


@dataclass(frozen=True)
class EpsilonSchedule:
    """Linear anneal from ``start`` to ``end`` over ``anneal_steps`` steps."""

    start: float = 1.0
    end: float = 0.1
    anneal_steps: int = 1

    def value(self, step: int) -> float:
        if step >= self.anneal_steps:
            return self.end
        frac = step / self.anneal_steps
        return self.start + (self.end - self.start) * frac


class ReplayMemory:
    """Fixed-capacity FIFO transition store with uniform minibatch sampling
    (without replacement inside one minibatch)."""

    def __init__(self, capacity: int, state_dim: int):
        self.capacity = capacity
        self.s = np.zeros((capacity, state_dim))
        self.a = np.zeros(capacity, dtype=np.int64)
        self.r = np.zeros(capacity)
        self.s2 = np.zeros((capacity, state_dim))
        self._next = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def push(self, s, a, r, s2) -> None:
        i = self._next
        self.s[i] = s
        self.a[i] = a
        self.r[i] = r
        self.s2[i] = s2
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch: int, rng: np.random.Generator):
        idx = rng.choice(self._size, size=batch, replace=False)
        return self.s[idx], self.a[idx], self.r[idx], self.s2[idx]


def ddqn_minibatch_step(primary: Mlp, target: Mlp, batch, gamma: float,
                        optimizer: RmsProp, double: bool = True) -> float:
    """One gradient step on the mean squared TD error of a minibatch.

    The bootstrap value at s' comes from the target network; with ``double``
    the action is chosen by the primary network (double estimator), otherwise
    the target network's own maximum is used. Gradients flow only through
    Q(s, a) of the primary network. Returns the minibatch loss.
    """
    s, a, r, s2 = batch
    n = s.shape[0]
    q_next_t = target.forward(s2)
    if double:
        q_next_p = primary.forward(s2)
        a_star = np.argmax(q_next_p, axis=1)
        boot = q_next_t[np.arange(n), a_star]
    else:
        boot = q_next_t.max(axis=1)
    target_vals = r + gamma * boot
    q, cache = primary.forward_cached(s)
    rows = np.arange(n)
    td = q[rows, a] - target_vals
    loss = float(0.5 * np.mean(td ** 2))
    if not np.isfinite(loss):
        raise TrainingDiverged("minibatch loss is not finite")
    d_out = np.zeros_like(q)
    d_out[rows, a] = td / n
    grads = primary.backward(cache, d_out)
    optimizer.step(primary.parameters(), grads)
    return loss


class DqnAgent:
    """Deep Q-network with replay memory and a periodically synced target."""

    def __init__(self, state_dim: int, n_actions: int, hidden=(128, 128, 128),
                 gamma: float = 0.5, lr: float = 1e-4, batch_size: int = 32,
                 sync_every: int = 1000, capacity: int = 10_000,
                 double: bool = True, rng: np.random.Generator | None = None):
        rng = rng if rng is not None else np.random.default_rng()
        self.net = Mlp((state_dim, *hidden, n_actions), rng)
        self.target = self.net.copy()
        self.optimizer = RmsProp(lr=lr)
        self.replay = ReplayMemory(capacity, state_dim)
        self.n_actions = n_actions
        self.gamma = gamma
        self.batch_size = batch_size
        self.sync_every = sync_every
        self.double = double
        self.step_count = 0

    def q_values(self, state: np.ndarray) -> np.ndarray:
        return self.net.forward(state)

    def select_action(self, state, obs, eps: float, rng: np.random.Generator) -> int:
        if rng.random() < eps:
            return int(rng.integers(self.n_actions))
        return argmax_random_tie(self.net.forward(state), rng)

    def learn(self, s, s_obs, a, r, s2, s2_obs, rng: np.random.Generator) -> float | None:
        self.replay.push(s, a, r, s2)
        self.step_count += 1
        loss = None
        if len(self.replay) >= self.batch_size:
            batch = self.replay.sample(self.batch_size, rng)
            loss = ddqn_minibatch_step(self.net, self.target, batch, self.gamma,
                                       self.optimizer, self.double)
        if self.step_count % self.sync_every == 0:
            self.target.copy_from(self.net)
        return loss

    def checkpoint_arrays(self):
        return list(self.net.parameters())

    def restore_arrays(self, arrays) -> None:
        for p, a in zip(self.net.parameters(), arrays):
            p[:] = a.reshape(p.shape)
        self.target.copy_from(self.net)


class LinearQAgent:
    """Linear value function over polynomial features, single-sample TD."""

    def __init__(self, state_dim: int, n_actions: int, degree: int = 2,
                 lam: float = 0.01, gamma: float = 0.5):
        self.degree = degree
        self.q = LinearQ(n_actions, feature_count(state_dim, degree))
        self.n_actions = n_actions
        self.lam = lam
        self.gamma = gamma

    def select_action(self, state, obs, eps: float, rng: np.random.Generator) -> int:
        if rng.random() < eps:
            return int(rng.integers(self.n_actions))
        return argmax_random_tie(self.q.predict(features(state, self.degree)), rng)

    def learn(self, s, s_obs, a, r, s2, s2_obs, rng: np.random.Generator) -> None:
        x_s = features(s, self.degree)
        x_n = features(s2, self.degree)
        linear_sgd_step(self.q.w, x_s, a, r, x_n, self.lam, self.gamma)

    def checkpoint_arrays(self):
        return [self.q.w]

    def restore_arrays(self, arrays) -> None:
        self.q.w[:] = arrays[0].reshape(self.q.w.shape)


# --------------------------------------------------------- composite actions
def cost_from_indices(idx: np.ndarray, params: SimParams) -> int:
    idx = np.asarray(idx, dtype=np.int64)
    total = 0
    for g in range(idx.size // 3):
        total += (N_RACH_SET[idx[3 * g]] * N_REPE_SET[idx[3 * g + 1]]
                  * F_PREA_SET[idx[3 * g + 2]])
    return params.b_rach * total


def project_feasible(idx, params: SimParams) -> np.ndarray:
    """Step a composite configuration down to the RE budget.

    Repeatedly decrements the parameter whose single-step descent removes the
    most RACH REs (first such index on ties), so the result is deterministic.
    """
    idx = np.asarray(idx, dtype=np.int64).copy()
    cost = cost_from_indices(idx, params)
    while cost > params.r_uplink:
        best_k = -1
        best_red = 0
        for k in range(idx.size):
            if idx[k] == 0:
                continue
            trial = idx.copy()
            trial[k] -= 1
            red = cost - cost_from_indices(trial, params)
            if red > best_red:
                best_red = red
                best_k = k
        if best_k < 0:
            raise InvalidActionError("no feasible configuration within the budget")
        idx[best_k] -= 1
        cost -= best_red
    return idx


def decode_bits(action: int) -> np.ndarray:
    """Nine ascend(1)/descend(0) bits from a composite action index."""
    return np.array([(action >> k) & 1 for k in range(N_ACTION_VARS)], dtype=np.int64)


def aa_step_indices(bits, cur_idx) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int64)
    cur = np.asarray(cur_idx, dtype=np.int64)
    sizes = np.array([len(PARAM_SETS[k % 3]) for k in range(cur.size)])
    return np.clip(cur + 2 * bits - 1, 0, sizes - 1)


def aa_wrap(bits, cfg: TtiConfig) -> TtiConfig:
    """Move each configuration parameter one index up or down its ordered
    legal set (clamped at the ends) according to the nine aggregation bits."""
    idx = aa_step_indices(bits, config_indices(cfg))
    return config_from_indices(idx, cfg.n_groups)


def midpoint_indices(n_groups: int = 3) -> np.ndarray:
    return np.array([len(PARAM_SETS[k % 3]) // 2 for k in range(3 * n_groups)],
                    dtype=np.int64)


class CmaEnsemble:
    """Nine independent DQN agents, one per configuration variable, sharing
    the state and the reward; each keeps its own replay and target copy."""

    def __init__(self, state_dim: int, hidden=(128, 128, 128), gamma: float = 0.5,
                 lr: float = 1e-4, batch_size: int = 32, sync_every: int = 1000,
                 capacity: int = 10_000, double: bool = True,
                 rng: np.random.Generator | None = None):
        rng = rng if rng is not None else np.random.default_rng()
        self.agents = [
            DqnAgent(state_dim, len(PARAM_SETS[k % 3]), hidden, gamma, lr,
                     batch_size, sync_every, capacity, double, rng)
            for k in range(N_ACTION_VARS)
        ]

    def select_indices(self, state, eps: float, rng: np.random.Generator) -> np.ndarray:
        return np.array([a.select_action(state, None, eps, rng) for a in self.agents],
                        dtype=np.int64)

    def learn(self, s, actions, r, s2, rng: np.random.Generator) -> None:
        for agent, a in zip(self.agents, actions):
            agent.learn(s, None, int(a), r, s2, None, rng)

    def checkpoint_arrays(self):
        out = []
        for a in self.agents:
            out.extend(a.checkpoint_arrays())
        return out

    def restore_arrays(self, arrays) -> None:
        per = len(self.agents[0].checkpoint_arrays())
        for k, agent in enumerate(self.agents):
            agent.restore_arrays(arrays[k * per:(k + 1) * per])


# ------------------------------------------------------------- training loops
@dataclass
class LearningCurve:
    """Per-training-episode averages."""

    mean_reward: list = field(default_factory=list)
    mean_v_su: list = field(default_factory=list)
    total_drops: list = field(default_factory=list)

    def append(self, rewards, v_su_total, drops) -> None:
        self.mean_reward.append(float(np.mean(rewards)))
        self.mean_v_su.append(float(np.mean(v_su_total)))
        self.total_drops.append(int(drops))


def single_group_config(episode: EpisodeConfig, action_index: int) -> TtiConfig:
    return TtiConfig.single(episode.fixed_n_rach, episode.fixed_n_repe,
                            F_PREA_SET[action_index])


def train_single_group(env: UplinkEnv, agent, episodes: int,
                       schedule: EpsilonSchedule, rng: np.random.Generator,
                       episode_rngs=None) -> LearningCurve:
    """Epsilon-greedy training of a single-group agent (tabular, linear, or
    deep); one value-function update per TTI."""
    curve = LearningCurve()
    step = 0
    for ep in range(episodes):
        ep_rng = episode_rngs(ep) if episode_rngs else rng
        state = env.reset(rng=ep_rng)
        obs = env.last_obs
        rewards = np.zeros(env.episode.horizon)
        served = np.zeros(env.episode.horizon)
        drops = 0
        for t in range(env.episode.horizon):
            a = agent.select_action(state, obs, schedule.value(step), rng)
            state2, r, obs2 = env.step(single_group_config(env.episode, a))
            agent.learn(state, obs, a, r, state2, obs2, rng)
            rewards[t] = r
            served[t] = sum(obs2.v_su)
            drops += env.last_info["v_drop"]
            state, obs = state2, obs2
            step += 1
        curve.append(rewards, served, drops)
    return curve


def train_aa(env: UplinkEnv, agent, episodes: int, schedule: EpsilonSchedule,
             rng: np.random.Generator, episode_rngs=None) -> LearningCurve:
    """Training with aggregated actions: the agent picks one of 2^9 composite
    ascend/descend actions applied to the carried configuration."""
    curve = LearningCurve()
    step = 0
    for ep in range(episodes):
        ep_rng = episode_rngs(ep) if episode_rngs else rng
        cur = project_feasible(midpoint_indices(), env.params)
        state = env.reset(config_from_indices(cur, 3), rng=ep_rng)
        obs = env.last_obs
        rewards = np.zeros(env.episode.horizon)
        served = np.zeros(env.episode.horizon)
        drops = 0
        for t in range(env.episode.horizon):
            a = agent.select_action(state, obs, schedule.value(step), rng)
            cur = project_feasible(aa_step_indices(decode_bits(a), cur), env.params)
            state2, r, obs2 = env.step(config_from_indices(cur, 3))
            agent.learn(state, obs, a, r, state2, obs2, rng)
            rewards[t] = r
            served[t] = sum(obs2.v_su)
            drops += env.last_info["v_drop"]
            state, obs = state2, obs2
            step += 1
        curve.append(rewards, served, drops)
    return curve


def train_cma(env: UplinkEnv, ensemble: CmaEnsemble, episodes: int,
              schedule: EpsilonSchedule, rng: np.random.Generator,
              episode_rngs=None) -> LearningCurve:
    """Cooperative multi-agent training: every TTI all nine agents pick their
    variable, the composite configuration is executed, and each agent stores
    the identical (state, reward, next-state) with its own action."""
    curve = LearningCurve()
    step = 0
    for ep in range(episodes):
        ep_rng = episode_rngs(ep) if episode_rngs else rng
        idx0 = project_feasible(ensemble.select_indices(np.zeros(env.state_dim), 1.0, rng),
                                env.params)
        state = env.reset(config_from_indices(idx0, 3), rng=ep_rng)
        rewards = np.zeros(env.episode.horizon)
        served = np.zeros(env.episode.horizon)
        drops = 0
        for t in range(env.episode.horizon):
            actions = ensemble.select_indices(state, schedule.value(step), rng)
            executed = project_feasible(actions, env.params)
            state2, r, obs2 = env.step(config_from_indices(executed, 3))
            ensemble.learn(state, actions, r, state2, rng)
            rewards[t] = r
            served[t] = sum(obs2.v_su)
            drops += env.last_info["v_drop"]
            state = state2
            step += 1
        curve.append(rewards, served, drops)
    return curve


# -------------------------------------------------------------- eval policies
class SingleGroupAgentPolicy(Policy):
    """Frozen single-group agent with a constant exploration rate."""

    def __init__(self, agent, episode: EpisodeConfig, epsilon: float = 0.0):
        self.agent = agent
        self.episode = episode
        self.epsilon = epsilon
        self._rng = np.random.default_rng()

    def reset(self, rng):
        self._rng = rng

    def act(self, state, obs, info):
        a = self.agent.select_action(state, obs, self.epsilon, self._rng)
        return single_group_config(self.episode, a)


class AaPolicy(Policy):
    """Frozen aggregated-action agent carrying the current configuration."""

    def __init__(self, agent, params: SimParams, epsilon: float = 0.0):
        self.agent = agent
        self.params = params
        self.epsilon = epsilon
        self._rng = np.random.default_rng()
        self._cur = project_feasible(midpoint_indices(), params)

    def initial_action(self, env, rng):
        self._cur = project_feasible(midpoint_indices(), self.params)
        return config_from_indices(self._cur, 3)

    def reset(self, rng):
        self._rng = rng

    def act(self, state, obs, info):
        a = self.agent.select_action(state, obs, self.epsilon, self._rng)
        self._cur = project_feasible(aa_step_indices(decode_bits(a), self._cur),
                                     self.params)
        return config_from_indices(self._cur, 3)


class CmaPolicy(Policy):
    """Frozen cooperative ensemble with a constant exploration rate."""

    def __init__(self, ensemble: CmaEnsemble, params: SimParams, epsilon: float = 0.0):
        self.ensemble = ensemble
        self.params = params
        self.epsilon = epsilon
        self._rng = np.random.default_rng()

    def initial_action(self, env, rng):
        idx = project_feasible(self.ensemble.select_indices(
            np.zeros(env.state_dim), 1.0, rng), self.params)
        return config_from_indices(idx, 3)

    def reset(self, rng):
        self._rng = rng

    def act(self, state, obs, info):
        idx = project_feasible(
            self.ensemble.select_indices(state, self.epsilon, self._rng), self.params)
        return config_from_indices(idx, 3)
