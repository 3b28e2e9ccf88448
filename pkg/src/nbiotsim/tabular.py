"""Tabular Q-learning over a bucketed version of the last observation.

The preamble tallies are kept exact (clipped at the largest preamble count);
the served/unserved counts are clipped and bucketed so the table stays small.
"""

from __future__ import annotations

import numpy as np

from .core import TtiObservation
from .agents import argmax_random_tie


def observation_key(obs: TtiObservation, preamble_cap: int = 48,
                    served_cap: int = 64, served_bucket: int = 4) -> tuple:
    """Discretized state index for the single-group observation."""
    return (
        min(obs.v_su[0], served_cap) // served_bucket,
        min(obs.v_un[0], served_cap) // served_bucket,
        min(obs.v_cp[0], preamble_cap),
        min(obs.v_sp[0], preamble_cap),
        min(obs.v_ip[0], preamble_cap),
    )


def select_action(q: dict, skey, n_actions: int, eps: float,
                  rng: np.random.Generator) -> int:
    """Epsilon-greedy over one table row; ties split uniformly."""
    if rng.random() < eps:
        return int(rng.integers(n_actions))
    row = q.get(skey)
    if row is None:
        return int(rng.integers(n_actions))
    return argmax_random_tie(row, rng)


def update(q: dict, skey, a: int, r: float, s2key, lam: float, gamma: float,
           n_actions: int) -> None:
    """Constant-step-size Q-learning update:
    Q(s,a) += lam * (r + gamma * max_a' Q(s',a') - Q(s,a))."""
    row = q.setdefault(skey, np.zeros(n_actions))
    nxt = q.get(s2key)
    boot = float(nxt.max()) if nxt is not None else 0.0
    row[a] += lam * (r + gamma * boot - row[a])


class TabularQAgent:
    """Lookup-table agent compatible with the single-group training loop."""

    def __init__(self, n_actions: int, lam: float = 0.01, gamma: float = 0.5,
                 key_fn=observation_key):
        self.q: dict = {}
        self.n_actions = n_actions
        self.lam = lam
        self.gamma = gamma
        self.key_fn = key_fn

    def select_action(self, state, obs, eps, rng) -> int:
        return select_action(self.q, self.key_fn(obs), self.n_actions, eps, rng)

    def learn(self, s, s_obs, a, r, s2, s2_obs, rng) -> None:
        update(self.q, self.key_fn(s_obs), a, r, self.key_fn(s2_obs),
               self.lam, self.gamma, self.n_actions)

    def checkpoint_arrays(self):
        """Flatten the table to (keys, values) arrays for the checkpoint file."""
        if not self.q:
            return [np.zeros((0, 5)), np.zeros((0, self.n_actions))]
        keys = np.array(sorted(self.q.keys()), dtype=float)
        values = np.array([self.q[tuple(int(v) for v in k)] for k in keys])
        return [keys, values]

    def restore_arrays(self, arrays) -> None:
        keys, values = arrays
        self.q = {
            tuple(int(v) for v in k): np.array(row)
            for k, row in zip(keys.reshape(-1, 5), values.reshape(keys.shape[0], -1))
        }
