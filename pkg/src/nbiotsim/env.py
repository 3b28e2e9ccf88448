"""The decision loop: apply a per-TTI uplink configuration, advance the
simulator through traffic arrivals, RACH contention, and data scheduling,
and emit the observation, the reward, and an agent-facing state window.

The environment never discounts; it exposes only per-TTI rewards.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    F_PREA_SET,
    InvalidActionError,
    N_RACH_SET,
    N_REPE_SET,
    SimParams,
    TtiConfig,
    TtiObservation,
    GroupConfig,
    data_resource_budget,
    rach_resource_cost,
)
from .devices import DevicePopulation
from .mac import run_rach_period, schedule_data
from .traffic import BetaProfile, periodic_arrivals_in_window

STATE_MODES = ("last_obs", "obs_window", "action_obs_window")

# parameter index layout used in flattened action vectors: one triple per group
PARAM_SETS = (N_RACH_SET, N_REPE_SET, F_PREA_SET)


@dataclass(frozen=True)
class EpisodeConfig:
    """Shape of one episode and of the agent-facing state."""

    mode: str = "single-group"
    horizon: int = 937
    m_o: int = 4                       # stored observations in windowed states
    state_mode: str = "obs_window"
    fixed_n_rach: int = 1              # single-group scenario constants
    fixed_n_repe: int = 4

    def __post_init__(self):
        if self.mode not in ("single-group", "multi-group"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.state_mode not in STATE_MODES:
            raise ValueError(f"unknown state_mode {self.state_mode!r}")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.m_o < 1:
            raise ValueError("m_o must be >= 1")

    @property
    def n_groups(self) -> int:
        return 1 if self.mode == "single-group" else 3


def reward_single(v_su_0: int, c_su: int) -> float:
    """Normalized single-group reward: served devices over c_su."""
    return v_su_0 / c_su

def reward_multi(v_su, c_su: int) -> float:
    """Normalized multi-group reward: total served devices over c_su."""
    return sum(v_su) / c_su


def config_indices(cfg: TtiConfig) -> np.ndarray:
    """Flatten a TtiConfig to indices into the legal sets (3 per group)."""
    out = np.empty(3 * cfg.n_groups, dtype=np.int64)
    for i, g in enumerate(cfg.groups):
        out[3 * i + 0] = N_RACH_SET.index(g.n_rach)
        out[3 * i + 1] = N_REPE_SET.index(g.n_repe)
        out[3 * i + 2] = F_PREA_SET.index(g.f_prea)
    return out


def config_from_indices(idx, n_groups: int) -> TtiConfig:
    idx = np.asarray(idx, dtype=np.int64)
    groups = tuple(
        GroupConfig(N_RACH_SET[idx[3 * i]], N_REPE_SET[idx[3 * i + 1]],
                    F_PREA_SET[idx[3 * i + 2]])
        for i in range(n_groups)
    )
    return TtiConfig(groups)


class UplinkEnv:
    """Discrete-time NB-IoT uplink simulator with a step interface.

    One ``step`` runs a full TTI: per-group RACH periods with traffic
    arrivals assigned to the earliest subsequent period, contention and
    detection, then randomly ordered data scheduling over the pooled budget.
    """

    def __init__(self, params: SimParams, episode: EpisodeConfig,
                 population: DevicePopulation | None = None,
                 rng: np.random.Generator | None = None):
        self.params = params
        self.episode = episode
        self.n_groups = episode.n_groups
        if population is None:
            pop_rng = np.random.default_rng([params.seed, 0x9E37])
            population = DevicePopulation(params, episode.mode, pop_rng)
        if population.n_groups != self.n_groups:
            raise ValueError("population mode does not match episode mode")
        self.pop = population
        self.rng = rng if rng is not None else np.random.default_rng(params.seed)
        self.profile = BetaProfile.from_params(params)
        self._obs_scale = self._make_obs_scale()
        self._act_scale = np.array(
            [len(s) - 1 for s in PARAM_SETS] * self.n_groups, dtype=float
        )
        self.state_dim = self._state_dim()
        self._active = False
        self.tti = 0
        self.last_obs: TtiObservation | None = None
        self.last_info: dict = {}

    # ------------------------------------------------------------------ state
    def _make_obs_scale(self) -> np.ndarray:
        p = self.params
        pre_max = max(N_RACH_SET) * max(F_PREA_SET)
        if self.episode.mode == "single-group":
            pre_max = self.episode.fixed_n_rach * max(F_PREA_SET)
        return np.array([pre_max, pre_max, pre_max, p.c_su, p.c_su], dtype=float)

    def _state_dim(self) -> int:
        per_obs = 5 * self.n_groups
        if self.episode.state_mode == "last_obs":
            return per_obs
        if self.episode.state_mode == "obs_window":
            return per_obs * self.episode.m_o
        return (per_obs + 3 * self.n_groups) * self.episode.m_o

    def _obs_vector(self, obs: TtiObservation) -> np.ndarray:
        raw = np.array([
            [obs.v_cp[i], obs.v_sp[i], obs.v_ip[i], obs.v_su[i], obs.v_un[i]]
            for i in range(self.n_groups)
        ], dtype=float)
        return (raw / self._obs_scale).ravel()

    def _slot_vector(self, action: TtiConfig, obs: TtiObservation) -> np.ndarray:
        if self.episode.state_mode == "action_obs_window":
            a = config_indices(action) / self._act_scale
            return np.concatenate([a, self._obs_vector(obs)])
        return self._obs_vector(obs)

    def _push_slot(self, action: TtiConfig, obs: TtiObservation) -> None:
        if self.episode.state_mode == "last_obs":
            self._window = [self._slot_vector(action, obs)]
            return
        self._window.insert(0, self._slot_vector(action, obs))
        del self._window[self.episode.m_o:]

    def state(self) -> np.ndarray:
        """Current agent state: newest slot first, zero-padded to fixed length."""
        out = np.zeros(self.state_dim)
        if not self._window:
            return out
        flat = np.concatenate(self._window)
        out[: flat.size] = flat
        return out

    # ------------------------------------------------------------- lifecycle
    def sample_random_action(self, rng: np.random.Generator | None = None) -> TtiConfig:
        """A uniformly random valid configuration for this scenario."""
        rng = rng or self.rng
        if self.episode.mode == "single-group":
            f = F_PREA_SET[rng.integers(len(F_PREA_SET))]
            return TtiConfig.single(self.episode.fixed_n_rach, self.episode.fixed_n_repe, f)
        while True:
            idx = np.array([rng.integers(len(PARAM_SETS[k % 3])) for k in range(9)])
            cfg = config_from_indices(idx, 3)
            if rach_resource_cost(cfg, self.params) <= self.params.r_uplink:
                return cfg

    def reset(self, initial_action: TtiConfig | None = None,
              rng: np.random.Generator | None = None) -> np.ndarray:
        """Start an episode: clear device state, execute the initial action
        (a random one when not supplied) and return the first agent state."""
        if rng is not None:
            self.rng = rng
        self.pop.reset(self.params, self.rng)
        self.profile = BetaProfile.from_params(self.params)
        self._window: list = []
        self.tti = 0
        self._steps = 0
        self._active = True
        if initial_action is None:
            initial_action = self.sample_random_action()
        self._validate(initial_action)
        obs = self._advance(initial_action)
        self.last_obs = obs
        self._push_slot(initial_action, obs)
        return self.state()

    def step(self, action: TtiConfig):
        """Advance one TTI. Returns (next_state, reward, observation)."""
        if not self._active:
            raise RuntimeError("episode is not active; call reset()")
        self._validate(action)
        obs = self._advance(action)
        reward = reward_multi(obs.v_su, self.params.c_su)
        self.last_obs = obs
        self._push_slot(action, obs)
        self._steps += 1
        if self._steps >= self.episode.horizon:
            self._active = False
        return self.state(), reward, obs

    @property
    def active(self) -> bool:
        return self._active

    def pending_by_group(self) -> np.ndarray:
        """Ground-truth count of devices poised to attempt RACH (oracle)."""
        mask = (self.pop.backlog > 0) & ~self.pop.rrc
        return np.bincount(self.pop.group[mask], minlength=self.n_groups)

    # ----------------------------------------------------------------- core
    def _validate(self, action: TtiConfig) -> None:
        if action.n_groups != self.n_groups:
            raise InvalidActionError(
                f"action has {action.n_groups} groups, scenario needs {self.n_groups}"
            )
        data_resource_budget(action, self.params)  # raises when over budget

    def _advance(self, action: TtiConfig) -> TtiObservation:
        """Run one TTI under ``action`` and return the observation."""
        p = self.params
        pop = self.pop
        rng = self.rng
        n_groups = self.n_groups
        t0_ms = self.tti * p.t_tti_ms

        v_cp = np.zeros(n_groups, dtype=np.int64)
        v_sp = np.zeros(n_groups, dtype=np.int64)
        v_ip = np.zeros(n_groups, dtype=np.int64)
        arrivals = 0
        drops = np.zeros(n_groups, dtype=np.int64)
        new_success = np.zeros(n_groups, dtype=np.int64)
        attempted = np.zeros(pop.n, dtype=bool)

        carry_over = int(pop.rrc.sum())
        # arrivals follow the TTI-start group assignment so that each group's
        # period windows tile the TTI exactly once per device even when a
        # device escalates mid-TTI
        group_snap = pop.group.copy()
        max_periods = max(g.n_rach for g in action.groups)
        for j in range(max_periods):
            attempters = []
            for i in range(n_groups):
                n_rach = action.n_rach(i)
                if j >= n_rach:
                    attempters.append(None)
                    continue
                delta = p.t_tti_ms / n_rach
                a_ms = t0_ms + j * delta
                arrivals += self._generate_arrivals(i, group_snap, a_ms, a_ms + delta)
                mask = (pop.group == i) & (pop.backlog > 0) & ~pop.rrc
                if not p.intra_tti_retry:
                    mask &= ~attempted
                attempters.append(np.flatnonzero(mask))
            out = run_rach_period(attempters, action, p, rng, pop.distance_m)
            v_cp += out.v_cp
            v_sp += out.v_sp
            v_ip += out.v_ip
            for i in range(n_groups):
                if out.success[i] is None:
                    continue
                ok = out.success[i]
                failed = np.concatenate([out.collided[i], out.undetected[i]])
                attempted[ok] = True
                attempted[failed] = True
                new_success[i] += ok.size
                self._apply_success(ok)
                drops += self._apply_failure(failed)

        obs_vsu, obs_vun, expired = self._schedule(action)
        self.tti += 1
        self.last_info = {
            "arrivals": arrivals,
            "v_drop": int(drops.sum()),
            "drops_by_group": drops,
            "new_rach_success": new_success,
            "carry_over": carry_over,
            "expired": expired,
        }
        return TtiObservation(
            tuple(int(x) for x in v_cp),
            tuple(int(x) for x in v_sp),
            tuple(int(x) for x in v_ip),
            tuple(int(x) for x in obs_vsu),
            tuple(int(x) for x in obs_vun),
        )

    def _generate_arrivals(self, group: int, group_snap: np.ndarray,
                           a_ms: float, b_ms: float) -> int:
        pop = self.pop
        p = self.params
        members = group_snap == group
        new = 0
        per_mask = members & ~pop.is_bursty
        if per_mask.any():
            idx = np.flatnonzero(per_mask)
            counts = periodic_arrivals_in_window(pop.t0_periodic[idx], a_ms, b_ms,
                                                 p.t_periodic_ms)
            if counts.any():
                pop.backlog[idx] += counts
                new += int(counts.sum())
        bur_mask = members & pop.is_bursty
        nb = int(bur_mask.sum())
        if nb:
            q = self.profile.window_integral(a_ms, b_ms)
            if q > 0.0:
                hit = self.rng.random(nb) < q
                if hit.any():
                    idx = np.flatnonzero(bur_mask)[hit]
                    pop.backlog[idx] += 1
                    new += int(hit.sum())
        if p.backlog_cap:
            np.minimum(pop.backlog, p.backlog_cap, out=pop.backlog)
        return new

    def _apply_success(self, idx: np.ndarray) -> None:
        pop = self.pop
        pop.c_pce[idx] = 0
        pop.c_pmax[idx] = 0
        pop.c_rrc[idx] = 0
        pop.rrc[idx] = True

    def _apply_failure(self, idx: np.ndarray) -> np.ndarray:
        """Advance retry counters of failed attempters; returns per-group drops."""
        pop = self.pop
        p = self.params
        drops = np.zeros(self.n_groups, dtype=np.int64)
        if idx.size == 0:
            return drops
        pop.c_pce[idx] += 1
        pop.c_pmax[idx] += 1
        pce_hit = idx[pop.c_pce[idx] >= p.gamma_pce]
        if pce_hit.size:
            can_up = pce_hit[pop.group[pce_hit] < self.n_groups - 1]
            pop.group[can_up] += 1
            pop.c_pce[can_up] = 0
            topped = pce_hit[pop.group[pce_hit] == self.n_groups - 1]
            pop.c_pce[topped] = np.minimum(pop.c_pce[topped], p.gamma_pce)
        dropped = idx[pop.c_pmax[idx] >= p.gamma_pmax]
        if dropped.size:
            drops += np.bincount(pop.group[dropped], minlength=self.n_groups)
            pop.backlog[dropped] = np.maximum(pop.backlog[dropped] - 1, 0)
            pop.c_pce[dropped] = 0
            pop.c_pmax[dropped] = 0
            pop.group[dropped] = pop.home_group[dropped]
        return drops

    def _schedule(self, action: TtiConfig):
        """Serve RRC-connected devices within the data budget; expire stale
        connections. Returns (v_su, v_un, expired) per group."""
        pop = self.pop
        p = self.params
        r_data = data_resource_budget(action, p)
        connected = np.flatnonzero(pop.rrc)
        n_repe = np.array([action.n_repe(i) for i in range(self.n_groups)])
        costs = p.b_data * n_repe[pop.group[connected]]
        served, unserved = schedule_data(connected, costs, r_data, self.rng)

        v_su = np.bincount(pop.group[served], minlength=self.n_groups)
        if served.size:
            pop.backlog[served] = np.maximum(pop.backlog[served] - 1, 0)
            pop.rrc[served] = False
            pop.c_rrc[served] = 0
            pop.group[served] = pop.home_group[served]

        expired = np.zeros(self.n_groups, dtype=np.int64)
        if unserved.size:
            pop.c_rrc[unserved] += 1
            stale_mask = pop.c_rrc[unserved] >= p.gamma_rrc
            stale = unserved[stale_mask]
            waiting = unserved[~stale_mask]
            v_un = np.bincount(pop.group[waiting], minlength=self.n_groups)
            if stale.size:
                expired = np.bincount(pop.group[stale], minlength=self.n_groups)
                pop.rrc[stale] = False
                pop.c_rrc[stale] = 0
                pop.c_pce[stale] = 0
                pop.c_pmax[stale] = 0
                pop.group[stale] = pop.home_group[stale]
        else:
            v_un = np.zeros(self.n_groups, dtype=np.int64)
        return v_su, v_un, expired


# ------------------------------------------------------------------ policies
class Policy:
    """Minimal controller interface used by ``run_episode``."""

    def initial_action(self, env: UplinkEnv, rng: np.random.Generator) -> TtiConfig | None:
        return None  # None lets the environment draw a random action

    def reset(self, rng: np.random.Generator) -> None:
        pass

    def act(self, state: np.ndarray, obs: TtiObservation, info: dict) -> TtiConfig:
        raise NotImplementedError


@dataclass
class EpisodeResult:
    """Per-TTI trajectories of one episode plus headline statistics."""

    reward: np.ndarray
    v_su: np.ndarray       # (horizon, n_groups)
    v_un: np.ndarray
    v_cp: np.ndarray
    v_sp: np.ndarray
    v_ip: np.ndarray
    v_drop: np.ndarray     # (horizon,)
    arrivals: np.ndarray
    n_rach: np.ndarray     # (horizon, n_groups)
    n_repe: np.ndarray
    f_prea: np.ndarray

    @property
    def horizon(self) -> int:
        return self.reward.shape[0]

    def mean_v_su(self) -> float:
        return float(self.v_su.sum(axis=1).mean())

    def total_drops(self) -> int:
        return int(self.v_drop.sum())


def run_episode(env: UplinkEnv, policy: Policy,
                rng: np.random.Generator | None = None) -> EpisodeResult:
    """Roll one seeded episode under ``policy`` and collect metrics."""
    rng = rng if rng is not None else env.rng
    policy.reset(rng)
    state = env.reset(policy.initial_action(env, rng), rng=rng)
    obs = env.last_obs
    h = env.episode.horizon
    g = env.n_groups
    res = EpisodeResult(
        reward=np.zeros(h),
        v_su=np.zeros((h, g), dtype=np.int64),
        v_un=np.zeros((h, g), dtype=np.int64),
        v_cp=np.zeros((h, g), dtype=np.int64),
        v_sp=np.zeros((h, g), dtype=np.int64),
        v_ip=np.zeros((h, g), dtype=np.int64),
        v_drop=np.zeros(h, dtype=np.int64),
        arrivals=np.zeros(h, dtype=np.int64),
        n_rach=np.zeros((h, g), dtype=np.int64),
        n_repe=np.zeros((h, g), dtype=np.int64),
        f_prea=np.zeros((h, g), dtype=np.int64),
    )
    for t in range(h):
        info = {"pending": env.pending_by_group()}
        action = policy.act(state, obs, info)
        state, reward, obs = env.step(action)
        res.reward[t] = reward
        res.v_su[t] = obs.v_su
        res.v_un[t] = obs.v_un
        res.v_cp[t] = obs.v_cp
        res.v_sp[t] = obs.v_sp
        res.v_ip[t] = obs.v_ip
        res.v_drop[t] = env.last_info["v_drop"]
        res.arrivals[t] = env.last_info["arrivals"]
        for i in range(g):
            res.n_rach[t, i] = action.n_rach(i)
            res.n_repe[t, i] = action.n_repe(i)
            res.f_prea[t, i] = action.f_prea(i)
    return res
