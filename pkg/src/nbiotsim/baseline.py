"""Heuristic uplink resource configuration.

The load estimator inverts the expected idle-preamble count of the previous
TTI and fuses it with the collision count; LE-URC then picks the preamble
number maximizing the expected number of served devices under the RE budget.
FSI-URC is the same controller fed the simulator's true attempter count, and
the multi-group variant runs one estimator per CE group inside a static
partition of the uplink budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import (
    F_PREA_SET,
    InvalidObservationError,
    SimParams,
    TtiConfig,
    GroupConfig,
)
from .env import Policy


def estimate_attempters(v_ip_prev: float, f_prea_prev: int,
                        zero_idle_sub: float = 0.5) -> float:
    """Attempter count whose expected idle-preamble count equals ``v_ip_prev``:
    log base (f-1)/f of (v_ip/f). A zero idle count is substituted with
    ``zero_idle_sub`` to keep the estimate finite."""
    if f_prea_prev < 2:
        raise ValueError("need at least two preambles to invert the idle count")
    if v_ip_prev < 0 or v_ip_prev > f_prea_prev:
        raise InvalidObservationError(
            f"idle count {v_ip_prev} outside 0..{f_prea_prev}"
        )
    v = v_ip_prev if v_ip_prev > 0 else zero_idle_sub
    return math.log(v / f_prea_prev) / math.log((f_prea_prev - 1) / f_prea_prev)


@dataclass
class LoadEstimatorState:
    """Running state of the load estimator."""

    zeta_prev: float = 0.0
    d_prev: float = 0.0
    delta: float = 0.0


def fuse_estimate(state: LoadEstimatorState, v_cp_prev: int) -> float:
    """Fused load estimate max{2*v_cp, zeta + delta}; advances delta to the
    difference of consecutive estimates for the next TTI."""
    d_est = max(2.0 * v_cp_prev, state.zeta_prev + state.delta)
    state.delta = d_est - state.d_prev
    state.d_prev = d_est
    return d_est


class LoadEstimator:
    """Convenience wrapper: feed each TTI's observed (v_ip, v_cp, f) and get
    the fused estimate for the next TTI."""

    def __init__(self, zero_idle_sub: float = 0.5):
        self.state = LoadEstimatorState()
        self.zero_idle_sub = zero_idle_sub

    def update(self, v_ip_prev: int, v_cp_prev: int, f_prea_prev: int) -> float:
        self.state.zeta_prev = estimate_attempters(v_ip_prev, f_prea_prev,
                                                   self.zero_idle_sub)
        return fuse_estimate(self.state, v_cp_prev)


def expected_success(n: float, f: int) -> float:
    """Expected singleton preambles among ``n`` attempters over ``f``
    preambles: n * (1 - 1/f)^(n-1). ``n`` may be fractional."""
    if n < 0 or f < 1:
        raise ValueError("need n >= 0 and f >= 1")
    if n == 0:
        return 0.0
    return n * (1.0 - 1.0 / f) ** (n - 1.0)


def choose_preambles(d_est: float, v_un_prev: int, n_rach: int, n_repe: int,
                     r_uplink_budget: int, params: SimParams) -> int:
    """Preamble number maximizing the expected served-device count

        min( n (1-1/f)^(n-1) + v_un , R_DATA(f) / r_DATA )

    over the legal set; ties break toward the smallest (cheapest) f, and f
    values whose RACH cost exceeds the budget are skipped."""
    r_data_per_dev = params.b_data * n_repe
    best_f = None
    best_v = -math.inf
    for f in F_PREA_SET:
        rach_cost = params.b_rach * n_rach * n_repe * f
        if rach_cost > r_uplink_budget:
            continue
        cap = (r_uplink_budget - rach_cost) / r_data_per_dev
        v = min(expected_success(d_est, f) + v_un_prev, cap)
        if v > best_v:
            best_v = v
            best_f = f
    if best_f is None:
        raise ValueError(f"no feasible preamble number within {r_uplink_budget} REs")
    return best_f


def fsi_choose_preambles(true_load: float, v_un_prev: int, n_rach: int, n_repe: int,
                         r_uplink_budget: int, params: SimParams) -> int:
    """``choose_preambles`` with oracle access to the true attempter count."""
    return choose_preambles(true_load, v_un_prev, n_rach, n_repe,
                            r_uplink_budget, params)


def multi_group_leurc(estimates, v_un_prev, n_repe_fixed, partitions,
                      params: SimParams, n_rach_fixed=(1, 1, 1)) -> TtiConfig:
    """Compose a three-group configuration: each group independently picks its
    preamble number within its own share of the uplink budget."""
    if len(partitions) != 3 or sum(partitions) > params.r_uplink:
        raise ValueError("partitions must be one budget share per group within R_uplink")
    groups = []
    for i in range(3):
        f = choose_preambles(estimates[i], v_un_prev[i], n_rach_fixed[i],
                             n_repe_fixed[i], partitions[i], params)
        groups.append(GroupConfig(n_rach_fixed[i], n_repe_fixed[i], f))
    return TtiConfig(tuple(groups))


# ---------------------------------------------------------------- controllers
class LeUrcController(Policy):
    """Single-group LE-URC: fixed RACH periods and repetitions, dynamic f."""

    def __init__(self, params: SimParams, n_rach: int = 1, n_repe: int = 4):
        self.params = params
        self.n_rach = n_rach
        self.n_repe = n_repe
        self.estimator = LoadEstimator()
        self._f_prev = F_PREA_SET[0]

    def initial_action(self, env, rng):
        self._f_prev = F_PREA_SET[0]
        return TtiConfig.single(self.n_rach, self.n_repe, self._f_prev)

    def reset(self, rng):
        self.estimator = LoadEstimator()

    def act(self, state, obs, info):
        d_est = self.estimator.update(obs.v_ip[0], obs.v_cp[0], self._f_prev)
        f = choose_preambles(d_est, obs.v_un[0], self.n_rach, self.n_repe,
                             self.params.r_uplink, self.params)
        self._f_prev = f
        return TtiConfig.single(self.n_rach, self.n_repe, f)


class FsiUrcController(Policy):
    """Single-group URC driven by the simulator's true attempter count."""

    def __init__(self, params: SimParams, n_rach: int = 1, n_repe: int = 4):
        self.params = params
        self.n_rach = n_rach
        self.n_repe = n_repe

    def initial_action(self, env, rng):
        return TtiConfig.single(self.n_rach, self.n_repe, F_PREA_SET[0])

    def act(self, state, obs, info):
        f = fsi_choose_preambles(float(info["pending"][0]), obs.v_un[0],
                                 self.n_rach, self.n_repe,
                                 self.params.r_uplink, self.params)
        return TtiConfig.single(self.n_rach, self.n_repe, f)


class MultiGroupLeUrcController(Policy):
    """Three-group LE-URC with fixed repetition values and a static budget
    partition (default 1:1:1)."""

    def __init__(self, params: SimParams, n_repe_fixed=(1, 4, 8),
                 partitions=None, n_rach_fixed=(1, 1, 1)):
        self.params = params
        self.n_repe_fixed = tuple(n_repe_fixed)
        self.n_rach_fixed = tuple(n_rach_fixed)
        if partitions is None:
            share = params.r_uplink // 3
            partitions = (share, share, params.r_uplink - 2 * share)
        self.partitions = tuple(partitions)
        self.estimators = [LoadEstimator() for _ in range(3)]
        self._f_prev = [F_PREA_SET[0]] * 3

    def initial_action(self, env, rng):
        self._f_prev = [F_PREA_SET[0]] * 3
        return TtiConfig(tuple(
            GroupConfig(self.n_rach_fixed[i], self.n_repe_fixed[i], self._f_prev[i])
            for i in range(3)
        ))

    def reset(self, rng):
        self.estimators = [LoadEstimator() for _ in range(3)]

    def act(self, state, obs, info):
        estimates = [
            self.estimators[i].update(obs.v_ip[i], obs.v_cp[i], self._f_prev[i])
            for i in range(3)
        ]
        cfg = multi_group_leurc(estimates, obs.v_un, self.n_repe_fixed,
                                self.partitions, self.params, self.n_rach_fixed)
        self._f_prev = [cfg.f_prea(i) for i in range(3)]
        return cfg
