"""Vectorized device population: static positions, per-episode traffic and
RACH state. Positions are drawn once per experiment; episode resets clear
backlogs, counters, and the periodic-traffic phases."""

from __future__ import annotations

import numpy as np

from .core import N_CE_GROUPS, SimParams
from .channel import assign_ce_group, received_preamble_power, rsrp


class DevicePopulation:
    """Struct-of-arrays device state for one simulated cell."""

    def __init__(self, params: SimParams, mode: str, rng: np.random.Generator):
        if mode not in ("single-group", "multi-group"):
            raise ValueError(f"unknown mode {mode!r}")
        self.mode = mode
        self.n_groups = 1 if mode == "single-group" else N_CE_GROUPS
        n = params.n_periodic + params.n_bursty
        self.n = n
        self.n_periodic = params.n_periodic
        # uniform positions in the cell disc
        self.distance_m = params.cell_radius_m * np.sqrt(rng.random(n))
        self.is_bursty = np.zeros(n, dtype=bool)
        self.is_bursty[params.n_periodic:] = True
        if self.n_groups == 1:
            self.home_group = np.zeros(n, dtype=np.int64)
        else:
            self.home_group = assign_ce_group(rsrp(self.distance_m, params), params)
        # received preamble power per (group, device); static since positions are
        self.prx_by_group = np.stack([
            received_preamble_power(np.full(n, g), self.distance_m, params)
            for g in range(self.n_groups)
        ])
        # mutable per-episode state
        self.group = self.home_group.copy()
        self.backlog = np.zeros(n, dtype=np.int64)
        self.c_pce = np.zeros(n, dtype=np.int64)
        self.c_pmax = np.zeros(n, dtype=np.int64)
        self.c_rrc = np.zeros(n, dtype=np.int64)
        self.rrc = np.zeros(n, dtype=bool)
        self.t0_periodic = np.full(n, np.inf)

    def reset(self, params: SimParams, rng: np.random.Generator) -> None:
        self.group[:] = self.home_group
        self.backlog[:] = 0
        self.c_pce[:] = 0
        self.c_pmax[:] = 0
        self.c_rrc[:] = 0
        self.rrc[:] = False
        self.t0_periodic[:] = np.inf
        if self.n_periodic:
            self.t0_periodic[: self.n_periodic] = rng.uniform(
                0.0, params.t_periodic_ms, self.n_periodic
            )

    def group_share(self) -> np.ndarray:
        return np.bincount(self.home_group, minlength=self.n_groups) / max(self.n, 1)
