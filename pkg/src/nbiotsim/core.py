"""Shared domain vocabulary for the NB-IoT uplink simulator.

Devices, coverage-enhancement (CE) groups, per-TTI actions and observations,
simulation parameters, and resource-element (RE) accounting. All powers and
thresholds are stored in linear units (mW); dB/dBm values appear only in the
factory helpers and config parsing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

# Legal configuration sets (one value per CE group per TTI).
N_RACH_SET = (1, 2, 4)
N_REPE_SET = (1, 2, 4, 8, 16, 32)
F_PREA_SET = (12, 24, 36, 48)

N_CE_GROUPS = 3
SYMBOL_GROUPS_PER_PREAMBLE = 4


class InvalidActionError(ValueError):
    """Raised for a TtiConfig outside the legal sets or over the RE budget."""


class InvalidObservationError(ValueError):
    """Raised for an observation that violates its counting invariants."""


class TrainingDiverged(RuntimeError):
    """Raised when a value-function update produces non-finite numbers."""


class ConfigError(ValueError):
    """Raised for an invalid experiment or file configuration."""


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


dbm_to_mw = db_to_linear
mw_to_dbm = linear_to_db


class GroupConfig(NamedTuple):
    """RACH configuration of one CE group for one TTI."""

    n_rach: int
    n_repe: int
    f_prea: int


@dataclass(frozen=True)
class TtiConfig:
    """The per-TTI action: one (n_rach, n_repe, f_prea) triple per CE group.

    Field membership in the legal sets is checked at construction, so an
    instance is always well-formed; the RE-budget bound is checked against
    SimParams by ``data_resource_budget`` (and by the environment on every
    step) because the budget is a scenario parameter.
    """

    groups: tuple[GroupConfig, ...]

    def __post_init__(self):
        if not 1 <= len(self.groups) <= N_CE_GROUPS:
            raise InvalidActionError(f"need 1..{N_CE_GROUPS} groups, got {len(self.groups)}")
        canon = []
        for g in self.groups:
            g = GroupConfig(*g)
            if g.n_rach not in N_RACH_SET:
                raise InvalidActionError(f"n_rach={g.n_rach} not in {N_RACH_SET}")
            if g.n_repe not in N_REPE_SET:
                raise InvalidActionError(f"n_repe={g.n_repe} not in {N_REPE_SET}")
            if g.f_prea not in F_PREA_SET:
                raise InvalidActionError(f"f_prea={g.f_prea} not in {F_PREA_SET}")
            canon.append(g)
        object.__setattr__(self, "groups", tuple(canon))

    @classmethod
    def single(cls, n_rach: int, n_repe: int, f_prea: int) -> "TtiConfig":
        return cls((GroupConfig(n_rach, n_repe, f_prea),))

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    def n_rach(self, i: int) -> int:
        return self.groups[i].n_rach

    def n_repe(self, i: int) -> int:
        return self.groups[i].n_repe

    def f_prea(self, i: int) -> int:
        return self.groups[i].f_prea


@dataclass(frozen=True)
class TtiObservation:
    """Per-TTI feedback: preamble tallies and scheduling counts per CE group.

    v_cp: collided preambles, v_sp: successfully received preambles,
    v_ip: idle preambles, v_su: devices whose data was served,
    v_un: RRC-connected devices left unscheduled.
    """

    v_cp: tuple[int, ...]
    v_sp: tuple[int, ...]
    v_ip: tuple[int, ...]
    v_su: tuple[int, ...]
    v_un: tuple[int, ...]

    def __post_init__(self):
        n = len(self.v_cp)
        for name in ("v_sp", "v_ip", "v_su", "v_un"):
            if len(getattr(self, name)) != n:
                raise InvalidObservationError("per-group fields have mismatched lengths")
        for name in ("v_cp", "v_sp", "v_ip", "v_su", "v_un"):
            if any(v < 0 for v in getattr(self, name)):
                raise InvalidObservationError(f"{name} has a negative count")

    @property
    def n_groups(self) -> int:
        return len(self.v_cp)

    @classmethod
    def zeros(cls, n_groups: int) -> "TtiObservation":
        z = (0,) * n_groups
        return cls(z, z, z, z, z)

    def check_partition(self, cfg: TtiConfig) -> None:
        """Collided + success + idle preambles must equal the opportunities."""
        for i, g in enumerate(cfg.groups):
            total = self.v_cp[i] + self.v_sp[i] + self.v_ip[i]
            if total != g.n_rach * g.f_prea:
                raise InvalidObservationError(
                    f"group {i}: tallies {total} != {g.n_rach * g.f_prea} opportunities"
                )


@dataclass
class DeviceState:
    """One IoT device: position, coverage class, backlog, and retry counters."""

    distance_m: float
    traffic_kind: str  # "periodic" or "bursty"
    backlog: int = 0
    ce_group: int = 0
    c_pce: int = 0    # RACH attempts within the current CE group
    c_pmax: int = 0   # total RACH attempts for the head packet
    c_rrc: int = 0    # TTIs spent RRC-connected awaiting scheduling
    rrc_connected: bool = False
    home_group: int = 0  # RSRP-assigned group a new RACH cycle starts from

    def __post_init__(self):
        if self.distance_m <= 0:
            raise ValueError("distance_m must be positive")
        if self.traffic_kind not in ("periodic", "bursty"):
            raise ValueError(f"unknown traffic kind {self.traffic_kind!r}")


@dataclass(frozen=True)
class SimParams:
    """Scenario scalars, stored linear; see ``single_group_params`` for the
    dB-domain defaults.
    """

    eta: float = 4.0                      # path-loss exponent
    noise_mw: float = dbm_to_mw(-138.0)   # noise power sigma^2
    bcast_mw: float = dbm_to_mw(35.0)     # eNB broadcast power
    prach_max_mw: float = dbm_to_mw(23.0)  # maximal preamble transmit power
    inv_ctrl_max_pl: float = db_to_linear(120.0)  # max invertible path loss (group 0)
    snr_threshold: float = 1.0            # received SNR detection threshold
    rsrp_thr1_mw: float = dbm_to_mw(-120.0)
    rsrp_thr2_mw: float = dbm_to_mw(-125.0)
    t_tti_ms: float = 640.0
    t_periodic_ms: float = 3_600_000.0
    t_bursty_ms: float = 600_000.0
    beta_alpha: float = 3.0
    beta_beta: float = 4.0
    gamma_rrc: int = 5
    gamma_pmax: int = 10
    gamma_pce: int = 5
    b_rach: int = 4
    b_data: int = 32
    r_uplink: int = 1536
    cell_radius_m: float = 10_000.0
    n_periodic: int = 10_000
    n_bursty: int = 5_000
    c_su: int = 0          # reward normalizer; 0 -> auto from the RE budget
    backlog_cap: int = 0   # 0 -> unbounded packet queue per device
    intra_tti_retry: bool = True
    seed: int = 0

    def __post_init__(self):
        for name in ("eta", "noise_mw", "bcast_mw", "prach_max_mw", "inv_ctrl_max_pl",
                     "snr_threshold", "t_tti_ms", "t_periodic_ms", "t_bursty_ms",
                     "beta_alpha", "beta_beta", "cell_radius_m"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("gamma_rrc", "gamma_pmax", "gamma_pce", "b_rach", "b_data", "r_uplink"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.rsrp_thr1_mw <= self.rsrp_thr2_mw:
            raise ValueError("rsrp_thr1_mw must exceed rsrp_thr2_mw")
        if self.n_periodic < 0 or self.n_bursty < 0:
            raise ValueError("device counts must be nonnegative")
        if self.c_su == 0:
            object.__setattr__(self, "c_su", self.r_uplink // (self.b_data * min(N_REPE_SET)))

    @property
    def group0_target_rx_mw(self) -> float:
        """Received-power target of full path-loss inversion in group 0."""
        return self.prach_max_mw / self.inv_ctrl_max_pl

    def override(self, **kw) -> "SimParams":
        return replace(self, **kw)


def single_group_params(**overrides) -> SimParams:
    """Single-group scenario defaults: 10 km cell, R_uplink = 1536 REs."""
    p = SimParams()
    return p.override(**overrides) if overrides else p


def multi_group_params(**overrides) -> SimParams:
    """Three-group scenario defaults: 12 km cell, R_uplink = 15360 REs,
    30000 periodic + 30000 bursty devices."""
    p = SimParams(
        r_uplink=15_360,
        cell_radius_m=12_000.0,
        n_periodic=30_000,
        n_bursty=30_000,
    )
    return p.override(**overrides) if overrides else p


def rach_resource_cost(cfg: TtiConfig, params: SimParams) -> int:
    """REs consumed by the RACH procedure: B_RACH * sum_i n_rach*n_repe*f_prea."""
    return params.b_rach * sum(g.n_rach * g.n_repe * g.f_prea for g in cfg.groups)


def data_resource_budget(cfg: TtiConfig, params: SimParams) -> int:
    """REs left for data transmission after the RACH allocation.

    Raises InvalidActionError when the configuration overruns R_uplink.
    """
    cost = rach_resource_cost(cfg, params)
    if cost > params.r_uplink:
        raise InvalidActionError(
            f"RACH cost {cost} REs exceeds uplink budget {params.r_uplink}"
        )
    return params.r_uplink - cost
