"""Per-RACH-period contention, retry/CE-escalation bookkeeping, and random
data scheduling under the RE budget.

Tallies follow the eNB's view: a collided preamble is observable (detectable
in step 3 of the procedure), while a singleton preamble that fails SNR
detection is invisible and counted as idle even though the device failed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DeviceState, SimParams, TtiConfig
from .channel import detect_preambles


@dataclass
class RachOutcome:
    """Result of one RACH period: per-group device index arrays and tallies.

    Groups that had no RACH period in this slot carry None in the index
    fields and zero tallies.
    """

    success: list          # device indices with a detected singleton preamble
    collided: list         # device indices on a preamble chosen >= 2 times
    undetected: list       # singleton devices that failed SNR detection
    v_cp: np.ndarray
    v_sp: np.ndarray
    v_ip: np.ndarray


def run_rach_period(attempters_by_group, cfg: TtiConfig, params: SimParams,
                    rng: np.random.Generator, distance_m: np.ndarray,
                    snr_detection: bool = True) -> RachOutcome:
    """Run one RACH period.

    attempters_by_group: per CE group, an array of attempting device indices
    (empty array means an active period with no attempters; None means the
    group has no period in this slot). Each attempter picks one of the
    group's f_prea preambles uniformly; preambles chosen by two or more
    devices collide, singletons succeed iff detected (always, when
    ``snr_detection`` is off).
    """
    n_groups = cfg.n_groups
    v_cp = np.zeros(n_groups, dtype=np.int64)
    v_sp = np.zeros(n_groups, dtype=np.int64)
    v_ip = np.zeros(n_groups, dtype=np.int64)
    success: list = [None] * n_groups
    collided: list = [None] * n_groups
    undetected: list = [None] * n_groups

    for i in range(n_groups):
        att = attempters_by_group[i]
        if att is None:
            continue
        att = np.asarray(att, dtype=np.int64)
        f = cfg.f_prea(i)
        if att.size == 0:
            v_ip[i] = f
            success[i] = att
            collided[i] = att
            undetected[i] = att
            continue
        choice = rng.integers(0, f, size=att.size)
        counts = np.bincount(choice, minlength=f)
        collided_preambles = counts >= 2
        singleton = counts[choice] == 1
        col_dev = att[collided_preambles[choice]]
        single_dev = att[singleton]
        if snr_detection and single_dev.size:
            det = detect_preambles(np.full(single_dev.size, i), distance_m[single_dev],
                                   cfg.n_repe(i), params, rng)
        else:
            det = np.ones(single_dev.size, dtype=bool)
        ok_dev = single_dev[det]
        miss_dev = single_dev[~det]
        v_cp[i] = int(collided_preambles.sum())
        v_sp[i] = ok_dev.size
        v_ip[i] = f - v_cp[i] - v_sp[i]
        success[i] = ok_dev
        collided[i] = col_dev
        undetected[i] = miss_dev

    return RachOutcome(success, collided, undetected, v_cp, v_sp, v_ip)


def update_retry_counters(device: DeviceState, success: bool, params: SimParams,
                          n_groups: int = 3) -> DeviceState:
    """Apply one RACH attempt outcome to a device's counters.

    On failure: both counters advance; gamma_pCE failures escalate the CE
    group when a higher one exists; gamma_pMax failures drop the head packet
    and start a fresh cycle. On success the device becomes RRC-connected.
    """
    if success:
        device.c_pce = 0
        device.c_pmax = 0
        device.c_rrc = 0
        device.rrc_connected = True
        return device
    device.c_pce += 1
    device.c_pmax += 1
    if device.c_pce >= params.gamma_pce:
        if device.ce_group < n_groups - 1:
            device.ce_group += 1
            device.c_pce = 0
        else:
            device.c_pce = params.gamma_pce  # saturate at the top group
    if device.c_pmax >= params.gamma_pmax:
        device.backlog = max(device.backlog - 1, 0)
        device.c_pce = 0
        device.c_pmax = 0
        device.ce_group = device.home_group
    return device


def schedule_data(connected: np.ndarray, costs: np.ndarray, r_data: int,
                  rng: np.random.Generator):
    """Randomly ordered in-order scheduling under the data RE budget.

    Devices are permuted uniformly and served while the remaining budget
    covers the next device's cost; scheduling stops at the first device that
    does not fit, even if later ones would. Returns (served, unserved) index
    arrays (subsets of ``connected``).
    """
    connected = np.asarray(connected, dtype=np.int64)
    if connected.size == 0:
        return connected, connected
    perm = rng.permutation(connected.size)
    ordered = connected[perm]
    cum = np.cumsum(np.asarray(costs, dtype=np.int64)[perm])
    fits = cum <= r_data
    k = int(fits.sum()) if fits.all() else int(np.argmin(fits))
    return ordered[:k], ordered[k:]
