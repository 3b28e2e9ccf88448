"""Physical layer: power-law path loss, Rayleigh block fading, RSRP-based
CE-group selection, uplink power control, and per-preamble detection.

A preamble is detected when at least one of its repetitions has all four
symbol groups received above the SNR threshold; fading gains are i.i.d.
unit-mean exponentials per symbol group per repetition.
"""

from __future__ import annotations

import numpy as np

from .core import SYMBOL_GROUPS_PER_PREAMBLE, SimParams


def path_gain(distance_m, eta: float):
    return np.asarray(distance_m, dtype=float) ** (-eta)


def rsrp(distance_m, params: SimParams):
    """Received broadcast power P_NPBCH * u^-eta (fading averaged out)."""
    return params.bcast_mw * path_gain(distance_m, params.eta)


def assign_ce_group(rsrp_mw, params: SimParams):
    """CE group from the broadcast RSRP: group 0 above thr1 (strict), group 1
    within [thr2, thr1], group 2 below. Vectorized."""
    r = np.asarray(rsrp_mw, dtype=float)
    group = np.full(r.shape, 2, dtype=np.int64)
    group[r >= params.rsrp_thr2_mw] = 1
    group[r > params.rsrp_thr1_mw] = 0
    if group.ndim == 0 or r.ndim == 0:
        return int(group)
    return group


def preamble_tx_power(group, distance_m, params: SimParams):
    """Transmit power: group 0 uses full path-loss inversion capped at
    P_RACHmax; groups 1 and 2 always transmit at P_RACHmax. Vectorized."""
    g = np.asarray(group)
    d = np.asarray(distance_m, dtype=float)
    inverted = params.group0_target_rx_mw * d ** params.eta
    p = np.where(g == 0, np.minimum(inverted, params.prach_max_mw), params.prach_max_mw)
    if p.ndim == 0:
        return float(p)
    return p


def received_preamble_power(group, distance_m, params: SimParams):
    return preamble_tx_power(group, distance_m, params) * path_gain(distance_m, params.eta)


def detect_preambles(group, distance_m, n_repe: int, params: SimParams,
                     rng: np.random.Generator) -> np.ndarray:
    """Simulate detection of one preamble per device (vectorized).

    Draws an independent exponential fading gain for each of the four symbol
    groups of each repetition; a device's preamble is detected when some
    repetition has all symbol groups at SNR >= threshold.
    """
    g = np.atleast_1d(np.asarray(group))
    d = np.atleast_1d(np.asarray(distance_m, dtype=float))
    n = d.shape[0]
    if n == 0:
        return np.zeros(0, dtype=bool)
    p_rx = received_preamble_power(g, d, params)
    # symbol group decoded iff h >= gamma_th * sigma^2 / P_rx
    h_min = params.snr_threshold * params.noise_mw / np.asarray(p_rx, dtype=float)
    h = rng.standard_exponential((n, n_repe, SYMBOL_GROUPS_PER_PREAMBLE))
    rep_ok = (h >= h_min[:, None, None]).all(axis=2)
    return rep_ok.any(axis=1)


def detect_preamble(group: int, distance_m: float, n_repe: int, params: SimParams,
                    rng: np.random.Generator) -> bool:
    """Single-device detection draw; see ``detect_preambles``."""
    return bool(detect_preambles(np.array([group]), np.array([distance_m]),
                                 n_repe, params, rng)[0])
