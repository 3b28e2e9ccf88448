"""Packet arrival models: periodic reporting and a time-limited Beta burst.

Arrivals are aligned to RACH periods (slotted Aloha): a packet generated
inside a period window is first eligible at the next period boundary.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import betainc, betaln

from .core import SimParams, TtiConfig


@dataclass(frozen=True)
class BetaProfile:
    """Burst intensity profile: Beta(alpha, beta) pdf scaled to a window of
    ``t_bursty_ms`` starting at ``tau0_ms``. Integrates to one over the window,
    i.e. one packet per device in expectation."""

    alpha: float = 3.0
    beta: float = 4.0
    t_bursty_ms: float = 600_000.0
    tau0_ms: float = 0.0

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0 or self.t_bursty_ms <= 0:
            raise ValueError("alpha, beta and t_bursty_ms must be positive")

    def pdf(self, tau_ms):
        x = (np.asarray(tau_ms, dtype=float) - self.tau0_ms) / self.t_bursty_ms
        inside = (x >= 0.0) & (x <= 1.0)
        xs = np.clip(x, 1e-300, 1.0 - 1e-16)
        log_b = betaln(self.alpha, self.beta)
        val = np.exp(
            (self.alpha - 1.0) * np.log(xs)
            + (self.beta - 1.0) * np.log1p(-xs)
            - log_b
        ) / self.t_bursty_ms
        return np.where(inside, val, 0.0)

    def cdf(self, tau_ms):
        x = (np.asarray(tau_ms, dtype=float) - self.tau0_ms) / self.t_bursty_ms
        return betainc(self.alpha, self.beta, np.clip(x, 0.0, 1.0))

    def window_integral(self, a_ms: float, b_ms: float) -> float:
        """Expected packets per device arriving in [a_ms, b_ms)."""
        return float(self.cdf(b_ms) - self.cdf(a_ms))

    @classmethod
    def from_params(cls, params: SimParams, tau0_ms: float = 0.0) -> "BetaProfile":
        return cls(params.beta_alpha, params.beta_beta, params.t_bursty_ms, tau0_ms)


def periodic_rate(cfg: TtiConfig, params: SimParams, group: int = 0) -> float:
    """Packet rate per RACH period for the periodic profile:
    (T_TTI / n_rach) / T_periodic."""
    return (params.t_tti_ms / cfg.n_rach(group)) / params.t_periodic_ms


def bursty_rate(j: int, t: int, profile: BetaProfile, cfg: TtiConfig,
                params: SimParams, group: int = 0) -> float:
    """Expected packets per bursty device in the j-th RACH period (1-based)
    of TTI ``t`` (0-based)."""
    if j < 1 or j > cfg.n_rach(group):
        raise ValueError(f"period index {j} outside 1..{cfg.n_rach(group)}")
    delta = params.t_tti_ms / cfg.n_rach(group)
    a = t * params.t_tti_ms + (j - 1) * delta
    return profile.window_integral(a, a + delta)


@lru_cache(maxsize=None)
def _period_offsets(t_tti_ms: float, n_rach: int) -> np.ndarray:
    return np.arange(n_rach + 1) * (t_tti_ms / n_rach)


def periodic_arrivals_in_window(t0_ms: np.ndarray, a_ms: float, b_ms: float,
                                period_ms: float) -> np.ndarray:
    """Number of arrivals in (a_ms, b_ms] for devices whose packets occur at
    t0 + k*period, k = 0, 1, ... (vectorized over t0)."""
    hi = np.floor((b_ms - t0_ms) / period_ms)
    lo = np.floor((a_ms - t0_ms) / period_ms)
    return np.maximum(hi - lo, 0.0).astype(np.int64)
