"""Path loss and Rayleigh fading, normalised to per-watt SNR gains."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .config import SystemParams, UserProfile


@dataclass(frozen=True)
class ChannelState:
    gain_per_watt: float
    fading_power: float
    path_loss_db: float


def path_loss_db(distance_m, log_base: float = 10.0):
    """``35.3 + 37.6 log(d)``; works on scalars and arrays."""
    d = np.asarray(distance_m, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    if log_base == 10.0:
        loss = 35.3 + 37.6 * np.log10(d)
    else:
        loss = 35.3 + 37.6 * np.log(d) / math.log(log_base)
    return float(loss) if loss.ndim == 0 else loss


def gain_from_fading(fading_power, loss_db, params: SystemParams):
    """Gamma = |h|^2 / (B N0)."""
    h2 = np.asarray(fading_power) * 10.0 ** (-np.asarray(loss_db) / 10.0)
    return h2 / (params.bandwidth_hz * params.noise_w_per_hz)


def sample_channel(
    profile: UserProfile,
    params: SystemParams,
    rng: np.random.Generator,
    fading_power: Optional[float] = None,
) -> ChannelState:
    """One slot's channel for one user.

    ``fading_power`` pins the squared fading magnitude (used by tests);
    otherwise it is Exp(1), the squared modulus of a CN(0, 1) draw.
    """
    loss = path_loss_db(profile.distance_m, params.path_loss_log_base)
    if fading_power is None:
        fading_power = float(rng.exponential(1.0))
    gain = float(gain_from_fading(fading_power, loss, params))
    return ChannelState(gain, float(fading_power), loss)


class ChannelSampler:
    """Vectorised per-slot gains for a fixed user layout."""

    def __init__(self, profiles: Sequence[UserProfile], params: SystemParams,
                 rng: np.random.Generator):
        distances = np.array([p.distance_m for p in profiles], dtype=float)
        self.path_loss_db = path_loss_db(distances, params.path_loss_log_base)
        self.mean_gain = np.asarray(gain_from_fading(1.0, self.path_loss_db, params))
        self.rng = rng

    def sample(self) -> np.ndarray:
        return self.mean_gain * self.rng.exponential(1.0, size=self.mean_gain.shape)
