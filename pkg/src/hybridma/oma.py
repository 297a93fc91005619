"""Closed-form drift-plus-penalty power control for an OMA link."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .config import SystemParams
from .rates import oma_outage_power, oma_rate
from .state import queue_weight

LN2 = math.log(2.0)


@dataclass(frozen=True)
class OmaDecision:
    power_w: float
    metric: float
    rate_bps: float
    in_outage: bool


def _served_rate(p: float, gamma: float, threshold: float, params: SystemParams) -> float:
    # outage is decided on power, so the threshold power itself is served
    if p <= 0 or p < threshold:
        return 0.0
    return oma_rate(p, gamma, params)


def oma_metric(p: float, q_bits: float, z_tilde: float, gamma: float,
               params: SystemParams, rho: Optional[float] = None) -> float:
    """``V p - (tau Q + Z~) R~(p)``."""
    if p < 0:
        raise ValueError("power must be non-negative")
    rho = params.rho_bps if rho is None else rho
    threshold = oma_outage_power(rho, gamma, params)
    w = queue_weight(q_bits, z_tilde, params)
    return params.v_weight * p - w * _served_rate(p, gamma, threshold, params)


def stationary_power(weight: float, gamma: float, params: SystemParams) -> float:
    """Unconstrained minimiser of the served-region metric."""
    n, v = params.n_users, params.v_weight
    if weight <= 0:
        return -1.0 / (n * gamma)
    if v == 0:
        return math.inf
    return (params.blocklength_factor * params.bandwidth_hz * weight / (n * v * LN2)
            - 1.0 / (n * gamma))


def solve_oma(q_bits: float, z_tilde: float, gamma: float, params: SystemParams,
              rho: Optional[float] = None) -> OmaDecision:
    rho = params.rho_bps if rho is None else rho
    if gamma <= 0:
        return OmaDecision(0.0, 0.0, 0.0, True)
    p0 = params.power_budget_w
    threshold = oma_outage_power(rho, gamma, params)
    w = queue_weight(q_bits, z_tilde, params)
    p_star = stationary_power(w, gamma, params)

    def metric(p):
        return params.v_weight * p - w * _served_rate(p, gamma, threshold, params)

    power = 0.0
    if threshold <= p0 <= p_star:
        if metric(p0) < 0:
            power = p0
    elif threshold <= p_star < p0:
        power = p_star
    elif p_star < threshold <= p0:
        if metric(threshold) < 0:
            power = threshold
    rate = _served_rate(power, gamma, threshold, params)
    return OmaDecision(power, metric(power), rate, rate == 0.0)
