"""OMA and two-user NOMA rates, outage power thresholds, effective rates.

Bandwidth shares follow the hybrid scheme: an OMA user owns ``B/N``; a
NOMA pair pools its two shares (``2B/N``) with half-power normalisation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .config import SystemParams

INF = math.inf


@dataclass(frozen=True)
class RatePair:
    rate_non_sic_bps: float
    rate_sic_bps: float


def oma_rate(p: float, gamma: float, params: SystemParams) -> float:
    n = params.n_users
    scale = params.blocklength_factor * params.bandwidth_hz / n
    return scale * math.log2(1.0 + n * gamma * p)


def oma_outage_power(rho: float, gamma: float, params: SystemParams) -> float:
    """Smallest power whose OMA rate reaches ``rho``; +inf when gamma is 0."""
    if gamma <= 0:
        return INF
    n = params.n_users
    expo = n * rho / (params.blocklength_factor * params.bandwidth_hz)
    return math.expm1(expo * math.log(2.0)) / (n * gamma)


def noma_rates(p_i: float, p_j: float, gamma_i: float, gamma_j: float,
               params: SystemParams) -> RatePair:
    """Rates of the non-SIC user ``i`` and the SIC user ``j``."""
    n = params.n_users
    scale = 2.0 * params.blocklength_factor * params.bandwidth_hz / n
    sinr_i = (n * gamma_i * p_i / 2.0) / (n * gamma_i * p_j / 2.0 + 1.0)
    r_i = scale * math.log2(1.0 + sinr_i)
    r_j = scale * math.log2(1.0 + n * gamma_j * p_j / 2.0)
    return RatePair(r_i, r_j)


def _noma_exponent(rho: float, params: SystemParams) -> float:
    return params.n_users * rho / (2.0 * params.blocklength_factor * params.bandwidth_hz)


def noma_outage_power_sic(rho_j: float, gamma_j: float, params: SystemParams) -> float:
    if gamma_j <= 0:
        return INF
    expo = _noma_exponent(rho_j, params)
    return 2.0 / (params.n_users * gamma_j) * math.expm1(expo * math.log(2.0))


def noma_outage_power_non_sic(rho_i: float, gamma_i: float, q: float,
                              params: SystemParams) -> float:
    """Largest SIC-user power ``P_j`` leaving the non-SIC user out of outage.

    Exact inverse of the non-SIC rate: SINR >= 2^x - 1 solved for ``P_j``.
    Can be negative: then user ``i`` is in outage for every split of ``q``.
    """
    if gamma_i <= 0:
        return -INF
    expo = _noma_exponent(rho_i, params)
    growth = 2.0 ** expo
    excess = math.expm1(expo * math.log(2.0))
    return (q - 2.0 / (params.n_users * gamma_i) * excess) / growth


def effective_rate(r: float, rho: float) -> float:
    return r if r >= rho else 0.0
