"""Power allocation for a fixed two-user NOMA pair.

Two sequential steps: the pair's total power ``q`` from the weaker user's
queue pressure, then the split ``P_j`` for the SIC (stronger) user. The
split minimises the outage-gated pair objective over the finite set of
points where its minimum can sit: the stationary point of the no-outage
objective and the boundaries of the feasible interval and outage regions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

from .config import SystemParams
from .rates import (
    RatePair,
    noma_outage_power_non_sic,
    noma_outage_power_sic,
    noma_rates,
)
from .state import UserState, queue_weight

LN2 = math.log(2.0)


@dataclass(frozen=True)
class NomaDecision:
    power_non_sic_w: float
    power_sic_w: float
    total_q_w: float
    metric: float
    rates: RatePair
    useless: bool
    metric_non_sic: float = 0.0
    metric_sic: float = 0.0
    effective: RatePair = RatePair(0.0, 0.0)
    # True when the first argument of solve_noma_pair became the SIC user
    swapped: bool = False


class Split(NamedTuple):
    power_sic_w: float
    metric: float
    useless: bool


def _useless(q: float = 0.0, swapped: bool = False) -> NomaDecision:
    zero = RatePair(0.0, 0.0)
    return NomaDecision(0.0, 0.0, 0.0, 0.0, zero, True, 0.0, 0.0, zero, swapped)


def _served(q: float, p_j: float, state_i: UserState, state_j: UserState,
            params: SystemParams) -> tuple[bool, bool]:
    """Outage flags from powers; threshold powers themselves are served."""
    p_i = q - p_j
    bound_i = noma_outage_power_non_sic(state_i.rho_bps, state_i.gamma, q, params)
    bound_j = noma_outage_power_sic(state_j.rho_bps, state_j.gamma, params)
    return (p_i > 0 and p_j <= bound_i), (p_j > 0 and p_j >= bound_j)


def _terms(q, p_j, state_i, state_j, params):
    # q is passed rather than rebuilt from p_i + p_j, which may be off by an ulp
    p_i = q - p_j
    rates = noma_rates(p_i, p_j, state_i.gamma, state_j.gamma, params)
    ok_i, ok_j = _served(q, p_j, state_i, state_j, params)
    eff = RatePair(rates.rate_non_sic_bps if ok_i else 0.0,
                   rates.rate_sic_bps if ok_j else 0.0)
    v = params.v_weight
    m_i = v * p_i - state_i.weight(params) * eff.rate_non_sic_bps
    m_j = v * p_j - state_j.weight(params) * eff.rate_sic_bps
    return m_i, m_j, rates, eff


def pair_metric(p_i: float, p_j: float, state_i: UserState, state_j: UserState,
                params: SystemParams) -> float:
    """Sum of both users' drift-plus-penalty terms, each outage-gated."""
    if p_i < 0 or p_j < 0:
        raise ValueError("powers must be non-negative")
    m_i, m_j, _, _ = _terms(p_i + p_j, p_j, state_i, state_j, params)
    return m_i + m_j


def _split_value(q, p_j, state_i, state_j, params):
    m_i, m_j, _, _ = _terms(q, p_j, state_i, state_j, params)
    return m_i + m_j


def solve_q(q_bits_i: float, z_i: float, gamma_i: float, params: SystemParams) -> float:
    """Pair power sum from the stationary point of the weak user's term, clamped."""
    if gamma_i <= 0:
        return 0.0
    n, v = params.n_users, params.v_weight
    w = queue_weight(q_bits_i, z_i, params)
    cap = 2.0 * params.power_budget_w
    if w <= 0:
        return 0.0
    if v == 0:
        return cap
    q_star = 2.0 / (n * gamma_i) * (
        params.blocklength_factor * params.bandwidth_hz * gamma_i * w / (v * LN2) - 1.0)
    if q_star < 0:
        return 0.0
    return min(q_star, cap)


def split_candidate(q_bits_i: float, z_i: float, q_bits_j: float, z_j: float,
                    gamma_i: float, gamma_j: float,
                    params: SystemParams) -> Optional[float]:
    """Root of the derivative of the no-outage split objective; None if degenerate.

    ``(2 / (N Gi Gj)) (Gj wj - Gi wi) / (wi - wj)``: positive, and the unique
    minimiser, whenever ``1 < wi / wj < Gj / Gi``.
    """
    w_i = queue_weight(q_bits_i, z_i, params)
    w_j = queue_weight(q_bits_j, z_j, params)
    den = w_i - w_j
    if den == 0 or gamma_i <= 0 or gamma_j <= 0:
        return None
    n = params.n_users
    return 2.0 / (n * gamma_i * gamma_j) * (gamma_j * w_j - gamma_i * w_i) / den


def ordering_precondition(state_i: UserState, state_j: UserState,
                          params: SystemParams) -> bool:
    """``1 < w_i / w_j < Gamma_j / Gamma_i`` (weak user under more pressure)."""
    w_i, w_j = state_i.weight(params), state_j.weight(params)
    if w_j <= 0 or state_i.gamma <= 0:
        return False
    return 1.0 < w_i / w_j < state_j.gamma / state_i.gamma


def _split_bounds(q, state_i, state_j, params):
    lo = max(0.0, q - params.power_budget_w)
    hi = q / 2.0
    sic = noma_outage_power_sic(state_j.rho_bps, state_j.gamma, params)
    non_sic = noma_outage_power_non_sic(state_i.rho_bps, state_i.gamma, q, params)
    stat = split_candidate(state_i.q_bits, state_i.z_tilde, state_j.q_bits,
                           state_j.z_tilde, state_i.gamma, state_j.gamma, params)
    return lo, hi, sic, non_sic, stat


def split_points(q: float, state_i: UserState, state_j: UserState,
                 params: SystemParams) -> list[float]:
    lo, hi, sic, non_sic, stat = _split_bounds(q, state_i, state_j, params)
    points = []
    if stat is not None:
        points.append(min(max(stat, lo), hi))
    points += [sic, non_sic, lo, hi]
    return [p for p in points if lo <= p <= hi]


def solve_split(q: float, state_i: UserState, state_j: UserState,
                params: SystemParams) -> Split:
    """Best ``P_j`` in ``[max(0, q - P0), q/2]`` for a fixed pair total ``q``."""
    if q <= 0:
        return Split(0.0, 0.0, True)
    best_p, best_m = 0.0, math.inf
    for p_j in split_points(q, state_i, state_j, params):
        m = _split_value(q, p_j, state_i, state_j, params)
        if m < best_m:
            best_p, best_m = p_j, m
    if not best_m < 0:
        return Split(0.0, 0.0, True)
    return Split(best_p, best_m, False)


def case_split(q: float, state_i: UserState, state_j: UserState,
               params: SystemParams) -> float:
    """Case-by-case split for states meeting the ordering precondition.

    Kept as a cross-check of :func:`solve_split`; branches whose nominal
    choice falls outside ``[q_bar, q/2]`` are clamped into it.
    """
    lo, hi, a, b, s = _split_bounds(q, state_i, state_j, params)
    if s is None:
        raise ValueError("stationary split undefined for equal queue weights")
    d = q - params.power_budget_w

    def g(x):
        return _split_value(q, x, state_i, state_j, params)

    def clamp(x, left, right):
        return min(max(x, left), right)

    def pick(options):
        return min(options, key=g)

    if a <= b:
        if b <= d:
            return hi
        if hi <= a:
            return lo
        if b <= hi and d <= a:
            return pick([clamp(s, a, b), hi, lo])
        if a <= hi <= b and d <= a:
            return pick([clamp(s, a, hi), lo])
        if b <= hi and a <= d <= b:
            return pick([clamp(s, d, b), hi])
        return clamp(s, max(d, lo), hi)
    if lo <= b and a < hi:
        return pick([lo, hi])
    if lo <= b and hi <= a:
        return lo
    if b < lo and a < hi:
        return hi
    return lo


def solve_noma_pair(state_a: UserState, state_b: UserState,
                    params: SystemParams) -> NomaDecision:
    """Sequential pair allocation; the weaker channel takes the non-SIC role."""
    swapped = state_a.gamma > state_b.gamma
    state_i, state_j = (state_b, state_a) if swapped else (state_a, state_b)
    q = solve_q(state_i.q_bits, state_i.z_tilde, state_i.gamma, params)
    split = solve_split(q, state_i, state_j, params)
    if split.useless:
        return _useless(swapped=swapped)
    p_j = split.power_sic_w
    p_i = q - p_j
    m_i, m_j, rates, eff = _terms(q, p_j, state_i, state_j, params)
    return NomaDecision(p_i, p_j, q, m_i + m_j, rates, False, m_i, m_j, eff, swapped)
