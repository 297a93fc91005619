"""Brute-force reference solutions for testing the closed forms and the pairing.

Metrics are re-derived here from the rate definitions with numpy and gate
outage on the rate itself, so nothing below reuses the solver code paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

from .config import SystemParams
from .state import UserState

MAX_EXHAUSTIVE_USERS = 8


@dataclass(frozen=True)
class GridSpec:
    points: int = 100_000
    lo: float = 0.0
    hi: Optional[float] = None  # defaults to the power budget

    def __post_init__(self):
        if self.points < 2:
            raise ValueError("a grid needs at least two points")

    def values(self, params: SystemParams) -> np.ndarray:
        hi = params.power_budget_w if self.hi is None else self.hi
        return np.linspace(self.lo, hi, self.points)


def _w(state: UserState, params: SystemParams) -> float:
    z = state.z if state.qos else 0.0
    return params.slot_duration_s * state.q_bits + z


# -- OMA -----------------------------------------------------------------------

def oma_objective(p, state: UserState, params: SystemParams):
    p = np.asarray(p, dtype=float)
    n = params.n_users
    r = params.blocklength_factor * params.bandwidth_hz / n * np.log2(1.0 + n * state.gamma * p)
    r = np.where((r >= state.rho_bps) & (p > 0), r, 0.0)
    return params.v_weight * p - _w(state, params) * r


def _oma_points(state: UserState, params: SystemParams) -> list[float]:
    n, p0 = params.n_users, params.power_budget_w
    pts = [0.0, p0]
    if state.gamma > 0:
        thr = (2.0 ** (n * state.rho_bps / (params.blocklength_factor * params.bandwidth_hz))
               - 1.0) / (n * state.gamma)
        pts.append(thr)
        # nudge above the threshold in case rounding leaves it a hair short
        pts.append(np.nextafter(thr, np.inf))
        w = _w(state, params)
        if params.v_weight > 0 and w > 0:
            star = (params.blocklength_factor * params.bandwidth_hz * w
                    / (n * params.v_weight * math.log(2.0)) - 1.0 / (n * state.gamma))
            pts.append(star)
    return [min(max(p, 0.0), p0) for p in pts if np.isfinite(p)]


def grid_min_oma(state: UserState, params: SystemParams,
                 grid: Optional[GridSpec] = None) -> tuple[float, float]:
    """Best ``(power, metric)`` over a uniform grid plus the analytic points."""
    grid = grid or GridSpec()
    p = np.concatenate([grid.values(params), _oma_points(state, params)])
    m = oma_objective(p, state, params)
    k = int(np.argmin(m))
    return float(p[k]), float(m[k])


# -- NOMA ----------------------------------------------------------------------

def noma_objective(p_i, p_j, state_i: UserState, state_j: UserState,
                   params: SystemParams):
    """Pair metric with user ``i`` the weaker (non-SIC) member."""
    p_i = np.asarray(p_i, dtype=float)
    p_j = np.asarray(p_j, dtype=float)
    n = params.n_users
    c = 2.0 * params.blocklength_factor * params.bandwidth_hz / n
    gi, gj = state_i.gamma, state_j.gamma
    r_i = c * np.log2(1.0 + (n * gi * p_i / 2.0) / (n * gi * p_j / 2.0 + 1.0))
    r_j = c * np.log2(1.0 + n * gj * p_j / 2.0)
    r_i = np.where((r_i >= state_i.rho_bps) & (p_i > 0), r_i, 0.0)
    r_j = np.where((r_j >= state_j.rho_bps) & (p_j > 0), r_j, 0.0)
    v = params.v_weight
    return (v * p_i - _w(state_i, params) * r_i) + (v * p_j - _w(state_j, params) * r_j)


def _noma_constants(state_i, state_j, params):
    n = params.n_users
    x_i = n * state_i.rho_bps / (2.0 * params.blocklength_factor * params.bandwidth_hz)
    x_j = n * state_j.rho_bps / (2.0 * params.blocklength_factor * params.bandwidth_hz)
    g = 2.0 ** x_i
    # user i is served iff p_j <= (q - c_i) / g
    c_i = 2.0 * (g - 1.0) / (n * state_i.gamma) if state_i.gamma > 0 else math.inf
    t_j = 2.0 * (2.0 ** x_j - 1.0) / (n * state_j.gamma) if state_j.gamma > 0 else math.inf
    return g, c_i, t_j


def _noma_points(state_i, state_j, params) -> tuple[np.ndarray, np.ndarray]:
    """Analytic corners and stationary points of the pair problem, as (p_i, p_j)."""
    n, p0, v = params.n_users, params.power_budget_w, params.v_weight
    fb = params.blocklength_factor * params.bandwidth_hz
    ln2 = math.log(2.0)
    gi, gj = state_i.gamma, state_j.gamma
    wi, wj = _w(state_i, params), _w(state_j, params)
    g, c_i, t_j = _noma_constants(state_i, state_j, params)
    qs, pjs = [], []

    def add(q, pj):
        if np.isfinite(q) and np.isfinite(pj):
            qs.append(q)
            pjs.append(pj)

    if v > 0 and gi > 0:
        q_star = 2.0 / (n * gi) * (fb * gi * wi / (v * ln2) - 1.0)
        add(q_star, 0.0)
        if gj > 0 and wj != wi:
            # zero of d/dPj [wi log(1 + N gi Pj/2) - wj log(1 + N gj Pj/2)]
            add(q_star, 2.0 * (gi * wi - gj * wj) / (n * gi * gj * (wj - wi)))
    if v > 0 and gj > 0:
        # user i pinned at its threshold, user j free
        pj = 2.0 / (n * gj) * (wj * fb * gj / (v * g * ln2) - 1.0)
        add(g * pj + c_i, pj)
        # user i idle (in outage), the pair split evenly
        pj = 2.0 / (n * gj) * (wj * fb * gj / (2.0 * v * ln2) - 1.0)
        add(2.0 * pj, pj)
    add(c_i, 0.0)
    add(2.0 * t_j, t_j)
    add(g * t_j + c_i, t_j)
    add(p0 + t_j, t_j)
    if g > 1:
        pj = (p0 - c_i) / (g - 1.0)
        add(p0 + pj, pj)
    add(p0, 0.0)
    add(2.0 * p0, p0)

    # every analytic q also gets the split boundaries at that q
    extra_q, extra_pj = [], []
    for q in list(qs):
        lo, hi = max(0.0, q - p0), q / 2.0
        for pj in (lo, hi, t_j, (q - c_i) / g, np.nextafter(t_j, np.inf),
                   np.nextafter((q - c_i) / g, -np.inf)):
            extra_q.append(q)
            extra_pj.append(pj)
    q = np.array(qs + extra_q, dtype=float)
    pj = np.array(pjs + extra_pj, dtype=float)
    return q - pj, pj


def _feasible(p_i, p_j, p0):
    keep = np.isfinite(p_i) & np.isfinite(p_j)
    keep &= (p_j >= 0) & (p_j <= p_i) & (p_i <= p0)
    return p_i[keep], p_j[keep]


def grid_min_noma(state_i: UserState, state_j: UserState, params: SystemParams,
                  grid: Optional[GridSpec] = None, q_points: int = 2000,
                  edge_points: int = 10_000) -> tuple[float, float, float]:
    """Joint search over ``0 <= p_j <= p_i <= P0``.

    Combines a 2-D grid on the triangle, the split boundaries along a fine
    grid of pair totals, dense grids on the triangle's three edges, and the
    analytic stationary and corner points. ``grid.points`` sets the 2-D
    resolution per axis.
    """
    if state_i.gamma > state_j.gamma:
        state_i, state_j = state_j, state_i
    p0 = params.power_budget_w
    side = (grid or GridSpec(points=300)).points
    axis = np.linspace(0.0, p0, side)
    pi2, pj2 = np.meshgrid(axis, axis, indexing="ij")
    mask = pj2 <= pi2
    blocks_i = [pi2[mask]]
    blocks_j = [pj2[mask]]

    g, c_i, t_j = _noma_constants(state_i, state_j, params)
    q = np.linspace(0.0, 2.0 * p0, q_points)
    lo, hi = np.maximum(0.0, q - p0), q / 2.0
    for pj in (lo, hi, np.full_like(q, t_j), (q - c_i) / g):
        pj = np.clip(pj, lo, hi)
        blocks_i.append(q - pj)
        blocks_j.append(pj)

    e = np.linspace(0.0, p0, edge_points)
    blocks_i += [np.full_like(e, p0), e, e]
    blocks_j += [e, np.zeros_like(e), e]

    ai, aj = _noma_points(state_i, state_j, params)
    blocks_i.append(ai)
    blocks_j.append(aj)

    p_i, p_j = _feasible(np.concatenate(blocks_i), np.concatenate(blocks_j), p0)
    m = noma_objective(p_i, p_j, state_i, state_j, params)
    k = int(np.argmin(m))
    if m[k] >= 0:
        return 0.0, 0.0, 0.0
    return float(p_i[k]), float(p_j[k]), float(m[k])


# -- matching ------------------------------------------------------------------

def involutions(n: int) -> Iterator[tuple[int, ...]]:
    """Every involution of ``range(n)`` as a partner tuple."""
    def rec(partner: list[int], free: list[int]):
        if not free:
            yield tuple(partner)
            return
        first, rest = free[0], free[1:]
        partner[first] = first
        yield from rec(partner, rest)
        for k, other in enumerate(rest):
            partner[first], partner[other] = other, first
            yield from rec(partner, rest[:k] + rest[k + 1:])
            partner[other] = other
        partner[first] = first

    yield from rec(list(range(n)), list(range(n)))


def exhaustive_matching(states: Sequence[UserState], params: SystemParams,
                        metric: Optional[np.ndarray] = None):
    """Metric-minimal matching by full enumeration (at most 8 users).

    ``metric`` is the directed pair table; built with the active backend
    when omitted. Returns ``(Matching, total_metric, involutions_checked)``.
    """
    from .pairing import Matching, build_preferences

    n = len(states)
    if n > MAX_EXHAUSTIVE_USERS:
        raise ValueError(f"exhaustive matching supports at most {MAX_EXHAUSTIVE_USERS} users")
    if metric is None:
        metric = build_preferences(states, params).metric
    metric = np.asarray(metric, dtype=float)
    rows = np.arange(n)
    best, best_val, count = None, math.inf, 0
    for partner in involutions(n):
        count += 1
        val = float(metric[rows, list(partner)].sum()) if n else 0.0
        if val < best_val:
            best, best_val = partner, val
    return Matching(best), best_val, count


def telephone_number(n: int) -> int:
    """Count of involutions on ``n`` points."""
    a, b = 1, 1
    for k in range(2, n + 1):
        a, b = b, b + (k - 1) * a
    return b if n >= 1 else 1


__all__ = [
    "GridSpec", "grid_min_oma", "grid_min_noma", "exhaustive_matching",
    "oma_objective", "noma_objective", "involutions", "telephone_number",
]
