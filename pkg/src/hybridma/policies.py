"""Per-slot schedulers: the two drift-plus-penalty optimisers and two baselines.

Each policy has a state-level form (``policy_*(states, params)``) returning
a :class:`SlotDecision`, and an array-level form used by the simulator
loop, registered in :data:`ARRAY_POLICIES`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import _backend
from .config import SystemParams
from .pairing import Matching
from .rates import noma_rates, oma_rate
from .state import UserState


@dataclass(frozen=True)
class SlotDecision:
    matching: Matching
    powers_w: np.ndarray
    predicted_rates_bps: np.ndarray
    effective_rates_bps: np.ndarray
    metric: float = 0.0


@dataclass
class ArrayDecision:
    """Bare arrays produced by the fast path."""

    partner: np.ndarray
    powers_w: np.ndarray
    effective_rates_bps: np.ndarray
    metric: float


def _weights(q_bits, z_tilde, params):
    return params.slot_duration_s * np.asarray(q_bits) + np.asarray(z_tilde)


def _oma_thresholds(gamma, rho, params):
    n = params.n_users
    expo = n * np.asarray(rho) / (params.blocklength_factor * params.bandwidth_hz)
    with np.errstate(divide="ignore"):
        thr = np.expm1(expo * np.log(2.0)) / (n * np.asarray(gamma))
    return np.where(np.asarray(gamma) > 0, thr, np.inf)


def _oma_rates(p, gamma, params):
    n = params.n_users
    scale = params.blocklength_factor * params.bandwidth_hz / n
    return scale * np.log2(1.0 + n * np.asarray(gamma) * p)


# -- array-level policies ------------------------------------------------------

def hybrid_arrays(gamma, q_bits, z_tilde, rho, params, impl=None) -> ArrayDecision:
    impl = impl or _backend.get()
    metric, power, rate = impl.pair_tables(gamma, q_bits, z_tilde, rho, params)
    partner = impl.match(metric)
    idx = np.arange(len(partner))
    return ArrayDecision(partner, power[idx, partner], rate[idx, partner],
                         float(metric[idx, partner].sum()))


def oma_arrays(gamma, q_bits, z_tilde, rho, params, impl=None) -> ArrayDecision:
    impl = impl or _backend.get()
    metric, power, rate = impl.oma_vectors(gamma, q_bits, z_tilde, rho, params)
    return ArrayDecision(np.arange(len(gamma)), power, rate, float(metric.sum()))


def _fixed_power(power, gamma, q_bits, z_tilde, params):
    eff = np.where(power > 0, _oma_rates(power, gamma, params), 0.0)
    metric = params.v_weight * power - _weights(q_bits, z_tilde, params) * eff
    return ArrayDecision(np.arange(len(gamma)), power, eff, float(metric.sum()))


def pmax_arrays(gamma, q_bits, z_tilde, rho, params, impl=None) -> ArrayDecision:
    """Full budget on every link that is out of outage at full budget."""
    thr = _oma_thresholds(gamma, rho, params)
    power = np.where(thr <= params.power_budget_w, params.power_budget_w, 0.0)
    return _fixed_power(power, gamma, q_bits, z_tilde, params)


def pmin_arrays(gamma, q_bits, z_tilde, rho, params, impl=None) -> ArrayDecision:
    """Exactly the outage threshold power, or nothing when it exceeds the budget."""
    thr = _oma_thresholds(gamma, rho, params)
    power = np.where(thr <= params.power_budget_w, thr, 0.0)
    return _fixed_power(power, gamma, q_bits, z_tilde, params)


ARRAY_POLICIES: dict[str, Callable[..., ArrayDecision]] = {
    "opt_hybrid": hybrid_arrays,
    "opt_oma": oma_arrays,
    "pmax": pmax_arrays,
    "pmin": pmin_arrays,
}

POLICY_NAMES = tuple(ARRAY_POLICIES)


def get_array_policy(name: str) -> Callable[..., ArrayDecision]:
    try:
        return ARRAY_POLICIES[name]
    except KeyError:
        raise ValueError(f"unknown policy {name!r}; choose from {POLICY_NAMES}") from None


# -- state-level policies ------------------------------------------------------

def _predicted(partner, powers, gamma, params):
    """Instantaneous (ungated) rates implied by a matching and powers."""
    out = np.zeros(len(partner))
    for i, p in enumerate(partner):
        if p == i:
            out[i] = oma_rate(powers[i], gamma[i], params)
        elif gamma[i] < gamma[p] or (gamma[i] == gamma[p] and i < p):
            r = noma_rates(powers[i], powers[p], gamma[i], gamma[p], params)
            out[i], out[p] = r.rate_non_sic_bps, r.rate_sic_bps
    return out


def _decide(fn, states: Sequence[UserState], params: SystemParams) -> SlotDecision:
    gamma, q_bits, z_tilde, rho = _backend.state_arrays(states)
    d = fn(gamma, q_bits, z_tilde, rho, params)
    partner = [int(p) for p in d.partner]
    return SlotDecision(Matching(tuple(partner)), np.asarray(d.powers_w, dtype=float),
                        _predicted(partner, d.powers_w, gamma, params),
                        np.asarray(d.effective_rates_bps, dtype=float), d.metric)


def policy_opt_hybrid(states, params) -> SlotDecision:
    return _decide(hybrid_arrays, states, params)


def policy_opt_oma(states, params) -> SlotDecision:
    return _decide(oma_arrays, states, params)


def policy_pmax(states, params) -> SlotDecision:
    return _decide(pmax_arrays, states, params)


def policy_pmin(states, params) -> SlotDecision:
    return _decide(pmin_arrays, states, params)
