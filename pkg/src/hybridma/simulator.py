"""Slot-loop simulation and the reported power, delay and rate metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from . import _backend
from .channel import ChannelSampler
from .config import SystemParams, generate_scenario, margin_slots
from .policies import ArrayDecision, get_array_policy
from .queueing import sample_arrivals

WARMUP_FRACTION = 0.1


@dataclass
class MetricsTrace:
    """Summary statistics plus the per-slot series of one run.

    Time averages and delay statistics cover the post-warm-up window;
    ``rate_sum_all_bps`` and the bit counters cover every slot so that the
    conservation and virtual-queue identities can be checked exactly.
    """

    policy: str
    seed: int
    horizon: int
    warmup: int
    params: SystemParams
    time_avg_power_sum_w: float
    per_user_time_avg_rate_bps: np.ndarray
    max_expected_queueing_delay_s: float
    p999_delay_s: float
    low_latency_rate: float
    low_latency_undefined: bool
    backlog_series: np.ndarray
    virtual_backlog_series: np.ndarray
    power_series: np.ndarray
    per_user_mean_delay_slots: np.ndarray
    delay_hist: np.ndarray
    pending: list
    arrived_bits: np.ndarray
    served_bits: np.ndarray
    final_backlog_bits: np.ndarray
    final_virtual: np.ndarray
    rate_sum_all_bps: np.ndarray
    eta_bps: np.ndarray
    qos_mask: np.ndarray
    stable: bool = True
    extras: dict = field(default_factory=dict)

    @property
    def avg_rate_bps(self) -> float:
        return float(np.mean(self.per_user_time_avg_rate_bps))

    @property
    def max_delay_s(self) -> float:
        return self.max_expected_queueing_delay_s


PolicyArg = Union[str, Callable[..., ArrayDecision]]


def _streams(seed: int):
    # the layout uses the seed directly; fading and arrivals get child streams
    channel, arrivals = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(channel), np.random.default_rng(arrivals)


def run(params: SystemParams, policy: PolicyArg, horizon: int, seed: int,
        profiles=None, backend: Optional[str] = None) -> MetricsTrace:
    """Simulate ``horizon`` slots.

    Per slot: channels, arrivals (held aside), policy decision, service of
    ``R~ * tau`` bits, then the arrivals join the queues stamped with the
    next slot, then the virtual queues update.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least one slot")
    name = policy if isinstance(policy, str) else getattr(policy, "__name__", "custom")
    decide = get_array_policy(policy) if isinstance(policy, str) else policy
    impl = _backend.get(backend)

    ch_rng, arr_rng = _streams(seed)
    if profiles is None:
        profiles = generate_scenario(params, seed)
    n = params.n_users
    rho = np.array([p.rate_threshold_bps for p in profiles], dtype=float)
    eta = np.array([p.qos_rate_bps for p in profiles], dtype=float)
    qos = params.qos_mask()
    sampler = ChannelSampler(profiles, params, ch_rng)
    tau = params.slot_duration_s

    warmup = int(horizon * WARMUP_FRACTION)
    bank = impl.FifoBank(n, float(params.packet_bits), horizon + 1, warmup + 1)
    z = np.zeros(n)
    backlog_series = np.zeros(horizon)
    virtual_series = np.zeros(horizon)
    power_series = np.zeros(horizon)
    rate_sum = np.zeros(n)
    rate_sum_all = np.zeros(n)
    arrived = np.zeros(n)

    for t in range(horizon):
        gamma = sampler.sample()
        arrivals = sample_arrivals(params, arr_rng, size=n).astype(float)
        z_tilde = np.where(qos, z, 0.0)
        d = decide(gamma, bank.backlog_bits.copy(), z_tilde, rho, params, impl=impl)
        eff = np.asarray(d.effective_rates_bps, dtype=float)
        bank.serve(eff * tau, t)
        bank.enqueue(arrivals, t + 1)
        arrived += arrivals
        z = np.maximum(z + eta - eff, 0.0)
        rate_sum_all += eff
        if t >= warmup:
            rate_sum += eff
        power_series[t] = float(np.sum(d.powers_w))
        backlog_series[t] = float(np.sum(bank.backlog_bits))
        virtual_series[t] = float(np.sum(z))

    window = horizon - warmup
    hist = np.asarray(bank.delay_hist).copy()
    counts = np.asarray(bank.delay_count)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean_delay = np.where(counts > 0, np.asarray(bank.delay_sum) / counts, np.nan)
    max_mean = float(np.nanmax(mean_delay)) if np.any(counts > 0) else math.nan
    pending = bank.pending(horizon)
    ll, undefined = _low_latency(hist, pending, horizon, margin_slots(params))

    trace = MetricsTrace(
        policy=name, seed=seed, horizon=horizon, warmup=warmup, params=params,
        time_avg_power_sum_w=float(np.mean(power_series[warmup:])),
        per_user_time_avg_rate_bps=rate_sum / window,
        max_expected_queueing_delay_s=max_mean * tau,
        p999_delay_s=delay_quantile(hist, 0.999) * tau,
        low_latency_rate=ll, low_latency_undefined=undefined,
        backlog_series=backlog_series, virtual_backlog_series=virtual_series,
        power_series=power_series, per_user_mean_delay_slots=mean_delay,
        delay_hist=hist, pending=pending, arrived_bits=arrived,
        served_bits=np.asarray(bank.served_bits).copy(),
        final_backlog_bits=np.asarray(bank.backlog_bits).copy(),
        final_virtual=z, rate_sum_all_bps=rate_sum_all, eta_bps=eta, qos_mask=qos,
    )
    if horizon >= 10:
        trace.stable = stability_check(backlog_series)["stable"]
    return trace


def delay_quantile(hist: np.ndarray, q: float) -> float:
    """Smallest delay ``d`` with at least a fraction ``q`` of packets at or below it."""
    total = int(np.sum(hist))
    if total == 0:
        return math.nan
    cum = np.cumsum(hist)
    return float(np.searchsorted(cum, q * total - 1e-9 * total))


def _low_latency(hist, pending, horizon, margin):
    met = int(np.sum(hist[: margin + 1]))
    served = int(np.sum(hist))
    # a queued packet's eventual delay is at least its age at the horizon
    late = sum(k for stamp, k in pending if horizon - stamp + 1 > margin)
    total = served + late
    if total == 0:
        return 1.0, True
    return met / total, False


def low_latency_rate(trace, margin_s: Optional[float] = None) -> float:
    """Share of packets whose queueing delay stays within the margin.

    ``trace`` is a :class:`MetricsTrace` or a plain sequence of per-packet
    delays in slots. Packets still queued past the margin count as misses;
    younger queued packets are left out. Returns 1.0 when nothing counts.
    """
    if isinstance(trace, MetricsTrace):
        params = trace.params
        margin = (margin_slots(params) if margin_s is None
                  else int(math.floor(margin_s / params.slot_duration_s + 1e-9)))
        return _low_latency(trace.delay_hist, trace.pending, trace.horizon, margin)[0]
    delays = np.asarray(trace, dtype=float)
    if margin_s is None:
        raise ValueError("margin_s is required for a raw delay sequence")
    if delays.size == 0:
        return 1.0
    return float(np.mean(delays <= margin_s))


def stability_check(backlog_series, ratio: float = 1.5) -> dict:
    """Compare the mean backlog of the middle fifth with the last fifth."""
    x = np.asarray(backlog_series, dtype=float)
    n = len(x)
    if n < 10:
        raise ValueError("series too short for a stability check")
    middle = float(np.mean(x[int(0.4 * n): int(0.6 * n)]))
    final = float(np.mean(x[int(0.8 * n):]))
    diverging = final > ratio * middle if middle > 0 else final > 0
    return {"middle_mean": middle, "final_mean": final, "stable": not diverging}
