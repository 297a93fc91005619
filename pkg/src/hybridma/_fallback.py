"""Pure-Python slot kernels, built directly on the reference solvers."""

from __future__ import annotations

import numpy as np

from .noma import solve_noma_pair
from .oma import solve_oma
from .pairing import PreferenceTable, pair_users, preference_lists
from .queueing import TransmitQueue, _packets_left, enqueue, serve
from .state import UserState


def _states(gamma, q_bits, z_tilde, rho):
    return [UserState(float(g), float(q), float(z), float(r), 0.0, True)
            for g, q, z, r in zip(gamma, q_bits, z_tilde, rho)]


def oma_vectors(gamma, q_bits, z_tilde, rho, params):
    n = len(gamma)
    metric, power, rate = np.zeros(n), np.zeros(n), np.zeros(n)
    for a in range(n):
        d = solve_oma(float(q_bits[a]), float(z_tilde[a]), float(gamma[a]), params,
                      rho=float(rho[a]))
        metric[a], power[a], rate[a] = d.metric, d.power_w, d.rate_bps
    return metric, power, rate


def pair_tables(gamma, q_bits, z_tilde, rho, params):
    n = len(gamma)
    states = _states(gamma, q_bits, z_tilde, rho)
    metric = np.zeros((n, n))
    power = np.zeros((n, n))
    rate = np.zeros((n, n))
    diag = oma_vectors(gamma, q_bits, z_tilde, rho, params)
    idx = np.arange(n)
    metric[idx, idx], power[idx, idx], rate[idx, idx] = diag
    for a in range(n):
        for b in range(a + 1, n):
            d = solve_noma_pair(states[a], states[b], params)
            i, j = (b, a) if d.swapped else (a, b)
            metric[i, j], metric[j, i] = d.metric_non_sic, d.metric_sic
            power[i, j], power[j, i] = d.power_non_sic_w, d.power_sic_w
            rate[i, j] = d.effective.rate_non_sic_bps
            rate[j, i] = d.effective.rate_sic_bps
    return metric, power, rate


def match(metric) -> np.ndarray:
    metric = np.asarray(metric, dtype=float)
    prefs = PreferenceTable(preference_lists(metric), metric,
                            np.zeros_like(metric), np.zeros_like(metric))
    return np.array(pair_users(prefs).partner, dtype=np.intp)


class FifoBank:
    """Pure-Python counterpart of the compiled multi-user FIFO bank."""

    def __init__(self, n_users, packet_bits, max_delay, count_from=0, capacity=64):
        self.n = n_users
        self.packet_bits = float(packet_bits)
        self.queues = [TransmitQueue() for _ in range(n_users)]
        self.backlog_bits = np.zeros(n_users)
        self.delay_hist = np.zeros(max_delay + 2, dtype=np.int_)
        self.delay_sum = np.zeros(n_users)
        self.delay_count = np.zeros(n_users, dtype=np.int_)
        self.served_bits = np.zeros(n_users)
        self.count_from = count_from

    def serve(self, mu_bits, now):
        mu_bits = np.asarray(mu_bits, dtype=float)
        if np.any(mu_bits < 0):
            raise ValueError("mu_bits must be non-negative")
        top = len(self.delay_hist) - 1
        for u, queue in enumerate(self.queues):
            q_pre = queue.backlog_bits
            delays = serve(queue, float(mu_bits[u]), now)
            for d in delays:
                if now - d + 1 >= self.count_from:
                    self.delay_hist[min(d, top)] += 1
                    self.delay_sum[u] += d
                    self.delay_count[u] += 1
            self.served_bits[u] += q_pre - queue.backlog_bits
            self.backlog_bits[u] = queue.backlog_bits

    def enqueue(self, arrival_bits, now):
        for u, queue in enumerate(self.queues):
            enqueue(queue, float(arrival_bits[u]), now, self.packet_bits)
            self.backlog_bits[u] = queue.backlog_bits

    def pending(self, now):
        return [(e[0], _packets_left(e)) for q in self.queues for e in q.packets
                if e[0] >= self.count_from]

    def fifo_bits(self):
        return np.array([sum(e[1] for e in q.packets) for q in self.queues])
