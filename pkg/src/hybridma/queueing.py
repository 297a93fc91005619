"""Transmit queues with packet timestamps, and QoS virtual queues."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import SystemParams

# residue below this (in bits) counts as fully served
_BIT_EPS = 1e-9


class TransmitQueue:
    """FIFO of arrival batches.

    Each entry is ``[arrival_slot, bits_remaining, packet_bits]``; an entry
    holds one or more equal-size packets that arrived together. Delays are
    recorded per packet when its last bit leaves.
    """

    __slots__ = ("packets", "backlog_bits")

    def __init__(self):
        self.packets: deque[list] = deque()
        self.backlog_bits: float = 0.0

    def __len__(self) -> int:
        return len(self.packets)

    def packet_count(self) -> int:
        return sum(_packets_left(e) for e in self.packets)

    def ages(self, now: int) -> list[tuple[int, int]]:
        """``(age_in_slots, packet_count)`` for every queued entry."""
        return [(now - e[0] + 1, _packets_left(e)) for e in self.packets]


def _packets_left(entry) -> int:
    rem, size = entry[1], entry[2]
    return max(0, math.ceil(rem / size - _BIT_EPS))


def enqueue(queue: TransmitQueue, arrival_bits: float, now: int,
            packet_bits: Optional[float] = None) -> None:
    """Append one FIFO entry; ``packet_bits`` splits it into equal packets."""
    if arrival_bits <= 0:
        return
    size = arrival_bits if packet_bits is None else packet_bits
    queue.packets.append([now, float(arrival_bits), float(size)])
    queue.backlog_bits += arrival_bits


def serve(queue: TransmitQueue, mu_bits: float, now: int) -> list[int]:
    """Remove up to ``mu_bits`` from the head; return completed-packet delays.

    A packet's delay is ``now - arrival_slot + 1`` slots.
    """
    if mu_bits < 0:
        raise ValueError("mu_bits must be non-negative")
    delays: list[int] = []
    budget = float(mu_bits)
    fifo = queue.packets
    while budget > 0 and fifo:
        head = fifo[0]
        before = _packets_left(head)
        take = min(budget, head[1])
        head[1] -= take
        budget -= take
        if head[1] <= _BIT_EPS:
            done = before
            fifo.popleft()
        else:
            done = before - _packets_left(head)
        if done:
            delays.extend([now - head[0] + 1] * done)
    queue.backlog_bits = max(queue.backlog_bits - mu_bits, 0.0) if fifo else 0.0
    return delays


@dataclass(frozen=True)
class VirtualQueue:
    deficit: float = 0.0


def update_virtual(z: VirtualQueue, eta: float, r_eff: float) -> VirtualQueue:
    return VirtualQueue(max(z.deficit + eta - r_eff, 0.0))


def sample_arrivals(params: SystemParams, rng: np.random.Generator,
                    size: Optional[int] = None):
    """Arrived bits ``a * u`` with ``a`` uniform on {lambda_min..lambda_max}."""
    a = rng.integers(params.arrival_min, params.arrival_max + 1, size=size)
    return a * params.packet_bits
