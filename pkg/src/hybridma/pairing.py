"""Preference lists and the deferred-acceptance style user pairing.

A matching is an involution over users: ``partner[i] == i`` serves user
``i`` by OMA, a 2-cycle is a NOMA pair. Every directed metric
``M[i, j]`` (user ``i``'s own term when paired with ``j``; the diagonal
is its OMA term) is solved once per slot and cached in a table.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .config import SystemParams
from .state import UserState


@dataclass(frozen=True)
class Matching:
    partner: tuple[int, ...]

    @classmethod
    def identity(cls, n: int) -> "Matching":
        return cls(tuple(range(n)))

    def __len__(self) -> int:
        return len(self.partner)

    def __getitem__(self, i: int) -> int:
        return self.partner[i]

    def is_valid(self) -> bool:
        n = len(self.partner)
        return all(0 <= p < n and self.partner[p] == i
                   for i, p in enumerate(self.partner))

    def pairs(self) -> list[tuple[int, int]]:
        return [(i, p) for i, p in enumerate(self.partner) if i < p]


@dataclass
class PreferenceTable:
    """Sorted partner lists plus the cached per-slot pair solutions.

    ``metric``, ``power`` and ``rate`` are ``N x N``: row ``i``, column
    ``j`` holds user ``i``'s metric, power and effective rate when paired
    with ``j`` (column ``i`` is OMA).
    """

    lists: list[list[int]]
    metric: np.ndarray
    power: np.ndarray
    rate: np.ndarray

    @classmethod
    def from_tables(cls, metric, power=None, rate=None) -> "PreferenceTable":
        metric = np.asarray(metric, dtype=float)
        zeros = np.zeros_like(metric)
        return cls(preference_lists(metric), metric,
                   zeros if power is None else np.asarray(power, dtype=float),
                   zeros if rate is None else np.asarray(rate, dtype=float))


def preference_lists(metric: np.ndarray) -> list[list[int]]:
    """Ascending by metric, ties to the lower index; only strictly negative entries."""
    metric = np.asarray(metric)
    lists = []
    for row in metric:
        cand = [j for j in range(len(row)) if row[j] < 0]
        cand.sort(key=lambda j: (row[j], j))
        lists.append(cand)
    return lists


def build_preferences(states: Sequence[UserState], params: SystemParams,
                      backend=None) -> PreferenceTable:
    if backend is None:
        from . import _backend as backend
    metric, power, rate = backend.pair_tables(states, params)
    return PreferenceTable(preference_lists(metric), metric, power, rate)


def total_metric(m: Matching, table) -> float:
    """Sum of each user's directed metric under matching ``m``."""
    metric = table.metric if isinstance(table, PreferenceTable) else np.asarray(table)
    return float(sum(metric[i, p] for i, p in enumerate(m.partner)))


class _Proposals:
    """Working state of one candidate matching under construction."""

    def __init__(self, prefs: PreferenceTable, psi: list[int]):
        self.lists = prefs.lists
        self.psi = psi
        self.limit = len(psi)

    def best(self, user: int, excluded: set[int]) -> Optional[int]:
        for cand in self.lists[user]:
            if cand not in excluded:
                return cand
        return None

    def request(self, i: int, j: int, excluded: set[int], depth: int) -> None:
        if depth > self.limit:
            raise RuntimeError("match request recursion exceeded the user count")
        psi = self.psi
        m, p = psi[i], psi[j]
        psi[i], psi[j] = j, i
        if m != i:
            psi[m] = m
        if p != j:
            psi[p] = p
        inner = excluded | {i, j}
        if m != i:
            self.repropose(m, inner, depth)
        if p != j and psi[p] == p:
            self.repropose(p, inner, depth)

    def repropose(self, user: int, excluded: set[int], depth: int) -> None:
        target = self.best(user, excluded)
        if target is not None and target != user:
            self.request(user, target, excluded, depth + 1)

    def release(self, i: int) -> None:
        """User ``i`` prefers OMA to its current partner, who then re-proposes."""
        m = self.psi[i]
        self.psi[i] = i
        self.psi[m] = m
        self.repropose(m, {i}, 0)


def match_request(u_i: int, u_j: int, current: Matching, excluded: Iterable[int],
                  prefs: PreferenceTable) -> Matching:
    """Candidate matching after ``u_j`` accepts ``u_i``.

    Displaced former partners re-propose down their lists, skipping the
    excluded users, until everyone is matched (possibly to themselves).
    """
    if u_i == u_j:
        raise ValueError("a user cannot request itself")
    work = _Proposals(prefs, list(current.partner))
    work.request(u_i, u_j, set(excluded), 0)
    return Matching(tuple(work.psi))


def metric_change(before: Sequence[int], after: Sequence[int], metric: np.ndarray) -> float:
    """Total-metric difference summed over changed users in index order."""
    delta = 0.0
    for u in range(len(before)):
        if after[u] != before[u]:
            delta += metric[u, after[u]] - metric[u, before[u]]
    return delta


def pair_users(prefs: PreferenceTable, states=None, params=None) -> Matching:
    """Each user walks its list; a request is kept only if the total drops."""
    n = len(prefs.lists)
    metric = prefs.metric
    psi = list(range(n))
    for i in range(n):
        for j in prefs.lists[i]:
            if j == psi[i]:
                break
            work = _Proposals(prefs, list(psi))
            if j == i:
                work.release(i)
            else:
                work.request(i, j, set(), 0)
            if metric_change(psi, work.psi, metric) < 0:
                psi = work.psi
                break
    return Matching(tuple(psi))
