"""Compiled kernels vs the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--users 40] [--slots 200]

Times the all-pairs table, the matching walk, the FIFO bank and whole
simulated slots on identical inputs, and checks the outputs agree.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from hybridma import _backend
from hybridma.channel import ChannelSampler
from hybridma.config import SystemParams, generate_scenario
from hybridma.simulator import run


def _inputs(params, seed, count):
    rng = np.random.default_rng(seed)
    sampler = ChannelSampler(generate_scenario(params, seed), params, rng)
    n = params.n_users
    return [(sampler.sample(), rng.uniform(0, 1e5, n), rng.uniform(0, 1e7, n),
             np.full(n, params.rho_bps)) for _ in range(count)]


def _clock(fn, items):
    t0 = time.perf_counter()
    out = [fn(*x) for x in items]
    return (time.perf_counter() - t0) / len(items), out


def _bank(impl, n, slots, seed):
    rng = np.random.default_rng(seed)
    arrivals = rng.integers(5, 11, size=(slots, n)) * 160.0
    mu = rng.uniform(0, 2400, size=(slots, n))
    bank = impl.FifoBank(n, 160.0, slots + 1)
    t0 = time.perf_counter()
    for t in range(slots):
        bank.serve(mu[t], t)
        bank.enqueue(arrivals[t], t + 1)
    return (time.perf_counter() - t0) / slots, np.asarray(bank.delay_hist).copy()


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--users", type=int, default=40)
    ap.add_argument("--slots", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    params = SystemParams(n_users=args.users)
    py, cy = _backend.get("python"), _backend.get("cython")
    items = _inputs(params, args.seed, max(args.slots // 20, 3))

    rows = []
    t_py, out_py = _clock(lambda *x: py.pair_tables(*x, params), items)
    t_cy, out_cy = _clock(lambda *x: cy.pair_tables(*x, params), items)
    same = all(np.array_equal(a, b) for u, v in zip(out_py, out_cy) for a, b in zip(u, v))
    rows.append(("pair tables", t_py, t_cy, same))

    metrics = [m[0] for m in out_cy]
    t_py, m_py = _clock(py.match, [(m,) for m in metrics])
    t_cy, m_cy = _clock(cy.match, [(m,) for m in metrics])
    rows.append(("matching", t_py, t_cy, all(np.array_equal(a, b) for a, b in zip(m_py, m_cy))))

    t_py, h_py = _bank(py, args.users, args.slots * 10, args.seed)
    t_cy, h_cy = _bank(cy, args.users, args.slots * 10, args.seed)
    rows.append(("FIFO bank slot", t_py, t_cy, bool(np.array_equal(h_py, h_cy))))

    timed = {}
    for name in ("python", "cython"):
        t0 = time.perf_counter()
        timed[name] = run(params, "opt_hybrid", args.slots, args.seed, backend=name)
        timed[name + "_t"] = (time.perf_counter() - t0) / args.slots
    rows.append(("opt hybrid slot", timed["python_t"], timed["cython_t"],
                 bool(np.array_equal(timed["python"].power_series,
                                     timed["cython"].power_series))))

    print(f"N={args.users} users, default backend: {_backend.BACKEND}")
    print(f"{'kernel':<16}{'python ms':>12}{'cython ms':>12}{'speed-up':>10}  identical")
    for name, a, b, ok in rows:
        print(f"{name:<16}{1e3 * a:>12.3f}{1e3 * b:>12.3f}{a / b:>10.1f}  {ok}")


if __name__ == "__main__":
    main()
