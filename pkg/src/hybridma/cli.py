"""Command-line entry point: single runs, sweeps, oracle checks, layouts."""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .config import ConfigError, SystemParams, generate_scenario, load_params, params_to_dict
from .policies import POLICY_NAMES

COLUMNS = ["axis", "value", "policy", "v", "seed", "power_sum_w", "max_delay_s",
           "p999_delay_s", "avg_rate_bps", "low_latency_rate", "stable_flag"]
METRIC_COLUMNS = COLUMNS[5:]
AXES = {"rho": "rho_bps", "eta": "eta_bps", "v": "v_weight"}
OPT_POLICIES = ("opt_hybrid", "opt_oma")


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple[float, ...]
    policies: tuple[str, ...]
    seeds: tuple[int, ...]
    horizon: int
    v_values: tuple[float, ...] = ()

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"unknown sweep axis {self.axis!r}; choose from {sorted(AXES)}")
        bad = [p for p in self.policies if p not in POLICY_NAMES]
        if bad:
            raise ValueError(f"unknown policies {bad}; choose from {list(POLICY_NAMES)}")
        if not (self.values and self.policies and self.seeds):
            raise ValueError("values, policies and seeds must be non-empty")
        if self.horizon < 1:
            raise ValueError("horizon must be positive")

    def cells(self, base: SystemParams) -> list[tuple]:
        """``(axis_value, policy, v, seed)`` for every row of the sweep."""
        out = []
        for value in self.values:
            for policy in self.policies:
                if self.axis == "v":
                    vs = (value,)
                elif policy in OPT_POLICIES and self.v_values:
                    vs = self.v_values
                else:
                    vs = (base.v_weight,)
                for v in vs:
                    for seed in self.seeds:
                        out.append((value, policy, v, seed))
        return out


def _cell_params(base: SystemParams, axis: str, value: float, v: float) -> SystemParams:
    params = base.replace(**{AXES[axis]: float(value)})
    return params if axis == "v" else params.replace(v_weight=float(v))


def _run_cell(args) -> dict:
    from .simulator import run

    base, axis, value, policy, v, seed, horizon = args
    params = _cell_params(base, axis, value, v)
    tr = run(params, policy, horizon, seed)
    return {
        "axis": axis, "value": value, "policy": policy, "v": params.v_weight,
        "seed": seed, "power_sum_w": tr.time_avg_power_sum_w,
        "max_delay_s": tr.max_delay_s, "p999_delay_s": tr.p999_delay_s,
        "avg_rate_bps": tr.avg_rate_bps, "low_latency_rate": tr.low_latency_rate,
        "stable_flag": bool(tr.stable),
    }


def run_sweep(spec: SweepSpec, base: SystemParams, jobs: int = 1) -> list[dict]:
    tasks = [(base, spec.axis, value, policy, v, seed, spec.horizon)
             for value, policy, v, seed in spec.cells(base)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_cell, tasks))
    return [_run_cell(t) for t in tasks]


def summarize(rows: Sequence[dict]) -> list[dict]:
    """Mean and standard error over seeds for every (value, policy, v) cell."""
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        groups.setdefault((r["axis"], r["value"], r["policy"], r["v"]), []).append(r)
    out = []
    for (axis, value, policy, v), members in groups.items():
        entry = {"axis": axis, "value": value, "policy": policy, "v": v, "seeds": len(members)}
        for col in METRIC_COLUMNS:
            x = np.array([float(m[col]) for m in members])
            entry[f"{col}_mean"] = float(np.mean(x))
            entry[f"{col}_stderr"] = (float(np.std(x, ddof=1) / math.sqrt(len(x)))
                                      if len(x) > 1 else 0.0)
        out.append(entry)
    return out


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    raise TypeError(f"not serialisable: {type(x)}")


def emit(rows: Sequence[dict], out_dir, fmt: str, params: SystemParams,
         spec: Optional[dict] = None, stem: str = "results") -> list[Path]:
    """Write rows plus a seed-aggregated summary; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    config = params_to_dict(params)
    summary = summarize(rows)
    written = []
    if fmt == "csv":
        written.append(_write_csv(out / f"{stem}.csv", COLUMNS, rows))
        if summary:
            written.append(_write_csv(out / f"{stem}_summary.csv", list(summary[0]), summary))
        # CSV has no room for metadata, so the resolved config sits beside it
        path = out / f"{stem}_config.json"
        path.write_text(json.dumps({"config": config, "sweep": spec}, indent=2,
                                   default=_json_default) + "\n")
        written.append(path)
    elif fmt == "json":
        for name, payload in ((f"{stem}.json", list(rows)),
                              (f"{stem}_summary.json", summary)):
            path = out / name
            path.write_text(json.dumps({"config": config, "sweep": spec, "rows": payload},
                                       indent=2, default=_json_default) + "\n")
            written.append(path)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return written


def _write_csv(path: Path, columns, rows) -> Path:
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        writer.writeheader()
        for r in rows:
            writer.writerow({k: (repr(float(v)) if isinstance(v, float) else v)
                             for k, v in r.items()})
    return path


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(",") if x.strip())


def _names(text: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in text.split(",") if x.strip())


def _base_params(args) -> SystemParams:
    overrides = {}
    for flag, name in (("v", "v_weight"), ("rho", "rho_bps"), ("eta", "eta_bps"),
                       ("tau", "slot_duration_s"), ("users", "n_users")):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[name] = value
    return load_params(args.config, **overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hybridma", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, outputs=True):
        p.add_argument("--config", help="JSON or YAML file with SystemParams fields")
        p.add_argument("--v", type=float, help="override v_weight")
        p.add_argument("--rho", type=float, help="override rho_bps")
        p.add_argument("--eta", type=float, help="override eta_bps")
        p.add_argument("--tau", type=float, help="override slot_duration_s")
        p.add_argument("--users", type=int, help="override n_users")
        if outputs:
            p.add_argument("--out", default="results", help="output directory")
            p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("run", help="simulate one policy")
    common(p)
    p.add_argument("--policy", choices=POLICY_NAMES, default="opt_hybrid")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--horizon", type=int, default=100_000)

    p = sub.add_parser("sweep", help="sweep rho, eta or V over policies and seeds")
    common(p)
    p.add_argument("--sweep-axis", choices=sorted(AXES), default="rho")
    p.add_argument("--sweep-values", type=_floats, default=(5e6, 6e6, 7e6, 8e6, 9e6))
    p.add_argument("--policies", type=_names, default=POLICY_NAMES)
    p.add_argument("--v-values", type=_floats, default=(1e5, 5e5, 1e6),
                   help="V grid for the optimising policies")
    p.add_argument("--seeds", type=_ints, default=(0, 1, 2, 3, 4))
    p.add_argument("--horizon", type=int, default=100_000)
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("verify", help="check the closed forms against the oracles")
    common(p, outputs=False)
    p.add_argument("--states", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("scenario", help="dump a generated user layout")
    common(p)
    p.add_argument("--seed", type=int, default=0)
    return parser


def _cmd_run(args) -> int:
    base = _base_params(args)
    spec = SweepSpec("v", (base.v_weight,), (args.policy,), (args.seed,), args.horizon)
    rows = run_sweep(spec, base)
    rows[0]["axis"], rows[0]["value"] = "none", ""
    for path in emit(rows, args.out, args.format, base,
                     {"policy": args.policy, "seed": args.seed, "horizon": args.horizon},
                     stem="run"):
        print(path)
    return 0


def _cmd_sweep(args) -> int:
    base = _base_params(args)
    spec = SweepSpec(args.sweep_axis, args.sweep_values, args.policies, args.seeds,
                     args.horizon, args.v_values)
    rows = run_sweep(spec, base, jobs=args.jobs)
    meta = {"axis": spec.axis, "values": list(spec.values), "policies": list(spec.policies),
            "v_values": list(spec.v_values), "seeds": list(spec.seeds),
            "horizon": spec.horizon}
    for path in emit(rows, args.out, args.format, base, meta):
        print(path)
    return 0


def _cmd_verify(args) -> int:
    from .noma import solve_noma_pair, ordering_precondition
    from .oma import solve_oma
    from .oracle import grid_min_noma, grid_min_oma
    from .state import UserState

    params = _base_params(args)
    rng = np.random.default_rng(args.seed)
    tol = 1e-6 * params.v_weight * params.power_budget_w

    def draw():
        return UserState(float(10 ** rng.uniform(0, 6)), float(rng.uniform(0, 1e5)),
                         float(rng.uniform(0, 1e8)), params.rho_bps, params.eta_bps)

    oma_ok = 0
    for _ in range(args.states):
        s = draw()
        d = solve_oma(s.q_bits, s.z_tilde, s.gamma, params, rho=s.rho_bps)
        oma_ok += d.metric <= grid_min_oma(s, params)[1] + tol
    print(f"oma: {oma_ok}/{args.states} within tolerance")

    noma_ok, gaps, done = 0, [], 0
    while done < args.states:
        a, b = draw(), draw()
        si, sj = (a, b) if a.gamma <= b.gamma else (b, a)
        if not ordering_precondition(si, sj, params):
            continue
        done += 1
        d = solve_noma_pair(si, sj, params)
        m = 0.0 if d.useless else d.metric
        ref = grid_min_noma(si, sj, params)[2]
        noma_ok += m <= ref + tol
        if ref < 0:
            gaps.append((m - ref) / abs(ref))
    med = float(np.median(gaps)) if gaps else 0.0
    print(f"noma: {noma_ok}/{args.states} within tolerance, median relative gap {med:.4g}")
    return 0 if oma_ok == args.states else 1


def _cmd_scenario(args) -> int:
    from .channel import ChannelSampler

    params = _base_params(args)
    profiles = generate_scenario(params, args.seed)
    sampler = ChannelSampler(profiles, params, np.random.default_rng(args.seed))
    rows = [{"user": k, "distance_m": p.distance_m, "path_loss_db": float(pl),
             "mean_gain_per_watt": float(g), "rho_bps": p.rate_threshold_bps,
             "eta_bps": p.qos_rate_bps}
            for k, (p, pl, g) in enumerate(zip(profiles, sampler.path_loss_db,
                                               sampler.mean_gain))]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.format == "csv":
        path = _write_csv(out / "scenario.csv", list(rows[0]), rows)
    else:
        path = out / "scenario.json"
        path.write_text(json.dumps({"config": params_to_dict(params), "seed": args.seed,
                                    "users": rows}, indent=2) + "\n")
    print(path)
    return 0


COMMANDS = {"run": _cmd_run, "sweep": _cmd_sweep, "verify": _cmd_verify,
            "scenario": _cmd_scenario}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
