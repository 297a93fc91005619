"""System parameters, user placement and config-file handling."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

import numpy as np


class ConfigError(ValueError):
    """Raised for inconsistent or unparsable system parameters."""


@dataclass(frozen=True)
class SystemParams:
    n_users: int = 40
    power_budget_w: float = 3.0
    bandwidth_hz: float = 20e6
    noise_psd_dbm_hz: float = -173.0
    blocklength_factor: float = 0.9
    v_weight: float = 5e5
    slot_duration_s: float = 1e-4
    packet_bits: int = 160
    arrival_min: int = 5
    arrival_max: int = 10
    cell_radius_m: float = 50.0
    e2e_bound_s: float = 1e-3
    tti_s: float = 1e-4
    # None means every user carries the time-average rate constraint
    qos_user_set: Optional[tuple[int, ...]] = None
    rho_bps: float = 7e6
    eta_bps: float = 8.5e6
    path_loss_log_base: float = 10.0

    def __post_init__(self):
        if self.n_users < 1:
            raise ConfigError("n_users must be positive")
        if not 0.0 < self.blocklength_factor <= 1.0:
            raise ConfigError("blocklength_factor must lie in (0, 1]")
        if self.power_budget_w <= 0:
            raise ConfigError("power_budget_w must be positive")
        if self.bandwidth_hz <= 0 or self.slot_duration_s <= 0:
            raise ConfigError("bandwidth_hz and slot_duration_s must be positive")
        if self.v_weight < 0:
            raise ConfigError("v_weight must be non-negative")
        if not 0 <= self.arrival_min <= self.arrival_max:
            raise ConfigError("need 0 <= arrival_min <= arrival_max")
        if self.packet_bits <= 0 or self.cell_radius_m <= 0:
            raise ConfigError("packet_bits and cell_radius_m must be positive")
        if self.rho_bps < 0 or self.eta_bps < 0:
            raise ConfigError("rate targets must be non-negative")
        if self.path_loss_log_base not in (10.0, math.e):
            raise ConfigError("path_loss_log_base must be 10 or e")
        if self.e2e_bound_s - self.tti_s <= 0:
            raise ConfigError("e2e_bound_s must exceed tti_s")
        if self.qos_user_set is not None:
            users = tuple(sorted(set(int(u) for u in self.qos_user_set)))
            if any(u < 0 or u >= self.n_users for u in users):
                raise ConfigError("qos_user_set contains an unknown user index")
            object.__setattr__(self, "qos_user_set", users)

    @property
    def noise_w_per_hz(self) -> float:
        return 10.0 ** ((self.noise_psd_dbm_hz - 30.0) / 10.0)

    def qos_mask(self) -> np.ndarray:
        mask = np.ones(self.n_users, dtype=bool)
        if self.qos_user_set is not None:
            mask[:] = False
            mask[list(self.qos_user_set)] = True
        return mask

    def replace(self, **changes) -> "SystemParams":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class UserProfile:
    distance_m: float
    rate_threshold_bps: float
    qos_rate_bps: float

    def __post_init__(self):
        if self.distance_m <= 0:
            raise ConfigError("distance must be positive")
        if self.rate_threshold_bps <= 0 or self.qos_rate_bps < 0:
            raise ConfigError("invalid rate targets")


def generate_scenario(params: SystemParams, seed: int) -> list[UserProfile]:
    """Drop ``n_users`` uniformly (by area) over the cell disk.

    The radius is ``R * sqrt(U)`` with ``U`` in (0, 1], so no user sits on
    the transmitter itself.
    """
    rng = np.random.default_rng(seed)
    u = 1.0 - rng.random(params.n_users)
    radii = params.cell_radius_m * np.sqrt(u)
    return [
        UserProfile(float(d), params.rho_bps, params.eta_bps) for d in radii
    ]


def delay_margin(params: SystemParams) -> float:
    """Queueing-delay budget left after the UL/DL transmit interval."""
    margin = params.e2e_bound_s - params.tti_s
    if margin <= 0:
        raise ConfigError("e2e_bound_s must exceed tti_s")
    return margin


def margin_slots(params: SystemParams) -> int:
    """Delay margin expressed in whole slots (inclusive bound)."""
    return int(math.floor(delay_margin(params) / params.slot_duration_s + 1e-9))


# -- config files -----------------------------------------------------------

_FIELDS = {f.name: f for f in dataclasses.fields(SystemParams)}


def params_to_dict(params: SystemParams) -> dict[str, Any]:
    out = dataclasses.asdict(params)
    if out["qos_user_set"] is not None:
        out["qos_user_set"] = list(out["qos_user_set"])
    return out


def params_from_dict(data: dict[str, Any], **overrides) -> SystemParams:
    merged = dict(data)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    unknown = set(merged) - set(_FIELDS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kwargs = {}
    for name, value in merged.items():
        if name == "qos_user_set":
            kwargs[name] = None if value is None else tuple(int(v) for v in value)
        elif name in ("n_users", "packet_bits", "arrival_min", "arrival_max"):
            kwargs[name] = int(value)
        else:
            kwargs[name] = float(value)
    return SystemParams(**kwargs)


def load_params(path: Optional[str | Path] = None, **overrides) -> SystemParams:
    """Read a JSON or YAML config; keyword overrides win over file values."""
    data: dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        text = path.read_text()
        if path.suffix in (".yaml", ".yml"):
            import yaml

            data = yaml.safe_load(text) or {}
        else:
            data = json.loads(text)
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a mapping at top level")
    return params_from_dict(data, **overrides)


def save_params(params: SystemParams, path: str | Path) -> None:
    Path(path).write_text(json.dumps(params_to_dict(params), indent=2) + "\n")
