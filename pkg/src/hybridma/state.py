"""Per-slot decision input for one user."""

from __future__ import annotations

from dataclasses import dataclass

from .config import SystemParams


@dataclass(frozen=True)
class UserState:
    gamma: float
    q_bits: float = 0.0
    z: float = 0.0
    rho_bps: float = 7e6
    eta_bps: float = 8.5e6
    qos: bool = True

    @property
    def z_tilde(self) -> float:
        return self.z if self.qos else 0.0

    def weight(self, params: SystemParams) -> float:
        """Queue pressure ``tau*Q + Z~`` multiplying the rate in every metric."""
        return queue_weight(self.q_bits, self.z_tilde, params)


def queue_weight(q_bits: float, z_tilde: float, params: SystemParams) -> float:
    return params.slot_duration_s * q_bits + z_tilde
