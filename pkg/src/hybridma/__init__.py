"""Power-efficient low-latency scheduling for hybrid OMA/NOMA downlinks."""

__version__ = "0.1.0"
