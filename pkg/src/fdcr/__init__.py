"""Full-duplex cognitive radio: sensing, collision and throughput models.

The package covers energy detection with residual self-interference,
PU/SU collision probabilities for the transmit-only (TO),
transmit-and-sense (TS) and transmit-and-receive (TR) modes, SU
throughput, a constrained grid optimizer, and a Monte Carlo oracle.
"""

from fdcr.dettheory import (
    DetectorMoments,
    SensingConfig,
    moments_h0,
    moments_h1,
    pd_fd,
    pd_hd,
    pf_fd,
    pf_hd,
    q_function,
    sample_count,
    threshold_for_pf,
)
from fdcr.exceptions import (
    ConfigurationError,
    DomainError,
    FdcrError,
    InfeasibleError,
    UndefinedConditionalError,
)
from fdcr.outage import (
    CollisionBreakdown,
    FrameSchedule,
    Mode,
    collision,
    collision_to_imperfect,
    collision_to_perfect,
    collision_ts_imperfect,
    collision_ts_perfect,
)
from fdcr.throughput import (
    LinkModel,
    ThroughputReport,
    channel_gain,
    rate_to,
    rate_tr,
    rate_ts,
    snr_to,
    snr_tr,
)
from fdcr.traffic import TrafficModel, f_tau, on_rate

__version__ = "0.1.0"

__all__ = [
    "CollisionBreakdown",
    "ConfigurationError",
    "DetectorMoments",
    "DomainError",
    "FdcrError",
    "FrameSchedule",
    "InfeasibleError",
    "LinkModel",
    "Mode",
    "SensingConfig",
    "ThroughputReport",
    "TrafficModel",
    "UndefinedConditionalError",
    "channel_gain",
    "collision",
    "collision_to_imperfect",
    "collision_to_perfect",
    "collision_ts_imperfect",
    "collision_ts_perfect",
    "f_tau",
    "moments_h0",
    "moments_h1",
    "on_rate",
    "pd_fd",
    "pd_hd",
    "pf_fd",
    "pf_hd",
    "q_function",
    "rate_to",
    "rate_tr",
    "rate_ts",
    "sample_count",
    "snr_to",
    "snr_tr",
    "threshold_for_pf",
]
