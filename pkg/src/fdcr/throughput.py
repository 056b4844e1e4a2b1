"""SU throughput for the TO, TS and TR modes.

Throughput is ``(1 - P_collision) * duty * log2(1 + SNR)`` in bits/s/Hz,
where ``duty = T / (T + T_S0)``.  The SU link runs from node ``i`` to
node ``j``; in TR mode node ``j`` also transmits back to ``i``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from fdcr.dettheory import db_to_linear
from fdcr.exceptions import ConfigurationError
from fdcr.outage import CollisionBreakdown, FrameSchedule, Mode


@dataclass(frozen=True)
class LinkModel:
    """Path-loss link between SU nodes ``i`` and ``j``.

    Powers and noise variances share one linear unit (W by convention),
    distances are in metres.  ``chi_i`` and ``chi_j`` are the SIS
    residual factors of the two nodes.
    """

    p_i: float
    p_j: float
    d_ij: float
    d_ji: float
    c: float = 1.0
    eta: float = 4.0
    sigma_i2: float = 1.0
    sigma_j2: float = 1.0
    chi_i: float = 0.0
    chi_j: float = 0.0

    def __post_init__(self):
        for name in ("p_i", "p_j", "d_ij", "d_ji", "c", "sigma_i2", "sigma_j2"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ConfigurationError(f"{name} must be positive, got {value}")
        if not self.eta > 0:
            raise ConfigurationError(f"eta must be positive, got {self.eta}")
        for name in ("chi_i", "chi_j"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigurationError(f"{name} must lie in [0, 1]")

    @classmethod
    def symmetric(cls, snr_db: float, self_snr_db: float, chi: float = 0.0, eta: float = 4.0, c: float = 1.0):
        """Symmetric link with the given forward SNR and self-SNR.

        Noise variances are 1 and both powers equal the linear self-SNR,
        which is the self-interference power before suppression because
        the self-channel gain is 1.  The distance is solved from the
        path-loss law so that ``snr_to`` equals ``snr_db``.
        """
        power = db_to_linear(self_snr_db)
        gain = np.sqrt(db_to_linear(snr_db) / power)
        distance = (c / gain) ** (1.0 / eta)
        return cls(power, power, distance, distance, c, eta, 1.0, 1.0, chi, chi)

    def with_chi(self, chi: float) -> "LinkModel":
        return LinkModel(self.p_i, self.p_j, self.d_ij, self.d_ji, self.c, self.eta,
                         self.sigma_i2, self.sigma_j2, chi, chi)


@dataclass(frozen=True)
class ThroughputReport:
    value: float
    forward: float
    reverse: float
    collision_prob: float


def channel_gain(link: LinkModel, direction: str = "ij") -> float:
    """Amplitude gain ``C d^-eta``; the self-channels ``ii``/``jj`` are 1."""
    if direction == "ij":
        return link.c * link.d_ij ** (-link.eta)
    if direction == "ji":
        return link.c * link.d_ji ** (-link.eta)
    if direction in ("ii", "jj"):
        return 1.0
    raise ConfigurationError(f"unknown channel direction {direction!r}")


def snr_to(link: LinkModel) -> float:
    return link.p_i * channel_gain(link, "ij") ** 2 / link.sigma_j2


def snr_tr(link: LinkModel, at: str = "j") -> float:
    """SNR in TR mode at node ``at``, with residual self-interference."""
    if at == "j":
        signal = link.p_i * channel_gain(link, "ij") ** 2
        return signal / (link.sigma_j2 + link.chi_j**2 * link.p_j * channel_gain(link, "jj") ** 2)
    if at == "i":
        signal = link.p_j * channel_gain(link, "ji") ** 2
        return signal / (link.sigma_i2 + link.chi_i**2 * link.p_i * channel_gain(link, "ii") ** 2)
    raise ConfigurationError(f"node must be 'i' or 'j', got {at!r}")


def _probability(collision: Union[float, CollisionBreakdown]) -> float:
    p = collision.total if isinstance(collision, CollisionBreakdown) else float(collision)
    if not 0.0 <= p <= 1.0:
        raise ConfigurationError(f"collision probability must lie in [0, 1], got {p}")
    return p


def _duty(t, t_s0):
    return t / (t + t_s0)


def rate_to(link: LinkModel, sched: FrameSchedule, collision_prob) -> ThroughputReport:
    p = _probability(collision_prob)
    value = (1.0 - p) * _duty(sched.t, sched.t_s0) * np.log2(1.0 + snr_to(link))
    return ThroughputReport(float(value), float(value), 0.0, p)


def rate_ts(link: LinkModel, sched: FrameSchedule, collision_breakdown) -> ThroughputReport:
    # same SNR as TO; only the collision probability differs
    return rate_to(link, sched, collision_breakdown)


def rate_tr(
    link: LinkModel,
    sched: FrameSchedule,
    collision_prob,
    reverse_normalization: str = "literal",
) -> ThroughputReport:
    """Sum of forward and reverse throughput in TR mode.

    ``reverse_normalization="literal"`` scales the reverse term by
    ``T_R / (T_R + T_S0)``; ``"shared"`` uses ``T_R / (T + T_S0)``
    because reception overlaps the same frame.  With ``T_R = 0`` node
    ``j`` never transmits, so the forward SNR is the TO SNR and the
    result equals :func:`rate_to`.
    """
    if sched.mode is not Mode.TR:
        raise ConfigurationError("rate_tr needs a TR schedule")
    p = _probability(collision_prob)
    t, t_r, t_s0 = sched.t, sched.t_r, sched.t_s0
    if t_r == 0:
        forward = (1.0 - p) * _duty(t, t_s0) * np.log2(1.0 + snr_to(link))
        return ThroughputReport(float(forward), float(forward), 0.0, p)
    forward = (1.0 - p) * _duty(t, t_s0) * np.log2(1.0 + snr_tr(link, "j"))
    if reverse_normalization == "literal":
        duty_r = _duty(t_r, t_s0)
    elif reverse_normalization == "shared":
        duty_r = t_r / (t + t_s0)
    else:
        raise ConfigurationError(f"unknown reverse normalization {reverse_normalization!r}")
    reverse = (1.0 - p) * duty_r * np.log2(1.0 + snr_tr(link, "i"))
    return ThroughputReport(float(forward + reverse), float(forward), float(reverse), p)
