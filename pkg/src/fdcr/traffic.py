"""PU activity: alternating ON/OFF process with exponential OFF periods."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from fdcr.exceptions import ConfigurationError, DomainError


@dataclass(frozen=True)
class TrafficModel:
    """PU ON/OFF activity.

    ``lambda_off`` is the rate (1/s) of the exponential OFF duration and
    ``beta`` the stationary probability that the PU is ON.  ON durations
    are modelled as exponential with the rate returned by :func:`on_rate`.
    """

    lambda_off: float
    beta: float

    def __post_init__(self):
        if not (np.isfinite(self.lambda_off) and self.lambda_off > 0):
            raise ConfigurationError(f"lambda_off must be positive, got {self.lambda_off}")
        if not 0.0 < self.beta < 1.0:
            raise ConfigurationError(f"beta must lie in (0, 1), got {self.beta}")

    @property
    def lambda_on(self) -> float:
        return on_rate(self)

    def with_beta(self, beta: float) -> "TrafficModel":
        return TrafficModel(self.lambda_off, float(beta))


def f_tau(model: TrafficModel, t):
    """CDF of the residual OFF time, ``1 - exp(-lambda_off * t)``.

    By memorylessness this is also the CDF of the full OFF duration.
    """
    arr = np.asarray(t, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise DomainError("f_tau needs a non-negative duration")
    out = -np.expm1(-model.lambda_off * arr)
    return float(out) if out.ndim == 0 else out


def on_rate(model: TrafficModel) -> float:
    """ON-period rate that makes the long-run ON fraction equal ``beta``."""
    return model.lambda_off * (1.0 - model.beta) / model.beta
