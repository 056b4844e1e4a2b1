"""PU/SU collision (outage) probabilities for the TO, TS and TR modes.

A collision is any overlap between an SU transmission and PU ON time.
Imperfect-sensing totals are conditioned on the SU attempting a
transmission, i.e. on the initial HD sensing declaring the channel idle.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from fdcr.dettheory import SensingConfig, pd_hd, pf_fd, pf_hd, threshold_for_pf
from fdcr.exceptions import ConfigurationError, UndefinedConditionalError
from fdcr.traffic import TrafficModel, f_tau


class Mode(str, enum.Enum):
    TO = "TO"
    TS = "TS"
    TR = "TR"


class BSumMode(str, enum.Enum):
    LITERAL = "literal"  # windows i = 1..m+1
    PARTITION = "partition"  # windows i = 1..m, so m windows tile T


@dataclass(frozen=True)
class FrameSchedule:
    """Durations of one SU frame, in seconds.

    For TS, ``t_si`` defaults to ``t / m`` (``t`` when ``m == 0``).  For
    TR, ``t_r`` defaults to ``t``.
    """

    mode: Mode
    t_s0: float
    t: float
    t_r: Optional[float] = None
    m: int = 500
    t_si: Optional[float] = None
    b_sum_mode: BSumMode = BSumMode.LITERAL

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "b_sum_mode", BSumMode(self.b_sum_mode))
        if not self.t_s0 > 0:
            raise ConfigurationError(f"t_s0 must be positive, got {self.t_s0}")
        if not self.t >= 0:
            raise ConfigurationError(f"t must be non-negative, got {self.t}")
        if int(self.m) != self.m or self.m < 0:
            raise ConfigurationError(f"m must be a non-negative integer, got {self.m}")
        object.__setattr__(self, "m", int(self.m))
        if self.mode is Mode.TS:
            if self.b_sum_mode is BSumMode.PARTITION and self.m < 1:
                raise ConfigurationError("partition layout needs m >= 1")
            if self.t_si is None:
                if not self.t > 0:
                    raise ConfigurationError("TS mode needs t > 0")
                object.__setattr__(self, "t_si", self.t / self.m if self.m else self.t)
            if not self.t_si > 0:
                raise ConfigurationError(f"t_si must be positive, got {self.t_si}")
        if self.mode is Mode.TR:
            if self.t_r is None:
                object.__setattr__(self, "t_r", self.t)
            if not self.t_r >= 0:
                raise ConfigurationError(f"t_r must be non-negative, got {self.t_r}")

    @property
    def n_windows(self) -> int:
        """Number of in-transmission sensing windows the B term sums over."""
        if self.b_sum_mode is BSumMode.PARTITION:
            return self.m
        return self.m + 1

    @property
    def transmission_span(self) -> float:
        """Time during which the SU may be on air after ``t_s0``."""
        if self.mode is Mode.TS:
            return self.n_windows * self.t_si
        if self.mode is Mode.TR:
            return max(self.t, self.t_r)
        return self.t

    @property
    def frame_length(self) -> float:
        return self.t_s0 + max(self.t, self.transmission_span)


@dataclass(frozen=True)
class WindowPolicy:
    """How the threshold of the in-transmission FD windows is chosen.

    ``same`` reuses the initial-sensing threshold unchanged.
    ``si-offset`` adds the known residual self-interference power
    ``chi^2 sigma_s^2`` to it, so the window keeps the same margin above
    its own noise floor; at ``chi = 0`` both rules coincide.
    ``target-pf`` sets each window's threshold for a fixed FD
    false-alarm probability ``target_pf``.
    """

    rule: str = "si-offset"
    target_pf: Optional[float] = None

    def __post_init__(self):
        if self.rule not in ("same", "si-offset", "target-pf"):
            raise ConfigurationError(f"unknown window threshold rule {self.rule!r}")
        if self.rule == "target-pf" and self.target_pf is None:
            raise ConfigurationError("target-pf window rule needs target_pf")

    def gamma(self, sense: SensingConfig, t_si, gamma0=None):
        g0 = sense.gamma if gamma0 is None else gamma0
        if self.rule == "same":
            return g0
        if self.rule == "si-offset":
            return np.asarray(g0) + sense.chi**2 * sense.sigma_s2
        return threshold_for_pf(sense, t_si, self.target_pf, "FD")


DEFAULT_WINDOW = WindowPolicy()


@dataclass(frozen=True)
class CollisionBreakdown:
    """Collision probability and its joint-probability constituents.

    ``total`` is conditional on a transmission attempt; ``term_a`` and
    ``term_b`` are joint masses (missed detection at the start, PU return
    during transmission) and ``w`` is the attempt probability, so that
    ``total * w == term_a + term_b``.
    """

    total: float
    term_a: float
    term_b: float
    w: float
    extras: dict = field(default_factory=dict, compare=False)


def _conditional(a, b, w):
    w = np.asarray(w, dtype=float)
    if np.any(w <= 0):
        raise UndefinedConditionalError(
            "attempt probability W is zero: the SU never transmits"
        )
    return (a + b) / w


def window_mass(lambda_off, t_si, pf_window, n_windows):
    """Normalised TS collision mass over equal windows.

    Returns ``sum_{i=1}^{n} (1 - pf)^(i-1) [F(i t) - F((i-1) t)]`` using
    ``F(x) = 1 - exp(-lambda x)``.  The summand is geometric with ratio
    ``r = (1 - pf) exp(-lambda t)``, so the sum is evaluated in closed
    form.  All arguments broadcast.
    """
    lt = lambda_off * np.asarray(t_si, dtype=float)
    pf_window = np.asarray(pf_window, dtype=float)
    with np.errstate(divide="ignore"):
        log_r = np.log1p(-pf_window) - lt
    first = -np.expm1(-lt)
    ratio = np.expm1(n_windows * log_r) / np.expm1(log_r)
    return first * ratio


def initial_terms(model: TrafficModel, sense: SensingConfig, t_s0, gamma=None):
    """``(pd0, pf0, A, idle_attempt)`` for the HD sensing period.

    ``idle_attempt = (1 - beta)(1 - pf0)`` is the joint probability that
    the PU is idle and the SU transmits.
    """
    pd0 = pd_hd(sense, t_s0, gamma)
    pf0 = pf_hd(sense, t_s0, gamma)
    term_a = model.beta * (1.0 - np.asarray(pd0))
    idle_attempt = (1.0 - model.beta) * (1.0 - np.asarray(pf0))
    return pd0, pf0, term_a, idle_attempt


def collision_to_perfect(model: TrafficModel, sched: FrameSchedule) -> float:
    """Collision probability for TO/TR under perfect sensing, ``F_tau(T)``."""
    if sched.mode is Mode.TS:
        raise ConfigurationError("use collision_ts_perfect for TS schedules")
    return f_tau(model, sched.t)


def collision_to_imperfect(
    model: TrafficModel, sched: FrameSchedule, sense: SensingConfig
) -> CollisionBreakdown:
    if sched.mode is Mode.TS:
        raise ConfigurationError("use collision_ts_imperfect for TS schedules")
    pd0, pf0, term_a, idle = initial_terms(model, sense, sched.t_s0)
    term_b = idle * f_tau(model, sched.t)
    w = term_a + idle
    total = _conditional(term_a, term_b, w)
    return CollisionBreakdown(
        float(total), float(term_a), float(term_b), float(w), {"pd_hd": pd0, "pf_hd": pf0}
    )


def collision_ts_perfect() -> float:
    """Zero: continuous perfect sensing aborts before any overlap."""
    return 0.0


def collision_ts_imperfect(
    model: TrafficModel,
    sched: FrameSchedule,
    sense: SensingConfig,
    window: WindowPolicy = DEFAULT_WINDOW,
) -> CollisionBreakdown:
    """TS collision probability with equal in-transmission windows.

    Parameters
    ----------
    model, sched, sense
        Traffic model, a TS schedule and the detector configuration whose
        ``gamma`` drives the initial HD sensing.
    window
        Threshold rule for the FD windows.

    Returns
    -------
    CollisionBreakdown
        ``extras`` carries the window false-alarm probability and
        threshold.
    """
    if sched.mode is not Mode.TS:
        raise ConfigurationError("collision_ts_imperfect needs a TS schedule")
    pd0, pf0, term_a, idle = initial_terms(model, sense, sched.t_s0)
    gamma_w = window.gamma(sense, sched.t_si)
    pf_w = pf_fd(sense, sched.t_si, gamma_w)
    term_b = idle * window_mass(model.lambda_off, sched.t_si, pf_w, sched.n_windows)
    w = term_a + idle
    total = _conditional(term_a, term_b, w)
    return CollisionBreakdown(
        float(total),
        float(term_a),
        float(term_b),
        float(w),
        {"pd_hd": pd0, "pf_hd": pf0, "pf_fd": pf_w, "gamma_window": float(gamma_w)},
    )


def collision(
    model: TrafficModel,
    sched: FrameSchedule,
    sense: Optional[SensingConfig] = None,
    sensing_quality: str = "imperfect",
    window: WindowPolicy = DEFAULT_WINDOW,
) -> CollisionBreakdown:
    """Dispatch to the collision formula for ``sched.mode``; TR uses TO's."""
    if sensing_quality == "perfect":
        if sched.mode is Mode.TS:
            return CollisionBreakdown(collision_ts_perfect(), 0.0, 0.0, 1.0)
        p = collision_to_perfect(model, sched)
        return CollisionBreakdown(p, 0.0, p, 1.0)
    if sensing_quality != "imperfect":
        raise ConfigurationError(f"unknown sensing quality {sensing_quality!r}")
    if sense is None:
        raise ConfigurationError("imperfect sensing needs a SensingConfig")
    if sched.mode is Mode.TS:
        return collision_ts_imperfect(model, sched, sense, window)
    return collision_to_imperfect(model, sched, sense)
