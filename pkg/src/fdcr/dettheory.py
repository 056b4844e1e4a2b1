"""Closed-form energy-detector statistics for half- and full-duplex sensing.

The detector averages ``N`` received sample energies and compares the
result with a threshold ``gamma``.  In full-duplex (FD) sensing the SU's
own signal leaks into the receiver scaled by the SIS residual factor
``chi``; in half-duplex (HD) sensing there is no self-interference.  All
probabilities use the large-``N`` Gaussian approximation of the decision
metric with CSCG noise and unit-modulus (PSK) signals.

SNRs are linear throughout; convert dB at the configuration boundary
with :func:`db_to_linear`.
"""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.special import ndtr, ndtri

from fdcr.exceptions import ConfigurationError, DomainError, InfeasibleError

ArrayLike = Union[float, np.ndarray]


class Duplex(str, enum.Enum):
    HD = "HD"
    FD = "FD"

    @classmethod
    def _missing_(cls, value):
        raise ConfigurationError(f"duplex must be 'HD' or 'FD', got {value!r}")


def db_to_linear(db: ArrayLike) -> ArrayLike:
    return _scalar_or_array(10.0 ** (np.asarray(db, dtype=float) / 10.0))


def linear_to_db(value: ArrayLike) -> ArrayLike:
    if np.any(np.asarray(value) <= 0):
        raise DomainError("dB conversion needs a positive linear value")
    return _scalar_or_array(10.0 * np.log10(value))


@dataclass(frozen=True)
class SensingConfig:
    """Energy-detector parameters.

    Parameters
    ----------
    chi : float
        SIS residual factor in ``[0, 1]``; 0 is perfect suppression.
    alpha_s : float
        Linear SU self-SNR ``sigma_s^2 / sigma_w^2``.
    alpha_l : float
        Linear PU SNR at the SU ``sigma_l^2 / sigma_w^2``.
    gamma : float or None
        Detector threshold in the units of ``sigma_w2``.  ``None`` leaves
        it unset, which is only valid for :func:`threshold_for_pf`.
    f_s : float
        Sampling rate in samples per second.
    sigma_w2 : float
        Noise variance.
    """

    chi: float
    alpha_s: float
    alpha_l: float
    gamma: Optional[float]
    f_s: float
    sigma_w2: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.chi <= 1.0:
            raise ConfigurationError(f"chi must lie in [0, 1], got {self.chi}")
        for name in ("alpha_s", "alpha_l", "f_s", "sigma_w2"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ConfigurationError(f"{name} must be positive and finite, got {value}")
        if self.gamma is not None and not (np.isfinite(self.gamma) and self.gamma > 0):
            raise ConfigurationError(f"gamma must be positive and finite, got {self.gamma}")

    @property
    def sigma_s2(self) -> float:
        return self.alpha_s * self.sigma_w2

    @property
    def sigma_l2(self) -> float:
        return self.alpha_l * self.sigma_w2

    @property
    def midpoint_gamma(self) -> float:
        """Threshold halfway between the HD means under H0 and H1."""
        return self.sigma_w2 * (1.0 + 0.5 * self.alpha_l)

    def with_gamma(self, gamma: float) -> "SensingConfig":
        return dataclasses.replace(self, gamma=float(gamma))

    def with_chi(self, chi: float) -> "SensingConfig":
        return dataclasses.replace(self, chi=float(chi))

    @classmethod
    def from_db(cls, chi, alpha_s_db, alpha_l_db, gamma, f_s, sigma_w2=1.0):
        return cls(
            chi=chi,
            alpha_s=db_to_linear(alpha_s_db),
            alpha_l=db_to_linear(alpha_l_db),
            gamma=gamma,
            f_s=f_s,
            sigma_w2=sigma_w2,
        )


@dataclass(frozen=True)
class DetectorMoments:
    mean: float
    variance: float

    def __post_init__(self):
        if not self.variance > 0:
            raise ConfigurationError("detector variance must be positive")

    @property
    def std(self) -> float:
        return float(np.sqrt(self.variance))


def _scalar_or_array(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


def q_function(x: ArrayLike) -> ArrayLike:
    """Tail probability of the standard normal, ``Q(x) = P[Z > x]``.

    Evaluated as ``Phi(-x)`` through the Cephes ``ndtr`` routine, which
    switches to ``erfc`` in the tails and so keeps full relative
    precision for positive arguments.
    """
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("q_function requires finite input")
    return _scalar_or_array(ndtr(-arr))


def q_inverse(p: ArrayLike) -> ArrayLike:
    arr = np.asarray(p, dtype=float)
    if np.any((arr <= 0) | (arr >= 1)) or not np.all(np.isfinite(arr)):
        raise DomainError("q_inverse requires 0 < p < 1")
    return _scalar_or_array(-ndtri(arr))


def sample_count(t_s: ArrayLike, f_s: float):
    """Number of detector samples ``round(t_s * f_s)``.

    Raises :class:`ConfigurationError` when the duration yields fewer
    than one sample.
    """
    t = np.asarray(t_s, dtype=float)
    if not np.all(np.isfinite(t)) or np.any(t < 0):
        raise DomainError("sensing duration must be finite and non-negative")
    n = np.rint(t * f_s)
    if np.any(n < 1):
        raise ConfigurationError(
            f"sensing duration {t_s!r} s at f_s={f_s} Hz gives fewer than one sample"
        )
    return int(n) if n.ndim == 0 else n.astype(np.int64)


def moments_h0(cfg: SensingConfig, n: int) -> DetectorMoments:
    """Mean and variance of the decision metric when the PU is idle."""
    _check_n(n)
    si = cfg.chi**2 * cfg.alpha_s
    mean = cfg.chi**2 * cfg.sigma_s2 + cfg.sigma_w2
    variance = (2.0 * si + 1.0) * cfg.sigma_w2**2 / n
    return DetectorMoments(mean, variance)


def moments_h1(cfg: SensingConfig, n: int) -> DetectorMoments:
    """Mean and variance of the decision metric when the PU is active."""
    _check_n(n)
    si = cfg.chi**2 * cfg.alpha_s
    mean = cfg.sigma_l2 + cfg.chi**2 * cfg.sigma_s2 + cfg.sigma_w2
    variance = (2.0 * si + 2.0 * si * cfg.alpha_l + 2.0 * cfg.alpha_l + 1.0) * cfg.sigma_w2**2 / n
    return DetectorMoments(mean, variance)


def moments_h0_general(cfg: SensingConfig, n: int, e_s4: float, e_w4: float) -> DetectorMoments:
    """H0 moments for arbitrary fourth moments ``E|s|^4`` and ``E|w|^4``.

    Assumes zero-mean, circularly symmetric, mutually independent
    components.  With ``e_s4 = sigma_s^4`` and ``e_w4 = 2 sigma_w^4``
    this equals :func:`moments_h0`.
    """
    _check_n(n)
    chi2 = cfg.chi**2
    mean = chi2 * cfg.sigma_s2 + cfg.sigma_w2
    variance = (chi2**2 * e_s4 + e_w4 - (chi2 * cfg.sigma_s2 - cfg.sigma_w2) ** 2) / n
    return DetectorMoments(mean, variance)


def moments_h1_general(
    cfg: SensingConfig, n: int, e_s4: float, e_l4: float, e_w4: float
) -> DetectorMoments:
    """H1 moments for arbitrary fourth moments of ``s``, ``l`` and ``w``."""
    _check_n(n)
    chi2 = cfg.chi**2
    s2, l2, w2 = cfg.sigma_s2, cfg.sigma_l2, cfg.sigma_w2
    mean = l2 + chi2 * s2 + w2
    variance = (
        e_l4 + chi2**2 * e_s4 + e_w4 - (l2 - chi2 * s2 - w2) ** 2 + 4.0 * chi2 * s2 * w2
    ) / n
    return DetectorMoments(mean, variance)


def _check_n(n):
    if int(n) != n or n < 1:
        raise ConfigurationError(f"sample count must be a positive integer, got {n}")


def _gamma(cfg: SensingConfig, override=None):
    if override is not None:
        g = np.asarray(override, dtype=float)
        if np.any(g <= 0) or not np.all(np.isfinite(g)):
            raise ConfigurationError("gamma must be positive and finite")
        return g
    if cfg.gamma is None:
        raise ConfigurationError("detector threshold gamma is not set")
    return cfg.gamma


def pf_fd(cfg: SensingConfig, t_s: ArrayLike, gamma: Optional[ArrayLike] = None) -> ArrayLike:
    """FD false-alarm probability over a window of ``t_s`` seconds.

    ``gamma`` overrides ``cfg.gamma`` and may be an array that
    broadcasts against ``t_s``; the same holds for the other three
    probability functions.
    """
    n = sample_count(t_s, cfg.f_s)
    si = cfg.chi**2 * cfg.alpha_s
    arg = (_gamma(cfg, gamma) / cfg.sigma_w2 - si - 1.0) * np.sqrt(n / (2.0 * si + 1.0))
    return q_function(arg)


def pd_fd(cfg: SensingConfig, t_s: ArrayLike, gamma: Optional[ArrayLike] = None) -> ArrayLike:
    n = sample_count(t_s, cfg.f_s)
    si = cfg.chi**2 * cfg.alpha_s
    al = cfg.alpha_l
    arg = (_gamma(cfg, gamma) / cfg.sigma_w2 - si - al - 1.0) * np.sqrt(
        n / (2.0 * si + 2.0 * si * al + 2.0 * al + 1.0)
    )
    return q_function(arg)


def pf_hd(cfg: SensingConfig, t_s: ArrayLike, gamma: Optional[ArrayLike] = None) -> ArrayLike:
    n = sample_count(t_s, cfg.f_s)
    return q_function((_gamma(cfg, gamma) / cfg.sigma_w2 - 1.0) * np.sqrt(n))


def pd_hd(cfg: SensingConfig, t_s: ArrayLike, gamma: Optional[ArrayLike] = None) -> ArrayLike:
    n = sample_count(t_s, cfg.f_s)
    al = cfg.alpha_l
    return q_function((_gamma(cfg, gamma) / cfg.sigma_w2 - al - 1.0) * np.sqrt(n / (2.0 * al + 1.0)))


def false_alarm(cfg: SensingConfig, t_s: ArrayLike, duplex: Union[Duplex, str]) -> ArrayLike:
    return pf_fd(cfg, t_s) if Duplex(duplex) is Duplex.FD else pf_hd(cfg, t_s)


def detection(cfg: SensingConfig, t_s: ArrayLike, duplex: Union[Duplex, str]) -> ArrayLike:
    return pd_fd(cfg, t_s) if Duplex(duplex) is Duplex.FD else pd_hd(cfg, t_s)


def threshold_for_pf(
    cfg: SensingConfig,
    t_s: ArrayLike,
    target_pf: float,
    duplex: Union[Duplex, str] = Duplex.FD,
) -> ArrayLike:
    """Threshold that gives false-alarm probability ``target_pf``.

    ``cfg.gamma`` is ignored.  HD sensing is the ``chi = 0`` case of the
    FD inversion.

    Raises
    ------
    DomainError
        If ``target_pf`` is not strictly between 0 and 1.
    InfeasibleError
        If the required threshold is not positive.
    """
    if not 0.0 < target_pf < 1.0:
        raise DomainError(f"target_pf must lie in (0, 1), got {target_pf}")
    n = sample_count(t_s, cfg.f_s)
    si = cfg.chi**2 * cfg.alpha_s if Duplex(duplex) is Duplex.FD else 0.0
    gamma = cfg.sigma_w2 * (1.0 + si + q_inverse(target_pf) * np.sqrt((2.0 * si + 1.0) / n))
    if np.any(np.asarray(gamma) <= 0):
        raise InfeasibleError(
            f"false-alarm target {target_pf} needs a non-positive threshold at N={n}"
        )
    return _scalar_or_array(gamma)
