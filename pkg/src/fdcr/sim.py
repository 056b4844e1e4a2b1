"""Monte Carlo oracle for the detector and for whole SU frames.

Two levels are simulated:

* :func:`simulate_detector` draws the energy-detector decision metric
  from CSCG noise plus QPSK self-interference and PU signals and counts
  threshold crossings.
* :func:`simulate_system` runs a continuous PU ON/OFF process and
  replays SU frames on top of it, counting transmission attempts,
  collisions (any overlap with PU ON time) and delivered throughput.

Every run uses a Philox4x64-10 counter-based generator seeded from a
64-bit integer; identical seeds and inputs give bit-identical results.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from fdcr.dettheory import Duplex, SensingConfig, pd_fd, pd_hd, pf_fd, pf_hd, sample_count
from fdcr.exceptions import ConfigurationError
from fdcr.outage import DEFAULT_WINDOW, FrameSchedule, Mode, WindowPolicy
from fdcr.throughput import LinkModel, snr_to, snr_tr
from fdcr.traffic import TrafficModel, on_rate

RNG_ALGORITHM = "Philox4x64-10 (numpy.random.Philox)"
MAX_TRIALS = 10**10
MAX_FRAMES = 10**8
EXACT_CHUNK = 1 << 16
SAMPLES_PER_CHUNK = 1 << 21


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Generator for ``seed`` and an optional sub-stream path."""
    if int(seed) != seed or not 0 <= seed < 2**64:
        raise ConfigurationError(f"seed must be a 64-bit unsigned integer, got {seed!r}")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class SampleTrialResult:
    decision_busy_fraction: float
    trials: int
    std_err: float
    busy: int


@dataclass(frozen=True)
class SystemTrialResult:
    """Frame-level counts.

    ``std_err`` is a batch-means standard error of ``collision_rate``,
    which stays valid when successive frames see a correlated PU state;
    ``binomial_std_err`` assumes independent attempts.
    ``throughput_estimate`` uses the analytic accounting (success ratio
    among attempts times duty factor times capacity) while
    ``delivered_throughput`` divides bits actually sent collision-free,
    aborts included, by elapsed time.
    """

    frames: int
    attempts: int
    collisions: int
    collision_rate: float
    std_err: float
    binomial_std_err: float
    throughput_estimate: float
    delivered_throughput: float
    overlap_time_total: float
    max_overlap: float
    rng: str = RNG_ALGORITHM
    extras: dict = field(default_factory=dict, compare=False)


def _check_count(value, name, limit):
    if int(value) != value or value < 1:
        raise ConfigurationError(f"{name} must be a positive integer, got {value}")
    if value > limit:
        raise ConfigurationError(f"{name}={value} exceeds the guard of {limit}")
    return int(value)


def energy_statistic(rng, cfg: SensingConfig, n: int, n_pu, chi: float, size: int) -> np.ndarray:
    """Decision metric ``M`` for ``size`` windows of ``n`` samples.

    ``n_pu`` (scalar or array of length ``size``) samples carry the PU
    signal.  Given the QPSK symbols, each ``|r(n)|^2`` is a scaled
    noncentral chi-square with two degrees of freedom, so the window sum
    is one noncentral chi-square with ``2n`` degrees of freedom whose
    noncentrality depends on the symbols only through the number of PU
    samples whose phase matches (+1) or opposes (-1) the SU symbol.
    Drawing those counts and then one chi-square variate reproduces the
    distribution of ``M`` exactly.
    """
    w2 = cfg.sigma_w2
    s2 = chi**2 * cfg.sigma_s2
    l2 = cfg.sigma_l2
    n_pu = np.broadcast_to(np.asarray(n_pu, dtype=np.int64), (size,))
    # phase difference is uniform on four points: cos = +1, 0, -1, 0
    nonzero = rng.binomial(n_pu, 0.5)
    plus = rng.binomial(nonzero, 0.5)
    cos_sum = 2 * plus - nonzero
    energy = n * s2 + n_pu * l2 + 2.0 * np.sqrt(s2 * l2) * cos_sum
    nonc = np.maximum(2.0 * energy / w2, 0.0)
    x = rng.noncentral_chisquare(2 * n, nonc) if np.any(nonc > 0) else rng.chisquare(2 * n, size)
    return w2 * x / (2.0 * n)


def _metric_from_samples(rng, cfg, n, h1, chi, size):
    noise = np.sqrt(cfg.sigma_w2 / 2.0) * (
        rng.standard_normal((size, n)) + 1j * rng.standard_normal((size, n))
    )
    qpsk = np.exp(0.5j * np.pi * np.arange(4))
    r = noise + chi * np.sqrt(cfg.sigma_s2) * qpsk[rng.integers(0, 4, (size, n))]
    if h1:
        r += np.sqrt(cfg.sigma_l2) * qpsk[rng.integers(0, 4, (size, n))]
    return np.mean(np.abs(r) ** 2, axis=1)


def simulate_detector(
    cfg: SensingConfig,
    t_s: float,
    hypothesis: str,
    duplex,
    trials: int,
    seed: int,
    method: str = "samples",
) -> SampleTrialResult:
    """Busy-decision frequency of the energy detector.

    Parameters
    ----------
    cfg : SensingConfig
        Detector parameters; ``cfg.gamma`` is the threshold.
    t_s : float
        Sensing duration, giving ``N = round(t_s * f_s)`` samples.
    hypothesis : {"H0", "H1"}
        PU absent or present.
    duplex : {"HD", "FD"}
        HD removes the self-interference term.
    trials, seed
        Number of independent windows and the RNG seed.
    method : {"samples", "exact"}
        ``samples`` generates every complex sample; ``exact`` draws the
        metric from its exact finite-``N`` distribution (see
        :func:`energy_statistic`), at constant cost per trial.

    With ``chi = 0`` the HD and FD runs consume the same random stream,
    so their decisions coincide trial by trial.
    """
    trials = _check_count(trials, "trials", MAX_TRIALS)
    if hypothesis not in ("H0", "H1"):
        raise ConfigurationError(f"hypothesis must be 'H0' or 'H1', got {hypothesis!r}")
    if cfg.gamma is None:
        raise ConfigurationError("simulate_detector needs cfg.gamma")
    n = sample_count(t_s, cfg.f_s)
    chi = cfg.chi if Duplex(duplex) is Duplex.FD else 0.0
    h1 = hypothesis == "H1"

    if method == "exact":
        chunk = EXACT_CHUNK
    elif method == "samples":
        chunk = max(1, SAMPLES_PER_CHUNK // n)
    else:
        raise ConfigurationError(f"unknown method {method!r}")

    busy = 0
    for index, start in enumerate(range(0, trials, chunk)):
        size = min(chunk, trials - start)
        rng = make_rng(seed, index)
        if method == "exact":
            metric = energy_statistic(rng, cfg, n, n if h1 else 0, chi, size)
        else:
            metric = _metric_from_samples(rng, cfg, n, h1, chi, size)
        busy += int(np.count_nonzero(metric > cfg.gamma))
    p = busy / trials
    return SampleTrialResult(p, trials, float(np.sqrt(p * (1.0 - p) / trials)), busy)


class _PuTimeline:
    """Stationary alternating ON/OFF process on ``[0, horizon]``."""

    def __init__(self, model: TrafficModel, horizon: float, rng: np.random.Generator):
        lam_off, lam_on = model.lambda_off, on_rate(model)
        start_on = bool(rng.random() < model.beta)
        mean_cycle = 1.0 / lam_off + 1.0 / lam_on
        durations = []
        total, on_turn = 0.0, start_on
        while total <= horizon:
            k = int(1.2 * horizon / mean_cycle) + 64
            on = rng.exponential(1.0 / lam_on, k)
            off = rng.exponential(1.0 / lam_off, k)
            pair = np.column_stack((on, off) if on_turn else (off, on)).ravel()
            durations.append(pair)
            total += pair.sum()
        d = np.concatenate(durations)
        self.bounds = np.concatenate(([0.0], np.cumsum(d)))
        # interval k spans [bounds[k], bounds[k+1]) and is ON iff on_flags[k]
        self.on_flags = (np.arange(d.size) % 2 == 0) == start_on
        self.cum_on = np.concatenate(([0.0], np.cumsum(np.where(self.on_flags, d, 0.0))))

    def _index(self, t):
        return np.searchsorted(self.bounds, t, side="right") - 1

    def is_on(self, t):
        return self.on_flags[self._index(t)]

    def on_time_until(self, t):
        k = self._index(t)
        return self.cum_on[k] + np.where(self.on_flags[k], t - self.bounds[k], 0.0)

    def on_time(self, t0, t1):
        return self.on_time_until(t1) - self.on_time_until(t0)

    def next_on(self, t):
        """Start of the next ON period at or after ``t``."""
        k = self._index(t)
        return np.where(self.on_flags[k], t, self.bounds[k + 1])


def _capacities(mode: Mode, link: LinkModel, sched: FrameSchedule):
    if mode is Mode.TR and sched.t_r > 0:
        return np.log2(1.0 + snr_tr(link, "j")), np.log2(1.0 + snr_tr(link, "i"))
    return np.log2(1.0 + snr_to(link)), 0.0


def simulate_system(
    model: TrafficModel,
    sched: FrameSchedule,
    sense: SensingConfig,
    link: LinkModel,
    frames: int,
    seed: int,
    detector: str = "analytic",
    sensing_quality: str = "imperfect",
    window: WindowPolicy = DEFAULT_WINDOW,
    batches: int = 50,
    reverse_normalization: str = "literal",
) -> SystemTrialResult:
    """Replay ``frames`` SU frames over a continuous PU ON/OFF process.

    Frame ``k`` starts at ``k * sched.frame_length`` with an HD sensing
    period of ``t_s0``.  If the channel is declared idle the SU transmits
    for ``T`` (TO/TR), or through ``sched.n_windows`` FD sensing windows
    of ``t_si`` (TS), stopping at the end of the first window declared
    busy.  A collision is any positive overlap with PU ON time, or a
    transmission that starts while the PU is ON.

    ``detector="analytic"`` draws each verdict with the closed-form
    ``P_d``/``P_f`` of the true PU state (state at the end of the initial
    sensing; presence anywhere in a TS window).  ``detector="sampled"``
    draws the decision metric itself, with the PU contributing to exactly
    the samples during which it is ON.  ``sensing_quality="perfect"``
    makes every verdict equal the true state.
    """
    frames = _check_count(frames, "frames", MAX_FRAMES)
    mode = sched.mode
    if detector not in ("analytic", "sampled"):
        raise ConfigurationError(f"detector must be 'analytic' or 'sampled', got {detector!r}")
    if sensing_quality not in ("perfect", "imperfect"):
        raise ConfigurationError(f"unknown sensing quality {sensing_quality!r}")
    perfect = sensing_quality == "perfect"
    if sense.gamma is None and not perfect:
        raise ConfigurationError("imperfect sensing needs sense.gamma")

    frame_len = sched.frame_length
    horizon = frames * frame_len + frame_len
    pu = _PuTimeline(model, horizon, make_rng(seed, 0))
    rng_sense = make_rng(seed, 1)
    rng_win = make_rng(seed, 2)

    sense_end = np.arange(frames) * frame_len + sched.t_s0
    on_at_start = pu.is_on(sense_end)

    # initial HD sensing verdict
    if perfect:
        busy0 = on_at_start.copy()
    elif detector == "analytic":
        p_busy = np.where(on_at_start, pd_hd(sense, sched.t_s0), pf_hd(sense, sched.t_s0))
        busy0 = rng_sense.random(frames) < p_busy
    else:
        n0 = sample_count(sched.t_s0, sense.f_s)
        n_pu = np.minimum(np.rint(pu.on_time(sense_end - sched.t_s0, sense_end) * sense.f_s), n0)
        metric = energy_statistic(rng_sense, sense, n0, n_pu.astype(np.int64), 0.0, frames)
        busy0 = metric > sense.gamma
    attempt = ~busy0

    if mode is Mode.TS:
        stop = _ts_stop_times(pu, sched, sense, sense_end, attempt, rng_win, detector, perfect, window)
    else:
        stop = np.full(frames, float(sched.t))
    stop = np.where(attempt, stop, 0.0)

    overlap = np.where(attempt, pu.on_time(sense_end, sense_end + stop), 0.0)
    collided = attempt & ((overlap > 0) | (on_at_start & (stop > 0)))

    attempts = int(attempt.sum())
    collisions = int(collided.sum())
    rate = collisions / attempts if attempts else float("nan")

    fwd_cap, rev_cap = _capacities(mode, link, sched)
    duty = sched.t / (sched.t + sched.t_s0)
    if mode is Mode.TR and sched.t_r > 0:
        duty_r = (
            sched.t_r / (sched.t_r + sched.t_s0)
            if reverse_normalization == "literal"
            else sched.t_r / (sched.t + sched.t_s0)
        )
        capacity_term = duty * fwd_cap + duty_r * rev_cap
    else:
        capacity_term = duty * fwd_cap
    estimate = (1.0 - rate) * capacity_term if attempts else 0.0

    clean = attempt & ~collided
    bits = np.sum(stop[clean]) * fwd_cap
    if mode is Mode.TR and sched.t_r > 0:
        bits += np.count_nonzero(clean) * sched.t_r * rev_cap
    delivered = bits / (frames * frame_len)

    return SystemTrialResult(
        frames=frames,
        attempts=attempts,
        collisions=collisions,
        collision_rate=rate,
        std_err=_batch_std_err(attempt, collided, batches),
        binomial_std_err=float(np.sqrt(rate * (1 - rate) / attempts)) if attempts else float("nan"),
        throughput_estimate=float(estimate),
        delivered_throughput=float(delivered),
        overlap_time_total=float(overlap[collided].sum()),
        max_overlap=float(overlap.max(initial=0.0)),
        extras={"on_at_start_fraction": float(on_at_start.mean())},
    )


def _ts_stop_times(pu, sched, sense, sense_end, attempt, rng, detector, perfect, window):
    """Transmission length of each TS frame, aborts included."""
    t_si, n_win = sched.t_si, sched.n_windows
    frames = sense_end.size
    gamma_w = None if perfect else float(window.gamma(sense, t_si))
    stop = np.full(frames, n_win * t_si)

    if detector == "analytic" or perfect:
        pf_w = 0.0 if perfect else pf_fd(sense, t_si, gamma_w)
        pd_w = 1.0 if perfect else pd_fd(sense, t_si, gamma_w)
        # windows wholly before the PU returns are independent H0 trials
        tau = pu.next_on(sense_end) - sense_end
        clear = np.floor(tau / t_si)
        if pf_w > 0:
            first_alarm = rng.geometric(pf_w, frames).astype(float)
        else:
            first_alarm = np.full(frames, np.inf)
        aborted_early = first_alarm <= np.minimum(clear, n_win)
        stop = np.where(aborted_early, first_alarm * t_si, stop)
        # from the window in which the PU returns onwards, follow the true state
        pending = np.flatnonzero(attempt & ~aborted_early & (clear < n_win))
        j = clear[pending] + 1
        while pending.size:
            start = sense_end[pending] + (j - 1) * t_si
            present = pu.on_time(start, start + t_si) > 0
            p = np.where(present, pd_w, pf_w)
            busy = rng.random(pending.size) < p
            done = busy | (j >= n_win)
            stop[pending[busy]] = j[busy] * t_si
            pending, j = pending[~done], j[~done] + 1
        return stop

    n = sample_count(t_si, sense.f_s)
    pending = np.flatnonzero(attempt)
    j = np.ones(pending.size)
    while pending.size:
        start = sense_end[pending] + (j - 1) * t_si
        n_pu = np.minimum(np.rint(pu.on_time(start, start + t_si) * sense.f_s), n).astype(np.int64)
        busy = energy_statistic(rng, sense, n, n_pu, sense.chi, pending.size) > gamma_w
        done = busy | (j >= n_win)
        stop[pending[busy]] = j[busy] * t_si
        pending, j = pending[~done], j[~done] + 1
    return stop


def _batch_std_err(attempt, collided, batches):
    b = max(2, min(int(batches), attempt.size))
    att = np.array([a.sum() for a in np.array_split(attempt, b)], dtype=float)
    col = np.array([c.sum() for c in np.array_split(collided, b)], dtype=float)
    keep = att > 0
    if keep.sum() < 2:
        return float("nan")
    rates = col[keep] / att[keep]
    return float(rates.std(ddof=1) / np.sqrt(keep.sum()))
