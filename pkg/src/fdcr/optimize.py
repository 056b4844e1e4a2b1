"""Constrained grid search over sensing and transmission durations.

``solve_p1`` maximises TS throughput, ``solve_p2`` TR throughput (with
equal transmission and reception durations), each subject to an upper
bound on the imperfect-sensing collision probability.  ``solve_p3``
picks the better mode and ``find_beta_star`` locates the PU load at
which the best mode switches from TR to TS.

The objective is nonconvex, so the search is exhaustive over a
log-spaced grid followed by zoom passes around the incumbent.  Ties are
broken by grid order (first maximum wins), which keeps results
independent of evaluation order.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from fdcr.dettheory import SensingConfig, pf_fd, threshold_for_pf
from fdcr.exceptions import ConfigurationError
from fdcr.outage import DEFAULT_WINDOW, BSumMode, Mode, WindowPolicy, initial_terms, window_mass
from fdcr.throughput import LinkModel, snr_to, snr_tr
from fdcr.traffic import TrafficModel, f_tau


@dataclass(frozen=True)
class SearchSpace:
    """Candidate durations for the grid search.

    ``m`` fixes the number of TS windows (window length ``T / m``);
    setting ``t_si`` instead fixes the window length and lets the count
    follow ``round(T / t_si)``.  ``refinement`` zoom passes each lay
    ``zoom_points`` points between the neighbours of the incumbent.
    """

    t_s0_grid: Tuple[float, ...]
    t_grid: Tuple[float, ...]
    m: int = 500
    t_si: Optional[float] = None
    refinement: int = 2
    zoom_points: int = 21
    b_sum_mode: BSumMode = BSumMode.LITERAL

    def __post_init__(self):
        for name in ("t_s0_grid", "t_grid"):
            grid = np.asarray(getattr(self, name), dtype=float)
            if grid.ndim != 1 or grid.size == 0:
                raise ConfigurationError(f"{name} must be a nonempty 1-D grid")
            if np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
                raise ConfigurationError(f"{name} must be positive and strictly increasing")
            object.__setattr__(self, name, tuple(float(v) for v in grid))
        if self.m < 0 or int(self.m) != self.m:
            raise ConfigurationError("m must be a non-negative integer")
        if self.refinement < 0 or self.zoom_points < 3:
            raise ConfigurationError("refinement >= 0 and zoom_points >= 3 required")
        object.__setattr__(self, "b_sum_mode", BSumMode(self.b_sum_mode))

    @classmethod
    def log_spaced(
        cls,
        t_s0_range=(0.5e-3, 50e-3),
        t_range=(0.05, 20.0),
        points: int = 40,
        **kwargs,
    ) -> "SearchSpace":
        return cls(
            tuple(np.geomspace(*t_s0_range, points)),
            tuple(np.geomspace(*t_range, points)),
            **kwargs,
        )


@dataclass(frozen=True)
class ThresholdPolicy:
    """Threshold handling during the search.

    ``initial="fixed"`` keeps ``sense.gamma``; ``"target-pf"`` re-derives
    the HD threshold at every candidate ``t_s0`` for ``target_pf``.
    ``window`` sets the thresholds of the TS in-transmission windows.
    """

    initial: str = "fixed"
    target_pf: Optional[float] = None
    window: WindowPolicy = DEFAULT_WINDOW

    def __post_init__(self):
        if self.initial not in ("fixed", "target-pf"):
            raise ConfigurationError(f"unknown threshold policy {self.initial!r}")
        if self.initial == "target-pf" and self.target_pf is None:
            raise ConfigurationError("target-pf policy needs target_pf")


DEFAULT_POLICY = ThresholdPolicy()


@dataclass(frozen=True)
class Optimum:
    mode: Mode
    t_s0_star: float
    t_star: float
    rate_star: float
    collision_at_opt: float
    feasible: bool
    constraint: float
    evaluations: int = 0


class Action(enum.IntEnum):
    TS = 0
    TR = 1


@dataclass(frozen=True)
class StrategyDecision:
    action: Action
    rate_ts: float
    rate_tr: float
    beta: float
    ts: Optional[Optimum] = None
    tr: Optional[Optimum] = None


@dataclass(frozen=True)
class BetaThreshold:
    """Outcome of the load-threshold search.

    ``beta_star`` is the smallest load at which TS is at least as good as
    TR.  Without a crossing, ``crossed`` is False and ``beta_star`` is a
    grid end: the last load when TR wins everywhere, the first when TS
    does.
    """

    beta_star: float
    crossed: bool
    crossings: List[Tuple[float, float]]
    decisions: List[StrategyDecision] = field(repr=False)

    @property
    def single_crossing(self) -> bool:
        return len(self.crossings) == 1


def evaluate_grid(
    mode: Union[Mode, str],
    model: TrafficModel,
    sense: SensingConfig,
    link: LinkModel,
    t_s0,
    t,
    space: SearchSpace,
    policy: ThresholdPolicy = DEFAULT_POLICY,
):
    """Collision probability and throughput on the outer product of grids.

    Returns ``(collision, rate)`` arrays of shape ``(len(t_s0), len(t))``.
    TR evaluates with ``T_R = T``.
    """
    mode = Mode(mode)
    ts0 = np.asarray(t_s0, dtype=float)[:, None]
    tt = np.asarray(t, dtype=float)[None, :]

    if policy.initial == "fixed":
        if sense.gamma is None:
            raise ConfigurationError("fixed threshold policy needs sense.gamma")
        gamma0 = sense.gamma
    else:
        gamma0 = threshold_for_pf(sense, ts0, policy.target_pf, "HD")
    _, _, term_a, idle = initial_terms(model, sense, ts0, gamma0)
    w = term_a + idle
    duty = tt / (tt + ts0)

    if mode is Mode.TS:
        if space.t_si is None:
            t_si = tt / space.m if space.m else tt
            n_windows = space.m + 1 if space.b_sum_mode is BSumMode.LITERAL else space.m
        else:
            t_si = np.full_like(tt, space.t_si)
            m = np.maximum(np.rint(tt / space.t_si), 1.0)
            n_windows = m + 1 if space.b_sum_mode is BSumMode.LITERAL else m
        gamma_w = policy.window.gamma(sense, t_si, gamma0)
        pf_w = pf_fd(sense, t_si, gamma_w)
        term_b = idle * window_mass(model.lambda_off, t_si, pf_w, n_windows)
        capacity = np.log2(1.0 + snr_to(link))
    else:
        term_b = idle * f_tau(model, tt)
        if mode is Mode.TR:
            # T_R = T, so both reverse-term normalisations coincide
            capacity = np.log2(1.0 + snr_tr(link, "j")) + np.log2(1.0 + snr_tr(link, "i"))
        else:
            capacity = np.log2(1.0 + snr_to(link))

    with np.errstate(invalid="ignore", divide="ignore"):
        collision = np.where(w > 0, (term_a + term_b) / np.where(w > 0, w, 1.0), np.nan)
    rate = (1.0 - collision) * duty * capacity
    return np.broadcast_to(collision, rate.shape), rate


def _zoom(grid: np.ndarray, idx: int, points: int) -> np.ndarray:
    lo = grid[max(idx - 1, 0)]
    hi = grid[min(idx + 1, grid.size - 1)]
    if lo == hi:
        return np.array([lo])
    return np.geomspace(lo, hi, points)


def solve(
    mode: Union[Mode, str],
    model: TrafficModel,
    sense: SensingConfig,
    link: LinkModel,
    space: SearchSpace,
    constraint: float,
    policy: ThresholdPolicy = DEFAULT_POLICY,
) -> Optimum:
    """Maximise the mode's throughput subject to ``collision <= constraint``."""
    mode = Mode(mode)
    if not 0.0 < constraint <= 1.0:
        raise ConfigurationError(f"constraint must lie in (0, 1], got {constraint}")
    ts0_grid = np.asarray(space.t_s0_grid)
    t_grid = np.asarray(space.t_grid)

    best = None  # (rate, t_s0, t, collision)
    evaluations = 0
    for _ in range(space.refinement + 1):
        collision, rate = evaluate_grid(
            mode, model, sense, link, ts0_grid, t_grid, space, policy
        )
        evaluations += rate.size
        feasible = np.isfinite(collision) & (collision <= constraint)
        if not feasible.any():
            if best is None:
                return _infeasible(mode, collision, ts0_grid, t_grid, constraint, evaluations)
            break
        masked = np.where(feasible, rate, -np.inf)
        flat = int(np.argmax(masked))
        i, j = np.unravel_index(flat, masked.shape)
        candidate = (float(masked[i, j]), float(ts0_grid[i]), float(t_grid[j]), float(collision[i, j]))
        if best is None or candidate[0] > best[0]:
            best = candidate
        ts0_grid = _zoom(ts0_grid, int(i), space.zoom_points)
        t_grid = _zoom(t_grid, int(j), space.zoom_points)

    rate_star, t_s0_star, t_star, p_star = best
    return Optimum(mode, t_s0_star, t_star, rate_star, p_star, True, constraint, evaluations)


def _infeasible(mode, collision, ts0_grid, t_grid, constraint, evaluations):
    safe = np.where(np.isfinite(collision), collision, np.inf)
    i, j = np.unravel_index(int(np.argmin(safe)), safe.shape)
    return Optimum(
        mode, float(ts0_grid[i]), float(t_grid[j]), 0.0, float(safe[i, j]), False, constraint, evaluations
    )


def solve_p1(model, sense, link, space, constraint, policy=DEFAULT_POLICY) -> Optimum:
    """Optimal TS durations under a collision constraint."""
    return solve(Mode.TS, model, sense, link, space, constraint, policy)


def solve_p2(model, sense, link, space, constraint, policy=DEFAULT_POLICY) -> Optimum:
    """Optimal TR durations (``T = T_R``) under a collision constraint."""
    return solve(Mode.TR, model, sense, link, space, constraint, policy)


def _constraints(constraints) -> Tuple[float, float]:
    if np.ndim(constraints) == 0:
        return float(constraints), float(constraints)
    ts, tr = constraints
    return float(ts), float(tr)


def solve_p3(model, sense, link, space, constraints, policy=DEFAULT_POLICY) -> StrategyDecision:
    """Pick TS or TR, whichever reaches the higher constrained throughput.

    ``constraints`` is one bound for both modes or a ``(ts, tr)`` pair.
    An infeasible mode never wins; ties and the all-infeasible case go
    to TS.
    """
    c_ts, c_tr = _constraints(constraints)
    ts = solve_p1(model, sense, link, space, c_ts, policy)
    tr = solve_p2(model, sense, link, space, c_tr, policy)
    rate_ts = ts.rate_star if ts.feasible else 0.0
    rate_tr = tr.rate_star if tr.feasible else 0.0
    action = Action.TR if tr.feasible and rate_tr > rate_ts else Action.TS
    return StrategyDecision(action, rate_ts, rate_tr, model.beta, ts, tr)


def find_beta_star(
    model: TrafficModel,
    sense: SensingConfig,
    link: LinkModel,
    space: SearchSpace,
    constraints,
    beta_grid: Sequence[float],
    policy: ThresholdPolicy = DEFAULT_POLICY,
    refine_steps: int = 0,
) -> BetaThreshold:
    """Scan the PU load and locate where the best action switches.

    ``model`` supplies ``lambda_off``; its ``beta`` is replaced by each
    grid value.  With ``refine_steps > 0`` the first crossing is
    narrowed by bisection and ``beta_star`` is the upper end of the final
    bracket.  Every sign change along the grid is reported in
    ``crossings`` as a ``(below, above)`` pair.
    """
    betas = np.asarray(beta_grid, dtype=float)
    if betas.ndim != 1 or betas.size == 0 or np.any(np.diff(betas) <= 0):
        raise ConfigurationError("beta_grid must be nonempty and strictly increasing")
    if np.any((betas <= 0) | (betas >= 1)):
        raise ConfigurationError("beta_grid values must lie in (0, 1)")

    def decide(beta):
        return solve_p3(model.with_beta(beta), sense, link, space, constraints, policy)

    decisions = [decide(b) for b in betas]
    actions = [d.action for d in decisions]
    crossings = [
        (float(betas[k - 1]), float(betas[k])) for k in range(1, len(actions)) if actions[k] != actions[k - 1]
    ]
    if not crossings:
        end = betas[-1] if actions[0] is Action.TR else betas[0]
        return BetaThreshold(float(end), False, [], decisions)

    k = next(k for k in range(1, len(actions)) if actions[k] != actions[k - 1])
    lo, hi = float(betas[k - 1]), float(betas[k])
    below = actions[k - 1]
    for _ in range(refine_steps):
        mid = 0.5 * (lo + hi)
        if decide(mid).action == below:
            lo = mid
        else:
            hi = mid
    if below is Action.TS:
        # TS already wins below the first crossing
        return BetaThreshold(float(betas[0]), True, crossings, decisions)
    return BetaThreshold(hi, True, crossings, decisions)

