"""Named experiments: each turns an :class:`ExperimentConfig` into tables.

Every runner returns ``(tables, summary)`` where ``tables`` is a list of
:class:`Table` (one CSV each) and ``summary`` a JSON-friendly dict that
ends up in the run metadata.  Rows are produced in a fixed order so the
CSV bytes depend only on the configuration and the seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Sequence, Tuple

import numpy as np

from fdcr.config import ExperimentConfig
from fdcr.dettheory import SensingConfig, pd_fd, pd_hd, pf_fd, pf_hd, threshold_for_pf
from fdcr.exceptions import InfeasibleError
from fdcr.optimize import Optimum, SearchSpace, ThresholdPolicy, find_beta_star, solve, solve_p3
from fdcr.outage import FrameSchedule, Mode, WindowPolicy, collision
from fdcr.sim import RNG_ALGORITHM, simulate_detector, simulate_system
from fdcr.throughput import rate_to, rate_tr

CSV_SCHEMA_VERSION = 1


@dataclass
class Table:
    name: str
    columns: Tuple[str, ...]
    rows: List[Tuple[Any, ...]]


# helpers -----------------------------------------------------------------


def sense_for(config: ExperimentConfig, t_s0: float, chi=None) -> SensingConfig:
    """Sensing config with the threshold resolved for an initial period ``t_s0``."""
    sense = config.sensing(chi)
    if config.gamma_spec == "target-pf":
        target = config.get("sensing", "target_pf")
        sense = sense.with_gamma(float(threshold_for_pf(sense, t_s0, target, "HD")))
    return sense


def schedule(config: ExperimentConfig, mode, t_s0: float, t: float) -> FrameSchedule:
    t_r = config.get("frame", "t_r") if Mode(mode) is Mode.TR else None
    return FrameSchedule(
        mode,
        t_s0,
        t,
        t_r=t_r,
        m=config.get("frame", "m", 500),
        b_sum_mode=config.get("frame", "b_sum_mode", "literal"),
    )


def throughput(mode, sched, sense, link, model, window):
    breakdown = collision(model, sched, sense, window=window)
    if Mode(mode) is Mode.TR:
        return breakdown, rate_tr(link, sched, breakdown)
    return breakdown, rate_to(link, sched, breakdown)


def search_space(config: ExperimentConfig) -> SearchSpace:
    return SearchSpace.log_spaced(
        t_s0_range=config.get("optimize", "t_s0_range", (0.5e-3, 50e-3)),
        t_range=config.get("optimize", "t_range", (0.05, 20.0)),
        points=config.get("optimize", "points", 40),
        m=config.get("frame", "m", 500),
        refinement=config.get("optimize", "refinement", 2),
        zoom_points=config.get("optimize", "zoom_points", 21),
        b_sum_mode=config.get("frame", "b_sum_mode", "literal"),
    )


def threshold_policy(config: ExperimentConfig, window: WindowPolicy = None) -> ThresholdPolicy:
    window = window or config.window()
    if config.gamma_spec == "target-pf":
        return ThresholdPolicy("target-pf", config.get("sensing", "target_pf"), window)
    return ThresholdPolicy("fixed", None, window)


def constraints(config: ExperimentConfig) -> Tuple[float, float]:
    base = config.get("optimize", "constraint", 0.04)
    return config.get("optimize", "constraint_ts", base), config.get("optimize", "constraint_tr", base)


def _frame_durations(config):
    return config.get("frame", "t_s0", 4e-3), config.get("frame", "t", 0.1)


# experiments ------------------------------------------------------------


def sense_curves(config: ExperimentConfig):
    t_grid = config.get("sweep", "t_s", tuple(np.linspace(1e-4, 5e-3, 50)))
    chis = config.get("sweep", "chi", (0.0, 0.1, 0.2, 0.3))
    rows = []
    for chi in chis:
        for t_s in t_grid:
            sense = sense_for(config, t_s, chi)
            rows.append(
                (t_s, chi, pf_fd(sense, t_s), pd_fd(sense, t_s), pf_hd(sense, t_s), pd_hd(sense, t_s))
            )
    columns = ("t_s_seconds", "chi", "pf_fd", "pd_fd", "pf_hd", "pd_hd")
    return [Table("sense-curves", columns, rows)], {"rows": len(rows)}


_COLLISION_COLUMNS = (
    "t_s0_seconds", "t_seconds", "mode", "sensing_quality", "collision", "term_a", "term_b", "w",
)


def collision_curves(config: ExperimentConfig):
    model = config.traffic()
    window = config.window()
    modes = config.get("sweep", "modes", ("TO", "TS", "TR"))
    t_s0, t_fixed = _frame_durations(config)

    def row(mode, ts0, t, quality):
        sense = sense_for(config, ts0)
        b = collision(model, schedule(config, mode, ts0, t), sense, quality, window)
        return (ts0, t, mode, quality, b.total, b.term_a, b.term_b, b.w)

    vs_t = [
        row(mode, t_s0, t, quality)
        for quality in ("perfect", "imperfect")
        for mode in modes
        for t in config.get("sweep", "t", tuple(np.geomspace(0.01, 10.0, 60)))
    ]
    vs_ts0 = [
        row(mode, ts0, t_fixed, "imperfect")
        for mode in modes
        for ts0 in config.get("sweep", "t_s0", tuple(np.geomspace(5e-4, 5e-2, 60)))
    ]
    tables = [
        Table("collision-vs-t", _COLLISION_COLUMNS, vs_t),
        Table("collision-vs-ts0", _COLLISION_COLUMNS, vs_ts0),
    ]
    return tables, {"rows": len(vs_t) + len(vs_ts0)}


_THROUGHPUT_COLUMNS = (
    "t_s0_seconds", "t_seconds", "chi", "mode", "collision", "throughput", "forward", "reverse",
)


def throughput_curves(config: ExperimentConfig):
    model = config.traffic()
    window = config.window()
    modes = config.get("sweep", "modes", ("TO", "TS", "TR"))
    chis = config.get("sweep", "chi", (config.get("sensing", "chi", 0.0),))
    t_s0, t_fixed = _frame_durations(config)

    def row(mode, chi, ts0, t):
        sense = sense_for(config, ts0, chi)
        b, r = throughput(mode, schedule(config, mode, ts0, t), sense, config.link(chi), model, window)
        return (ts0, t, chi, mode, b.total, r.value, r.forward, r.reverse)

    vs_t = [
        row(mode, chi, t_s0, t)
        for chi in chis
        for mode in modes
        for t in config.get("sweep", "t", tuple(np.geomspace(0.01, 10.0, 60)))
    ]
    vs_ts0 = [
        row(mode, chi, ts0, t_fixed)
        for chi in chis
        for mode in modes
        for ts0 in config.get("sweep", "t_s0", tuple(np.geomspace(5e-4, 5e-2, 60)))
    ]
    tables = [
        Table("throughput-vs-t", _THROUGHPUT_COLUMNS, vs_t),
        Table("throughput-vs-ts0", _THROUGHPUT_COLUMNS, vs_ts0),
    ]
    return tables, {"rows": len(vs_t) + len(vs_ts0)}


_OPTIMUM_COLUMNS = (
    "mode", "beta", "chi", "constraint", "t_s0_star_seconds", "t_star_seconds",
    "rate_star", "collision_at_opt", "feasible", "evaluations",
)


def _optimum_row(opt: Optimum, beta, chi):
    return (
        opt.mode.value, beta, chi, opt.constraint, opt.t_s0_star, opt.t_star,
        opt.rate_star, opt.collision_at_opt, opt.feasible, opt.evaluations,
    )


def _optimize(config: ExperimentConfig, mode: Mode):
    model = config.traffic()
    chi = config.get("sensing", "chi", 0.0)
    c_ts, c_tr = constraints(config)
    bound = c_ts if mode is Mode.TS else c_tr
    opt = solve(mode, model, config.sensing(), config.link(), search_space(config), bound, threshold_policy(config))
    name = "optimize-p1" if mode is Mode.TS else "optimize-p2"
    summary = {
        "mode": mode.value,
        "t_s0_star_seconds": opt.t_s0_star,
        "t_star_seconds": opt.t_star,
        "rate_star": opt.rate_star,
        "collision_at_opt": opt.collision_at_opt,
        "feasible": opt.feasible,
    }
    tables = [Table(name, _OPTIMUM_COLUMNS, [_optimum_row(opt, model.beta, chi)])]
    if not opt.feasible:
        raise InfeasibleWithTables(
            f"{name}: no grid point meets collision <= {bound}; "
            f"lowest collision found is {opt.collision_at_opt:.6g}",
            tables,
            summary,
        )
    return tables, summary


class InfeasibleWithTables(InfeasibleError):
    """Infeasible optimisation whose partial results should still be written."""

    def __init__(self, message, tables, summary):
        super().__init__(message)
        self.tables = tables
        self.summary = summary


def optimize_p1(config):
    return _optimize(config, Mode.TS)


def optimize_p2(config):
    return _optimize(config, Mode.TR)


_STRATEGY_COLUMNS = (
    "beta", "action", "rate_ts", "rate_tr",
    "ts_t_s0_seconds", "ts_t_seconds", "ts_feasible",
    "tr_t_s0_seconds", "tr_t_seconds", "tr_feasible",
)
_SENSITIVITY_COLUMNS = (
    "lambda_off_per_s", "window_rule", "beta_star", "crossed", "n_crossings",
    "ts_t_s0_seconds", "ts_t_seconds", "tr_t_s0_seconds", "tr_t_seconds",
)


def _strategy(config, lambda_scale, window):
    model = config.traffic(lambda_scale)
    betas = config.get("sweep", "beta", tuple(np.linspace(0.04, 0.96, 25)))
    return find_beta_star(
        model, config.sensing(), config.link(), search_space(config), constraints(config),
        betas, threshold_policy(config, window),
    )


def strategy_sweep(config: ExperimentConfig):
    """Best action along the load grid, plus a sensitivity sweep.

    The sensitivity table repeats the load scan for scaled PU rates and
    for each in-transmission threshold rule, and reports the optimal
    durations at the configured load.
    """
    base = _strategy(config, 1.0, config.window())
    rows = []
    for d in base.decisions:
        rows.append(
            (d.beta, d.action.name, d.rate_ts, d.rate_tr,
             d.ts.t_s0_star, d.ts.t_star, d.ts.feasible,
             d.tr.t_s0_star, d.tr.t_star, d.tr.feasible)
        )

    beta = config.get("traffic", "beta")
    scales = config.get("sensitivity", "lambda_scale", (1.0,))
    rules = config.get("sensitivity", "window_rules", (config.window().rule,))
    target = config.get("sensitivity", "window_target_pf", config.get("frame", "window_target_pf"))
    sens_rows = []
    for rule in rules:
        window = WindowPolicy(rule, target if rule == "target-pf" else None)
        for scale in scales:
            scan = _strategy(config, scale, window)
            at_beta = solve_p3(
                config.traffic(scale).with_beta(beta), config.sensing(), config.link(),
                search_space(config), constraints(config), threshold_policy(config, window),
            )
            sens_rows.append(
                (config.get("traffic", "lambda_off") * scale, rule, scan.beta_star, scan.crossed,
                 len(scan.crossings), at_beta.ts.t_s0_star, at_beta.ts.t_star,
                 at_beta.tr.t_s0_star, at_beta.tr.t_star)
            )

    summary = {
        "beta_star": base.beta_star,
        "crossed": base.crossed,
        "crossings": [list(c) for c in base.crossings],
        "single_crossing": base.single_crossing,
    }
    tables = [
        Table("strategy-sweep", _STRATEGY_COLUMNS, rows),
        Table("sensitivity", _SENSITIVITY_COLUMNS, sens_rows),
    ]
    return tables, summary


_SIM_COLUMNS = (
    "mode", "detector", "sensing_quality", "frames", "attempts", "collisions",
    "collision_rate", "std_err", "binomial_std_err", "analytic_collision", "z_score",
    "throughput_estimate", "analytic_throughput", "delivered_throughput",
    "overlap_time_total",
)
_DETECTOR_COLUMNS = (
    "hypothesis", "duplex", "chi", "t_s_seconds", "gamma", "trials",
    "busy_fraction", "std_err", "analytic", "z_score",
)


def simulate(config: ExperimentConfig):
    """Monte Carlo runs next to their closed-form counterparts.

    All modes share the configured seed, so they see the same PU
    timeline (common random numbers).
    """
    seed = config.seed
    model = config.traffic()
    link = config.link()
    window = config.window()
    t_s0, t = _frame_durations(config)
    sense = sense_for(config, t_s0)
    frames = config.get("simulate", "frames", 100000)
    detector = config.get("simulate", "detector", "analytic")
    quality = config.get("simulate", "sensing_quality", "imperfect")
    batches = config.get("simulate", "batches", 50)

    rows = []
    for mode in config.get("simulate", "modes", ("TO", "TS", "TR")):
        sched = schedule(config, mode, t_s0, t)
        res = simulate_system(model, sched, sense, link, frames, seed, detector, quality, window, batches)
        b = collision(model, sched, sense, quality, window)
        analytic_rate = (rate_tr if Mode(mode) is Mode.TR else rate_to)(link, sched, b).value
        z = (res.collision_rate - b.total) / res.std_err if res.std_err > 0 else float("nan")
        rows.append(
            (mode, detector, quality, res.frames, res.attempts, res.collisions, res.collision_rate,
             res.std_err, res.binomial_std_err, b.total, z, res.throughput_estimate, analytic_rate,
             res.delivered_throughput, res.overlap_time_total)
        )

    trials = config.get("simulate", "trials", 100000)
    method = config.get("simulate", "method", "exact")
    t_s = config.get("simulate", "t_s", t_s0)
    det_sense = sense_for(config, t_s)
    det_rows = []
    for hypothesis in ("H0", "H1"):
        for duplex in ("HD", "FD"):
            res = simulate_detector(det_sense, t_s, hypothesis, duplex, trials, seed, method)
            prob = {"H0": {"HD": pf_hd, "FD": pf_fd}, "H1": {"HD": pd_hd, "FD": pd_fd}}[hypothesis][duplex]
            analytic = float(prob(det_sense, t_s))
            z = (res.decision_busy_fraction - analytic) / res.std_err if res.std_err > 0 else float("nan")
            chi = det_sense.chi if duplex == "FD" else 0.0
            det_rows.append(
                (hypothesis, duplex, chi, t_s, det_sense.gamma, trials, res.decision_busy_fraction,
                 res.std_err, analytic, z)
            )
    tables = [Table("simulate-system", _SIM_COLUMNS, rows), Table("simulate-detector", _DETECTOR_COLUMNS, det_rows)]
    return tables, {"rng": RNG_ALGORITHM, "frames": frames, "trials": trials, "method": method}


RUNNERS: Dict[str, Callable[[ExperimentConfig], Tuple[List[Table], Dict[str, Any]]]] = {
    "sense-curves": sense_curves,
    "collision-curves": collision_curves,
    "throughput-curves": throughput_curves,
    "optimize-p1": optimize_p1,
    "optimize-p2": optimize_p2,
    "strategy-sweep": strategy_sweep,
    "simulate": simulate,
}


def run_experiment(config: ExperimentConfig):
    return RUNNERS[config.experiment](config)


def format_value(value) -> str:
    """CSV cell text: 12 significant digits for floats."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".12g")
    return str(value)


def render_csv(table: Table) -> str:
    lines = [",".join(table.columns)]
    lines.extend(",".join(format_value(v) for v in row) for row in table.rows)
    return "\n".join(lines) + "\n"


__all__: Sequence[str] = [
    "CSV_SCHEMA_VERSION",
    "RUNNERS",
    "InfeasibleWithTables",
    "Table",
    "format_value",
    "render_csv",
    "run_experiment",
]
