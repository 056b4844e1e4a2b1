import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fdcr.dettheory import SensingConfig, pd_hd, pf_fd, pf_hd, threshold_for_pf
from fdcr.exceptions import ConfigurationError, UndefinedConditionalError
from fdcr.outage import (
    BSumMode,
    CollisionBreakdown,
    FrameSchedule,
    Mode,
    WindowPolicy,
    collision,
    collision_to_imperfect,
    collision_to_perfect,
    collision_ts_imperfect,
    collision_ts_perfect,
    window_mass,
)
from fdcr.traffic import TrafficModel, f_tau


def literal_window_sum(lam, t_si, pf, n):
    """Term-by-term evaluation of the windowed collision mass."""
    total = 0.0
    for i in range(1, n + 1):
        total += (1 - pf) ** (i - 1) * (np.exp(-lam * (i - 1) * t_si) - np.exp(-lam * i * t_si))
    return total


def sense(chi=0.235, gamma=None):
    cfg = SensingConfig.from_db(chi, 20.0, -15.0, None, 6e6)
    return cfg.with_gamma(cfg.midpoint_gamma if gamma is None else gamma)


class TestSchedule:
    def test_defaults(self):
        ts = FrameSchedule("TS", 4e-3, 1.0)
        assert ts.t_si == pytest.approx(1.0 / 500)
        assert ts.n_windows == 501
        assert ts.transmission_span == pytest.approx(501 / 500)
        tr = FrameSchedule("TR", 4e-3, 1.0)
        assert tr.t_r == 1.0
        assert FrameSchedule("TS", 4e-3, 1.0, b_sum_mode="partition").n_windows == 500

    @pytest.mark.parametrize(
        "kwargs",
        [dict(mode="TO", t_s0=0.0, t=1.0), dict(mode="TO", t_s0=1e-3, t=-1.0),
         dict(mode="TS", t_s0=1e-3, t=1.0, m=-1), dict(mode="TS", t_s0=1e-3, t=0.0),
         dict(mode="TS", t_s0=1e-3, t=1.0, m=0, b_sum_mode="partition"),
         dict(mode="TR", t_s0=1e-3, t=1.0, t_r=-1.0), dict(mode="XX", t_s0=1e-3, t=1.0)],
    )
    def test_invalid(self, kwargs):
        with pytest.raises((ConfigurationError, ValueError)):
            FrameSchedule(**kwargs)


class TestWindowMass:
    @pytest.mark.parametrize(
        "lam, t_si, pf, n",
        list(itertools.product([0.01, 0.5, 3.0], [1e-3, 0.02, 0.3], [0.0, 1e-7, 0.05, 0.9, 1.0], [1, 7, 501])),
    )
    def test_matches_term_by_term_sum(self, lam, t_si, pf, n):
        assert window_mass(lam, t_si, pf, n) == pytest.approx(literal_window_sum(lam, t_si, pf, n), rel=1e-12, abs=1e-300)

    def test_no_false_alarms_telescopes(self):
        assert window_mass(0.7, 0.01, 0.0, 51) == pytest.approx(1 - np.exp(-0.7 * 0.51), rel=1e-13)

    def test_broadcasting(self):
        out = window_mass(0.1, np.array([[0.01], [0.02]]), np.array([0.0, 0.1, 0.2]), 10)
        assert out.shape == (2, 3)


class TestPerfectSensing:
    def test_to_values(self):
        model = TrafficModel(0.01, 0.5)
        assert collision_to_perfect(model, FrameSchedule("TO", 1e-3, 0.0)) == 0.0
        assert collision_to_perfect(model, FrameSchedule("TO", 1e-3, 100.0)) == pytest.approx(0.6321205588285577, abs=1e-12)

    def test_tr_equals_to(self):
        model = TrafficModel(0.3, 0.4)
        to = collision_to_perfect(model, FrameSchedule("TO", 1e-3, 2.0))
        assert collision_to_perfect(model, FrameSchedule("TR", 1e-3, 2.0)) == to

    def test_ts_zero_for_any_duration(self):
        assert collision_ts_perfect() == 0.0
        model = TrafficModel(0.3, 0.4)
        for t in (0.1, 10.0):
            assert collision(model, FrameSchedule("TS", 1e-3, t), sensing_quality="perfect").total == 0.0

    def test_ts_schedule_rejected_for_to_formula(self):
        with pytest.raises(ConfigurationError):
            collision_to_perfect(TrafficModel(1, 0.5), FrameSchedule("TS", 1e-3, 1.0))


class TestImperfectSensing:
    def test_to_formula(self):
        model, cfg = TrafficModel(0.5, 0.3), sense()
        sched = FrameSchedule("TO", 4e-3, 1.5)
        pd0, pf0 = pd_hd(cfg, 4e-3), pf_hd(cfg, 4e-3)
        a = 0.3 * (1 - pd0)
        idle = 0.7 * (1 - pf0)
        want = (a + idle * f_tau(model, 1.5)) / (a + idle)
        got = collision_to_imperfect(model, sched, cfg)
        assert got.total == pytest.approx(want, rel=1e-14)
        assert (got.term_a, got.w) == pytest.approx((a, a + idle), rel=1e-14)

    def test_perfect_detection_reduces_to_f_tau(self):
        model = TrafficModel(0.2, 0.6)
        cfg = SensingConfig.from_db(0.0, 20.0, 10.0, 2.0, 6e6)  # strong PU: P_d = 1
        sched = FrameSchedule("TO", 4e-3, 3.0)
        assert pd_hd(cfg, 4e-3) == 1.0 and pf_hd(cfg, 4e-3) < 1.0
        assert collision_to_imperfect(model, sched, cfg).total == f_tau(model, 3.0)

    def test_low_load_limit(self):
        sched = FrameSchedule("TO", 4e-3, 3.0)
        model = TrafficModel(0.2, 1e-9)
        assert collision_to_imperfect(model, sched, sense()).total == pytest.approx(f_tau(model, 3.0), rel=1e-7)

    def test_ts_formula(self):
        model, cfg = TrafficModel(0.5, 0.3), sense()
        sched = FrameSchedule("TS", 4e-3, 1.0, m=20)
        window = WindowPolicy("same")
        pf_w = pf_fd(cfg, sched.t_si)
        a = 0.3 * (1 - pd_hd(cfg, 4e-3))
        idle = 0.7 * (1 - pf_hd(cfg, 4e-3))
        b = idle * literal_window_sum(0.5, sched.t_si, pf_w, 21)
        got = collision_ts_imperfect(model, sched, cfg, window)
        assert got.total == pytest.approx((a + b) / (a + idle), rel=1e-12)
        assert got.extras["pf_fd"] == pytest.approx(pf_w)

    def test_ts_telescopes_without_false_alarms(self):
        model = TrafficModel(0.5, 0.3)
        cfg = sense(chi=0.0, gamma=1.5)  # window false alarms underflow to zero
        sched = FrameSchedule("TS", 4e-3, 1.0, m=20)
        got = collision_ts_imperfect(model, sched, cfg)
        assert got.extras["pf_fd"] == 0.0
        idle = 0.7 * (1 - pf_hd(cfg, 4e-3))
        assert got.term_b == pytest.approx(idle * f_tau(model, 21 * sched.t_si), rel=1e-12)

    def test_single_window_equals_to(self):
        model, cfg = TrafficModel(0.5, 0.3), sense()
        ts = collision_ts_imperfect(model, FrameSchedule("TS", 4e-3, 1.2, m=0), cfg)
        to = collision_to_imperfect(model, FrameSchedule("TO", 4e-3, 1.2), cfg)
        assert ts.total == pytest.approx(to.total, rel=1e-14)

    def test_undefined_when_never_attempting(self):
        model = TrafficModel(0.5, 0.3)
        cfg = sense(gamma=1e-3)  # always busy: P_f = P_d = 1
        with pytest.raises(UndefinedConditionalError):
            collision_to_imperfect(model, FrameSchedule("TO", 4e-3, 1.0), cfg)

    def test_dispatch(self):
        model, cfg = TrafficModel(0.5, 0.3), sense()
        for mode in Mode:
            sched = FrameSchedule(mode, 4e-3, 1.0)
            got = collision(model, sched, cfg)
            if mode is Mode.TS:
                assert got == collision_ts_imperfect(model, sched, cfg)
            else:
                assert got == collision_to_imperfect(model, sched, cfg)
        with pytest.raises(ConfigurationError):
            collision(model, FrameSchedule("TO", 4e-3, 1.0), None)
        with pytest.raises(ConfigurationError):
            collision(model, FrameSchedule("TO", 4e-3, 1.0), cfg, sensing_quality="fuzzy")

    def test_to_monotone_in_t(self):
        model, cfg = TrafficModel(0.5, 0.3), sense()
        totals = [collision_to_imperfect(model, FrameSchedule("TO", 4e-3, t), cfg).total for t in np.geomspace(1e-3, 10, 30)]
        assert np.all(np.diff(totals) >= 0)

    def test_nonincreasing_in_t_s0_at_fixed_false_alarm(self):
        model = TrafficModel(0.5, 0.3)
        base = SensingConfig.from_db(0.0, 20.0, -15.0, None, 6e6)
        totals = []
        for t_s0 in np.geomspace(5e-4, 5e-2, 25):
            cfg = base.with_gamma(threshold_for_pf(base, t_s0, 0.05, "HD"))
            totals.append(collision_to_imperfect(model, FrameSchedule("TO", t_s0, 1.0), cfg).total)
        assert np.all(np.diff(totals) <= 1e-15)


params = dict(
    lam=st.floats(1e-3, 5.0),
    beta=st.floats(0.01, 0.99),
    t_s0=st.floats(2e-4, 2e-2),
    t=st.floats(1e-2, 5.0),
    m=st.integers(1, 600),
    chi=st.floats(0.0, 0.6),
    gamma_offset=st.floats(-0.02, 0.05),
)


def _case(lam, beta, t_s0, t, m, chi, gamma_offset, b_sum_mode):
    base = SensingConfig.from_db(chi, 20.0, -15.0, None, 6e6)
    cfg = base.with_gamma(base.midpoint_gamma + gamma_offset)
    model = TrafficModel(lam, beta)
    ts = FrameSchedule("TS", t_s0, t, m=m, b_sum_mode=b_sum_mode)
    return model, cfg, ts


@settings(max_examples=200, deadline=None)
@given(**params)
def test_breakdown_identity_and_range(lam, beta, t_s0, t, m, chi, gamma_offset):
    model, cfg, ts = _case(lam, beta, t_s0, t, m, chi, gamma_offset, "literal")
    for b in (collision(model, ts, cfg), collision(model, FrameSchedule("TO", t_s0, t), cfg)):
        assert isinstance(b, CollisionBreakdown)
        assert 0.0 <= b.total <= 1.0
        assert 0.0 < b.w <= 1.0
        assert abs(b.total * b.w - (b.term_a + b.term_b)) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(**params)
def test_ts_never_exceeds_to_when_windows_tile_t(lam, beta, t_s0, t, m, chi, gamma_offset):
    model, cfg, ts = _case(lam, beta, t_s0, t, m, chi, gamma_offset, "partition")
    to = FrameSchedule("TO", t_s0, t)
    assert collision(model, ts, cfg).total <= collision(model, to, cfg).total * (1 + 1e-12)


@settings(max_examples=200, deadline=None)
@given(**params)
def test_literal_ts_never_exceeds_to_over_the_same_span(lam, beta, t_s0, t, m, chi, gamma_offset):
    """The literal layout is on air for m+1 windows, so compare at that span."""
    model, cfg, ts = _case(lam, beta, t_s0, t, m, chi, gamma_offset, "literal")
    to = FrameSchedule("TO", t_s0, ts.transmission_span)
    assert collision(model, ts, cfg).total <= collision(model, to, cfg).total * (1 + 1e-12)


def test_literal_ts_ordering_holds_on_preset_window_count():
    lams, betas, chis = [0.01, 0.5, 1.0, 2.0], [0.2, 0.5, 0.8], [0.0, 0.1, 0.235, 0.5]
    for lam, beta, chi, t_s0, t in itertools.product(lams, betas, chis, [1e-3, 4e-3], [0.1, 0.5, 2.0]):
        model, cfg, ts = _case(lam, beta, t_s0, t, 500, chi, 0.0, "literal")
        to = FrameSchedule("TO", t_s0, t)
        assert collision(model, ts, cfg).total <= collision(model, to, cfg).total


def test_literal_ts_can_exceed_to_with_few_quiet_windows():
    """With m = 10 and almost no window false alarms the extra window shows."""
    model, cfg, ts = _case(0.5, 0.2, 1e-3, 0.5, 10, 0.0, 0.0, "literal")
    to = FrameSchedule("TO", 1e-3, 0.5)
    b_ts, b_to = collision(model, ts, cfg), collision(model, to, cfg)
    assert b_ts.extras["pf_fd"] < 1e-12
    excess = b_ts.total - b_to.total
    idle_share = (b_ts.w - b_ts.term_a) / b_ts.w
    bound = idle_share * (f_tau(model, 0.55) - f_tau(model, 0.5))
    assert 0 < excess <= bound * (1 + 1e-9)


class TestWindowPolicy:
    def test_rules(self):
        cfg = sense(chi=0.3)
        assert WindowPolicy("same").gamma(cfg, 1e-3) == cfg.gamma
        assert WindowPolicy("si-offset").gamma(cfg, 1e-3) == pytest.approx(cfg.gamma + 0.09 * 100)
        g = WindowPolicy("target-pf", 0.01).gamma(cfg, 1e-3)
        assert pf_fd(cfg, 1e-3, g) == pytest.approx(0.01, abs=1e-10)

    def test_rules_agree_without_self_interference(self):
        cfg = sense(chi=0.0)
        assert WindowPolicy("si-offset").gamma(cfg, 1e-3) == WindowPolicy("same").gamma(cfg, 1e-3)

    @pytest.mark.parametrize("kwargs", [dict(rule="other"), dict(rule="target-pf")])
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigurationError):
            WindowPolicy(**kwargs)


def test_bsum_modes_enum():
    assert BSumMode("literal") is BSumMode.LITERAL
