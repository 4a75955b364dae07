import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gnssxa.checks import (
    PositionCheckConfig,
    TimeCheckConfig,
    isb_check,
    isb_metric_m,
    isb_selection_matrix,
    position_check,
    time_check,
)
from gnssxa.errors import DimensionMismatch
from gnssxa.geometry import SINGLE
from gnssxa.model import C_LIGHT
from gnssxa.pvt import PvtSolution, SolverConfig, solve


def test_two_constellation_selection_matrix():
    np.testing.assert_array_equal(isb_selection_matrix(2), [[0, 0, 0, 1, -1], [0, 0, 0, -1, 1]])


def test_selection_matrix_structure_for_three_constellations():
    c = isb_selection_matrix(3)
    assert c.shape == (4, 6)
    assert np.linalg.matrix_rank(c) == 2
    np.testing.assert_array_equal(c[0::2], -c[1::2])


def test_symmetric_biases_pass():
    cfg = TimeCheckConfig.isb(2, 0.5)
    v = time_check(PvtSolution([1e6, 2e6, 3e6], [30.0, 30.0]), cfg)
    np.testing.assert_array_equal(v.metric, [0.0, 0.0])
    assert v.passed


def test_exceedance_fails():
    t, b, isb = 2.0, 0.3, 1.1
    cfg = TimeCheckConfig.isb(2, t, b, isb)
    for sign in (1, -1):
        gap = b + isb + sign * 1.5 * t
        assert not time_check(PvtSolution(np.zeros(3), [10.0, 10.0 + gap]), cfg).passed
        assert not isb_check(10.0 / C_LIGHT, (10.0 + gap) / C_LIGHT, cfg).passed


def test_exact_reference_gap_passes():
    cfg = TimeCheckConfig.isb(2, 1.0, 0.4, 2.0)
    v = isb_check(0.0, 2.4 / C_LIGHT, cfg)
    assert v.metric == pytest.approx(0.0, abs=1e-12) and v.passed


def test_boundary_is_inclusive():
    cfg = TimeCheckConfig.isb(2, 1.0)
    assert time_check(PvtSolution(np.zeros(3), [0.0, 1.0]), cfg).passed
    assert isb_check(0.0, 1.0 / C_LIGHT, TimeCheckConfig.isb(2, 1.0 + 1e-12)).passed
    assert position_check(PvtSolution([3.0, 4.0, 0.0], [0.0], SINGLE), PositionCheckConfig(np.zeros(3), 5.0)).passed


@settings(max_examples=1000, deadline=None)
@given(
    t1=st.floats(-1e-3, 1e-3),
    gap=st.floats(-200.0, 200.0),
    b=st.floats(-20.0, 20.0),
    isb=st.floats(-20.0, 20.0),
    threshold=st.floats(0.01, 100.0),
)
def test_isb_check_equals_time_check(t1, gap, b, isb, threshold):
    c1 = C_LIGHT * t1
    clocks = [c1, c1 + gap]
    cfg = TimeCheckConfig.isb(2, threshold, b, isb)
    v_time = time_check(PvtSolution(np.zeros(3), clocks), cfg)
    v_isb = isb_check(clocks[0] / C_LIGHT, clocks[1] / C_LIGHT, cfg)
    margin = abs(abs(gap - b - isb) - threshold)
    if margin > 1e-6:
        assert v_time.passed == v_isb.passed
    assert v_time.metric[0] == -v_time.metric[1]


def test_dimension_mismatch():
    cfg = TimeCheckConfig.isb(2, 1.0)
    with pytest.raises(DimensionMismatch):
        time_check(PvtSolution(np.zeros(3), [0.0], SINGLE), cfg)
    with pytest.raises(DimensionMismatch):
        time_check(PvtSolution(np.zeros(3), [0.0, 0.0, 0.0]), cfg)
    with pytest.raises(DimensionMismatch):
        TimeCheckConfig(np.zeros((3, 5)), np.zeros(3))


def test_calibrated_legitimate_scenario_passes_everywhere(ref_scenario):
    isb_m = C_LIGHT * ref_scenario.meta.isb_true_s[0]
    cfg = TimeCheckConfig.isb(2, 1e-3, 0.0, isb_m)
    for ep in ref_scenario.epochs[::25]:
        sol = solve(ep).solution
        assert time_check(sol, cfg).passed
        t1, t2 = sol.clocks_s
        assert isb_check(t1, t2, cfg).passed


def test_isb_metric_takes_worst_pair():
    cfg = TimeCheckConfig.isb(3, 1.0, [0.0, 0.0], [1.0, -2.0])
    assert isb_metric_m([0.0, 1.5, -2.0], cfg) == pytest.approx(0.5)
    assert isb_metric_m([[0.0, 1.0, 0.0]], cfg)[0] == pytest.approx(2.0)


def test_threshold_from_false_alarm_target():
    cfg = TimeCheckConfig.isb_from_pfa(2, 0.05, 1.0)
    assert cfg.threshold_t == pytest.approx(1.959963984540054, rel=1e-12)
    assert cfg.with_threshold(3.0).threshold_t == 3.0


def test_position_metric_at_reference():
    cfg = PositionCheckConfig([1.0, 2.0, 3.0], 0.0)
    v = position_check(PvtSolution([1.0, 2.0, 3.0], [0.0], SINGLE), cfg)
    assert v.metric == 0.0 and v.passed
    with pytest.raises(ValueError):
        PositionCheckConfig(np.zeros(3), -1.0)


def test_relay_keeps_position_metric(ref_scenario):
    from gnssxa.attacks import relay_attack_position
    from gnssxa.pvt import apply_tamper

    cfg = SolverConfig(isb_known=ref_scenario.meta.isb_true_s)
    check = PositionCheckConfig(ref_scenario.truth_pos, 1.0)
    ep = ref_scenario.epochs[0]
    legit = solve(ep, cfg=cfg, mode=SINGLE)
    tamper = relay_attack_position(legit.geometry, 10e-6)
    attacked = solve(apply_tamper(ep, tamper), initial=legit.solution, cfg=cfg).solution
    m0 = position_check(legit.solution, check).metric
    m1 = position_check(attacked, check).metric
    assert abs(m1 - m0) < 1e-6
