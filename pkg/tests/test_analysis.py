import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from gnssxa.analysis import (
    CLOSED_FORM,
    EMPIRICAL,
    DetCurve,
    det_closed_form,
    det_closed_form_mixture,
    det_from_metrics,
    metric_stats,
    pfa_from_threshold,
    pmd_closed_form,
    q_func,
    q_inv,
    quadform_model,
    threshold_from_pfa,
    wilson_halfwidth,
    wilson_interval,
)
from gnssxa.attacks import generation_attack_position, plan_time_attack, relay_attack_position
from gnssxa.checks import isb_selection_matrix
from gnssxa.errors import DimensionMismatch, DomainError, EmptyHypothesis, NotSPD
from gnssxa.geometry import build_geometry
from gnssxa.pvt import solve

C2 = isb_selection_matrix(2)


def _mp_q(x):
    return float(mpmath.erfc(mpmath.mpf(x) / mpmath.sqrt(2)) / 2)


def _mp_qinv(p):
    return float(mpmath.findroot(lambda x: mpmath.erfc(x / mpmath.sqrt(2)) / 2 - p, 1.0))


@pytest.mark.parametrize("x", [-3.0, -0.5, 0.0, 0.3, 1.0, 1.959963984540054, 4.0, 7.5])
def test_q_matches_high_precision(x):
    assert q_func(x) == pytest.approx(_mp_q(x), rel=1e-12)


def test_frozen_threshold_value():
    with mpmath.workdps(40):
        oracle = _mp_qinv(0.025)
    assert oracle == pytest.approx(1.959963984540054, abs=1e-14)
    assert threshold_from_pfa(0.05, 1.0) == pytest.approx(1.959963984540054, abs=1e-12)
    assert threshold_from_pfa(0.05, 2.5) == pytest.approx(2.5 * 1.959963984540054, rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(p=st.floats(1e-12, 1.0 - 1e-9))
def test_q_roundtrip(p):
    assert q_func(q_inv(p)) == pytest.approx(p, rel=1e-12, abs=1e-300)


@settings(max_examples=200, deadline=None)
@given(p=st.floats(1e-10, 1.0), sigma=st.floats(1e-3, 1e3))
def test_threshold_roundtrip(p, sigma):
    t = threshold_from_pfa(p, sigma)
    assert t >= 0
    assert pfa_from_threshold(t, sigma) == pytest.approx(p, rel=1e-10, abs=1e-15)


@pytest.mark.parametrize("bad", [0.0, -0.1, 1.5, np.nan])
def test_domain_errors(bad):
    with pytest.raises(DomainError):
        threshold_from_pfa(bad, 1.0)
    if not 0 < bad < 1:
        with pytest.raises(DomainError):
            q_inv(bad)


def test_pmd_without_attack_is_complement():
    grid = np.array([1e-4, 1e-3, 0.01, 0.05, 0.2, 0.5, 0.9])
    np.testing.assert_allclose(pmd_closed_form(grid, 1.3, 1.3, 0.0), 1 - grid, atol=1e-12)


def test_pmd_monte_carlo(rng):
    sigma0, sigma1, mu1 = 1.0, 1.4, 2.2
    n = 1_000_000
    x1 = mu1 + sigma1 * rng.standard_normal(n)
    for p_fa in (0.01, 0.05, 0.2):
        t = threshold_from_pfa(p_fa, sigma0)
        empirical = np.mean(np.abs(x1) <= t)
        assert pmd_closed_form(p_fa, sigma0, sigma1, mu1) == pytest.approx(empirical, abs=0.005)


@pytest.mark.parametrize("p_fa", [0.001, 0.05, 0.3])
def test_pmd_vanishes_for_large_spread(p_fa):
    # for sigma1 >> T the band [-T, T] holds ~ 2 T / (sigma1 sqrt(2 pi)) of the mass
    t = threshold_from_pfa(p_fa, 1.0)
    for ratio in (1e2, 1e3, 1e4):
        approx = 2 * t / (ratio * np.sqrt(2 * np.pi))
        assert pmd_closed_form(p_fa, 1.0, ratio, 0.0) == pytest.approx(approx, rel=1e-3)
    ratio = 2 * t / (np.sqrt(2 * np.pi) * 1e-3) * 1.01
    assert pmd_closed_form(p_fa, 1.0, ratio, 0.0) < 1e-3


@settings(max_examples=100, deadline=None)
@given(mu=st.floats(-20, 20), s0=st.floats(0.1, 5), s1=st.floats(0.1, 5))
def test_pmd_monotone_in_pfa(mu, s0, s1):
    grid = np.linspace(0.001, 0.999, 50)
    md = pmd_closed_form(grid, s0, s1, mu)
    assert np.all(np.diff(md) <= 1e-12)
    assert np.all((md >= 0) & (md <= 1))


@pytest.fixture(scope="module")
def epoch_geometry(short_scenario):
    ep = short_scenario.epochs[0]
    sol = solve(ep).solution
    return short_scenario, ep, sol, build_geometry(ep, sol)


def test_metric_stats_match_monte_carlo(epoch_geometry, rng):
    sc, ep, sol, geom = epoch_geometry
    from gnssxa.frames import enu_to_ecef

    tamper = plan_time_attack(ep, sol, enu_to_ecef([400.0, 0, 0], sc.truth_pos), C2)
    sigma_l = 2.0
    st_ = metric_stats(geom, C2, tamper, sigma_l)
    noise = sigma_l * rng.standard_normal((200_000, geom.n))
    theta = (C2 @ geom.h @ (tamper.delta_r + noise).T)[0]
    assert np.std(theta) == pytest.approx(st_.sigma0, rel=0.02)
    assert st_.sigma1 == st_.sigma0
    assert abs(st_.mu1) < 1e-9
    np.testing.assert_allclose(st_.mu, -st_.mu[::-1])


def test_metric_stats_relay_spread(epoch_geometry):
    _, _, _, geom = epoch_geometry
    relay = relay_attack_position(geom, 1e-6)
    s = metric_stats(geom, C2, relay, 3.0, 4.0, "relay")
    assert s.sigma1 == pytest.approx(s.sigma0 * 5.0 / 3.0, rel=1e-12)
    gen = metric_stats(geom, C2, np.zeros(geom.n), 3.0, 4.0, "generation")
    assert gen.sigma1 == gen.sigma0
    with pytest.raises(DimensionMismatch):
        metric_stats(geom, C2, np.zeros(geom.n + 1), 1.0)


def test_quadform_mean_and_distribution(epoch_geometry, rng):
    _, _, _, geom = epoch_geometry
    sigma_l = 3.0
    cov = sigma_l**2 * (geom.h @ geom.h.T)[:3, :3]
    mean = np.array([1.5, -2.0, 0.7])
    model = quadform_model(mean, cov)
    np.testing.assert_allclose(model.p @ np.diag(model.lambdas) @ model.p.T, cov, rtol=1e-10)
    n = 1_000_000
    eps = rng.multivariate_normal(mean, cov, size=n)
    direct = np.sum(eps**2, axis=1)
    oracle_mean = np.trace(cov) + mean @ mean
    assert model.expected_value == pytest.approx(oracle_mean, rel=1e-10)
    assert direct.mean() == pytest.approx(oracle_mean, rel=0.005)
    synth = model.sample(200_000, np.random.default_rng(99))
    ks = stats.ks_2samp(direct[:200_000], synth).statistic
    assert ks < 0.01


def test_quadform_rejects_non_spd():
    with pytest.raises(NotSPD):
        quadform_model(np.zeros(2), [[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(NotSPD):
        quadform_model(np.zeros(2), [[1.0, 0.5], [0.0, 1.0]])


def test_wilson_against_formula():
    k, n, z = 37, 400, 1.959963984540054
    p = k / n
    centre = (p + z * z / (2 * n)) / (1 + z * z / n)
    half = z / (1 + z * z / n) * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    lo, hi = wilson_interval(k, n)
    assert lo == pytest.approx(centre - half, rel=1e-12)
    assert hi == pytest.approx(centre + half, rel=1e-12)
    assert wilson_halfwidth(k, n) == pytest.approx(half, rel=1e-12)
    lo0, hi0 = wilson_interval(0, 100)
    assert lo0 == pytest.approx(0.0, abs=1e-15) and 0 < hi0 < 0.05
    with pytest.raises(EmptyHypothesis):
        wilson_interval(0, 0)


def test_empirical_det_counts():
    m0 = np.array([0.1, 0.5, 0.9, 1.3])
    m1 = np.array([0.2, 2.0, 3.0])
    det = det_from_metrics(m0, m1, [0.5, 0.0, 2.5])
    assert det.mode == EMPIRICAL and det.trials == 7
    np.testing.assert_array_equal(det.thresholds, [0.0, 0.5, 2.5])
    np.testing.assert_allclose(det.p_fa, [1.0, 0.5, 0.0])
    np.testing.assert_allclose(det.p_md, [0.0, 1 / 3, 2 / 3])
    with pytest.raises(EmptyHypothesis):
        det_from_metrics([], m1, [1.0])


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), shift=st.floats(0, 5))
def test_empirical_det_monotone(seed, shift):
    r = np.random.default_rng(seed)
    m0 = np.abs(r.normal(size=300))
    m1 = np.abs(r.normal(shift, 1.0, size=300))
    det = det_from_metrics(m0, m1, np.linspace(0, 6, 80))
    assert np.all(np.diff(det.p_fa) <= 0)
    assert np.all(np.diff(det.p_md) >= 0)


def test_closed_form_det(epoch_geometry):
    _, _, _, geom = epoch_geometry
    s = metric_stats(geom, C2, np.zeros(geom.n), 1.0)
    grid = np.logspace(-4, 0, 30)
    det = det_closed_form(s, grid)
    assert det.mode == CLOSED_FORM
    np.testing.assert_allclose(np.sort(det.p_md), np.sort(1 - grid), atol=1e-12)
    assert det.pmd_at_pfa(0.05) == pytest.approx(0.95, abs=1e-3)


def test_mixture_reduces_to_single_epoch():
    grid = np.array([1e-3, 0.01, 0.1, 0.5])
    mix = det_closed_form_mixture([1.2, 1.2, 1.2], 1.5, 0.8, grid)
    order = np.argsort(mix.p_fa)
    np.testing.assert_allclose(mix.p_fa[order], grid)
    np.testing.assert_allclose(mix.p_md[order], pmd_closed_form(grid, 1.2, 1.5, 0.8), atol=1e-10)
    np.testing.assert_allclose(np.sort(mix.thresholds), np.sort(threshold_from_pfa(grid, 1.2)), rtol=1e-10)


def test_mixture_against_pooled_monte_carlo(rng):
    s0 = np.array([0.6, 0.9, 1.4])
    mu = np.array([0.0, 1.0, -2.0])
    n = 400_000
    idx = rng.integers(0, 3, n)
    x0 = s0[idx] * rng.standard_normal(n)
    x1 = mu[idx] + s0[idx] * rng.standard_normal(n)
    mix = det_closed_form_mixture(s0, s0, mu, [0.05])
    t = mix.thresholds[0]
    assert np.mean(np.abs(x0) > t) == pytest.approx(0.05, abs=0.002)
    assert np.mean(np.abs(x1) <= t) == pytest.approx(mix.p_md[0], abs=0.003)


def test_det_queries():
    det = DetCurve([0.0, 1.0, 2.0, 3.0], [1.0, 0.4, 0.1, 0.0], [0.0, 0.2, 0.5, 1.0],
                   np.zeros(4), np.zeros(4), 10, EMPIRICAL)
    assert det.pfa_at_pmd(0.2) == 0.4
    assert det.point_at_pmd(0.2) == 1
    assert det.pfa_at_pmd(-1.0) == 1.0
    assert det.pmd_at_pfa(0.25) == pytest.approx(0.35)
    assert len(det) == 4 and det.points[0] == (0.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        det.p_fa[0] = 0.3
