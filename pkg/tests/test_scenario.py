import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gnssxa.errors import InfeasibleGeometry, ParseError, SchemaError
from gnssxa.model import C_LIGHT, predicted_range
from gnssxa.scenario import (
    Epoch,
    NoiseModel,
    SatelliteObservation,
    add_noise,
    generate_scenario,
    load_scenario,
    save_scenario,
    scenario_from_dict,
    scenario_to_text,
)


def test_reference_counts(ref_scenario):
    assert len(ref_scenario.epochs) == 600
    for ep in ref_scenario.epochs[::97]:
        assert (len(ep), ep.n_auth, ep.n_open) == (8, 3, 5)
    assert ref_scenario.m == 2
    assert len(ref_scenario.meta.isb_true_s) == 1


def test_generated_satellites_sit_on_meo_shell(ref_scenario):
    radii = np.linalg.norm(np.stack([ep.sat_pos for ep in ref_scenario.epochs]), axis=-1)
    assert radii.min() >= 2.0e7 and radii.max() <= 3.0e7


def test_generated_satellites_are_visible(ref_scenario):
    from gnssxa.frames import elevation_deg

    for ep in ref_scenario.epochs[::50]:
        assert elevation_deg(ep.sat_pos, ref_scenario.truth_pos).min() > 5.0


def test_pseudoranges_reproduce_at_truth(ref_scenario):
    """Noiseless generation: the model at the truth gives the stored values bitwise."""
    truth = ref_scenario.truth_pos
    clocks = ref_scenario.truth_clock_m
    for ep in ref_scenario.epochs[::37]:
        pr = predicted_range(ep.sat_pos, ep.sat_clk_s, ep.atmo_m, truth, clocks[ep.constellations - 1])
        assert np.array_equal(pr, ep.pseudoranges)


def test_authenticated_first_and_constellation_split(ref_scenario):
    ep = ref_scenario.epochs[0]
    assert ep.auth_mask.tolist() == [True] * 3 + [False] * 5
    assert ep.constellations.tolist() == [1, 1, 1, 2, 2, 2, 2, 2]


def test_minimal_single_constellation():
    sc = generate_scenario(4, 0, 1, n_epochs=1, geometry_seed=3)
    assert len(sc.epochs[0]) == 4 and sc.m == 1
    assert sc.meta.isb_true_s == ()


def test_generation_is_deterministic():
    a = generate_scenario(3, 5, 2, n_epochs=5, geometry_seed=11)
    b = generate_scenario(3, 5, 2, n_epochs=5, geometry_seed=11)
    assert scenario_to_text(a) == scenario_to_text(b)


def test_generator_rejects_too_few_satellites():
    with pytest.raises(ValueError):
        generate_scenario(2, 1, 1)
    with pytest.raises(ValueError):
        generate_scenario(3, 1, 2)


def test_generator_reports_impossible_sky():
    with pytest.raises(InfeasibleGeometry):
        # an epoch span of several hours cannot keep every satellite up
        generate_scenario(3, 5, 2, n_epochs=40, dt=3600.0, max_attempts=3)


def test_noise_free_model_leaves_epoch_untouched(ref_scenario):
    ep = ref_scenario.epochs[0]
    assert add_noise(ep, NoiseModel(0.0, 0.0, 1)) is ep


def test_noise_changes_only_pseudoranges(ref_scenario, rng):
    ep = ref_scenario.epochs[3]
    noisy = add_noise(ep, NoiseModel(2.0, 0.0, 0), rng=rng)
    for a, b in zip(ep.observations, noisy.observations):
        assert (a.sat_id, a.constellation, a.authenticated, a.pos_ecef, a.sat_clock_bias, a.atmo_delay) == (
            b.sat_id, b.constellation, b.authenticated, b.pos_ecef, b.sat_clock_bias, b.atmo_delay)
    assert not np.array_equal(ep.pseudoranges, noisy.pseudoranges)
    assert noisy.auth_mask.tolist() == ep.auth_mask.tolist()


def _sample_std(noise, mask, n_draws=100_000, sat=0):
    ep = Epoch(0.0, (SatelliteObservation("G01", 1, True, (2e7, 0, 0), 0.0, 0.0, 0.0),))
    rng = np.random.default_rng(2024)
    draws = np.array([add_noise(ep, noise, mask, rng).pseudoranges[sat] for _ in range(n_draws)])
    return draws.std()


def test_victim_noise_moment():
    s = _sample_std(NoiseModel(1.0, 0.0, 0), None)
    assert 0.99 <= s <= 1.01


def test_relay_noise_moment():
    s = _sample_std(NoiseModel(0.0, 9.0, 0), [True])
    assert abs(s - 9.0) < 0.09


def test_tampered_variance_rule():
    n = NoiseModel(3.0, 4.0, 0)
    assert n.sigma_tampered(relay=True) == pytest.approx(5.0)
    assert n.sigma_tampered(relay=False) == 3.0
    assert NoiseModel(0.0, 0.0, 0, sigma_floor=3.0).sigma_victim == 3.0
    with pytest.raises(ValueError):
        NoiseModel(-1.0)


def test_save_load_round_trip_is_exact(tmp_path, short_scenario):
    path = tmp_path / "s.json"
    save_scenario(short_scenario, path)
    back = load_scenario(path)
    assert back == short_scenario
    assert scenario_to_text(back) == path.read_text()


@settings(max_examples=30, deadline=None)
@given(st.floats(-1e8, 1e8, allow_nan=False).filter(lambda v: v != 0))
def test_seventeen_digits_round_trip(value):
    from gnssxa.scenario import fmt_json

    assert float(fmt_json(value)) == value


def _doc(scenario):
    return json.loads(scenario_to_text(scenario))


def test_open_before_authenticated_is_a_schema_error(short_scenario):
    doc = _doc(short_scenario)
    sats = doc["epochs"][0]["sats"]
    sats[0], sats[-1] = sats[-1], sats[0]
    with pytest.raises(SchemaError, match="epochs\\[0\\]"):
        scenario_from_dict(doc)


def test_underdetermined_epoch_is_a_schema_error():
    sc = generate_scenario(4, 0, 1, n_epochs=1, geometry_seed=3)
    doc = _doc(sc)
    doc["epochs"][0]["sats"] = doc["epochs"][0]["sats"][:3]
    with pytest.raises(SchemaError):
        scenario_from_dict(doc)


def test_missing_constellation_is_a_schema_error(short_scenario):
    doc = _doc(short_scenario)
    for s in doc["epochs"][1]["sats"]:
        s["constellation"] = 1
    with pytest.raises(SchemaError, match="constellation"):
        scenario_from_dict(doc)


def test_parse_errors_carry_context(tmp_path, short_scenario):
    doc = _doc(short_scenario)
    doc["epochs"][2]["sats"][4]["pr_m"] = "oops"
    with pytest.raises(ParseError, match=r"epochs\[2\]\.sats\[4\]\.pr_m"):
        scenario_from_dict(doc)
    bad = tmp_path / "bad.json"
    bad.write_text('{"meta": {"m": 2,,}}')
    with pytest.raises(ParseError, match="line 1"):
        load_scenario(bad)


def test_negative_atmospheric_delay_rejected():
    with pytest.raises(SchemaError):
        SatelliteObservation("G01", 1, True, (2e7, 0, 0), 0.0, -1.0, 2e7)


def test_loader_warns_on_off_shell_satellite(short_scenario):
    doc = _doc(short_scenario)
    doc["epochs"][0]["sats"][0]["pos_ecef"] = [1.0e7, 0.0, 0.0]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        scenario_from_dict(doc)
    assert any("MEO" in str(w.message) for w in caught)


def test_clock_conversion_constant():
    assert C_LIGHT == 299792458.0
    assert math.isclose(C_LIGHT * 1e-6, 299.792458)
