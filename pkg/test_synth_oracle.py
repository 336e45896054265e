"""
Synthetic generator and oracle test-suite

This test suite validates:
1. SynthSpec validation and generator determinism
2. Ground truth bookkeeping and the written synthetic inputs
3. Production geometry against the high-precision oracle Sun and shadow test
"""

import json

import numpy as np
import pandas as pd
import pytest

from conftest import TARGET_MHZ, injector_spec, null_spec
from uemr_core.catalogue import Population, STACKED_INDEX, load_catalogue
from uemr_core.geometry import (EARTH_RADIUS_M, EcefVector, GeodeticCoord, geodetic_to_ecef, gmst_rad,
                                illumination_state, solar_position_ecef)
from uemr_core.oracle import oracle_illuminated, oracle_sun, oracle_sun_radec
from uemr_core.synth import (Injector, SYNTH_NORAD_BASE, SynthSpec, generate, slant_range_km,
                             write_synthetic)


# ------ (1) Spec and determinism ------

def test_spec_rejects_inconsistent_settings():
    with pytest.raises(ValueError):
        null_spec(1, injector=Injector(channel_mhz=150.78125, amplitude=1.0, duty_fraction=0.5))
    with pytest.raises(ValueError):
        null_spec(1, eclipse_multiplier={Population.DTC: 0.0})
    with pytest.raises(ValueError):
        null_spec(1, n_satellites={Population.V1X: 3})
    with pytest.raises(ValueError):
        SynthSpec(unknown_field=1)


def test_generate_needs_satellites():
    with pytest.raises(ValueError):
        generate(null_spec(1, n_satellites={}))


def test_slant_range():
    assert slant_range_km(550.0, 90.0) == pytest.approx(550.0)
    assert slant_range_km(550.0, 0.0) == pytest.approx(np.sqrt(6921.0 ** 2 - 6371.0 ** 2))
    assert slant_range_km(550.0, 30.0) > 550.0


def test_generate_is_deterministic():
    spec = null_spec(17, n_satellites={Population.DTC: 6, Population.KU_ONLY: 10}, detections_mean=8)
    first, truth_a = generate(spec)
    second, truth_b = generate(spec)
    pd.testing.assert_frame_equal(first.events, second.events)
    assert truth_a == truth_b

    parallel, _ = generate(spec, n_jobs=2)
    pd.testing.assert_frame_equal(first.events, parallel.events)

    other, _ = generate(spec.model_copy(update={"seed": 18}))
    assert not other.events["flux_jy"].equals(first.events["flux_jy"])


def test_generated_catalogue_is_ready_for_analysis(null_synth):
    catalogue, truth = null_synth
    assert catalogue.is_classified and catalogue.is_range_corrected and catalogue.is_tagged
    assert min(catalogue.satellites) == SYNTH_NORAD_BASE
    assert truth.n_satellites == {"DTC": 40, "KuOnly": 120, "V1x": 0, "Unclassified": 0}
    assert truth.n_detections["DTC"] == len(catalogue.analysed().query("population == 'DTC'"))
    assert truth.excess_ratio == 1.0
    assert truth.eclipse_ratio == {}
    assert truth.injector is None and truth.injector_norad_ids == []


def test_fine_rows_average_to_stacked_flux(injector_synth):
    catalogue, _ = injector_synth
    fine_means = catalogue.fine().groupby(["norad_id", "epoch_utc"])["flux_jy"].mean()
    stacked = catalogue.stacked().set_index(["norad_id", "epoch_utc"])["flux_jy"]
    joined = stacked.loc[fine_means.index]
    np.testing.assert_allclose(joined.to_numpy(), fine_means.to_numpy(), rtol=1e-12)
    assert catalogue.fine().groupby(["norad_id", "epoch_utc"]).size().eq(31).all()


def test_injector_assignment(injector_synth):
    catalogue, truth = injector_synth
    assert len(truth.injector_norad_ids) == round(0.55 * 120)
    active = {s.norad_id for s in truth.satellites if s.injector_active}
    assert active <= set(truth.injector_norad_ids)
    assert truth.injector["fine_index"] == 22

    r_values = truth.satellite_r_values()
    tone = [r_values[n] for n in active if n in r_values]
    quiet = [r for n, r in r_values.items() if n not in truth.injector_norad_ids]
    assert np.median(tone) > 1.5
    assert np.median(quiet) == pytest.approx(1.0, abs=0.1)


def test_write_synthetic_round_trip(injector_synth, tmp_path):
    catalogue, truth = injector_synth
    paths = write_synthetic(catalogue, truth, tmp_path)
    assert [p.name for p in paths] == ["detections.csv", "bus_table.csv", "ground_truth.json"]

    stored = json.loads(paths[2].read_text())
    assert stored["injector_norad_ids"] == truth.injector_norad_ids
    assert stored["polarisation_xx"][f"{TARGET_MHZ:.5f}"] == 0.5

    loaded = load_catalogue(paths[0], paths[1])
    assert len(loaded) == len(catalogue)
    assert loaded.provenance.rejects == ()
    assert loaded.provenance.population_counts == catalogue.provenance.population_counts
    assert (loaded.stacked()["fine_channel_index"] == STACKED_INDEX).all()
    np.testing.assert_allclose(loaded.events["s_norm_jy"], catalogue.events["s_norm_jy"], rtol=1e-7)


def test_bus_labels_follow_population():
    spec = injector_spec(3, n_satellites={Population.DTC: 2, Population.KU_ONLY: 2,
                                          Population.V1X: 1, Population.UNCLASSIFIED: 1},
                         flux={p: {"median_jy": 30.0} for p in Population})
    catalogue, truth = generate(spec)
    labels = {s.population: s.bus_label for s in catalogue.satellites.values()}
    assert labels == {Population.DTC: "V2MD", Population.KU_ONLY: "V2M",
                      Population.V1X: "V1.5", Population.UNCLASSIFIED: "V2MO"}
    assert catalogue.provenance.cut_tally["excluded population V1x"] == truth.n_detections["V1x"]


# ------ (2) Oracle agreement ------

def _random_epochs(n, seed, start="2000-01-01", end="2050-12-31"):
    rng = np.random.default_rng(seed)
    lo, hi = pd.Timestamp(start, tz="UTC").value, pd.Timestamp(end, tz="UTC").value
    return pd.DatetimeIndex(pd.to_datetime(rng.integers(lo, hi, n), utc=True))


def _angle_deg(a: EcefVector, b: EcefVector) -> np.ndarray:
    u, v = a.as_array(), b.as_array()
    cosine = np.sum(u * v, axis=-1) / (np.linalg.norm(u, axis=-1) * np.linalg.norm(v, axis=-1))
    return np.degrees(np.arccos(np.clip(cosine, -1.0, 1.0)))


def test_oracle_declination_at_solstice_and_equinox():
    _, solstice_dec, _ = oracle_sun_radec("2024-06-20T20:51:00Z")
    _, equinox_dec, _ = oracle_sun_radec("2024-03-20T03:06:00Z")
    assert float(solstice_dec) == pytest.approx(23.44, abs=0.01)
    assert abs(float(equinox_dec)) < 0.1


def test_production_sun_matches_oracle():
    epochs = _random_epochs(300, seed=1)
    separation = _angle_deg(solar_position_ecef(epochs), oracle_sun(epochs))
    assert separation.max() <= 0.02


def test_production_sidereal_time_matches_oracle():
    epochs = _random_epochs(100, seed=2)
    _, _, gast = oracle_sun_radec(epochs)
    difference = np.mod(np.degrees(gmst_rad(epochs)) - gast + 180.0, 360.0) - 180.0
    assert np.abs(difference).max() < 0.01


def test_shadow_state_matches_oracle_away_from_the_edge():
    rng = np.random.default_rng(5)
    n = 2000
    epochs = _random_epochs(n, seed=6, start="2020-01-01", end="2030-12-31")
    sat = geodetic_to_ecef(GeodeticCoord(rng.uniform(-70.0, 70.0, n), rng.uniform(-180.0, 180.0, n),
                                         rng.uniform(400e3, 600e3, n)))
    tag = illumination_state(sat, solar_position_ecef(epochs))
    oracle = oracle_illuminated(sat, epochs)

    # 0.02 deg of Sun direction moves the shadow axis by under 3 km at these radii
    clear = ~((np.asarray(tag.p_parallel_m) < 0) & (np.abs(np.asarray(tag.p_perp_m) - EARTH_RADIUS_M) < 10e3))
    assert clear.sum() > 0.9 * n
    assert (~np.asarray(tag.illuminated)).sum() > 0
    np.testing.assert_array_equal(np.asarray(tag.illuminated)[clear], np.asarray(oracle)[clear])


def test_shadow_state_agrees_with_oracle_on_random_leo_states():
    rng = np.random.default_rng(11)
    n = 10_000
    epochs = _random_epochs(n, seed=12)
    sat = geodetic_to_ecef(GeodeticCoord(np.degrees(np.arcsin(rng.uniform(-1.0, 1.0, n))),
                                         rng.uniform(-180.0, 180.0, n), rng.uniform(300e3, 2000e3, n)))
    tag = illumination_state(sat, solar_position_ecef(epochs))
    agreement = np.mean(np.asarray(tag.illuminated) == np.asarray(oracle_illuminated(sat, epochs)))
    assert agreement >= 0.99
    assert 0.05 < np.mean(~np.asarray(tag.illuminated)) < 0.6


def test_oracle_shadow_reference_points():
    epoch = "2024-06-20T20:51:00Z"
    sun = oracle_sun(epoch).as_array()
    radius = EARTH_RADIUS_M + 400e3
    behind = EcefVector.from_array(-radius * sun)
    ahead = EcefVector.from_array(radius * sun)
    assert not bool(oracle_illuminated(behind, epoch))
    assert bool(oracle_illuminated(ahead, epoch))
