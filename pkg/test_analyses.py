"""
Analysis test-suite

This test suite validates the analyses built on the catalogue:
1. DTC excess under the four reductions and per channel
2. Per-channel polarisation test and channel profile
3. Fine-channel scan, cross-channel control and the mechanism tests T1-T3
4. Eclipse ratios, interactions and the time-averaged factor
5. Dynamic spectrum, spectral occupancy and the thermal estimate

Multi-seed calibration checks carry the "slow" marker.
"""

from dataclasses import replace
from datetime import date

import numpy as np
import pandas as pd
import pytest

from conftest import CONTROL_MHZ, TARGET_MHZ, injector_spec, null_spec, reversal_spec
from uemr_core.catalogue import Catalogue, EVENT_COLUMNS, Population, range_correct_catalogue
from uemr_core.eclipse import eclipse_analysis, time_avg_factor
from uemr_core.errors import AnalysisError
from uemr_core.excess import Reduction, dtc_excess
from uemr_core.fine_channel import (bonferroni_thresholds, cross_channel_control, fine_bin_centre_mhz,
                                    fine_channel_scan)
from uemr_core.mechanism import (CANDIDATE_FUNDAMENTALS_KHZ, CRYSTAL_FUNDAMENTALS_KHZ, HALF_FINE_BIN_KHZ,
                                 TARGET_CENTROID_MHZ, mechanism_tests, t1_harmonic_coincidence,
                                 t2_adjacent_bin, t3_satellite_ratios)
from uemr_core.polarisation import BaselineMode, channel_polarisation_profile, polarisation_anomaly
from uemr_core.spectra import dynamic_spectrum, segment_passes, spectral_occupancy, thermal_flux_estimate
from uemr_core.synth import BandpassArtefact, FluxLaw, PolarisationBias, generate

B = 200


# ------ (1) Excess ------

def test_excess_reports_all_reductions(null_synth):
    catalogue, _ = null_synth
    report = dtc_excess(catalogue, n_resamples=B, master_seed=3)
    assert set(report.reductions) == set(Reduction)
    assert report.reduction is Reduction.NORM_PER_SAT
    assert report.ratio == report.reductions[Reduction.NORM_PER_SAT].ratio
    per_sat = report.reductions[Reduction.NORM_PER_SAT]
    assert (per_sat.n_dtc, per_sat.n_ku) == (40, 120)
    assert report.reductions[Reduction.RAW_PER_DET].n_dtc > per_sat.n_dtc
    assert [row.freq_mhz for row in report.per_channel] == sorted(catalogue.channels())
    for row in report.per_channel:
        assert row.n_dtc >= 20
        assert row.ratio_ci_low <= row.ratio <= row.ratio_ci_high
        assert 0 <= row.ks_p <= 1


def test_excess_is_seed_deterministic(null_synth):
    catalogue, _ = null_synth
    first = dtc_excess(catalogue, n_resamples=B, master_seed=8, channel_intervals=False)
    second = dtc_excess(catalogue, n_resamples=B, master_seed=8, channel_intervals=False)
    assert first.to_dict() == second.to_dict()


def test_excess_detects_brighter_dtc_population():
    spec = null_spec(21, flux={Population.DTC: FluxLaw(median_jy=80.0), Population.KU_ONLY: FluxLaw(median_jy=40.0)},
                     fine_channels_mhz=[])
    catalogue, truth = generate(spec)
    report = dtc_excess(catalogue, n_resamples=B, master_seed=1, channel_intervals=False)
    assert truth.excess_ratio == 2.0
    assert report.ratio.excludes(1.0)
    assert 1.5 < report.ratio.estimate < 2.7
    assert report.mwu.cliffs_delta > 0.3


def test_excess_ratio_ignores_global_flux_scale(null_synth):
    catalogue, _ = null_synth
    events = catalogue.events.copy()
    events[["flux_jy", "s_norm_jy"]] *= 3.0
    base = dtc_excess(catalogue, n_resamples=B, master_seed=2, channel_intervals=False)
    scaled = dtc_excess(catalogue.with_events(events), n_resamples=B, master_seed=2, channel_intervals=False)
    assert scaled.ratio.estimate == pytest.approx(base.ratio.estimate, rel=1e-12)
    assert scaled.ratio.ci_low == pytest.approx(base.ratio.ci_low, rel=1e-12)
    assert scaled.mwu.p_two_sided == pytest.approx(base.mwu.p_two_sided)


def test_excess_minimum_channel_count(null_synth):
    catalogue, _ = null_synth
    report = dtc_excess(catalogue, n_resamples=B, min_dtc_per_channel=10_000, channel_intervals=False)
    assert report.per_channel == []


def test_excess_input_checks(null_synth):
    catalogue, _ = null_synth
    with pytest.raises(AnalysisError):
        dtc_excess(catalogue.with_events(catalogue.events.drop(columns=["s_norm_jy"])), n_resamples=B)
    only_dtc, _ = generate(null_spec(2, n_satellites={Population.DTC: 5}, fine_channels_mhz=[]))
    with pytest.raises(AnalysisError):
        dtc_excess(only_dtc, n_resamples=B)


@pytest.mark.slow
def test_null_excess_interval_covers_one():
    covered = 0
    seeds = range(100)
    for seed in seeds:
        spec = null_spec(1000 + seed, n_satellites={Population.DTC: 40, Population.KU_ONLY: 120},
                         detections_mean=12, fine_channels_mhz=[])
        catalogue, _ = generate(spec)
        report = dtc_excess(catalogue, n_resamples=B, master_seed=seed, channel_intervals=False)
        covered += not report.ratio.excludes(1.0)
    assert covered >= 90


# ------ (2) Polarisation ------

@pytest.fixture(scope="module")
def biased_catalogue():
    spec = null_spec(31, polarisation_bias=[PolarisationBias(channel_mhz=TARGET_MHZ, xx_fraction=0.8)],
                     fine_channels_mhz=[])
    return generate(spec)


def test_polarisation_flags_biased_channel(biased_catalogue):
    catalogue, truth = biased_catalogue
    report = polarisation_anomaly(catalogue)
    target = report.channel(TARGET_MHZ)
    assert target.bh_significant
    assert target.deviation > 0
    assert target.wilson_low < truth.polarisation_xx[f"{TARGET_MHZ:.5f}"] < target.wilson_high
    assert target.log10_p < -3
    for result in report.channels:
        if result.freq_mhz != target.freq_mhz:
            assert result.deviation < 0
            assert result.baseline_used == report.pooled_baseline


def test_polarisation_leave_one_out_baseline(biased_catalogue):
    catalogue, _ = biased_catalogue
    report = polarisation_anomaly(catalogue, baseline_mode=BaselineMode.LEAVE_ONE_OUT)
    target = report.channel(TARGET_MHZ)
    assert target.baseline_used < report.pooled_baseline
    assert target.bh_significant


def test_polarisation_unknown_channel_is_noted(biased_catalogue):
    catalogue, _ = biased_catalogue
    report = polarisation_anomaly(catalogue, channels=[TARGET_MHZ, 999.0])
    assert len(report.channels) == 1
    assert any("999.000" in note for note in report.notes)
    with pytest.raises(KeyError):
        report.channel(999.0)


def test_polarisation_profile(biased_catalogue):
    catalogue, _ = biased_catalogue
    profile = channel_polarisation_profile(catalogue, TARGET_MHZ, min_det=2)
    assert set(profile.per_population) == {"DTC", "KuOnly"}
    assert profile.per_population["DTC"]["f_xx"] > 0.6
    assert all(row["n"] >= 2 for row in profile.per_satellite)
    with pytest.raises(AnalysisError):
        channel_polarisation_profile(catalogue, 999.0)


@pytest.mark.slow
def test_unpolarised_null_rarely_flags():
    clean = 0
    for seed in range(100):
        spec = null_spec(2000 + seed, n_satellites={Population.DTC: 20, Population.KU_ONLY: 40},
                         detections_mean=10, fine_channels_mhz=[])
        catalogue, _ = generate(spec)
        clean += polarisation_anomaly(catalogue).n_flagged == 0
    assert clean >= 90


# ------ (3) Fine channel and mechanism ------

def test_bonferroni_thresholds():
    t_threshold, normal_threshold = bonferroni_thresholds(31, 0.05)
    assert normal_threshold == pytest.approx(3.155, abs=0.01)
    assert t_threshold == pytest.approx(3.48, abs=0.03)
    assert t_threshold > normal_threshold


def test_fine_bin_centre():
    assert fine_bin_centre_mhz(TARGET_MHZ, 22) == pytest.approx(230.62744140625)
    assert TARGET_CENTROID_MHZ == pytest.approx(230.62744140625)
    assert HALF_FINE_BIN_KHZ == pytest.approx(12.20703125)


def test_fine_scan_finds_injected_tone(injector_synth):
    catalogue, _ = injector_synth
    report = fine_channel_scan(catalogue, TARGET_MHZ)
    assert report.target_index == 22
    assert len(report.per_bin) == 31
    assert report.z_target > report.bonferroni_threshold
    assert report.max_abs_z == pytest.approx(abs(report.z_target))
    assert report.population_target_ratio["DTC"] > 1.2

    control = cross_channel_control(catalogue, [CONTROL_MHZ])
    assert abs(control[0].z) < report.bonferroni_threshold


def test_fine_scan_z_ignores_constant_offset(injector_synth):
    catalogue, _ = injector_synth
    events = catalogue.events.copy()
    events.loc[events["fine_channel_index"] < 31, "flux_jy"] += 5.0
    base = fine_channel_scan(catalogue, TARGET_MHZ)
    shifted = fine_channel_scan(catalogue.with_events(events), TARGET_MHZ)
    assert shifted.z_target == pytest.approx(base.z_target, rel=1e-9)
    assert shifted.inter_bin_mu == pytest.approx(base.inter_bin_mu + 5.0)


def test_fine_scan_input_checks(injector_synth):
    catalogue, _ = injector_synth
    with pytest.raises(ValueError):
        fine_channel_scan(catalogue, TARGET_MHZ, target_index=31)
    with pytest.raises(AnalysisError):
        fine_channel_scan(catalogue, 150.78125)
    with pytest.raises(AnalysisError):
        cross_channel_control(catalogue, [150.78125])


def test_bandpass_artefact_shows_on_every_channel():
    spec = injector_spec(41, injector=None, bandpass=BandpassArtefact(fine_index=22, gain=1.5))
    catalogue, _ = generate(spec)
    scan = fine_channel_scan(catalogue, TARGET_MHZ)
    control = cross_channel_control(catalogue, [CONTROL_MHZ])
    assert scan.z_target > scan.bonferroni_threshold
    assert control[0].z > scan.bonferroni_threshold
    t3 = t3_satellite_ratios(catalogue)
    assert t3.median_r == pytest.approx(1.5, abs=0.1)
    assert t3.frac_over_1_05 > 0.9


@pytest.mark.slow
def test_fine_null_stays_below_threshold():
    passed = 0
    for seed in range(100):
        spec = null_spec(3000 + seed, n_satellites={Population.DTC: 20, Population.KU_ONLY: 40},
                         detections_mean=10, channels_mhz=[TARGET_MHZ], fine_channels_mhz=[TARGET_MHZ])
        catalogue, _ = generate(spec)
        report = fine_channel_scan(catalogue, TARGET_MHZ)
        passed += report.max_abs_z < report.bonferroni_threshold
    assert passed >= 85


def test_t1_candidate_fundamentals():
    result = t1_harmonic_coincidence(CANDIDATE_FUNDAMENTALS_KHZ)
    assert len(result.matches) == 14
    assert result.observed_matches == 5
    assert result.expected_chance == pytest.approx(5.7356, abs=0.01)
    assert result.dedup_expected == pytest.approx(5.08, abs=0.02)
    assert result.dedup_observed <= result.observed_matches


def test_t1_expected_chance_is_order_free_and_additive():
    fundamentals = list(CANDIDATE_FUNDAMENTALS_KHZ)
    whole = t1_harmonic_coincidence(fundamentals).expected_chance
    assert t1_harmonic_coincidence(fundamentals[::-1]).expected_chance == pytest.approx(whole)
    head = t1_harmonic_coincidence(fundamentals[:6]).expected_chance
    tail = t1_harmonic_coincidence(fundamentals[6:]).expected_chance
    assert head + tail == pytest.approx(whole)


def test_t1_crystal_fundamentals():
    result = t1_harmonic_coincidence(CRYSTAL_FUNDAMENTALS_KHZ)
    matched = [m for m in result.matches if m.matched]
    assert len(matched) == 1
    assert matched[0].fundamental_khz == pytest.approx(32.768)
    assert matched[0].best_n == 7038


def test_t1_single_fundamental_residual():
    match = t1_harmonic_coincidence([36.66]).matches[0]
    assert match.best_n == 6291
    assert match.residual_khz == pytest.approx(0.62, abs=0.01)
    assert match.matched
    with pytest.raises(ValueError):
        t1_harmonic_coincidence([36.66], tol_khz=0.0)


def test_mechanism_without_catalogue():
    report = mechanism_tests(None)
    assert report.t2 is None and report.t3 is None
    assert report.notes == ["No catalogue supplied: T2 and T3 skipped"]
    assert report.t1_crystal.observed_matches == 1


def test_t2_and_t3_on_injected_tone(injector_synth):
    catalogue, truth = injector_synth
    t2 = t2_adjacent_bin(catalogue)
    assert t2.n_bright >= 20
    assert t2.z_target > 3
    assert t2.z_below < 3 and t2.z_above < 3

    t3 = t3_satellite_ratios(catalogue)
    assert t3.top_bottom_ratio > 1.5
    assert t3.n_over_1_05 > 0
    expected = truth.satellite_r_values()
    for row in t3.ratios:
        assert row["ratio"] == pytest.approx(expected[row["norad_id"]], rel=1e-9)


def test_t3_needs_enough_satellites(injector_synth):
    catalogue, _ = injector_synth
    with pytest.raises(ValueError):
        t3_satellite_ratios(catalogue, min_det=1)
    with pytest.raises(AnalysisError):
        t3_satellite_ratios(catalogue, min_det=10_000)


# ------ (4) Eclipse ------

def test_time_avg_factor():
    assert time_avg_factor(7686 / 10180, 0.465) == pytest.approx(1.2819, abs=1e-4)
    assert time_avg_factor(0.3, 1.0) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        time_avg_factor(0.5, 0.0)


def test_eclipse_reversal(reversal_synth):
    catalogue, truth = reversal_synth
    report = eclipse_analysis(catalogue, n_resamples=B, master_seed=4)
    assert set(report.populations) == {"Pooled", "DTC", "KuOnly", "MatchedKu"}

    dtc = report.populations["DTC"]
    ku = report.populations["KuOnly"]
    assert dtc.detection.ci_high < 1.0
    assert ku.detection.ci_low > 1.0
    assert dtc.satellite.ci_high < 1.0
    assert truth.eclipse_ratio["DTC"] == pytest.approx(1 / 2.15)
    assert 0.3 < dtc.satellite.estimate < 0.7
    assert dtc.counts.total == len(catalogue.analysed().query("population == 'DTC'"))

    assert report.interaction.p_two_sided < 0.01
    assert report.interaction.ratio_of_ratios.estimate < 1.0
    assert report.time_avg_factor == pytest.approx(
        time_avg_factor(dtc.counts.frac_illuminated, dtc.detection.estimate))
    assert report.strata
    assert {s.dimension for s in report.strata} <= {"altitude_km", "latitude_deg", "freq_mhz"}
    assert report.per_satellite_summary["DTC"].median.estimate < 1.0

    pooled = report.populations["Pooled"].detection.estimate
    assert dtc.detection.estimate < pooled < ku.detection.estimate


def test_eclipse_population_without_eclipsed_detections(reversal_synth):
    catalogue, _ = reversal_synth
    events = catalogue.events.copy()
    events.loc[events["population"] == "KuOnly", "illuminated"] = True
    report = eclipse_analysis(catalogue.with_events(events), n_resamples=B, include_strata=False)
    assert report.populations["KuOnly"].detection is None
    assert report.populations["KuOnly"].note == "no eclipsed detections"
    assert report.interaction is None
    assert any("Interaction DTC vs KuOnly skipped" in note for note in report.notes)
    assert report.populations["DTC"].detection is not None


def test_eclipse_small_matched_control_is_reported_not_fatal(reversal_synth):
    catalogue, _ = reversal_synth
    ku_ids = sorted(n for n, s in catalogue.satellites.items() if s.population is Population.KU_ONLY)
    lit_id, dark_id = ku_ids[:2]
    satellites = {n: replace(s, launch_date=date(2024, 5, 1) if n in (lit_id, dark_id) else date(2023, 6, 1))
                  for n, s in catalogue.satellites.items()}
    events = catalogue.events.copy()
    events.loc[events["norad_id"] == lit_id, "illuminated"] = True
    events.loc[events["norad_id"] == dark_id, "illuminated"] = False

    report = eclipse_analysis(catalogue.with_events(events, satellites=satellites),
                              n_resamples=B, include_strata=False)
    matched = report.populations["MatchedKu"]
    assert matched.n_satellites == 2
    assert matched.detection is not None
    assert matched.satellite is None
    assert matched.note.startswith("satellite bootstrap undefined")
    assert report.matched_interaction is None
    assert report.interaction is not None
    assert all(report.populations[name].satellite is not None for name in ("Pooled", "DTC", "KuOnly"))
    assert "MatchedKu" in report.to_dict()["populations"]


def test_eclipse_needs_tags(null_synth):
    catalogue, _ = null_synth
    with pytest.raises(AnalysisError):
        eclipse_analysis(catalogue.with_events(catalogue.events.drop(columns=["illuminated"])), n_resamples=B)


@pytest.mark.slow
def test_eclipse_reversal_calibration():
    dtc_below = ku_above = covered = 0
    seeds = range(50)
    for seed in seeds:
        catalogue, truth = generate(reversal_spec(4000 + seed))
        report = eclipse_analysis(catalogue, n_resamples=B, master_seed=seed, include_strata=False)
        dtc = report.populations["DTC"]
        dtc_below += dtc.detection.ci_high < 1.0
        ku_above += report.populations["KuOnly"].detection.ci_low > 1.0
        covered += dtc.satellite.ci_low <= truth.eclipse_ratio["DTC"] <= dtc.satellite.ci_high
    assert dtc_below >= 45
    assert ku_above >= 45
    assert covered >= 45


# ------ (5) Spectra and thermal ------

def _pass_catalogue():
    start = pd.Timestamp("2025-02-01T10:00:00Z")
    rows = []
    for offset, level in ((0, 1.0), (10, 1.0), (1000, 3.0), (1010, 3.0)):
        for index in range(31):
            if offset == 1010 and index == 7:
                continue
            rows.append({"norad_id": 5, "epoch_utc": start + pd.Timedelta(seconds=offset),
                         "freq_mhz": TARGET_MHZ, "fine_channel_index": index, "pol_feed": "XX",
                         "flux_jy": level, "azimuth_deg": 10.0, "elevation_deg": 40.0 + offset / 100,
                         "range_km": 1000.0})
    return range_correct_catalogue(Catalogue(events=pd.DataFrame(rows, columns=EVENT_COLUMNS)))


def test_segment_passes():
    epochs = pd.Series(pd.to_datetime(["2025-01-01T00:00:00Z", "2025-01-01T00:00:30Z",
                                       "2025-01-01T00:05:00Z", "2025-01-01T00:05:10Z"]))
    assert segment_passes(epochs).tolist() == [0, 0, 1, 1]


def test_dynamic_spectrum_selects_brightest_pass():
    spectrum = dynamic_spectrum(_pass_catalogue(), 5, TARGET_MHZ)
    assert spectrum.n_passes == 2
    assert spectrum.pass_index == 1
    assert spectrum.duration_s == 10.0
    assert spectrum.integrated_s_norm == pytest.approx(3.0 * 61)
    assert len(spectrum.matrix) == 2 and len(spectrum.matrix[0]) == 31
    assert spectrum.matrix[1][7] == 0.0
    assert spectrum.time_marginal == pytest.approx([93.0, 90.0])
    assert spectrum.frequency_marginal[7] == pytest.approx(3.0)
    assert spectrum.elevation_deg == pytest.approx([50.0, 50.1])
    assert list(spectrum.to_frame().columns[:2]) == ["epoch_utc", "bin_0"]


def test_dynamic_spectrum_on_synthetic_satellite(injector_synth):
    catalogue, _ = injector_synth
    first = catalogue.fine().iloc[0]
    spectrum = dynamic_spectrum(catalogue, int(first["norad_id"]), float(first["freq_mhz"]))
    matrix = np.asarray(spectrum.matrix)
    assert matrix.shape[1] == 31
    np.testing.assert_allclose(matrix.sum(axis=1), spectrum.time_marginal)
    with pytest.raises(AnalysisError):
        dynamic_spectrum(catalogue, 1, TARGET_MHZ)
    uncorrected = catalogue.with_events(catalogue.events.drop(columns=["s_norm_jy"]))
    with pytest.raises(AnalysisError, match="range-corrected"):
        dynamic_spectrum(uncorrected, int(first["norad_id"]), float(first["freq_mhz"]))


def test_spectral_occupancy(biased_catalogue):
    catalogue, _ = biased_catalogue
    polarisation = polarisation_anomaly(catalogue)
    report = spectral_occupancy(catalogue, polarisation.channels)
    assert report.n_detections == len(catalogue.analysed())
    assert sum(c["share"] for c in report.channels) == pytest.approx(1.0)
    assert report.top4_share == pytest.approx(1.0)
    regions = {r["region"]: r for r in report.regions}
    assert regions["low"]["n_channels"] == 0
    assert regions["mid"]["n_channels"] == 2
    assert regions["high"]["n_channels"] == 2
    assert sum(r["n_bh_flagged"] for r in report.regions) == polarisation.n_flagged


def test_thermal_flux_estimate():
    assert thermal_flux_estimate(0.3, 300.0, 100.0, 1.3, 1e6) == pytest.approx(1.47e-5, rel=0.01)
    with pytest.raises(ValueError):
        thermal_flux_estimate(0.0, 300.0, 100.0, 1.3, 1e6)
