"""
Synthetic Catalogue Generator - Catalogues with known ground truth

This module provides a seeded generator of detection catalogues whose
population effects are set by a SynthSpec:
- Log-normal flux laws per population with per-satellite scatter
- Pass-structured epochs and az/el tracks over the observatory site,
  tagged with the production geometry
- Optional eclipse multiplier, narrowband fine-bin injector, fixed-index
  bandpass artefact and per-channel polarisation bias
- GroundTruth record and writers for the CSV inputs of the ingest stage
"""

import json
import logging
from dataclasses import asdict, dataclass, field
from datetime import date, timedelta
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from pydantic import BaseModel, Field, field_validator, model_validator

from .catalogue import (ANALYSED_POPULATIONS, DEFAULT_COLUMN_MAP, REFERENCE_RANGE_KM, STACKED_INDEX,
                        BusEntry, BusTable, Catalogue, Population, PolFeed, Provenance,
                        apply_quality_cuts, classify, range_correct_catalogue)
from .fine_channel import N_FINE_BINS, TARGET_CHANNEL_MHZ, TARGET_FINE_INDEX
from .geometry import (DEFAULT_SITE, ObservatorySite, enu_from_azel, enu_to_ecef, illumination_state,
                       solar_position_ecef, tag_catalogue)
from .stats import derive_seed, make_rng

logger = logging.getLogger(__name__)

MEAN_EARTH_RADIUS_KM = 6371.0
PASS_CADENCE_S = 10.0
SYNTH_NORAD_BASE = 70000

POPULATION_BUS_LABELS: Dict[Population, str] = {
    Population.DTC: "V2MD",
    Population.KU_ONLY: "V2M",
    Population.V1X: "V1.5",
    Population.UNCLASSIFIED: "V2MO",
}

DETECTIONS_FILE = "detections.csv"
BUS_TABLE_FILE = "bus_table.csv"
GROUND_TRUTH_FILE = "ground_truth.json"


# --------------------------------------------------
# Generator configuration
# --------------------------------------------------

class FluxLaw(BaseModel):
    """Log-normal law of the range-corrected stacked flux density."""
    median_jy: float = Field(..., gt=0, description="Population median S_norm (Jy)")
    sigma_log: float = Field(1.0, ge=0, description="Detection-level scatter of ln S_norm")
    satellite_sigma_log: float = Field(0.3, ge=0, description="Satellite-level scatter of ln median")


class Injector(BaseModel):
    """Narrowband tone added to fine bins of a fraction of satellites."""
    channel_mhz: float = Field(TARGET_CHANNEL_MHZ, description="Coarse channel carrying the tone")
    fine_index: int = Field(TARGET_FINE_INDEX, ge=0, lt=N_FINE_BINS, description="Centre fine bin")
    amplitude: float = Field(..., gt=0, description="Added flux as a multiple of the detection flux")
    duty_fraction: float = Field(..., ge=0, le=1, description="Fraction of satellites carrying the tone")
    width: Literal[1, 3] = Field(1, description="Number of contiguous bins carrying the tone")


class BandpassArtefact(BaseModel):
    """Multiplicative gain error at one fine index in every channel and satellite."""
    fine_index: int = Field(..., ge=0, lt=N_FINE_BINS)
    gain: float = Field(..., gt=0, description="Multiplier applied to the bin")


class PolarisationBias(BaseModel):
    channel_mhz: float
    xx_fraction: float = Field(..., ge=0, le=1)


def _default_flux() -> Dict[Population, FluxLaw]:
    return {Population.DTC: FluxLaw(median_jy=40.0), Population.KU_ONLY: FluxLaw(median_jy=40.0)}


class SynthSpec(BaseModel):
    """Generator configuration; every default yields a null catalogue."""
    model_config = {"extra": "forbid"}

    seed: int = Field(0, ge=0, description="Master seed")
    n_satellites: Dict[Population, int] = Field(
        default_factory=lambda: {Population.DTC: 60, Population.KU_ONLY: 200},
        description="Satellites per population")
    detections_mean: float = Field(20.0, gt=0, description="Mean stacked detections per satellite")
    detections_min: int = Field(5, ge=1, description="Lower bound on detections per satellite")
    detections_distribution: Literal["poisson", "fixed"] = "poisson"
    epochs_per_pass: int = Field(3, ge=1, description="Consecutive epochs per pass")
    flux: Dict[Population, FluxLaw] = Field(default_factory=_default_flux)
    eclipse_multiplier: Dict[Population, float] = Field(
        default_factory=dict, description="Flux multiplier applied to eclipsed detections")
    channels_mhz: List[float] = Field(
        default_factory=lambda: [150.78125, 161.71875, 200.0, TARGET_CHANNEL_MHZ],
        min_length=1, description="Coarse channels drawn uniformly per pass")
    fine_channels_mhz: List[float] = Field(
        default_factory=lambda: [150.78125, 200.0, TARGET_CHANNEL_MHZ],
        description="Channels whose detections carry the 31 fine rows")
    fine_sigma_log: float = Field(0.2, ge=0, description="Per-bin multiplicative noise")
    injector: Optional[Injector] = None
    bandpass: Optional[BandpassArtefact] = None
    baseline_xx_fraction: float = Field(0.5, ge=0, le=1)
    polarisation_bias: List[PolarisationBias] = Field(default_factory=list)
    altitude_km: Tuple[float, float] = Field((480.0, 570.0), description="Range of shell altitudes")
    min_elevation_deg: float = Field(20.0, gt=0, lt=90)
    observing_start: date = date(2025, 1, 1)
    observing_end: date = date(2025, 3, 31)
    launch_start: date = date(2023, 6, 1)
    launch_end: date = date(2024, 12, 15)

    @field_validator("n_satellites")
    @classmethod
    def _counts_non_negative(cls, value: Dict[Population, int]) -> Dict[Population, int]:
        if any(n < 0 for n in value.values()):
            raise ValueError("Satellite counts must be non-negative")
        return value

    @field_validator("eclipse_multiplier")
    @classmethod
    def _multipliers_positive(cls, value: Dict[Population, float]) -> Dict[Population, float]:
        if any(m <= 0 for m in value.values()):
            raise ValueError("Eclipse multipliers must be positive")
        return value

    @model_validator(mode="after")
    def _consistent(self) -> "SynthSpec":
        missing = [p.value for p, n in self.n_satellites.items() if n > 0 and p not in self.flux]
        if missing:
            raise ValueError(f"No flux law for populations {missing}")
        if self.observing_end < self.observing_start or self.launch_end < self.launch_start:
            raise ValueError("Date ranges must be ordered")
        if self.altitude_km[1] < self.altitude_km[0]:
            raise ValueError("Altitude range must be ordered")
        if self.injector and not any(abs(self.injector.channel_mhz - f) < 1e-6 for f in self.fine_channels_mhz):
            raise ValueError("Injector channel must be one of fine_channels_mhz")
        return self

    def xx_fraction(self, channel_mhz: float) -> float:
        for bias in self.polarisation_bias:
            if abs(bias.channel_mhz - channel_mhz) < 1e-6:
                return bias.xx_fraction
        return self.baseline_xx_fraction


# --------------------------------------------------
# Ground truth
# --------------------------------------------------

@dataclass(frozen=True)
class SatelliteTruth:
    norad_id: int
    population: str
    launch_date: str
    n_detections: int
    log_offset: float
    median_s_norm: float
    injector_active: bool
    r_value: Optional[float]


@dataclass(frozen=True)
class GroundTruth:
    """
    Effects injected into a synthetic catalogue and their realised values.

    ``excess_ratio`` and ``eclipse_ratio`` are the ratios implied by the
    flux laws (DTC/Ku-only median, illuminated/eclipsed median);
    ``realised`` holds the same quantities measured on the draw.
    """
    seed: int
    n_satellites: Dict[str, int]
    n_detections: Dict[str, int]
    excess_ratio: Optional[float]
    eclipse_ratio: Dict[str, float]
    injector: Optional[Dict]
    injector_norad_ids: List[int]
    bandpass: Optional[Dict]
    polarisation_xx: Dict[str, float]
    realised: Dict[str, Optional[float]]
    satellites: List[SatelliteTruth] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return asdict(self)

    def satellite_r_values(self) -> Dict[int, float]:
        return {s.norad_id: s.r_value for s in self.satellites if s.r_value is not None}


# --------------------------------------------------
# Generation
# --------------------------------------------------

def slant_range_km(altitude_km, elevation_deg):
    """Line-of-sight distance to a spherical shell at the given elevation."""
    e = np.radians(elevation_deg)
    r = MEAN_EARTH_RADIUS_KM
    return np.sqrt((r + altitude_km) ** 2 - (r * np.cos(e)) ** 2) - r * np.sin(e)


def _n_detections(spec: SynthSpec, rng: np.random.Generator) -> int:
    if spec.detections_distribution == "fixed":
        return max(spec.detections_min, int(round(spec.detections_mean)))
    return max(spec.detections_min, int(rng.poisson(spec.detections_mean)))


def _satellite_rows(spec: SynthSpec, index: int, norad: int, population: Population,
                    injector_active: bool, site: ObservatorySite) -> Tuple[pd.DataFrame, SatelliteTruth]:
    """Stacked and fine rows of one satellite drawn from its own stream."""
    rng = make_rng(derive_seed(spec.seed, "synth/sat", index))
    law = spec.flux[population]

    launch_span = (spec.launch_end - spec.launch_start).days
    launch = spec.launch_start + timedelta(days=int(rng.integers(0, launch_span + 1)))
    altitude = rng.uniform(*spec.altitude_km)
    log_offset = float(rng.normal(0.0, law.satellite_sigma_log))

    n_det = _n_detections(spec, rng)
    n_pass = int(np.ceil(n_det / spec.epochs_per_pass))
    start = pd.Timestamp(spec.observing_start, tz="UTC")
    span_s = (pd.Timestamp(spec.observing_end, tz="UTC") - start).total_seconds() + 86400.0

    pass_start = np.sort(rng.uniform(0.0, span_s - spec.epochs_per_pass * PASS_CADENCE_S, n_pass))
    pass_channel = rng.choice(np.asarray(spec.channels_mhz, dtype=float), n_pass)
    pass_azimuth = rng.uniform(0.0, 360.0, n_pass)
    pass_elevation = rng.uniform(spec.min_elevation_deg, 85.0, n_pass)

    step = np.arange(n_det) % spec.epochs_per_pass
    pass_id = np.arange(n_det) // spec.epochs_per_pass
    offsets_s = pass_start[pass_id] + step * PASS_CADENCE_S
    epochs = start + pd.to_timedelta(np.round(offsets_s), unit="s")
    azimuth = np.mod(pass_azimuth[pass_id] + 0.5 * step, 360.0)
    elevation = np.clip(pass_elevation[pass_id] + 0.3 * step, spec.min_elevation_deg, 89.5)
    channel = pass_channel[pass_id]
    range_km = slant_range_km(altitude, elevation)

    sat = enu_to_ecef(enu_from_azel(azimuth, elevation, range_km * 1000.0), site)
    lit = np.asarray(illumination_state(sat, solar_position_ecef(pd.DatetimeIndex(epochs))).illuminated,
                     dtype=bool)

    log_median = np.log(law.median_jy) + log_offset
    s_norm = np.exp(rng.normal(log_median, law.sigma_log, n_det))
    multiplier = spec.eclipse_multiplier.get(population, 1.0)
    s_norm = np.where(lit, s_norm, s_norm * multiplier)

    xx_prob = np.array([spec.xx_fraction(c) for c in channel])
    pol = np.where(rng.uniform(size=n_det) < xx_prob, PolFeed.XX.value, PolFeed.YY.value)

    has_fine = np.isin(np.round(channel, 6), np.round(np.asarray(spec.fine_channels_mhz, dtype=float), 6))
    noise = np.exp(rng.normal(-0.5 * spec.fine_sigma_log ** 2, spec.fine_sigma_log, (n_det, N_FINE_BINS)))
    bins = s_norm[:, None] * noise
    if spec.bandpass is not None:
        bins[:, spec.bandpass.fine_index] *= spec.bandpass.gain
    injector = spec.injector
    tone_rows = np.zeros(n_det, dtype=bool)
    if injector is not None and injector_active:
        tone_rows = np.abs(channel - injector.channel_mhz) < 1e-6
        half = injector.width // 2
        for index in range(injector.fine_index - half, injector.fine_index + half + 1):
            if 0 <= index < N_FINE_BINS:
                bins[tone_rows, index] += injector.amplitude * s_norm[tone_rows]
    stacked = np.where(has_fine, bins.mean(axis=1), s_norm)

    observed_scale = (REFERENCE_RANGE_KM / range_km) ** 2
    base = pd.DataFrame({
        "norad_id": norad, "epoch_utc": epochs, "freq_mhz": channel, "pol_feed": pol,
        "azimuth_deg": azimuth, "elevation_deg": elevation, "range_km": range_km,
    })
    frames = [base.assign(fine_channel_index=STACKED_INDEX, flux_jy=stacked * observed_scale)]
    fine_idx = np.flatnonzero(has_fine)
    if fine_idx.size:
        fine = base.iloc[np.repeat(fine_idx, N_FINE_BINS)].reset_index(drop=True)
        fine["fine_channel_index"] = np.tile(np.arange(N_FINE_BINS), fine_idx.size)
        fine["flux_jy"] = (bins[fine_idx] * observed_scale[fine_idx, None]).ravel()
        frames.append(fine)

    r_channel = injector.channel_mhz if injector is not None else TARGET_CHANNEL_MHZ
    r_index = injector.fine_index if injector is not None else TARGET_FINE_INDEX
    r_rows = np.flatnonzero(has_fine & (np.abs(channel - r_channel) < 1e-6))
    r_value = None
    if r_rows.size:
        raw = bins[r_rows] * observed_scale[r_rows, None]
        others = [i for i in range(N_FINE_BINS) if abs(i - r_index) > 1]
        r_value = float(raw[:, r_index].mean() / raw[:, others].mean())

    truth = SatelliteTruth(
        norad_id=norad, population=population.value, launch_date=launch.isoformat(),
        n_detections=n_det, log_offset=log_offset,
        median_s_norm=float(np.median(stacked)),
        injector_active=bool(injector_active and tone_rows.any()), r_value=r_value,
    )
    return pd.concat(frames, ignore_index=True), truth


def _injector_assignment(spec: SynthSpec, populations: List[Population]) -> np.ndarray:
    active = np.zeros(len(populations), dtype=bool)
    if spec.injector is None:
        return active
    eligible = np.flatnonzero([p in ANALYSED_POPULATIONS for p in populations])
    n_active = int(round(spec.injector.duty_fraction * eligible.size))
    chosen = make_rng(derive_seed(spec.seed, "synth/injector")).permutation(eligible)[:n_active]
    active[chosen] = True
    return active


def generate(spec: SynthSpec, site: ObservatorySite = DEFAULT_SITE,
             n_jobs: int = 1) -> Tuple[Catalogue, GroundTruth]:
    """
    Draw a synthetic catalogue and its ground truth.

    Each satellite uses its own derived stream, so the output does not
    depend on n_jobs.

    Args:
        spec: generator configuration
        site: observatory used for the az/el tracks and tagging
        n_jobs: joblib workers (satellites are generated independently)

    Returns:
        (catalogue, truth); the catalogue is classified, cut, range-corrected
        and geometry-tagged.
    """
    populations: List[Population] = [p for p in Population for _ in range(spec.n_satellites.get(p, 0))]
    if not populations:
        raise ValueError("SynthSpec has no satellites")
    norads = [SYNTH_NORAD_BASE + i for i in range(len(populations))]
    active = _injector_assignment(spec, populations)

    tasks = [(i, norads[i], populations[i], bool(active[i])) for i in range(len(populations))]
    if n_jobs == 1:
        results = [_satellite_rows(spec, i, n, p, a, site) for i, n, p, a in tasks]
    else:
        results = Parallel(n_jobs=n_jobs)(
            delayed(_satellite_rows)(spec, i, n, p, a, site) for i, n, p, a in tasks)

    events = pd.concat([r[0] for r in results], ignore_index=True)
    events = events.sort_values(["norad_id", "epoch_utc", "freq_mhz", "fine_channel_index"],
                                kind="mergesort").reset_index(drop=True)
    truths = [r[1] for r in results]

    bus_table = BusTable(entries={
        t.norad_id: BusEntry(bus_label=POPULATION_BUS_LABELS[Population(t.population)],
                             launch_date=date.fromisoformat(t.launch_date))
        for t in truths
    })
    catalogue = Catalogue(events=events, provenance=Provenance(n_rows_read=len(events)))
    catalogue = classify(catalogue, bus_table)
    catalogue = apply_quality_cuts(catalogue)
    catalogue = range_correct_catalogue(catalogue)
    catalogue = tag_catalogue(catalogue, site)

    truth = _ground_truth(spec, catalogue, truths, norads, active)
    logger.info(f"Generated {len(catalogue.stacked())} stacked detections from {len(norads)} satellites "
                f"(seed {spec.seed})")
    return catalogue, truth


def _median_ratio(numerator: np.ndarray, denominator: np.ndarray) -> Optional[float]:
    if numerator.size == 0 or denominator.size == 0:
        return None
    return float(np.median(numerator) / np.median(denominator))


def _ground_truth(spec: SynthSpec, catalogue: Catalogue, truths: List[SatelliteTruth],
                  norads: List[int], active: np.ndarray) -> GroundTruth:
    stacked = catalogue.stacked()
    dtc_law = spec.flux.get(Population.DTC)
    ku_law = spec.flux.get(Population.KU_ONLY)
    excess = dtc_law.median_jy / ku_law.median_jy if dtc_law and ku_law else None

    realised: Dict[str, Optional[float]] = {}
    sat_medians = {p: np.array([t.median_s_norm for t in truths if t.population == p.value])
                   for p in ANALYSED_POPULATIONS}
    realised["excess_ratio"] = _median_ratio(sat_medians[Population.DTC], sat_medians[Population.KU_ONLY])
    for population in ANALYSED_POPULATIONS:
        subset = stacked[stacked["population"] == population.value]
        lit = subset["illuminated"].to_numpy(dtype=bool)
        values = subset["s_norm_jy"].to_numpy(dtype=float)
        realised[f"eclipse_ratio_{population.value}"] = _median_ratio(values[lit], values[~lit])
        realised[f"frac_illuminated_{population.value}"] = float(lit.mean()) if lit.size else None

    return GroundTruth(
        seed=spec.seed,
        n_satellites={p.value: int(spec.n_satellites.get(p, 0)) for p in Population},
        n_detections={p.value: int((stacked["population"] == p.value).sum()) for p in Population},
        excess_ratio=excess,
        eclipse_ratio={p.value: 1.0 / m for p, m in spec.eclipse_multiplier.items()},
        injector=spec.injector.model_dump() if spec.injector else None,
        injector_norad_ids=[n for n, a in zip(norads, active) if a],
        bandpass=spec.bandpass.model_dump() if spec.bandpass else None,
        polarisation_xx={f"{c:.5f}": spec.xx_fraction(c) for c in spec.channels_mhz},
        realised=realised,
        satellites=truths,
    )


# --------------------------------------------------
# Writers
# --------------------------------------------------

def write_synthetic(catalogue: Catalogue, truth: GroundTruth,
                    directory: Union[str, Path]) -> List[Path]:
    """
    Write detections.csv, bus_table.csv and ground_truth.json.

    The detection CSV uses the default column map, so the ingest stage reads
    it without configuration.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    events = catalogue.events
    detections = pd.DataFrame({
        DEFAULT_COLUMN_MAP["norad_id"]: events["norad_id"],
        DEFAULT_COLUMN_MAP["utc"]: events["epoch_utc"].dt.strftime("%Y-%m-%dT%H:%M:%SZ"),
        DEFAULT_COLUMN_MAP["freq_mhz"]: events["freq_mhz"],
        DEFAULT_COLUMN_MAP["fine_channel_index"]: events["fine_channel_index"],
        DEFAULT_COLUMN_MAP["pol"]: events["pol_feed"],
        DEFAULT_COLUMN_MAP["flux_jy"]: events["flux_jy"],
        DEFAULT_COLUMN_MAP["azimuth_deg"]: events["azimuth_deg"],
        DEFAULT_COLUMN_MAP["elevation_deg"]: events["elevation_deg"],
        DEFAULT_COLUMN_MAP["range_km"]: events["range_km"],
    })
    bus = pd.DataFrame([
        {"norad_id": s.norad_id, "bus": s.bus_label or "",
         "launch_date": s.launch_date.isoformat() if s.launch_date else ""}
        for s in catalogue.satellites.values()
    ], columns=["norad_id", "bus", "launch_date"])

    paths = [directory / DETECTIONS_FILE, directory / BUS_TABLE_FILE, directory / GROUND_TRUTH_FILE]
    detections.to_csv(paths[0], index=False, float_format="%.9g")
    bus.to_csv(paths[1], index=False)
    paths[2].write_text(json.dumps(truth.to_dict(), indent=2, sort_keys=True) + "\n")
    logger.info(f"Wrote synthetic inputs to {directory}")
    return paths
