"""
Eclipse Module - Illuminated versus eclipsed flux

This module compares range-corrected flux of sunlit and Earth-shadowed
detections:
- Detection-level and satellite-level (cluster) bootstrap ratios per population
- DTC versus Ku-only interaction test, and against a launch-matched Ku-only control
- Altitude, latitude and frequency strata
- Per-satellite ratios and their distribution
- Time-averaged flux factor
- Optional terminator-buffer sensitivity re-run
"""

import logging
from dataclasses import asdict, dataclass, field
from datetime import date
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from .catalogue import Catalogue, Population
from .errors import AnalysisError
from .stats import (DEFAULT_RESAMPLES, InteractionResult, RatioWithCI, ResampleUnit, bootstrap_median,
                    bootstrap_median_ratio, cluster_bootstrap_ratio, derive_seed, interaction_test)

logger = logging.getLogger(__name__)

POOLED = "Pooled"
MATCHED_KU = "MatchedKu"
MATCHED_LAUNCH_WINDOW = (date(2024, 1, 3), date(2024, 10, 18))
ALTITUDE_BIN_START_KM = 300.0
ALTITUDE_BIN_WIDTH_KM = 56.0
MIN_PER_STATE_ALTITUDE = 5
LATITUDE_BINS = 5
MIN_PER_STATE_LATITUDE = 5
MIN_PER_STATE_FREQUENCY = 30
MIN_PER_STATE_SATELLITE = 5


@dataclass(frozen=True)
class StateCounts:
    n_illuminated: int
    n_eclipsed: int
    n_sat_illuminated: int
    n_sat_eclipsed: int

    @property
    def total(self) -> int:
        return self.n_illuminated + self.n_eclipsed

    @property
    def frac_illuminated(self) -> float:
        return self.n_illuminated / self.total if self.total else float("nan")


@dataclass(frozen=True)
class PopulationEclipse:
    population: str
    n_satellites: int
    counts: StateCounts
    median_illuminated: float
    median_eclipsed: float
    detection: Optional[RatioWithCI]
    satellite: Optional[RatioWithCI]
    note: str = ""

    def to_dict(self) -> Dict:
        counts = asdict(self.counts)
        counts["frac_illuminated"] = self.counts.frac_illuminated
        return {"population": self.population, "n_satellites": self.n_satellites, "counts": counts,
                "median_illuminated": self.median_illuminated, "median_eclipsed": self.median_eclipsed,
                "detection": self.detection.to_dict() if self.detection else None,
                "satellite": self.satellite.to_dict() if self.satellite else None,
                "note": self.note}


@dataclass(frozen=True)
class StratumRatio:
    dimension: str
    population: str
    low: float
    high: float
    n_illuminated: int
    n_eclipsed: int
    ratio: RatioWithCI

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["ratio"] = self.ratio.to_dict()
        return data


@dataclass(frozen=True)
class SatelliteRatio:
    norad_id: int
    population: str
    n_illuminated: int
    n_eclipsed: int
    ratio: float


@dataclass(frozen=True)
class PerSatelliteSummary:
    """Distribution of per-satellite ratios (distinct from the population ratio of medians)."""
    population: str
    n_sats: int
    median: RatioWithCI
    q25: float
    q75: float
    frac_below_1: float
    frac_below_0_75: float

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["median"] = self.median.to_dict()
        return data


@dataclass(frozen=True)
class EclipseReport:
    populations: Dict[str, PopulationEclipse]
    interaction: Optional[InteractionResult]
    matched_interaction: Optional[InteractionResult]
    strata: List[StratumRatio]
    per_satellite: List[SatelliteRatio]
    per_satellite_summary: Dict[str, PerSatelliteSummary]
    time_avg_factor: Optional[float]
    matched_launch_window: Tuple[str, str]
    terminator_sensitivity: Dict[str, Optional[Dict]] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return {
            "populations": {k: v.to_dict() for k, v in self.populations.items()},
            "interaction": self.interaction.to_dict() if self.interaction else None,
            "matched_interaction": self.matched_interaction.to_dict() if self.matched_interaction else None,
            "strata": [s.to_dict() for s in self.strata],
            "per_satellite": [asdict(s) for s in self.per_satellite],
            "per_satellite_summary": {k: v.to_dict() for k, v in self.per_satellite_summary.items()},
            "time_avg_factor": self.time_avg_factor,
            "matched_launch_window": list(self.matched_launch_window),
            "terminator_sensitivity": self.terminator_sensitivity,
            "notes": list(self.notes),
        }


def time_avg_factor(frac_illuminated: float, ratio: float) -> float:
    """
    Time-averaged flux relative to the illuminated level.

    Args:
        frac_illuminated: fraction of time (detections) in sunlight
        ratio: illuminated/eclipsed flux ratio

    Returns:
        frac_illuminated + (1 - frac_illuminated) / ratio
    """
    if ratio <= 0:
        raise ValueError("Ratio must be positive")
    return frac_illuminated + (1.0 - frac_illuminated) / ratio


def _state_counts(frame: pd.DataFrame) -> StateCounts:
    lit = frame["illuminated"].to_numpy(dtype=bool)
    return StateCounts(
        n_illuminated=int(lit.sum()), n_eclipsed=int((~lit).sum()),
        n_sat_illuminated=int(frame.loc[lit, "norad_id"].nunique()),
        n_sat_eclipsed=int(frame.loc[~lit, "norad_id"].nunique()),
    )


def _groups(frame: pd.DataFrame) -> Dict[int, Tuple[np.ndarray, np.ndarray]]:
    return {int(norad): (g["s_norm_jy"].to_numpy(dtype=float), g["illuminated"].to_numpy(dtype=bool))
            for norad, g in frame.groupby("norad_id", sort=True)}


def _split(frame: pd.DataFrame) -> Tuple[np.ndarray, np.ndarray]:
    lit = frame["illuminated"].to_numpy(dtype=bool)
    values = frame["s_norm_jy"].to_numpy(dtype=float)
    return values[lit], values[~lit]


def _population_frames(catalogue: Catalogue, stacked: pd.DataFrame,
                       window: Tuple[date, date]) -> Dict[str, pd.DataFrame]:
    dtc = stacked[stacked["population"] == Population.DTC.value]
    ku = stacked[stacked["population"] == Population.KU_ONLY.value]
    matched_ids = [n for n, s in catalogue.satellites.items()
                   if s.population == Population.KU_ONLY and s.launch_date is not None
                   and window[0] <= s.launch_date <= window[1]]
    return {
        POOLED: stacked,
        Population.DTC.value: dtc,
        Population.KU_ONLY.value: ku,
        MATCHED_KU: ku[ku["norad_id"].isin(matched_ids)],
    }


def _population_result(name: str, frame: pd.DataFrame, n_resamples: int, master_seed: int,
                       n_jobs: int) -> PopulationEclipse:
    counts = _state_counts(frame)
    lit, dark = _split(frame)
    median_lit = float(np.median(lit)) if lit.size else float("nan")
    median_dark = float(np.median(dark)) if dark.size else float("nan")
    if lit.size == 0 or dark.size == 0:
        note = "no eclipsed detections" if dark.size == 0 else "no illuminated detections"
        if frame.empty:
            note = "no detections"
        logger.warning(f"Eclipse {name}: ratio undefined ({note})")
        return PopulationEclipse(name, int(frame["norad_id"].nunique()), counts,
                                 median_lit, median_dark, None, None, note)

    label = f"eclipse/{name}/detection"
    detection = bootstrap_median_ratio(lit, dark, n_resamples, derive_seed(master_seed, label),
                                       n_jobs=n_jobs, label=label)
    label = f"eclipse/{name}/satellite"
    note = ""
    try:
        satellite = cluster_bootstrap_ratio(_groups(frame), n_resamples, derive_seed(master_seed, label),
                                            n_jobs=n_jobs, label=label)
    except AnalysisError as exc:
        satellite = None
        detail = str(exc).removeprefix(f"{label}: ")
        note = f"satellite bootstrap undefined ({detail})"
        logger.warning(f"Eclipse {name}: {note}")
    logger.info(f"Eclipse {name}: {counts.n_illuminated} illuminated / {counts.n_eclipsed} eclipsed, "
                f"ratio {detection.estimate:.3f}")
    return PopulationEclipse(name, int(frame["norad_id"].nunique()), counts,
                             median_lit, median_dark, detection, satellite, note)


def _binned_strata(frame: pd.DataFrame, population: str, dimension: str, column: str,
                   edges: np.ndarray, min_per_state: int, n_resamples: int,
                   master_seed: int, n_jobs: int) -> List[StratumRatio]:
    strata = []
    values = frame[column].to_numpy(dtype=float)
    for i, (low, high) in enumerate(zip(edges[:-1], edges[1:])):
        last = i == len(edges) - 2
        mask = (values >= low) & ((values <= high) if last else (values < high))
        lit, dark = _split(frame[mask])
        if lit.size < min_per_state or dark.size < min_per_state:
            continue
        label = f"eclipse/strata/{dimension}/{population}/{i}"
        ratio = bootstrap_median_ratio(lit, dark, n_resamples, derive_seed(master_seed, label),
                                       n_jobs=n_jobs, label=label)
        strata.append(StratumRatio(dimension, population, float(low), float(high),
                                   int(lit.size), int(dark.size), ratio))
    return strata


def eclipse_analysis(catalogue: Catalogue, n_resamples: int = DEFAULT_RESAMPLES, master_seed: int = 0,
                     matched_launch_window: Tuple[date, date] = MATCHED_LAUNCH_WINDOW,
                     altitude_bin_start_km: float = ALTITUDE_BIN_START_KM,
                     altitude_bin_width_km: float = ALTITUDE_BIN_WIDTH_KM,
                     min_per_state_altitude: int = MIN_PER_STATE_ALTITUDE,
                     latitude_bins: int = LATITUDE_BINS,
                     min_per_state_latitude: int = MIN_PER_STATE_LATITUDE,
                     min_per_state_frequency: int = MIN_PER_STATE_FREQUENCY,
                     min_per_state_satellite: int = MIN_PER_STATE_SATELLITE,
                     strata_resamples: Optional[int] = None,
                     include_strata: bool = True, n_jobs: int = 1) -> EclipseReport:
    """
    Illuminated/eclipsed ratios for every population and stratum.

    Args:
        catalogue: classified, range-corrected and geometry-tagged catalogue
        n_resamples: bootstrap iterations for population ratios
        master_seed: run seed; streams are namespaced under "eclipse/"
        matched_launch_window: inclusive launch-date window of the Ku-only control
        altitude_bin_start_km, altitude_bin_width_km: altitude strata edges
        min_per_state_altitude: minimum detections per state in an altitude stratum
        latitude_bins: number of equal-width sub-satellite latitude strata
        min_per_state_latitude: minimum detections per state in a latitude stratum
        min_per_state_frequency: minimum detections per state in a frequency stratum
        min_per_state_satellite: minimum detections per state for a per-satellite ratio
        strata_resamples: bootstrap iterations for strata (defaults to n_resamples)
        include_strata: compute the stratified ratios
        n_jobs: joblib workers for resampling

    Returns:
        EclipseReport
    """
    if not catalogue.is_tagged:
        raise AnalysisError("eclipse_analysis needs a geometry-tagged catalogue")
    if not catalogue.is_range_corrected:
        raise AnalysisError("eclipse_analysis needs a range-corrected catalogue")

    stacked = catalogue.analysed()
    if stacked.empty:
        raise AnalysisError("No analysed detections for the eclipse analysis")
    frames = _population_frames(catalogue, stacked, matched_launch_window)
    notes: List[str] = []

    populations = {name: _population_result(name, frame, n_resamples, master_seed, n_jobs)
                   for name, frame in frames.items()}
    for result in populations.values():
        if result.note:
            notes.append(f"{result.population}: {result.note}")

    def interact(a: str, b: str) -> Optional[InteractionResult]:
        if populations[a].satellite is None or populations[b].satellite is None:
            notes.append(f"Interaction {a} vs {b} skipped: undefined population ratio")
            return None
        label = f"eclipse/interaction/{a}/{b}"
        try:
            return interaction_test(_groups(frames[a]), _groups(frames[b]), n_resamples,
                                    derive_seed(master_seed, label), n_jobs=n_jobs)
        except AnalysisError as exc:
            notes.append(f"Interaction {a} vs {b} not reported: {exc}")
            logger.warning(f"Interaction {a} vs {b} not reported: {exc}")
            return None

    interaction = interact(Population.DTC.value, Population.KU_ONLY.value)
    matched_interaction = interact(Population.DTC.value, MATCHED_KU)

    strata: List[StratumRatio] = []
    if include_strata:
        b_strata = strata_resamples or n_resamples
        altitude_km = stacked["subsat_height_m"].to_numpy(dtype=float) / 1000.0
        top = max(altitude_bin_start_km + altitude_bin_width_km, float(np.nanmax(altitude_km)))
        n_alt = int(np.ceil((top - altitude_bin_start_km) / altitude_bin_width_km))
        altitude_edges = altitude_bin_start_km + altitude_bin_width_km * np.arange(n_alt + 1)
        latitudes = stacked["subsat_lat_deg"].to_numpy(dtype=float)
        latitude_edges = np.linspace(latitudes.min(), latitudes.max(), latitude_bins + 1)
        frame_km = stacked.assign(altitude_km=altitude_km)

        for population in (Population.DTC.value, Population.KU_ONLY.value):
            subset = frame_km[frame_km["population"] == population]
            strata += _binned_strata(subset, population, "altitude_km", "altitude_km", altitude_edges,
                                     min_per_state_altitude, b_strata, master_seed, n_jobs)
            strata += _binned_strata(subset, population, "latitude_deg", "subsat_lat_deg", latitude_edges,
                                     min_per_state_latitude, b_strata, master_seed, n_jobs)
            for freq, channel in subset.groupby("freq_mhz", sort=True):
                lit, dark = _split(channel)
                if lit.size < min_per_state_frequency or dark.size < min_per_state_frequency:
                    continue
                label = f"eclipse/strata/frequency/{population}/{freq:.5f}"
                ratio = bootstrap_median_ratio(lit, dark, b_strata, derive_seed(master_seed, label),
                                               n_jobs=n_jobs, label=label)
                strata.append(StratumRatio("freq_mhz", population, float(freq), float(freq),
                                           int(lit.size), int(dark.size), ratio))

    per_satellite: List[SatelliteRatio] = []
    summaries: Dict[str, PerSatelliteSummary] = {}
    for population in (Population.DTC.value, Population.KU_ONLY.value):
        population_ratios = []
        for norad, group in frames[population].groupby("norad_id", sort=True):
            lit, dark = _split(group)
            if lit.size < min_per_state_satellite or dark.size < min_per_state_satellite:
                continue
            ratio = float(np.median(lit) / np.median(dark))
            per_satellite.append(SatelliteRatio(int(norad), population, int(lit.size), int(dark.size), ratio))
            population_ratios.append(ratio)
        if population_ratios:
            values = np.asarray(population_ratios)
            label = f"eclipse/per_satellite/{population}"
            median = (bootstrap_median(values, n_resamples, derive_seed(master_seed, label),
                                       n_jobs=n_jobs, label=label)
                      if values.size >= 2 else
                      RatioWithCI(float(values[0]), float(values[0]), float(values[0]),
                                  n_resamples, ResampleUnit.SATELLITE, 0))
            summaries[population] = PerSatelliteSummary(
                population=population, n_sats=int(values.size), median=median,
                q25=float(np.percentile(values, 25)), q75=float(np.percentile(values, 75)),
                frac_below_1=float((values < 1).mean()), frac_below_0_75=float((values < 0.75).mean()),
            )

    dtc = populations[Population.DTC.value]
    factor = (time_avg_factor(dtc.counts.frac_illuminated, dtc.detection.estimate)
              if dtc.detection is not None else None)

    sensitivity: Dict[str, Optional[Dict]] = {}
    if "near_terminator" in stacked.columns and stacked["near_terminator"].any():
        for population in (Population.DTC.value, Population.KU_ONLY.value):
            frame = frames[population]
            frame = frame[~frame["near_terminator"].to_numpy(dtype=bool)]
            lit, dark = _split(frame)
            if lit.size == 0 or dark.size == 0:
                sensitivity[population] = None
                continue
            label = f"eclipse/terminator/{population}"
            ratio = bootstrap_median_ratio(lit, dark, n_resamples, derive_seed(master_seed, label),
                                           n_jobs=n_jobs, label=label)
            sensitivity[population] = {"n_dropped": int(len(frames[population]) - len(frame)),
                                       "ratio": ratio.to_dict()}

    for note in notes:
        logger.warning(note)
    return EclipseReport(
        populations=populations, interaction=interaction, matched_interaction=matched_interaction,
        strata=strata, per_satellite=per_satellite, per_satellite_summary=summaries,
        time_avg_factor=factor,
        matched_launch_window=(matched_launch_window[0].isoformat(), matched_launch_window[1].isoformat()),
        terminator_sensitivity=sensitivity, notes=notes,
    )
