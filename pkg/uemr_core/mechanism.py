"""
Mechanism Module - Discrimination tests for the narrowband fine-bin excess

This module provides three falsifiable tests of where a single-bin excess
comes from:
- T1: harmonic coincidence of candidate clock fundamentals with the target
- T2: adjacent-bin coherence in the brightest detections
- T3: distribution of per-satellite target/other-bin ratios
"""

import logging
from dataclasses import asdict, dataclass
from math import ceil
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .catalogue import Catalogue, FluxBasis, flux_column
from .errors import AnalysisError
from .fine_channel import (FINE_BIN_KHZ, N_FINE_BINS, TARGET_CHANNEL_MHZ, TARGET_FINE_INDEX,
                           analysed_fine_rows, bin_means, bin_z, fine_bin_centre_mhz, fine_pivot)

logger = logging.getLogger(__name__)

# Clock fundamentals (kHz) of documented switching regulators and converters
CANDIDATE_FUNDAMENTALS_KHZ: Tuple[float, ...] = (
    27.5, 36.66, 55.0, 110.0, 220.0, 37.5, 50.0, 75.0, 150.0, 50.0, 150.0, 48.8, 65.0, 97.5,
)
# Common crystal and oscillator references (kHz)
CRYSTAL_FUNDAMENTALS_KHZ: Tuple[float, ...] = (
    10000.0, 13000.0, 16000.0, 20000.0, 25000.0, 27000.0, 100000.0, 12288.0, 32.768,
)
TARGET_CENTROID_MHZ = fine_bin_centre_mhz(TARGET_CHANNEL_MHZ, TARGET_FINE_INDEX)
HALF_FINE_BIN_KHZ = FINE_BIN_KHZ / 2.0
BRIGHT_QUANTILE = 0.95
MIN_BRIGHT = 20
MIN_DETECTIONS_PER_SATELLITE = 5
MIN_QUALIFYING_SATELLITES = 5
OUTLIER_RATIO = 2.0
ELEVATED_RATIO = 1.05


@dataclass(frozen=True)
class HarmonicMatch:
    fundamental_khz: float
    best_n: int
    predicted_mhz: float
    residual_khz: float
    matched: bool


@dataclass(frozen=True)
class T1Result:
    target_mhz: float
    tol_khz: float
    matches: List[HarmonicMatch]
    observed_matches: int
    expected_chance: float
    dedup_observed: int
    dedup_expected: float

    @property
    def observed_over_expected(self) -> float:
        return self.observed_matches / self.expected_chance if self.expected_chance else float("nan")

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["observed_over_expected"] = self.observed_over_expected
        return data


@dataclass(frozen=True)
class T2Result:
    coarse_freq: float
    target_index: int
    bright_quantile: float
    p95_cut: float
    n_detections: int
    n_bright: int
    baseline_mu: float
    baseline_sigma: float
    z_below: float
    z_target: float
    z_above: float
    bright_bin_means: List[float]

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass(frozen=True)
class T3Result:
    coarse_freq: float
    target_index: int
    min_det: int
    n_sats: int
    median_r: float
    mean_r: float
    p95_r: float
    max_r: float
    n_over_2: int
    n_over_1_05: int
    frac_over_1_05: float
    z_target_excluding: float
    top_decile_mean: float
    bottom_half_mean: float
    ratios: List[Dict]

    @property
    def top_bottom_ratio(self) -> float:
        return self.top_decile_mean / self.bottom_half_mean

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["top_bottom_ratio"] = self.top_bottom_ratio
        return data


@dataclass(frozen=True)
class MechanismReport:
    t1: T1Result
    t1_crystal: Optional[T1Result]
    t2: Optional[T2Result]
    t3: Optional[T3Result]
    notes: List[str]

    def to_dict(self) -> Dict:
        return {"t1": self.t1.to_dict(),
                "t1_crystal": self.t1_crystal.to_dict() if self.t1_crystal else None,
                "t2": self.t2.to_dict() if self.t2 else None,
                "t3": self.t3.to_dict() if self.t3 else None,
                "notes": list(self.notes)}


# --------------------------------------------------
# (1) Harmonic coincidence
# --------------------------------------------------

def expected_chance(fundamentals_khz: Sequence[float], tol_khz: float) -> float:
    """Expected number of chance coincidences: sum of min(1, 2 tol / f0)."""
    return float(sum(min(1.0, 2.0 * tol_khz / f0) for f0 in fundamentals_khz))


def t1_harmonic_coincidence(fundamentals_khz: Sequence[float] = CANDIDATE_FUNDAMENTALS_KHZ,
                            target_mhz: float = TARGET_CENTROID_MHZ,
                            tol_khz: float = HALF_FINE_BIN_KHZ) -> T1Result:
    """
    Nearest harmonic of each fundamental to the target frequency.

    Args:
        fundamentals_khz: candidate fundamentals (kHz), duplicates allowed
        target_mhz: target centroid (MHz)
        tol_khz: match tolerance (kHz)

    Returns:
        T1Result with per-fundamental matches and chance expectations.
    """
    if tol_khz <= 0:
        raise ValueError("Tolerance must be positive")
    if any(f0 <= 0 for f0 in fundamentals_khz):
        raise ValueError("Fundamentals must be positive")

    target_khz = target_mhz * 1000.0
    matches = []
    for f0 in fundamentals_khz:
        n = max(1, int(round(target_khz / f0)))
        residual = abs(n * f0 - target_khz)
        matches.append(HarmonicMatch(fundamental_khz=float(f0), best_n=n,
                                     predicted_mhz=n * f0 / 1000.0,
                                     residual_khz=residual, matched=residual <= tol_khz))

    unique: Dict[float, HarmonicMatch] = {}
    for match in matches:
        unique.setdefault(match.fundamental_khz, match)

    return T1Result(
        target_mhz=float(target_mhz), tol_khz=float(tol_khz), matches=matches,
        observed_matches=sum(m.matched for m in matches),
        expected_chance=expected_chance(fundamentals_khz, tol_khz),
        dedup_observed=sum(m.matched for m in unique.values()),
        dedup_expected=expected_chance(list(unique), tol_khz),
    )


# --------------------------------------------------
# (2) Adjacent-bin coherence
# --------------------------------------------------

def _non_adjacent_bins(target_index: int) -> List[int]:
    excluded = {target_index - 1, target_index, target_index + 1}
    return [i for i in range(N_FINE_BINS) if i not in excluded]


def t2_adjacent_bin(catalogue: Catalogue, coarse_freq: float = TARGET_CHANNEL_MHZ,
                    target_index: int = TARGET_FINE_INDEX,
                    bright_quantile: float = BRIGHT_QUANTILE,
                    flux_basis: FluxBasis = FluxBasis.RAW,
                    min_bright: int = MIN_BRIGHT) -> T2Result:
    """
    Adjacent-bin z-scores in the brightest detections.

    Selects detections whose target-bin flux exceeds the bright quantile and
    compares the mean of the target and its two neighbours with the mean and
    spread of the remaining 28 bin means.
    """
    if not 0 < bright_quantile < 1:
        raise ValueError("Bright quantile must lie in (0, 1)")
    pivot = fine_pivot(catalogue, coarse_freq, flux_basis)
    target = pivot[target_index]
    valid = pivot[target.notna()]
    if valid.empty:
        raise AnalysisError(f"No detections with a fine bin {target_index} value at {coarse_freq} MHz")

    cut = float(np.quantile(valid[target_index].to_numpy(dtype=float), bright_quantile))
    bright = valid[valid[target_index] > cut]
    if len(bright) < min_bright:
        raise AnalysisError(f"Bright subset has {len(bright)} detections (need {min_bright})")

    means = bright.mean(axis=0).reindex(range(N_FINE_BINS)).to_numpy(dtype=float)
    baseline = means[_non_adjacent_bins(target_index)]
    baseline = baseline[np.isfinite(baseline)]
    mu = float(baseline.mean())
    sigma = float(baseline.std(ddof=1))

    def z_at(index: int) -> float:
        if not 0 <= index < N_FINE_BINS or not np.isfinite(means[index]) or sigma == 0:
            return float("nan")
        return float((means[index] - mu) / sigma)

    result = T2Result(
        coarse_freq=float(coarse_freq), target_index=target_index, bright_quantile=bright_quantile,
        p95_cut=cut, n_detections=int(len(valid)), n_bright=int(len(bright)),
        baseline_mu=mu, baseline_sigma=sigma,
        z_below=z_at(target_index - 1), z_target=z_at(target_index), z_above=z_at(target_index + 1),
        bright_bin_means=[float(m) for m in means],
    )
    logger.info(f"T2: {result.n_bright} bright detections, z = "
                f"({result.z_below:.2f}, {result.z_target:.2f}, {result.z_above:.2f})")
    return result


# --------------------------------------------------
# (3) Per-satellite ratios
# --------------------------------------------------

def t3_satellite_ratios(catalogue: Catalogue, coarse_freq: float = TARGET_CHANNEL_MHZ,
                        target_index: int = TARGET_FINE_INDEX,
                        min_det: int = MIN_DETECTIONS_PER_SATELLITE,
                        flux_basis: FluxBasis = FluxBasis.RAW) -> T3Result:
    """
    Per-satellite ratio of target-bin mean flux to the 28 non-adjacent bins.

    Args:
        catalogue: classified catalogue with fine rows
        coarse_freq: coarse channel (MHz)
        target_index: fine bin under test
        min_det: minimum detections per satellite at the channel (>= 2)
        flux_basis: raw or range-corrected flux

    Returns:
        T3Result, including the target-bin z recomputed without satellites
        whose ratio exceeds 2.
    """
    if min_det < 2:
        raise ValueError("min_det must be at least 2")
    rows = analysed_fine_rows(catalogue, coarse_freq)
    pivot = fine_pivot(catalogue, coarse_freq, flux_basis, rows=rows)
    others = _non_adjacent_bins(target_index)

    ratios = []
    for norad, vectors in pivot.groupby(level="norad_id", sort=True):
        if len(vectors) < min_det:
            continue
        target_mean = vectors[target_index].mean()
        other_mean = np.nanmean(vectors[others].to_numpy(dtype=float))
        if not np.isfinite(target_mean) or not other_mean:
            continue
        ratios.append({"norad_id": int(norad), "n_det": int(len(vectors)),
                       "ratio": float(target_mean / other_mean)})

    if len(ratios) < MIN_QUALIFYING_SATELLITES:
        raise AnalysisError(f"Only {len(ratios)} satellites with >= {min_det} detections "
                            f"(need {MIN_QUALIFYING_SATELLITES})")

    values = np.array([r["ratio"] for r in ratios])
    ordered = np.sort(values)[::-1]
    n_top = max(1, int(ceil(0.1 * values.size)))
    n_bottom = max(1, values.size // 2)

    outliers = {r["norad_id"] for r in ratios if r["ratio"] > OUTLIER_RATIO}
    kept_rows = rows[~rows["norad_id"].isin(outliers)]
    z_excluding, _, _ = bin_z(bin_means(kept_rows, flux_column(flux_basis)), target_index)

    result = T3Result(
        coarse_freq=float(coarse_freq), target_index=target_index, min_det=min_det,
        n_sats=int(values.size), median_r=float(np.median(values)), mean_r=float(values.mean()),
        p95_r=float(np.percentile(values, 95)), max_r=float(values.max()),
        n_over_2=int((values > OUTLIER_RATIO).sum()),
        n_over_1_05=int((values > ELEVATED_RATIO).sum()),
        frac_over_1_05=float((values > ELEVATED_RATIO).mean()),
        z_target_excluding=z_excluding,
        top_decile_mean=float(ordered[:n_top].mean()),
        bottom_half_mean=float(ordered[-n_bottom:].mean()),
        ratios=ratios,
    )
    logger.info(f"T3: {result.n_sats} satellites, median R {result.median_r:.3f}, "
                f"top decile {result.top_decile_mean:.2f} vs bottom half {result.bottom_half_mean:.2f}")
    return result


def mechanism_tests(catalogue: Optional[Catalogue],
                    fundamentals_khz: Sequence[float] = CANDIDATE_FUNDAMENTALS_KHZ,
                    crystal_fundamentals_khz: Optional[Sequence[float]] = CRYSTAL_FUNDAMENTALS_KHZ,
                    coarse_freq: float = TARGET_CHANNEL_MHZ, target_index: int = TARGET_FINE_INDEX,
                    tol_khz: float = HALF_FINE_BIN_KHZ, bright_quantile: float = BRIGHT_QUANTILE,
                    min_det: int = MIN_DETECTIONS_PER_SATELLITE,
                    flux_basis: FluxBasis = FluxBasis.RAW) -> MechanismReport:
    """Run T1 (always) and T2/T3 (when a catalogue with fine rows is given)."""
    target_mhz = fine_bin_centre_mhz(coarse_freq, target_index)
    t1 = t1_harmonic_coincidence(fundamentals_khz, target_mhz, tol_khz)
    crystal = (t1_harmonic_coincidence(crystal_fundamentals_khz, target_mhz, tol_khz)
               if crystal_fundamentals_khz else None)

    notes: List[str] = []
    t2 = t3 = None
    if catalogue is None:
        notes.append("No catalogue supplied: T2 and T3 skipped")
    else:
        try:
            t2 = t2_adjacent_bin(catalogue, coarse_freq, target_index, bright_quantile, flux_basis)
        except AnalysisError as exc:
            notes.append(f"T2 skipped: {exc}")
        try:
            t3 = t3_satellite_ratios(catalogue, coarse_freq, target_index, min_det, flux_basis)
        except AnalysisError as exc:
            notes.append(f"T3 skipped: {exc}")
    for note in notes:
        logger.warning(note)
    return MechanismReport(t1=t1, t1_crystal=crystal, t2=t2, t3=t3, notes=notes)
