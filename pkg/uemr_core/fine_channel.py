"""
Fine Channel Module - Sub-channel localisation of narrowband excess

This module works on the 31 fine rows (indices 0-30) recorded for each
detection:
- Per-bin flux statistics within one coarse channel
- Inter-bin z-score of a target bin against the remaining bins
- The same estimator on control channels
- Pivot of fine rows into per-detection 31-bin vectors
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import stats as sps

from .catalogue import ANALYSED_POPULATIONS, STACKED_INDEX, Catalogue, FluxBasis, PolFeed, flux_column, match_channel
from .errors import AnalysisError

logger = logging.getLogger(__name__)

N_FINE_BINS = 31
COARSE_CHANNEL_KHZ = 781.25
FINE_BIN_KHZ = COARSE_CHANNEL_KHZ / 32.0
TARGET_CHANNEL_MHZ = 230.46875
TARGET_FINE_INDEX = 22
MIN_FINE_ROWS = 100
DETECTION_KEY = ["norad_id", "epoch_utc", "pol_feed"]


def fine_bin_centre_mhz(coarse_freq_mhz: float, index: int) -> float:
    """Centre frequency of a fine bin within its coarse channel."""
    return coarse_freq_mhz + ((index + 0.5) * FINE_BIN_KHZ - COARSE_CHANNEL_KHZ / 2.0) / 1000.0


@dataclass(frozen=True)
class FineBinStats:
    index: int
    n: int
    mean: float
    median: float
    p95: float
    xx_fraction: float


@dataclass(frozen=True)
class FineChannelReport:
    """
    Fine-bin profile of one coarse channel.

    ``z_by_bin`` holds, for every bin, its mean against the other bins;
    ``z_target`` is the entry for ``target_index``. The flagging threshold is
    the Bonferroni-corrected Student-t quantile (df = bins - 2); the normal
    quantile is reported alongside.
    """
    coarse_freq: float
    per_bin: List[FineBinStats]
    target_index: int
    z_target: float
    inter_bin_mu: float
    inter_bin_sigma: float
    bonferroni_threshold: float
    bonferroni_threshold_normal: float
    n_rows: int
    z_by_bin: List[float]
    target_p95_excess: float
    population_target_ratio: Dict[str, float] = field(default_factory=dict)

    @property
    def max_abs_z(self) -> float:
        finite = [abs(z) for z in self.z_by_bin if np.isfinite(z)]
        return max(finite) if finite else float("nan")

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["max_abs_z"] = self.max_abs_z
        return data


@dataclass(frozen=True)
class ControlChannelResult:
    freq_mhz: float
    z: float
    n_rows: int


def analysed_fine_rows(catalogue: Catalogue, coarse_freq: float) -> pd.DataFrame:
    fine = catalogue.analysed(stacked=False)
    return match_channel(fine, coarse_freq)


def bin_z(means: np.ndarray, index: int):
    """z of one bin's mean against the mean and sample std of the other bins."""
    others = np.delete(means, index)
    others = others[np.isfinite(others)]
    if others.size < 3 or not np.isfinite(means[index]):
        return float("nan"), float("nan"), float("nan")
    mu = float(others.mean())
    sigma = float(others.std(ddof=1))
    if sigma == 0:
        return float("nan"), mu, sigma
    return (float(means[index]) - mu) / sigma, mu, sigma


def bin_means(rows: pd.DataFrame, column: str) -> np.ndarray:
    grouped = rows.groupby("fine_channel_index")[column].mean()
    return grouped.reindex(range(N_FINE_BINS)).to_numpy(dtype=float)


def bonferroni_thresholds(n_bins: int = N_FINE_BINS, alpha: float = 0.05):
    """Two-sided per-bin thresholds at alpha / n_bins: (Student-t with df = n_bins - 2, normal)."""
    tail = alpha / (2.0 * n_bins)
    return float(sps.t.isf(tail, df=n_bins - 2)), float(sps.norm.isf(tail))


def fine_channel_scan(catalogue: Catalogue, coarse_freq: float = TARGET_CHANNEL_MHZ,
                      target_index: int = TARGET_FINE_INDEX,
                      flux_basis: FluxBasis = FluxBasis.RAW, alpha: float = 0.05,
                      min_rows: int = MIN_FINE_ROWS) -> FineChannelReport:
    """
    Per-bin statistics and target-bin z-score within one coarse channel.

    Args:
        catalogue: classified catalogue with fine rows
        coarse_freq: coarse channel centre (MHz)
        target_index: fine bin to test
        flux_basis: raw or range-corrected flux
        alpha: family-wise level for the Bonferroni threshold
        min_rows: minimum number of fine rows

    Returns:
        FineChannelReport
    """
    if not 0 <= target_index < N_FINE_BINS:
        raise ValueError(f"Fine index must lie in 0..{N_FINE_BINS - 1}")
    column = flux_column(flux_basis)
    rows = analysed_fine_rows(catalogue, coarse_freq)
    if len(rows) < min_rows:
        raise AnalysisError(f"Only {len(rows)} fine rows at {coarse_freq} MHz (need {min_rows})")

    is_xx = rows["pol_feed"] == PolFeed.XX.value
    per_bin: List[FineBinStats] = []
    for index in range(N_FINE_BINS):
        mask = (rows["fine_channel_index"] == index).to_numpy()
        values = rows.loc[mask, column].to_numpy(dtype=float)
        if values.size == 0:
            per_bin.append(FineBinStats(index, 0, float("nan"), float("nan"), float("nan"), float("nan")))
            continue
        per_bin.append(FineBinStats(
            index=index, n=int(values.size), mean=float(values.mean()),
            median=float(np.median(values)), p95=float(np.percentile(values, 95)),
            xx_fraction=float(is_xx[mask].mean()),
        ))

    means = np.array([b.mean for b in per_bin])
    z_by_bin = [bin_z(means, i)[0] for i in range(N_FINE_BINS)]
    z_target, mu, sigma = bin_z(means, target_index)

    p95 = np.array([b.p95 for b in per_bin])
    other_p95 = np.nanmean(np.delete(p95, target_index))
    p95_excess = float(p95[target_index] / other_p95 - 1.0) if other_p95 else float("nan")

    population_ratio: Dict[str, float] = {}
    for population in ANALYSED_POPULATIONS:
        subset = rows[rows["population"] == population.value]
        if subset.empty:
            continue
        pop_means = bin_means(subset, column)
        others = np.nanmean(np.delete(pop_means, target_index))
        population_ratio[population.value] = float(pop_means[target_index] / others)

    threshold_t, threshold_normal = bonferroni_thresholds(N_FINE_BINS, alpha)
    logger.info(f"Fine channel {coarse_freq} MHz bin {target_index}: z = {z_target:.2f} "
                f"(threshold {threshold_t:.2f})")
    return FineChannelReport(
        coarse_freq=float(coarse_freq), per_bin=per_bin, target_index=target_index,
        z_target=z_target, inter_bin_mu=mu, inter_bin_sigma=sigma,
        bonferroni_threshold=threshold_t, bonferroni_threshold_normal=threshold_normal,
        n_rows=int(len(rows)), z_by_bin=z_by_bin, target_p95_excess=p95_excess,
        population_target_ratio=population_ratio,
    )


def cross_channel_control(catalogue: Catalogue, control_freqs: Sequence[float],
                          target_index: int = TARGET_FINE_INDEX,
                          flux_basis: FluxBasis = FluxBasis.RAW,
                          min_rows: int = MIN_FINE_ROWS) -> List[ControlChannelResult]:
    """Target-bin z-score on each control channel."""
    column = flux_column(flux_basis)
    results: List[ControlChannelResult] = []
    for freq in control_freqs:
        rows = analysed_fine_rows(catalogue, freq)
        if len(rows) < min_rows:
            raise AnalysisError(f"Only {len(rows)} fine rows at control channel {freq} MHz (need {min_rows})")
        z, _, _ = bin_z(bin_means(rows, column), target_index)
        results.append(ControlChannelResult(freq_mhz=float(freq), z=z, n_rows=int(len(rows))))
    return results


def fine_pivot(catalogue: Catalogue, coarse_freq: float,
               flux_basis: FluxBasis = FluxBasis.RAW,
               rows: Optional[pd.DataFrame] = None) -> pd.DataFrame:
    """
    Per-detection 31-bin flux vectors at one coarse channel.

    Returns:
        DataFrame indexed by (norad_id, epoch_utc, pol_feed) with columns 0..30.
    """
    if rows is None:
        rows = analysed_fine_rows(catalogue, coarse_freq)
    rows = rows[rows["fine_channel_index"] < STACKED_INDEX]
    if rows.empty:
        raise AnalysisError(f"No fine rows at {coarse_freq} MHz")
    pivot = rows.pivot_table(index=DETECTION_KEY, columns="fine_channel_index",
                             values=flux_column(flux_basis), aggfunc="mean")
    return pivot.reindex(columns=range(N_FINE_BINS))
