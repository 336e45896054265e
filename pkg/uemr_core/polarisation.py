"""
Polarisation Module - Per-channel XX-fraction anomalies

This module tests, channel by channel, whether the fraction of detections
recorded on the XX feed departs from the instrumental baseline:
- Pooled or leave-one-channel-out baseline
- Exact two-sided binomial p-values and Wilson intervals
- Benjamini-Hochberg control across channels
- Per-satellite and per-population XX fractions at a single channel
"""

import logging
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence

import numpy as np

from .catalogue import ANALYSED_POPULATIONS, Catalogue, PolFeed, match_channel
from .errors import AnalysisError
from .stats import (DEFAULT_FDR_Q, DEFAULT_Z, bh_fdr, binom_two_sided,
                    binom_two_sided_log10, wilson_interval)

logger = logging.getLogger(__name__)


class BaselineMode(str, Enum):
    POOLED = "Pooled"
    LEAVE_ONE_OUT = "LeaveOneOut"


@dataclass(frozen=True)
class ChannelTestResult:
    freq_mhz: float
    n_total: int
    n_xx: int
    f_xx: float
    deviation: float
    p_two_sided: float
    log10_p: float
    wilson_low: float
    wilson_high: float
    bh_significant: bool
    baseline_used: float
    baseline_mode: BaselineMode

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["baseline_mode"] = self.baseline_mode.value
        return data


@dataclass(frozen=True)
class PolarisationReport:
    baseline_mode: BaselineMode
    pooled_baseline: float
    q: float
    channels: List[ChannelTestResult]
    notes: List[str] = field(default_factory=list)

    @property
    def n_flagged(self) -> int:
        return sum(1 for c in self.channels if c.bh_significant)

    def channel(self, freq_mhz: float, tolerance_mhz: float = 0.05) -> ChannelTestResult:
        for result in self.channels:
            if abs(result.freq_mhz - freq_mhz) <= tolerance_mhz:
                return result
        raise KeyError(f"No channel near {freq_mhz} MHz")

    def to_dict(self) -> Dict:
        return {"baseline_mode": self.baseline_mode.value, "pooled_baseline": self.pooled_baseline,
                "q": self.q, "n_flagged": self.n_flagged,
                "channels": [c.to_dict() for c in self.channels], "notes": list(self.notes)}


def polarisation_anomaly(catalogue: Catalogue, baseline_mode: BaselineMode = BaselineMode.POOLED,
                         q: float = DEFAULT_FDR_Q, z: float = DEFAULT_Z,
                         channels: Optional[Sequence[float]] = None) -> PolarisationReport:
    """
    Per-channel binomial test of the XX detection fraction.

    Args:
        catalogue: classified catalogue
        baseline_mode: pooled XX fraction, or recomputed per channel without it
        q: false discovery rate for Benjamini-Hochberg
        z: normal quantile for the Wilson interval
        channels: channels to test; defaults to every channel with detections

    Returns:
        PolarisationReport, one ChannelTestResult per tested channel.
    """
    baseline_mode = BaselineMode(baseline_mode)
    stacked = catalogue.analysed()
    if stacked.empty:
        raise AnalysisError("No analysed detections for the polarisation test")

    is_xx = (stacked["pol_feed"] == PolFeed.XX.value).to_numpy()
    total_n = int(stacked.shape[0])
    total_xx = int(is_xx.sum())
    pooled = total_xx / total_n

    counts = stacked.assign(xx=is_xx).groupby("freq_mhz")["xx"].agg(["size", "sum"])
    requested = sorted(counts.index) if channels is None else list(channels)

    notes: List[str] = []
    tested = []
    for freq in requested:
        match = counts.index[np.abs(counts.index.to_numpy() - freq) <= 0.05]
        if match.size == 0:
            notes.append(f"Channel {freq:.3f} MHz skipped: no detections")
            continue
        n = int(counts.loc[match[0], "size"])
        k = int(counts.loc[match[0], "sum"])
        if baseline_mode == BaselineMode.POOLED:
            baseline = pooled
        else:
            others = total_n - n
            if others == 0:
                notes.append(f"Channel {freq:.3f} MHz skipped: no other channels for the baseline")
                continue
            baseline = (total_xx - k) / others
        if not 0 < baseline < 1:
            notes.append(f"Channel {freq:.3f} MHz skipped: degenerate baseline {baseline}")
            continue
        tested.append((float(match[0]), n, k, baseline))

    pvals = [binom_two_sided(k, n, b) for _, n, k, b in tested]
    flags = bh_fdr(pvals, q) if tested else []

    results: List[ChannelTestResult] = []
    for (freq, n, k, baseline), p, flag in zip(tested, pvals, flags):
        low, high = wilson_interval(k, n, z)
        results.append(ChannelTestResult(
            freq_mhz=freq, n_total=n, n_xx=k, f_xx=k / n, deviation=k / n - baseline,
            p_two_sided=p, log10_p=binom_two_sided_log10(k, n, baseline),
            wilson_low=low, wilson_high=high, bh_significant=bool(flag),
            baseline_used=baseline, baseline_mode=baseline_mode,
        ))

    for note in notes:
        logger.warning(note)
    report = PolarisationReport(baseline_mode=baseline_mode, pooled_baseline=pooled, q=q,
                                channels=results, notes=notes)
    logger.info(f"Polarisation ({baseline_mode.value}): {report.n_flagged}/{len(results)} channels flagged")
    return report


@dataclass(frozen=True)
class PolarisationProfile:
    """XX fractions at one channel, by satellite and by population."""
    freq_mhz: float
    min_det: int
    per_satellite: List[Dict]
    per_population: Dict[str, Dict]
    median_s_norm_xx: float
    median_s_norm_yy: float

    def to_dict(self) -> Dict:
        return asdict(self)


def channel_polarisation_profile(catalogue: Catalogue, freq_mhz: float, min_det: int = 5) -> PolarisationProfile:
    """
    Per-satellite XX fractions at one channel.

    Args:
        catalogue: classified, range-corrected catalogue
        freq_mhz: coarse channel
        min_det: satellites with fewer detections at the channel are omitted

    Returns:
        PolarisationProfile
    """
    channel = match_channel(catalogue.analysed(), freq_mhz)
    if channel.empty:
        raise AnalysisError(f"No detections at {freq_mhz} MHz")
    channel = channel.assign(xx=channel["pol_feed"] == PolFeed.XX.value)

    per_satellite = []
    for norad, group in channel.groupby("norad_id", sort=True):
        if len(group) < min_det:
            continue
        per_satellite.append({"norad_id": int(norad), "population": str(group["population"].iloc[0]),
                              "n": int(len(group)), "f_xx": float(group["xx"].mean())})

    per_population = {}
    for population in ANALYSED_POPULATIONS:
        group = channel[channel["population"] == population.value]
        if len(group):
            k, n = int(group["xx"].sum()), int(len(group))
            low, high = wilson_interval(k, n)
            per_population[population.value] = {"n": n, "n_xx": k, "f_xx": k / n,
                                                "wilson_low": low, "wilson_high": high}

    values = channel["s_norm_jy"] if "s_norm_jy" in channel.columns else channel["flux_jy"]
    xx_values = values[channel["xx"]]
    yy_values = values[~channel["xx"]]
    return PolarisationProfile(
        freq_mhz=float(freq_mhz), min_det=min_det, per_satellite=per_satellite,
        per_population=per_population,
        median_s_norm_xx=float(xx_values.median()) if len(xx_values) else float("nan"),
        median_s_norm_yy=float(yy_values.median()) if len(yy_values) else float("nan"),
    )
