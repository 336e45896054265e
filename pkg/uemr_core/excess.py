"""
Excess Module - DTC versus Ku-only flux comparison

Compares the Direct-to-Cell population with the Ku-only comparison
population under four reductions (raw/range-corrected flux, per detection
or per satellite median) and per coarse channel.
"""

import logging
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Dict, List

import numpy as np
from scipy import stats as sps

from .catalogue import Catalogue, FluxBasis, Population, flux_column, per_satellite_median
from .errors import AnalysisError
from .stats import (DEFAULT_RESAMPLES, MwuResult, RatioWithCI, bootstrap_median_ratio,
                    derive_seed, mann_whitney)

logger = logging.getLogger(__name__)

MIN_DTC_PER_CHANNEL = 20


class Reduction(str, Enum):
    RAW_PER_DET = "RawPerDet"
    NORM_PER_DET = "NormPerDet"
    RAW_PER_SAT = "RawPerSat"
    NORM_PER_SAT = "NormPerSat"


_REDUCTION_BASIS = {
    Reduction.RAW_PER_DET: (FluxBasis.RAW, False),
    Reduction.NORM_PER_DET: (FluxBasis.RANGE_CORRECTED, False),
    Reduction.RAW_PER_SAT: (FluxBasis.RAW, True),
    Reduction.NORM_PER_SAT: (FluxBasis.RANGE_CORRECTED, True),
}


@dataclass(frozen=True)
class ReductionResult:
    reduction: Reduction
    n_dtc: int
    n_ku: int
    median_dtc: float
    median_ku: float
    ratio: RatioWithCI
    mwu: MwuResult

    def to_dict(self) -> Dict:
        return {"reduction": self.reduction.value, "n_dtc": self.n_dtc, "n_ku": self.n_ku,
                "median_dtc": self.median_dtc, "median_ku": self.median_ku,
                "ratio": self.ratio.to_dict(), "mwu": self.mwu.to_dict()}


@dataclass(frozen=True)
class ChannelExcessRow:
    freq_mhz: float
    n_dtc: int
    n_ku: int
    ratio: float
    ratio_ci_low: float
    ratio_ci_high: float
    ks_p: float
    mwu_p: float
    cliffs_delta: float


@dataclass(frozen=True)
class ExcessReport:
    """Headline fields (reduction, ratio, mwu) describe the NormPerSat reduction."""
    reduction: Reduction
    ratio: RatioWithCI
    mwu: MwuResult
    per_channel: List[ChannelExcessRow]
    reductions: Dict[Reduction, ReductionResult] = field(default_factory=dict)
    min_dtc_per_channel: int = MIN_DTC_PER_CHANNEL

    def to_dict(self) -> Dict:
        return {
            "reduction": self.reduction.value,
            "ratio": self.ratio.to_dict(),
            "mwu": self.mwu.to_dict(),
            "per_channel": [asdict(row) for row in self.per_channel],
            "reductions": {k.value: v.to_dict() for k, v in self.reductions.items()},
            "min_dtc_per_channel": self.min_dtc_per_channel,
        }


def _population_values(catalogue: Catalogue, population: Population, reduction: Reduction) -> np.ndarray:
    basis, per_satellite = _REDUCTION_BASIS[reduction]
    if per_satellite:
        return np.asarray([m for _, m in per_satellite_median(catalogue, population, basis)], dtype=float)
    stacked = catalogue.analysed()
    return stacked.loc[stacked["population"] == population.value, flux_column(basis)].to_numpy(dtype=float)


def dtc_excess(catalogue: Catalogue, n_resamples: int = DEFAULT_RESAMPLES, master_seed: int = 0,
               min_dtc_per_channel: int = MIN_DTC_PER_CHANNEL, channel_intervals: bool = True,
               n_jobs: int = 1) -> ExcessReport:
    """
    DTC/Ku-only flux ratio under all four reductions and per coarse channel.

    Args:
        catalogue: classified, cut and range-corrected catalogue
        n_resamples: bootstrap iterations per interval
        master_seed: run seed; streams are namespaced under "excess/"
        min_dtc_per_channel: channels with fewer DTC detections are omitted
        channel_intervals: compute bootstrap intervals for the per-channel ratios
        n_jobs: joblib workers for resampling

    Returns:
        ExcessReport with NormPerSat as the headline.
    """
    if not catalogue.is_range_corrected:
        raise AnalysisError("dtc_excess needs a range-corrected catalogue")

    reductions: Dict[Reduction, ReductionResult] = {}
    for reduction in Reduction:
        dtc = _population_values(catalogue, Population.DTC, reduction)
        ku = _population_values(catalogue, Population.KU_ONLY, reduction)
        if dtc.size == 0 or ku.size == 0:
            raise AnalysisError("dtc_excess needs detections from both DTC and Ku-only populations")
        seed = derive_seed(master_seed, f"excess/{reduction.value}")
        ratio = bootstrap_median_ratio(dtc, ku, n_resamples, seed, n_jobs=n_jobs,
                                       label=f"excess/{reduction.value}")
        reductions[reduction] = ReductionResult(
            reduction=reduction, n_dtc=int(dtc.size), n_ku=int(ku.size),
            median_dtc=float(np.median(dtc)), median_ku=float(np.median(ku)),
            ratio=ratio, mwu=mann_whitney(dtc, ku),
        )
        logger.info(f"Excess {reduction.value}: ratio {ratio.estimate:.3f} "
                    f"[{ratio.ci_low:.3f}, {ratio.ci_high:.3f}]")

    per_channel = per_channel_excess(catalogue, n_resamples, master_seed, min_dtc_per_channel,
                                     channel_intervals, n_jobs)
    headline = reductions[Reduction.NORM_PER_SAT]
    return ExcessReport(reduction=Reduction.NORM_PER_SAT, ratio=headline.ratio, mwu=headline.mwu,
                        per_channel=per_channel, reductions=reductions,
                        min_dtc_per_channel=min_dtc_per_channel)


def per_channel_excess(catalogue: Catalogue, n_resamples: int = DEFAULT_RESAMPLES, master_seed: int = 0,
                       min_dtc_per_channel: int = MIN_DTC_PER_CHANNEL, intervals: bool = True,
                       n_jobs: int = 1) -> List[ChannelExcessRow]:
    """Per-channel DTC/Ku median S_norm ratio with KS and MWU p-values."""
    stacked = catalogue.analysed()
    rows: List[ChannelExcessRow] = []
    for freq, channel in stacked.groupby("freq_mhz", sort=True):
        dtc = channel.loc[channel["population"] == Population.DTC.value, "s_norm_jy"].to_numpy(dtype=float)
        ku = channel.loc[channel["population"] == Population.KU_ONLY.value, "s_norm_jy"].to_numpy(dtype=float)
        if dtc.size < min_dtc_per_channel or ku.size == 0:
            continue
        ratio = float(np.median(dtc) / np.median(ku))
        low = high = float("nan")
        if intervals:
            label = f"excess/channel/{freq:.5f}"
            ci = bootstrap_median_ratio(dtc, ku, n_resamples, derive_seed(master_seed, label),
                                        n_jobs=n_jobs, label=label)
            low, high = ci.ci_low, ci.ci_high
        mwu = mann_whitney(dtc, ku)
        ks_p = float(sps.ks_2samp(dtc, ku, method="asymp").pvalue)
        rows.append(ChannelExcessRow(freq_mhz=float(freq), n_dtc=int(dtc.size), n_ku=int(ku.size),
                                     ratio=ratio, ratio_ci_low=low, ratio_ci_high=high, ks_p=ks_p,
                                     mwu_p=mwu.p_two_sided, cliffs_delta=mwu.cliffs_delta))
    logger.info(f"Per-channel excess: {len(rows)} channels with >= {min_dtc_per_channel} DTC detections")
    return rows
