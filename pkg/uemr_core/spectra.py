"""
Spectra Module - Occupancy, dynamic spectra and thermal reference flux

This module provides:
- Spectral occupancy summary across coarse channels and band regions
- Dynamic spectrum (time x fine bin) of a satellite's brightest pass
- Rayleigh-Jeans flux density of a warm body for scale comparison
"""

import logging
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import constants

from .catalogue import ANALYSED_POPULATIONS, Catalogue, FluxBasis, flux_column, match_channel
from .errors import AnalysisError
from .fine_channel import N_FINE_BINS
from .polarisation import ChannelTestResult

logger = logging.getLogger(__name__)

JANSKY = 1e-26
PASS_GAP_S = 60.0
BAND_REGIONS: Tuple[Tuple[str, float, float], ...] = (
    ("low", 73.0, 110.0),
    ("mid", 110.0, 190.0),
    ("high", 200.0, 234.4),
)


def thermal_flux_estimate(emissivity: float, temperature_k: float, area_m2: float,
                          wavelength_m: float, range_m: float) -> float:
    """
    Rayleigh-Jeans flux density of a warm body.

    Args:
        emissivity: emissivity (0, 1]
        temperature_k: physical temperature (K)
        area_m2: emitting area (m^2)
        wavelength_m: observing wavelength (m)
        range_m: distance to the observer (m)

    Returns:
        Flux density in Jy: 2 eps k T A / (lambda^2 r^2).
    """
    for name, value in (("emissivity", emissivity), ("temperature", temperature_k), ("area", area_m2),
                        ("wavelength", wavelength_m), ("range", range_m)):
        if value <= 0:
            raise ValueError(f"{name} must be positive")
    spectral_flux = 2.0 * emissivity * constants.k * temperature_k * area_m2 / (wavelength_m ** 2 * range_m ** 2)
    return spectral_flux / JANSKY


# --------------------------------------------------
# Dynamic spectrum
# --------------------------------------------------

@dataclass(frozen=True)
class DynamicSpectrum:
    """
    Time x fine-bin flux of one pass. Missing cells are 0.0.
    """
    norad_id: int
    coarse_freq: float
    n_passes: int
    pass_index: int
    start_utc: str
    end_utc: str
    duration_s: float
    integrated_s_norm: float
    epochs_utc: List[str]
    matrix: List[List[float]]
    time_marginal: List[float]
    frequency_marginal: List[float]
    elevation_deg: List[float]

    def to_dict(self) -> Dict:
        return asdict(self)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.matrix, columns=[f"bin_{i}" for i in range(N_FINE_BINS)])
        frame.insert(0, "epoch_utc", self.epochs_utc)
        frame["elevation_deg"] = self.elevation_deg
        frame["time_marginal"] = self.time_marginal
        return frame


def segment_passes(epochs: pd.Series, gap_s: float = PASS_GAP_S) -> np.ndarray:
    """Pass number of each (sorted) epoch; a new pass starts after a gap > gap_s."""
    seconds = np.diff(pd.DatetimeIndex(epochs).asi8) / 1e9
    return np.concatenate([[0], np.cumsum(seconds > gap_s)])


def dynamic_spectrum(catalogue: Catalogue, norad_id: int, coarse_freq: float,
                     gap_s: float = PASS_GAP_S,
                     flux_basis: FluxBasis = FluxBasis.RANGE_CORRECTED) -> DynamicSpectrum:
    """
    Dynamic spectrum of the brightest pass of one satellite at one channel.

    Args:
        catalogue: range-corrected catalogue with fine rows
        norad_id: satellite
        coarse_freq: coarse channel (MHz)
        gap_s: epoch gap that separates passes
        flux_basis: flux used for the matrix; pass selection always uses S_norm

    Returns:
        DynamicSpectrum of the pass with the highest integrated S_norm.
    """
    if not catalogue.is_range_corrected:
        raise AnalysisError("dynamic_spectrum needs a range-corrected catalogue")
    fine = catalogue.fine()
    rows = match_channel(fine[fine["norad_id"] == norad_id], coarse_freq)
    if rows.empty:
        raise AnalysisError(f"No fine rows for NORAD {norad_id} at {coarse_freq} MHz")

    epochs = rows["epoch_utc"].drop_duplicates().sort_values().reset_index(drop=True)
    pass_of_epoch = dict(zip(epochs, segment_passes(epochs, gap_s)))
    rows = rows.assign(pass_id=rows["epoch_utc"].map(pass_of_epoch))

    integrated = rows.groupby("pass_id")["s_norm_jy"].sum()
    best = int(integrated.idxmax())
    selected = rows[rows["pass_id"] == best]

    column = flux_column(flux_basis)
    matrix = (selected.pivot_table(index="epoch_utc", columns="fine_channel_index", values=column,
                                   aggfunc="sum")
              .reindex(columns=range(N_FINE_BINS)).fillna(0.0).sort_index())
    elevation = selected.groupby("epoch_utc")["elevation_deg"].mean().reindex(matrix.index)

    start, end = matrix.index.min(), matrix.index.max()
    logger.info(f"Dynamic spectrum NORAD {norad_id}: pass {best} of {len(integrated)}, "
                f"{len(matrix)} epochs, {(end - start).total_seconds():.0f} s")
    return DynamicSpectrum(
        norad_id=int(norad_id), coarse_freq=float(coarse_freq), n_passes=int(len(integrated)),
        pass_index=best, start_utc=start.isoformat(), end_utc=end.isoformat(),
        duration_s=float((end - start).total_seconds()),
        integrated_s_norm=float(integrated.loc[best]),
        epochs_utc=[t.isoformat() for t in matrix.index],
        matrix=matrix.to_numpy(dtype=float).tolist(),
        time_marginal=matrix.sum(axis=1).astype(float).tolist(),
        frequency_marginal=matrix.sum(axis=0).astype(float).tolist(),
        elevation_deg=elevation.astype(float).tolist(),
    )


# --------------------------------------------------
# Spectral occupancy
# --------------------------------------------------

@dataclass(frozen=True)
class OccupancyReport:
    n_detections: int
    channels: List[Dict]
    top4_share: float
    regions: List[Dict]

    def to_dict(self) -> Dict:
        return asdict(self)


def spectral_occupancy(catalogue: Catalogue,
                       channel_results: Optional[Sequence[ChannelTestResult]] = None,
                       regions: Sequence[Tuple[str, float, float]] = BAND_REGIONS) -> OccupancyReport:
    """
    Detection counts per coarse channel and per band region.

    Args:
        catalogue: classified catalogue
        channel_results: polarisation results, used to count flagged channels per region
        regions: (name, low MHz, high MHz) band regions, inclusive

    Returns:
        OccupancyReport
    """
    stacked = catalogue.analysed()
    total = int(len(stacked))
    if total == 0:
        raise AnalysisError("No analysed detections for the occupancy summary")

    flagged = {round(r.freq_mhz, 4) for r in channel_results or [] if r.bh_significant}
    channels = []
    for freq, group in stacked.groupby("freq_mhz", sort=True):
        row = {"freq_mhz": float(freq), "n_detections": int(len(group)), "share": len(group) / total,
               "bh_flagged": round(float(freq), 4) in flagged}
        for population in ANALYSED_POPULATIONS:
            row[f"n_{population.value}"] = int((group["population"] == population.value).sum())
        channels.append(row)

    shares = sorted((c["share"] for c in channels), reverse=True)
    region_rows = []
    for name, low, high in regions:
        inside = [c for c in channels if low <= c["freq_mhz"] <= high]
        region_rows.append({
            "region": name, "low_mhz": low, "high_mhz": high, "n_channels": len(inside),
            "n_detections": sum(c["n_detections"] for c in inside),
            "share": sum(c["share"] for c in inside),
            "n_bh_flagged": sum(c["bh_flagged"] for c in inside),
        })

    return OccupancyReport(n_detections=total, channels=channels, top4_share=float(sum(shares[:4])),
                           regions=region_rows)
