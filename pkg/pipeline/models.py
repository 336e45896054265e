"""
Pipeline Models - Pydantic schemas for run configuration and stored results

This module defines the configuration consumed by the CLI and the envelope
every analysis result is written in. Defaults are the reference analysis values.
"""

from datetime import date
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from uemr_core.catalogue import DETECTION_FIELDS, REFERENCE_RANGE_KM, FluxBasis
from uemr_core.eclipse import MATCHED_LAUNCH_WINDOW
from uemr_core.fine_channel import MIN_FINE_ROWS, TARGET_CHANNEL_MHZ, TARGET_FINE_INDEX
from uemr_core.geometry import DEFAULT_SITE, EARTH_RADIUS_M
from uemr_core.mechanism import (BRIGHT_QUANTILE, CRYSTAL_FUNDAMENTALS_KHZ, HALF_FINE_BIN_KHZ,
                                 MIN_DETECTIONS_PER_SATELLITE, CANDIDATE_FUNDAMENTALS_KHZ)
from uemr_core.polarisation import BaselineMode
from uemr_core.spectra import PASS_GAP_S

SCHEMA_VERSION = "1.0"
CONTROL_CHANNELS_MHZ = [150.78, 153.12, 161.72, 170.31, 200.0]


class Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PathsConfig(Section):
    detections: Optional[str] = Field(None, description="Per-detection CSV")
    bus_table: Optional[str] = Field(None, description="Bus classification table (tab or comma separated)")
    out_dir: str = Field("out", description="Root of all written outputs")
    ground_truth: Optional[str] = Field(None, description="GroundTruth JSON of a synthetic run")


class SiteConfig(Section):
    lat_deg: float = Field(DEFAULT_SITE.lat_deg, ge=-90, le=90)
    lon_deg: float = Field(DEFAULT_SITE.lon_deg, ge=-180, le=360)
    height_m: float = DEFAULT_SITE.height_m


class GeometryConfig(Section):
    earth_radius_m: float = Field(EARTH_RADIUS_M, gt=0, description="Shadow cylinder radius")
    reference_range_km: float = Field(REFERENCE_RANGE_KM, gt=0, description="Range-correction reference")


class StatsConfig(Section):
    n_resamples: int = Field(2000, ge=100, description="Bootstrap iterations")
    q: float = Field(0.05, gt=0, lt=1, description="Benjamini-Hochberg false discovery rate")
    z: float = Field(1.96, gt=0, description="Normal quantile for Wilson intervals")
    master_seed: int = Field(0, ge=0)
    n_jobs: int = Field(1, description="joblib workers; -1 uses every core")


class ExcessConfig(Section):
    min_dtc_per_channel: int = Field(20, ge=1)
    channel_intervals: bool = True


class PolarisationConfig(Section):
    baseline_mode: BaselineMode = BaselineMode.POOLED
    leave_one_out: bool = Field(True, description="Also report the leave-one-channel-out baseline")
    profile_channel_mhz: float = TARGET_CHANNEL_MHZ
    profile_min_det: int = Field(5, ge=1)


class FineConfig(Section):
    channel_mhz: float = TARGET_CHANNEL_MHZ
    target_index: int = Field(TARGET_FINE_INDEX, ge=0, le=30)
    control_channels: List[float] = Field(default_factory=lambda: list(CONTROL_CHANNELS_MHZ))
    flux_basis: FluxBasis = FluxBasis.RAW
    alpha: float = Field(0.05, gt=0, lt=1)
    min_rows: int = Field(MIN_FINE_ROWS, ge=1)


class MechanismConfig(Section):
    fundamentals_khz: List[float] = Field(default_factory=lambda: list(CANDIDATE_FUNDAMENTALS_KHZ))
    crystal_fundamentals_khz: List[float] = Field(default_factory=lambda: list(CRYSTAL_FUNDAMENTALS_KHZ))
    tol_khz: float = Field(HALF_FINE_BIN_KHZ, gt=0)
    bright_quantile: float = Field(BRIGHT_QUANTILE, gt=0, lt=1)
    min_det: int = Field(MIN_DETECTIONS_PER_SATELLITE, ge=2)
    flux_basis: FluxBasis = FluxBasis.RAW


class EclipseConfig(Section):
    matched_launch_start: date = MATCHED_LAUNCH_WINDOW[0]
    matched_launch_end: date = MATCHED_LAUNCH_WINDOW[1]
    altitude_bin_start_km: float = 300.0
    altitude_bin_width_km: float = Field(56.0, gt=0)
    min_per_state_altitude: int = 5
    latitude_bins: int = Field(5, ge=1)
    min_per_state_latitude: int = 5
    min_per_state_frequency: int = 30
    min_per_state_satellite: int = 5
    include_strata: bool = True
    strata_resamples: Optional[int] = Field(None, ge=100)
    terminator_buffer_deg: float = Field(0.0, ge=0, description="0 disables the sensitivity re-run")

    @model_validator(mode="after")
    def _window_ordered(self) -> "EclipseConfig":
        if self.matched_launch_end < self.matched_launch_start:
            raise ValueError("Matched launch window must be ordered")
        return self


class ThermalConfig(Section):
    emissivity: float = Field(0.3, gt=0, le=1)
    temperature_k: float = Field(300.0, gt=0)
    area_m2: float = Field(100.0, gt=0)
    wavelength_m: float = Field(1.3, gt=0)
    range_m: float = Field(1.0e6, gt=0)


class SpectrumConfig(Section):
    norad_id: Optional[int] = Field(None, description="Satellite to plot; dynamic spectrum skipped when unset")
    channel_mhz: float = TARGET_CHANNEL_MHZ
    pass_gap_s: float = Field(PASS_GAP_S, gt=0)
    flux_basis: FluxBasis = FluxBasis.RANGE_CORRECTED


class RunConfig(Section):
    """Full run configuration; unknown keys are rejected."""
    schema_version: str = SCHEMA_VERSION
    paths: PathsConfig = Field(default_factory=PathsConfig)
    columns: Dict[str, str] = Field(default_factory=dict, description="Semantic field -> CSV header")
    site: SiteConfig = Field(default_factory=SiteConfig)
    geometry: GeometryConfig = Field(default_factory=GeometryConfig)
    stats: StatsConfig = Field(default_factory=StatsConfig)
    excess: ExcessConfig = Field(default_factory=ExcessConfig)
    polarisation: PolarisationConfig = Field(default_factory=PolarisationConfig)
    fine: FineConfig = Field(default_factory=FineConfig)
    mechanism: MechanismConfig = Field(default_factory=MechanismConfig)
    eclipse: EclipseConfig = Field(default_factory=EclipseConfig)
    thermal: ThermalConfig = Field(default_factory=ThermalConfig)
    spectrum: SpectrumConfig = Field(default_factory=SpectrumConfig)

    @field_validator("columns")
    @classmethod
    def _known_columns(cls, value: Dict[str, str]) -> Dict[str, str]:
        unknown = set(value) - set(DETECTION_FIELDS)
        if unknown:
            raise ValueError(f"Unknown detection fields: {sorted(unknown)}")
        return value


class AnalysisEnvelope(BaseModel):
    """Stored form of one analysis result."""
    schema_version: str = SCHEMA_VERSION
    analysis: str = Field(..., description="Registry name of the analysis")
    master_seed: int
    config: Dict[str, Any] = Field(..., description="RunConfig used for the run")
    source_digests: Dict[str, str] = Field(default_factory=dict)
    result: Dict[str, Any]
