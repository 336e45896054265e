"""
UEMR Core - Forensic analysis of satellite unintended electromagnetic radiation

A Python library that takes a per-detection radio catalogue from ingestion
through population labelling, range correction and illumination geometry to
the statistical comparisons of Direct-to-Cell and Ku-only satellites.
"""

from .catalogue import (Catalogue, FluxBasis, Population, classify, apply_quality_cuts, load_catalogue,
                        parse_bus_table, parse_detections, range_correct, range_correct_catalogue)
from .eclipse import eclipse_analysis, time_avg_factor
from .errors import AnalysisError, CatalogueError, GeometryError, UemrError
from .excess import dtc_excess
from .fine_channel import cross_channel_control, fine_channel_scan
from .geometry import ObservatorySite, illumination_state, solar_position_ecef, tag_catalogue
from .mechanism import mechanism_tests, t1_harmonic_coincidence, t2_adjacent_bin, t3_satellite_ratios
from .polarisation import BaselineMode, polarisation_anomaly
from .spectra import dynamic_spectrum, spectral_occupancy, thermal_flux_estimate
from .stats import (bh_fdr, binom_two_sided, bootstrap_median_ratio, cliffs_delta, cluster_bootstrap_ratio,
                    interaction_test, mann_whitney, wilson_interval)
from .synth import GroundTruth, SynthSpec, generate

# Version info
__version__ = "1.0.0"

# Public API
__all__ = [
    "Catalogue", "FluxBasis", "Population", "parse_detections", "parse_bus_table", "classify",
    "apply_quality_cuts", "range_correct", "range_correct_catalogue", "load_catalogue",
    "ObservatorySite", "solar_position_ecef", "illumination_state", "tag_catalogue",
    "mann_whitney", "cliffs_delta", "bootstrap_median_ratio", "cluster_bootstrap_ratio",
    "interaction_test", "binom_two_sided", "bh_fdr", "wilson_interval",
    "dtc_excess", "BaselineMode", "polarisation_anomaly", "fine_channel_scan", "cross_channel_control",
    "t1_harmonic_coincidence", "t2_adjacent_bin", "t3_satellite_ratios", "mechanism_tests",
    "eclipse_analysis", "time_avg_factor", "thermal_flux_estimate", "dynamic_spectrum",
    "spectral_occupancy", "SynthSpec", "GroundTruth", "generate",
    "UemrError", "CatalogueError", "GeometryError", "AnalysisError",
]
