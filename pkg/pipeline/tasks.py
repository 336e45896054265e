"""
Analysis Tasks Module - Registry and runner for stored analyses

This module maps analysis names to library calls, wraps each result in an
AnalysisEnvelope and writes it as sorted-key JSON next to plot-ready CSV
tables. Output bytes depend only on the catalogue, the config and the seed.
"""

import json
import logging
import math
from dataclasses import asdict, dataclass
from datetime import date
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from uemr_core.catalogue import Catalogue, population_summary, read_canonical
from uemr_core.eclipse import eclipse_analysis
from uemr_core.errors import AnalysisError
from uemr_core.excess import dtc_excess
from uemr_core.fine_channel import cross_channel_control, fine_channel_scan
from uemr_core.geometry import ObservatorySite, illuminated_fraction, tag_catalogue
from uemr_core.mechanism import mechanism_tests
from uemr_core.polarisation import BaselineMode, channel_polarisation_profile, polarisation_anomaly
from uemr_core.spectra import dynamic_spectrum, spectral_occupancy, thermal_flux_estimate

from .models import AnalysisEnvelope, RunConfig

logger = logging.getLogger(__name__)

CATALOGUE_DIR = "catalogue"
ANALYSES_DIR = "analyses"
CATALOGUE_SUMMARY = "catalogue"
CSV_FLOAT_FORMAT = "%.10g"


@dataclass(frozen=True)
class AnalysisTask:
    name: str
    run: Callable[[Optional[Catalogue], RunConfig], Dict]
    needs_catalogue: bool = True
    needs_geometry: bool = False
    tables: Optional[Callable[[Dict], Dict[str, pd.DataFrame]]] = None


# --------------------------------------------------
# (1) Analysis runners
# --------------------------------------------------

def _run_excess(catalogue: Catalogue, config: RunConfig) -> Dict:
    report = dtc_excess(catalogue, config.stats.n_resamples, config.stats.master_seed,
                        config.excess.min_dtc_per_channel, config.excess.channel_intervals,
                        config.stats.n_jobs)
    return report.to_dict()


def _run_polarisation(catalogue: Catalogue, config: RunConfig) -> Dict:
    section = config.polarisation
    primary = polarisation_anomaly(catalogue, section.baseline_mode, config.stats.q, config.stats.z)
    result = {"primary": primary.to_dict(), "leave_one_out": None, "profile": None}
    if section.leave_one_out and section.baseline_mode != BaselineMode.LEAVE_ONE_OUT:
        result["leave_one_out"] = polarisation_anomaly(catalogue, BaselineMode.LEAVE_ONE_OUT,
                                                       config.stats.q, config.stats.z).to_dict()
    try:
        result["profile"] = channel_polarisation_profile(catalogue, section.profile_channel_mhz,
                                                         section.profile_min_det).to_dict()
    except AnalysisError as exc:
        logger.warning(f"Polarisation profile skipped: {exc}")
    return result


def _run_occupancy(catalogue: Catalogue, config: RunConfig) -> Dict:
    channels = polarisation_anomaly(catalogue, config.polarisation.baseline_mode,
                                    config.stats.q, config.stats.z).channels
    return spectral_occupancy(catalogue, channels).to_dict()


def _run_fine(catalogue: Catalogue, config: RunConfig) -> Dict:
    section = config.fine
    scan = fine_channel_scan(catalogue, section.channel_mhz, section.target_index, section.flux_basis,
                             section.alpha, section.min_rows)
    controls = []
    notes = []
    for freq in section.control_channels:
        try:
            controls += cross_channel_control(catalogue, [freq], section.target_index,
                                              section.flux_basis, section.min_rows)
        except AnalysisError as exc:
            notes.append(str(exc))
            logger.warning(f"Control channel skipped: {exc}")
    return {"scan": scan.to_dict(), "controls": [asdict(c) for c in controls], "notes": notes}


def _run_mechanism(catalogue: Optional[Catalogue], config: RunConfig) -> Dict:
    section = config.mechanism
    return mechanism_tests(catalogue, section.fundamentals_khz, section.crystal_fundamentals_khz,
                           config.fine.channel_mhz, config.fine.target_index, section.tol_khz,
                           section.bright_quantile, section.min_det, section.flux_basis).to_dict()


def _run_t1(catalogue: Optional[Catalogue], config: RunConfig) -> Dict:
    return _run_mechanism(None, config)


def _run_eclipse(catalogue: Catalogue, config: RunConfig) -> Dict:
    section = config.eclipse
    report = eclipse_analysis(
        catalogue, config.stats.n_resamples, config.stats.master_seed,
        (section.matched_launch_start, section.matched_launch_end),
        section.altitude_bin_start_km, section.altitude_bin_width_km, section.min_per_state_altitude,
        section.latitude_bins, section.min_per_state_latitude, section.min_per_state_frequency,
        section.min_per_state_satellite, section.strata_resamples, section.include_strata,
        config.stats.n_jobs,
    )
    result = report.to_dict()
    result["illuminated_fraction"] = illuminated_fraction(catalogue)
    return result


def _run_thermal(catalogue: Optional[Catalogue], config: RunConfig) -> Dict:
    section = config.thermal
    flux = thermal_flux_estimate(section.emissivity, section.temperature_k, section.area_m2,
                                 section.wavelength_m, section.range_m)
    return {**section.model_dump(), "flux_jy": flux}


def _run_spectrum(catalogue: Catalogue, config: RunConfig) -> Dict:
    section = config.spectrum
    if section.norad_id is None:
        raise AnalysisError("spectrum.norad_id is not set")
    return dynamic_spectrum(catalogue, section.norad_id, section.channel_mhz, section.pass_gap_s,
                            section.flux_basis).to_dict()


# --------------------------------------------------
# (2) Plot-ready tables
# --------------------------------------------------

def _excess_tables(result: Dict) -> Dict[str, pd.DataFrame]:
    reductions = pd.DataFrame([
        {"reduction": name, "n_dtc": r["n_dtc"], "n_ku": r["n_ku"], "ratio": r["ratio"]["estimate"],
         "ci_low": r["ratio"]["ci_low"], "ci_high": r["ratio"]["ci_high"],
         "mwu_p": r["mwu"]["p_two_sided"], "cliffs_delta": r["mwu"]["cliffs_delta"]}
        for name, r in result["reductions"].items()
    ])
    return {"per_channel": pd.DataFrame(result["per_channel"]), "reductions": reductions}


def _polarisation_tables(result: Dict) -> Dict[str, pd.DataFrame]:
    tables = {"channels": pd.DataFrame(result["primary"]["channels"])}
    if result.get("leave_one_out"):
        tables["channels_leave_one_out"] = pd.DataFrame(result["leave_one_out"]["channels"])
    if result.get("profile"):
        tables["profile_satellites"] = pd.DataFrame(result["profile"]["per_satellite"])
    return tables


def _fine_tables(result: Dict) -> Dict[str, pd.DataFrame]:
    bins = pd.DataFrame(result["scan"]["per_bin"])
    bins["z"] = result["scan"]["z_by_bin"]
    return {"bins": bins, "controls": pd.DataFrame(result["controls"])}


def _mechanism_tables(result: Dict) -> Dict[str, pd.DataFrame]:
    tables = {"t1_matches": pd.DataFrame(result["t1"]["matches"])}
    if result.get("t3"):
        tables["t3_ratios"] = pd.DataFrame(result["t3"]["ratios"])
    return tables


def _eclipse_tables(result: Dict) -> Dict[str, pd.DataFrame]:
    strata = pd.DataFrame([
        {"dimension": s["dimension"], "population": s["population"], "low": s["low"], "high": s["high"],
         "n_illuminated": s["n_illuminated"], "n_eclipsed": s["n_eclipsed"],
         "ratio": s["ratio"]["estimate"], "ci_low": s["ratio"]["ci_low"], "ci_high": s["ratio"]["ci_high"]}
        for s in result["strata"]
    ])
    return {"per_satellite": pd.DataFrame(result["per_satellite"]), "strata": strata}


def _occupancy_tables(result: Dict) -> Dict[str, pd.DataFrame]:
    return {"channels": pd.DataFrame(result["channels"]), "regions": pd.DataFrame(result["regions"])}


def _spectrum_tables(result: Dict) -> Dict[str, pd.DataFrame]:
    frame = pd.DataFrame(result["matrix"], columns=[f"bin_{i}" for i in range(len(result["frequency_marginal"]))])
    frame.insert(0, "epoch_utc", result["epochs_utc"])
    frame["elevation_deg"] = result["elevation_deg"]
    frame["time_marginal"] = result["time_marginal"]
    return {"matrix": frame}


ANALYSES: Dict[str, AnalysisTask] = {
    "excess": AnalysisTask("excess", _run_excess, tables=_excess_tables),
    "polarisation": AnalysisTask("polarisation", _run_polarisation, tables=_polarisation_tables),
    "occupancy": AnalysisTask("occupancy", _run_occupancy, tables=_occupancy_tables),
    "fine": AnalysisTask("fine", _run_fine, tables=_fine_tables),
    "mechanism": AnalysisTask("mechanism", _run_mechanism, tables=_mechanism_tables),
    "t1": AnalysisTask("t1", _run_t1, needs_catalogue=False, tables=_mechanism_tables),
    "eclipse": AnalysisTask("eclipse", _run_eclipse, needs_geometry=True, tables=_eclipse_tables),
    "thermal": AnalysisTask("thermal", _run_thermal, needs_catalogue=False),
    "spectrum": AnalysisTask("spectrum", _run_spectrum, tables=_spectrum_tables),
}

ALL_ANALYSES = ["excess", "polarisation", "occupancy", "fine", "mechanism", "eclipse", "thermal"]


# --------------------------------------------------
# (3) Serialisation
# --------------------------------------------------

def _jsonable(value: Any) -> Any:
    """Plain JSON types; non-finite floats become null."""
    if isinstance(value, dict):
        return {str(k.value if isinstance(k, Enum) else k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value) if math.isfinite(value) else None
    if isinstance(value, (date, pd.Timestamp)):
        return value.isoformat()
    return value


def envelope_json(envelope: AnalysisEnvelope) -> str:
    return json.dumps(_jsonable(envelope.model_dump()), indent=2, sort_keys=True) + "\n"


def write_envelope(envelope: AnalysisEnvelope, directory: Path,
                   tables: Optional[Dict[str, pd.DataFrame]] = None) -> List[Path]:
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{envelope.analysis}.json"
    path.write_text(envelope_json(envelope))
    written = [path]
    for name, frame in (tables or {}).items():
        table_path = directory / f"{envelope.analysis}_{name}.csv"
        frame.to_csv(table_path, index=False, float_format=CSV_FLOAT_FORMAT)
        written.append(table_path)
    return written


def read_envelope(path: Path) -> AnalysisEnvelope:
    return AnalysisEnvelope.model_validate_json(path.read_text())


def make_envelope(name: str, result: Dict, config: RunConfig,
                  catalogue: Optional[Catalogue] = None) -> AnalysisEnvelope:
    return AnalysisEnvelope(
        analysis=name, master_seed=config.stats.master_seed,
        config=config.model_dump(mode="json"),
        source_digests=dict(catalogue.provenance.source_digests) if catalogue is not None else {},
        result=_jsonable(result),
    )


# --------------------------------------------------
# (4) Runner
# --------------------------------------------------

def site_from_config(config: RunConfig) -> ObservatorySite:
    return ObservatorySite(config.site.lat_deg, config.site.lon_deg, config.site.height_m)


def tag_with_config(catalogue: Catalogue, config: RunConfig) -> Catalogue:
    return tag_catalogue(catalogue, site_from_config(config), config.geometry.earth_radius_m,
                         config.eclipse.terminator_buffer_deg)


def catalogue_summary(catalogue: Catalogue) -> Dict:
    """Population table and provenance, stored for the report."""
    return {"populations": population_summary(catalogue),
            "provenance": catalogue.provenance.to_dict(),
            "n_events": int(len(catalogue)),
            "n_stacked": int(len(catalogue.stacked()))}


def resolve_analyses(which: str) -> List[str]:
    if which == "all":
        return list(ALL_ANALYSES)
    if which not in ANALYSES:
        raise KeyError(which)
    return [which]


def run_analyses(names: List[str], config: RunConfig, out_dir: Path) -> Dict[str, Path]:
    """
    Run the named analyses and write one envelope per analysis.

    Args:
        names: registry names
        config: run configuration
        out_dir: root output directory holding the canonical catalogue

    Returns:
        Mapping name -> written JSON path.
    """
    tasks = [ANALYSES[name] for name in names]
    catalogue: Optional[Catalogue] = None
    if any(task.needs_catalogue for task in tasks):
        catalogue = read_canonical(out_dir / CATALOGUE_DIR)
        if any(task.needs_geometry for task in tasks) and not catalogue.is_tagged:
            logger.info("Catalogue not tagged; computing illumination state on the fly")
            catalogue = tag_with_config(catalogue, config)

    written: Dict[str, Path] = {}
    for task in tasks:
        logger.info(f"Running analysis {task.name}")
        result = task.run(catalogue if task.needs_catalogue else None, config)
        envelope = make_envelope(task.name, result, config, catalogue if task.needs_catalogue else None)
        tables = task.tables(envelope.result) if task.tables else None
        written[task.name] = write_envelope(envelope, out_dir / ANALYSES_DIR, tables)[0]
    return written
