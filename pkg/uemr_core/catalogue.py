"""
Catalogue Module - Detection ingestion, population labelling and range correction

This module provides the first stage of the analysis chain:
- CSV parsing of per-detection rows with row-level reject tallies
- Bus table parsing (NORAD id -> bus label, launch date)
- Population classification from the bus label
- Quality cuts with an auditable removal tally
- Range correction of flux densities to a reference distance
- Canonical on-disk persistence of the resulting catalogue
"""

import hashlib
import io
import json
import logging
from dataclasses import asdict, dataclass, field, replace
from datetime import date
from enum import Enum
from pathlib import Path
from typing import BinaryIO, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .errors import CatalogueError

logger = logging.getLogger(__name__)

STACKED_INDEX = 31
REFERENCE_RANGE_KM = 1000.0

Source = Union[bytes, BinaryIO, str, Path]


class Population(str, Enum):
    """Satellite population derived from the bus label."""
    DTC = "DTC"
    KU_ONLY = "KuOnly"
    V1X = "V1x"
    UNCLASSIFIED = "Unclassified"


class PolFeed(str, Enum):
    """Station polarisation feed."""
    XX = "XX"
    YY = "YY"


class FluxBasis(str, Enum):
    """Which flux column a statistic is computed on."""
    RAW = "raw"
    RANGE_CORRECTED = "range_corrected"


BUS_POPULATIONS: Dict[str, Population] = {
    "V2MD": Population.DTC,
    "V2M": Population.KU_ONLY,
    "V1.0": Population.V1X,
    "V1.5": Population.V1X,
}

ANALYSED_POPULATIONS: Tuple[Population, ...] = (Population.DTC, Population.KU_ONLY)

# Semantic field -> (default header, label used in reject reasons)
DETECTION_FIELDS: Dict[str, Tuple[str, str]] = {
    "norad_id": ("norad_id", "norad"),
    "utc": ("utc", "epoch"),
    "freq_mhz": ("freq_mhz", "freq"),
    "fine_channel_index": ("fine_channel_index", "fine channel"),
    "pol": ("pol", "pol"),
    "flux_jy": ("flux_jy", "flux"),
    "azimuth_deg": ("azimuth_deg", "azimuth"),
    "elevation_deg": ("elevation_deg", "elevation"),
    "range_km": ("range_km", "range"),
}

DEFAULT_COLUMN_MAP: Dict[str, str] = {k: v[0] for k, v in DETECTION_FIELDS.items()}

EVENT_COLUMNS = [
    "norad_id", "epoch_utc", "freq_mhz", "fine_channel_index", "pol_feed",
    "flux_jy", "azimuth_deg", "elevation_deg", "range_km",
]

_POL_ALIASES = {"XX": "XX", "X": "XX", "0": "XX", "YY": "YY", "Y": "YY", "1": "YY"}

_BUS_NORAD_ALIASES = ("norad_id", "norad", "satcat", "#satcat")
_BUS_LABEL_ALIASES = ("bus",)
_BUS_LAUNCH_ALIASES = ("launch_date", "ldate", "launch")


@dataclass(frozen=True)
class DetectionEvent:
    """One catalogue row."""
    norad_id: int
    epoch_utc: pd.Timestamp
    freq_mhz: float
    fine_channel_index: int
    pol_feed: PolFeed
    flux_jy: float
    azimuth_deg: float
    elevation_deg: float
    range_km: float

    @property
    def is_stacked(self) -> bool:
        return self.fine_channel_index == STACKED_INDEX


@dataclass(frozen=True)
class SatelliteRecord:
    """Per-satellite identity and detection count."""
    norad_id: int
    bus_label: Optional[str]
    population: Population
    launch_date: Optional[date]
    n_detections: int


@dataclass(frozen=True)
class BusEntry:
    bus_label: str
    launch_date: Optional[date]


@dataclass(frozen=True)
class BusTable:
    """Parsed bus table; behaves as a read-only mapping norad_id -> BusEntry."""
    entries: Dict[int, BusEntry]
    n_duplicates: int = 0
    n_invalid: int = 0
    digest: str = ""

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, norad_id: int) -> BusEntry:
        return self.entries[norad_id]

    def __contains__(self, norad_id: object) -> bool:
        return norad_id in self.entries

    def __iter__(self) -> Iterator[int]:
        return iter(self.entries)

    def get(self, norad_id: int, default: Optional[BusEntry] = None) -> Optional[BusEntry]:
        return self.entries.get(norad_id, default)

    def items(self):
        return self.entries.items()


@dataclass(frozen=True)
class RejectedRow:
    row: int
    reason: str


@dataclass(frozen=True)
class Provenance:
    """Source digests, reject and cut tallies."""
    source_digests: Dict[str, str] = field(default_factory=dict)
    n_rows_read: int = 0
    rejects: Tuple[RejectedRow, ...] = ()
    duplicate_bus_rows: int = 0
    population_counts: Dict[str, int] = field(default_factory=dict)
    cut_tally: Dict[str, int] = field(default_factory=dict)
    n_analysed_detections: int = 0
    reference_range_km: Optional[float] = None
    tagged: bool = False

    @property
    def reject_counts(self) -> Dict[str, int]:
        counts: Dict[str, int] = {}
        for rejected in self.rejects:
            counts[rejected.reason] = counts.get(rejected.reason, 0) + 1
        return counts

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["reject_counts"] = self.reject_counts
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> "Provenance":
        data = dict(data)
        data.pop("reject_counts", None)
        data["rejects"] = tuple(RejectedRow(**r) for r in data.get("rejects", []))
        return cls(**data)


@dataclass(frozen=True)
class Catalogue:
    """
    Immutable detection catalogue.

    ``events`` holds one row per DetectionEvent (columns EVENT_COLUMNS plus
    derived columns added by later stages). Rows at fine index 31 are the
    stacked detections, rows 0-30 the fine-channel rows.
    """
    events: pd.DataFrame
    satellites: Dict[int, SatelliteRecord] = field(default_factory=dict)
    provenance: Provenance = field(default_factory=Provenance)

    def __len__(self) -> int:
        return len(self.events)

    @property
    def is_classified(self) -> bool:
        return "population" in self.events.columns

    @property
    def is_range_corrected(self) -> bool:
        return "s_norm_jy" in self.events.columns

    @property
    def is_tagged(self) -> bool:
        return "illuminated" in self.events.columns

    def stacked(self) -> pd.DataFrame:
        return self.events[self.events["fine_channel_index"] == STACKED_INDEX]

    def fine(self) -> pd.DataFrame:
        return self.events[self.events["fine_channel_index"] < STACKED_INDEX]

    def analysed(self, stacked: bool = True) -> pd.DataFrame:
        """Events of the analysed v2-Mini populations (DTC and Ku-only)."""
        if not self.is_classified:
            raise CatalogueError("Catalogue must be classified before selecting the analysed subset")
        frame = self.stacked() if stacked else self.fine()
        mask = frame["population"].isin([p.value for p in ANALYSED_POPULATIONS])
        return frame[mask]

    def with_events(self, events: pd.DataFrame, **changes) -> "Catalogue":
        provenance = changes.pop("provenance", self.provenance)
        satellites = changes.pop("satellites", self.satellites)
        return Catalogue(events=events.reset_index(drop=True),
                         satellites=satellites, provenance=provenance)

    def iter_events(self) -> Iterator[DetectionEvent]:
        for row in self.events[EVENT_COLUMNS].itertuples(index=False):
            yield DetectionEvent(
                norad_id=int(row.norad_id),
                epoch_utc=row.epoch_utc,
                freq_mhz=float(row.freq_mhz),
                fine_channel_index=int(row.fine_channel_index),
                pol_feed=PolFeed(row.pol_feed),
                flux_jy=float(row.flux_jy),
                azimuth_deg=float(row.azimuth_deg),
                elevation_deg=float(row.elevation_deg),
                range_km=float(row.range_km),
            )

    def channels(self) -> List[float]:
        return sorted(float(f) for f in self.stacked()["freq_mhz"].unique())


def _read_bytes(source: Source) -> bytes:
    if isinstance(source, bytes):
        return source
    if isinstance(source, (str, Path)):
        path = Path(source)
        if not path.is_file():
            raise CatalogueError(f"Input file not found: {path}")
        return path.read_bytes()
    return source.read()


def _digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def match_channel(frame: pd.DataFrame, freq_mhz: float, tolerance_mhz: float = 0.05) -> pd.DataFrame:
    """Rows whose coarse channel centre lies within tolerance of freq_mhz."""
    return frame[np.abs(frame["freq_mhz"].to_numpy() - freq_mhz) <= tolerance_mhz]


# --------------------------------------------------
# Parsing
# --------------------------------------------------

def parse_detections(source: Source,
                     column_map: Optional[Dict[str, str]] = None,
                     source_name: str = "detections") -> Catalogue:
    """
    Parse the per-detection CSV into an (unclassified) Catalogue.

    Args:
        source: CSV bytes, binary stream or path, with a header row
        column_map: semantic field -> header name; missing keys use DEFAULT_COLUMN_MAP
        source_name: key under which the source digest is recorded

    Returns:
        Catalogue holding one event per valid row; invalid rows are recorded
        in ``provenance.rejects`` with a reason code.
    """
    mapping = dict(DEFAULT_COLUMN_MAP)
    if column_map:
        unknown = set(column_map) - set(DETECTION_FIELDS)
        if unknown:
            raise CatalogueError(f"Unknown detection fields in column map: {sorted(unknown)}")
        mapping.update(column_map)

    data = _read_bytes(source)
    try:
        raw = pd.read_csv(io.BytesIO(data), dtype=str, keep_default_na=False, encoding="utf-8")
    except (pd.errors.EmptyDataError, pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise CatalogueError(f"Cannot read detection CSV: {exc}") from exc

    raw.columns = [c.strip() for c in raw.columns]
    missing = [f"{name} -> {header}" for name, header in mapping.items() if header not in raw.columns]
    if missing:
        raise CatalogueError(f"Detection CSV lacks mapped columns: {', '.join(missing)}")

    n_rows = len(raw)
    reasons = pd.Series([""] * n_rows, index=raw.index, dtype=object)
    parsed: Dict[str, pd.Series] = {}

    def flag(mask: pd.Series, reason: str) -> None:
        fresh = mask & (reasons == "")
        reasons[fresh] = reason

    for name, (_, label) in DETECTION_FIELDS.items():
        text = raw[mapping[name]].str.strip()
        empty = text == ""
        flag(empty, f"missing {label}")

        if name == "utc":
            values = pd.to_datetime(text.where(~empty), utc=True, errors="coerce", format="ISO8601")
            flag(values.isna() & ~empty, f"unparsable {label}")
        elif name == "pol":
            values = text.str.upper().map(_POL_ALIASES)
            flag(values.isna() & ~empty, f"unparsable {label}")
        else:
            values = pd.to_numeric(text.where(~empty), errors="coerce")
            bad = values.isna() & ~empty
            flag(bad, f"unparsable {label}")
            if name in ("norad_id", "fine_channel_index"):
                non_integral = values.notna() & (values != np.floor(values))
                flag(non_integral, f"unparsable {label}")
            if name == "norad_id":
                flag(values.notna() & (values <= 0), f"invalid {label}")
            elif name == "fine_channel_index":
                flag(values.notna() & ((values < 0) | (values > STACKED_INDEX)), f"invalid {label}")
            elif name == "elevation_deg":
                flag(values.notna() & ((values <= 0) | (values > 90)), f"invalid {label}")
            elif name in ("flux_jy", "range_km", "azimuth_deg", "freq_mhz"):
                flag(values.notna() & ~np.isfinite(values.astype(float)), f"missing {label}")
        parsed[name] = values

    valid = reasons == ""
    rejects = tuple(
        RejectedRow(row=int(i) + 1, reason=str(reasons[i]))
        for i in raw.index[~valid]
    )

    events = pd.DataFrame({
        "norad_id": parsed["norad_id"][valid].astype("int64"),
        "epoch_utc": parsed["utc"][valid],
        "freq_mhz": parsed["freq_mhz"][valid].astype(float),
        "fine_channel_index": parsed["fine_channel_index"][valid].astype("int64"),
        "pol_feed": parsed["pol"][valid].astype(str),
        "flux_jy": parsed["flux_jy"][valid].astype(float),
        "azimuth_deg": np.mod(parsed["azimuth_deg"][valid].astype(float), 360.0),
        "elevation_deg": parsed["elevation_deg"][valid].astype(float),
        "range_km": parsed["range_km"][valid].astype(float),
    }).reset_index(drop=True)

    if rejects:
        logger.warning(f"Rejected {len(rejects)} of {n_rows} detection rows")
    logger.info(f"Parsed {len(events)} detection rows "
                f"({int((events['fine_channel_index'] == STACKED_INDEX).sum())} stacked)")

    provenance = Provenance(
        source_digests={source_name: _digest(data)},
        n_rows_read=n_rows,
        rejects=rejects,
    )
    return Catalogue(events=events, provenance=provenance)


def _find_column(columns: Sequence[str], aliases: Sequence[str]) -> Optional[str]:
    lowered = {c.strip().lower(): c for c in columns}
    for alias in aliases:
        if alias in lowered:
            return lowered[alias]
    return None


def parse_bus_table(source: Source) -> BusTable:
    """
    Parse a tab- or comma-separated bus table.

    Args:
        source: table bytes, binary stream or path

    Returns:
        BusTable mapping norad_id -> BusEntry; duplicate ids keep the last row.
    """
    data = _read_bytes(source)
    text = data.decode("utf-8")
    first_line = text.splitlines()[0] if text.strip() else ""
    separator = "\t" if "\t" in first_line else ","
    try:
        raw = pd.read_csv(io.StringIO(text), sep=separator, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError as exc:
        raise CatalogueError("Bus table is empty") from exc

    norad_col = _find_column(raw.columns, _BUS_NORAD_ALIASES)
    bus_col = _find_column(raw.columns, _BUS_LABEL_ALIASES)
    launch_col = _find_column(raw.columns, _BUS_LAUNCH_ALIASES)
    if norad_col is None or bus_col is None:
        raise CatalogueError(f"Bus table needs norad and bus columns, found {list(raw.columns)}")
    if raw.empty:
        raise CatalogueError("Bus table is empty")

    norads = pd.to_numeric(raw[norad_col].str.strip(), errors="coerce")
    launches = (pd.to_datetime(raw[launch_col].str.strip(), errors="coerce", format="%Y-%m-%d")
                if launch_col is not None else pd.Series([pd.NaT] * len(raw)))

    entries: Dict[int, BusEntry] = {}
    n_duplicates = 0
    n_invalid = 0
    for norad, bus, launch in zip(norads, raw[bus_col].str.strip(), launches):
        if pd.isna(norad) or norad <= 0 or norad != int(norad):
            n_invalid += 1
            continue
        key = int(norad)
        if key in entries:
            n_duplicates += 1
        entries[key] = BusEntry(bus_label=bus,
                                launch_date=None if pd.isna(launch) else launch.date())

    if not entries:
        raise CatalogueError("Bus table has no valid rows")
    if n_duplicates:
        logger.warning(f"Bus table has {n_duplicates} duplicate NORAD ids (last row wins)")
    if n_invalid:
        logger.warning(f"Bus table has {n_invalid} rows without a valid NORAD id")

    return BusTable(entries=entries, n_duplicates=n_duplicates,
                    n_invalid=n_invalid, digest=_digest(data))


# --------------------------------------------------
# Classification and cuts
# --------------------------------------------------

def population_for_bus(bus_label: Optional[str]) -> Population:
    if bus_label is None:
        return Population.UNCLASSIFIED
    return BUS_POPULATIONS.get(bus_label, Population.UNCLASSIFIED)


def classify(catalogue: Catalogue, bus_map: BusTable) -> Catalogue:
    """
    Label every event and satellite with its population.

    Args:
        catalogue: parsed catalogue
        bus_map: parsed bus table

    Returns:
        New Catalogue with ``bus_label`` / ``population`` columns and
        SatelliteRecords for every NORAD id present.
    """
    if len(bus_map) == 0:
        raise CatalogueError("Bus map is empty")

    events = catalogue.events.copy()
    norads = events["norad_id"].unique()
    labels = {int(n): (bus_map.get(int(n)).bus_label if int(n) in bus_map else None) for n in norads}
    events["bus_label"] = events["norad_id"].map(labels)
    events["population"] = events["bus_label"].map(lambda b: population_for_bus(b).value)

    stacked_counts = (events[events["fine_channel_index"] == STACKED_INDEX]
                      .groupby("norad_id").size().to_dict())
    satellites: Dict[int, SatelliteRecord] = {}
    for norad in sorted(int(n) for n in norads):
        entry = bus_map.get(norad)
        satellites[norad] = SatelliteRecord(
            norad_id=norad,
            bus_label=entry.bus_label if entry else None,
            population=population_for_bus(entry.bus_label if entry else None),
            launch_date=entry.launch_date if entry else None,
            n_detections=int(stacked_counts.get(norad, 0)),
        )

    stacked = events[events["fine_channel_index"] == STACKED_INDEX]
    population_counts = {p.value: int((stacked["population"] == p.value).sum()) for p in Population}
    logger.info(f"Classified detections by population: {population_counts}")

    digests = dict(catalogue.provenance.source_digests)
    if bus_map.digest:
        digests["bus_table"] = bus_map.digest
    provenance = replace(catalogue.provenance,
                         source_digests=digests,
                         duplicate_bus_rows=bus_map.n_duplicates,
                         population_counts=population_counts)
    return catalogue.with_events(events, satellites=satellites, provenance=provenance)


def apply_quality_cuts(catalogue: Catalogue) -> Catalogue:
    """
    Remove events with missing or non-positive range or flux.

    Events outside the analysed populations are kept for audit; the number of
    stacked detections they contribute is tallied under
    ``excluded population <name>``.

    Args:
        catalogue: classified catalogue

    Returns:
        New Catalogue with the per-cut tally in its provenance.
    """
    if not catalogue.is_classified:
        raise CatalogueError("Quality cuts need a classified catalogue")

    events = catalogue.events
    tally: Dict[str, int] = {}
    keep = np.ones(len(events), dtype=bool)
    for column, label in (("range_km", "range"), ("flux_jy", "flux")):
        values = events[column].to_numpy(dtype=float)
        missing = ~np.isfinite(values) & keep
        tally[f"missing {label}"] = int(missing.sum())
        keep &= ~missing
        nonpositive = keep & (values <= 0)
        tally[f"nonpositive {label}"] = int(nonpositive.sum())
        keep &= ~nonpositive

    kept = events[keep]
    stacked = kept[kept["fine_channel_index"] == STACKED_INDEX]
    for population in Population:
        if population in ANALYSED_POPULATIONS:
            continue
        tally[f"excluded population {population.value}"] = int((stacked["population"] == population.value).sum())

    analysed = int(stacked["population"].isin([p.value for p in ANALYSED_POPULATIONS]).sum())
    logger.info(f"Quality cuts: {tally}; {analysed} analysed detections retained")

    provenance = replace(catalogue.provenance, cut_tally=tally, n_analysed_detections=analysed)
    if keep.all():
        return catalogue.with_events(events, provenance=provenance)
    return catalogue.with_events(kept, provenance=provenance)


def range_correct(s_obs, r_sat, r_ref: float = REFERENCE_RANGE_KM):
    """
    Scale observed flux density to a reference range.

    Args:
        s_obs: observed flux density (Jy), scalar or array
        r_sat: line-of-sight range (km), scalar or array
        r_ref: reference range (km)

    Returns:
        S_norm = S_obs * (r_sat / r_ref)**2
    """
    r = np.asarray(r_sat, dtype=float)
    if r_ref <= 0:
        raise ValueError("Reference range must be positive")
    if np.any(~(r > 0)):
        raise ValueError("Satellite range must be positive")
    result = np.asarray(s_obs, dtype=float) * (r / r_ref) ** 2
    return float(result) if result.ndim == 0 else result


def range_correct_catalogue(catalogue: Catalogue, r_ref: float = REFERENCE_RANGE_KM) -> Catalogue:
    """Add the ``s_norm_jy`` column to every event."""
    events = catalogue.events.copy()
    events["s_norm_jy"] = range_correct(events["flux_jy"].to_numpy(), events["range_km"].to_numpy(), r_ref)
    provenance = replace(catalogue.provenance, reference_range_km=r_ref)
    return catalogue.with_events(events, provenance=provenance)


def load_catalogue(detections: Source, bus_table: Source,
                   column_map: Optional[Dict[str, str]] = None,
                   r_ref: float = REFERENCE_RANGE_KM) -> Catalogue:
    """Parse, classify, cut and range-correct in one call."""
    bus_map = parse_bus_table(bus_table)
    catalogue = parse_detections(detections, column_map)
    catalogue = classify(catalogue, bus_map)
    catalogue = apply_quality_cuts(catalogue)
    return range_correct_catalogue(catalogue, r_ref)


# --------------------------------------------------
# Summaries
# --------------------------------------------------

def flux_column(basis: FluxBasis) -> str:
    return "s_norm_jy" if FluxBasis(basis) == FluxBasis.RANGE_CORRECTED else "flux_jy"


def per_satellite_median(catalogue: Catalogue, population: Population,
                         statistic_basis: FluxBasis = FluxBasis.RANGE_CORRECTED) -> List[Tuple[int, float]]:
    """
    Per-satellite median flux of the stacked detections of one population.

    Args:
        catalogue: classified (and, for range_corrected, range-corrected) catalogue
        population: population to summarise
        statistic_basis: raw or range-corrected flux

    Returns:
        List of (norad_id, median) sorted by NORAD id; empty if the population
        has no detections.
    """
    column = flux_column(statistic_basis)
    stacked = catalogue.stacked()
    subset = stacked[stacked["population"] == Population(population).value]
    if subset.empty:
        return []
    medians = subset.groupby("norad_id")[column].median().sort_index()
    return [(int(n), float(m)) for n, m in medians.items()]


def population_summary(catalogue: Catalogue) -> List[Dict]:
    """Per-population bus labels, satellite and detection counts (stacked rows)."""
    stacked = catalogue.stacked()
    rows = []
    for population in Population:
        subset = stacked[stacked["population"] == population.value]
        labels = sorted({str(b) for b in subset["bus_label"].dropna().unique()})
        rows.append({
            "population": population.value,
            "bus_labels": labels,
            "n_satellites": int(subset["norad_id"].nunique()),
            "n_detections": int(len(subset)),
        })
    return rows


# --------------------------------------------------
# Canonical persistence
# --------------------------------------------------

EVENTS_FILE = "catalogue_events.csv"
SATELLITES_FILE = "catalogue_satellites.csv"
PROVENANCE_FILE = "catalogue_provenance.json"


def write_canonical(catalogue: Catalogue, directory: Union[str, Path]) -> List[Path]:
    """Write events, satellites and provenance; returns the written paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    events = catalogue.events.copy()
    events["epoch_utc"] = events["epoch_utc"].dt.strftime("%Y-%m-%dT%H:%M:%S.%fZ")
    satellites = pd.DataFrame([
        {
            "norad_id": s.norad_id,
            "bus_label": s.bus_label or "",
            "population": s.population.value,
            "launch_date": s.launch_date.isoformat() if s.launch_date else "",
            "n_detections": s.n_detections,
        }
        for s in catalogue.satellites.values()
    ], columns=["norad_id", "bus_label", "population", "launch_date", "n_detections"])

    paths = [directory / EVENTS_FILE, directory / SATELLITES_FILE, directory / PROVENANCE_FILE]
    staged = [p.with_suffix(p.suffix + ".tmp") for p in paths]
    events.to_csv(staged[0], index=False)
    satellites.to_csv(staged[1], index=False)
    staged[2].write_text(json.dumps(catalogue.provenance.to_dict(), indent=2, sort_keys=True) + "\n")
    for tmp, final in zip(staged, paths):
        tmp.replace(final)
    return paths


def read_canonical(directory: Union[str, Path]) -> Catalogue:
    """Load a catalogue written by write_canonical."""
    directory = Path(directory)
    for name in (EVENTS_FILE, SATELLITES_FILE, PROVENANCE_FILE):
        if not (directory / name).is_file():
            raise CatalogueError(f"Canonical catalogue file missing: {directory / name}")

    events = pd.read_csv(directory / EVENTS_FILE, keep_default_na=True)
    events["epoch_utc"] = pd.to_datetime(events["epoch_utc"], utc=True, format="ISO8601")
    for column in ("bus_label",):
        if column in events.columns:
            events[column] = events[column].astype(object).where(events[column].notna(), None)

    satellites_frame = pd.read_csv(directory / SATELLITES_FILE, dtype=str, keep_default_na=False)
    satellites: Dict[int, SatelliteRecord] = {}
    for row in satellites_frame.itertuples(index=False):
        satellites[int(row.norad_id)] = SatelliteRecord(
            norad_id=int(row.norad_id),
            bus_label=row.bus_label or None,
            population=Population(row.population),
            launch_date=date.fromisoformat(row.launch_date) if row.launch_date else None,
            n_detections=int(row.n_detections),
        )

    provenance = Provenance.from_dict(json.loads((directory / PROVENANCE_FILE).read_text()))
    return Catalogue(events=events, satellites=satellites, provenance=provenance)
