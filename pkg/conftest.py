"""
Shared fixtures for the UEMR test-suite

Provides:
1. A hand-written detection CSV and bus table covering every population and
   the common reject reasons
2. Session-scoped synthetic catalogues (null, injector, eclipse reversal)
3. Cleanup of log handlers installed by the CLI during a test
"""

import logging

import pytest

from uemr_core.catalogue import Population, load_catalogue
from uemr_core.synth import FluxLaw, Injector, SynthSpec, generate

DETECTION_HEADER = "norad_id,utc,freq_mhz,fine_channel_index,pol,flux_jy,azimuth_deg,elevation_deg,range_km"

DETECTION_ROWS = [
    "1001,2025-01-10T12:00:00Z,230.46875,31,XX,80.0,10.0,45.0,800.0",
    "1001,2025-01-10T12:00:10Z,230.46875,31,YY,60.0,12.0,46.0,790.0",
    "1002,2025-01-10T13:00:00Z,150.78125,31,X,20.0,200.0,30.0,1000.0",
    "1002,2025-01-10T13:00:10Z,150.78125,31,Y,-5.0,201.0,31.0,990.0",
    "1003,2025-01-11T01:00:00Z,161.71875,31,XX,15.0,90.0,60.0,600.0",
    "1004,2025-01-11T02:00:00Z,161.71875,31,YY,12.0,95.0,50.0,650.0",
    "1001,2025-01-10T12:00:00Z,230.46875,22,XX,9.0,10.0,45.0,800.0",
    "1002,notadate,150.78125,31,XX,20.0,200.0,30.0,1000.0",
    "1002,2025-01-10T13:00:20Z,150.78125,31,XX,20.0,200.0,0.0,1000.0",
    "1001,2025-01-10T12:00:20Z,230.46875,31,XX,,10.0,45.0,800.0",
]

BUS_TABLE_TSV = (
    "norad_id\tbus\tlaunch_date\n"
    "1001\tV2MD\t2024-03-01\n"
    "1002\tV2M\t2024-02-01\n"
    "1003\tV1.5\t2020-01-01\n"
    "1002\tV2M\t2024-02-02\n"
)

TARGET_MHZ = 230.46875
CONTROL_MHZ = 229.6875


def detection_csv(rows=DETECTION_ROWS, header: str = DETECTION_HEADER) -> bytes:
    return ("\n".join([header, *rows]) + "\n").encode("utf-8")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: multi-seed statistical checks")


@pytest.fixture(autouse=True)
def remove_cli_log_handlers():
    """Drop stream handlers that configure_logging attached during the test."""
    root = logging.getLogger()
    before = set(root.handlers)
    level = root.level
    yield
    for handler in list(root.handlers):
        if handler not in before and type(handler) is logging.StreamHandler:
            root.removeHandler(handler)
    root.setLevel(level)


@pytest.fixture
def detection_bytes() -> bytes:
    return detection_csv()


@pytest.fixture
def bus_table_bytes() -> bytes:
    return BUS_TABLE_TSV.encode("utf-8")


@pytest.fixture
def small_catalogue(detection_bytes, bus_table_bytes):
    return load_catalogue(detection_bytes, bus_table_bytes)


# --------------------------------------------------
# Synthetic catalogues
# --------------------------------------------------

def null_spec(seed: int, **changes) -> SynthSpec:
    """Equal flux laws, unpolarised, no injector."""
    fields = dict(
        seed=seed,
        n_satellites={Population.DTC: 40, Population.KU_ONLY: 120},
        detections_mean=15,
        channels_mhz=[150.78125, 161.71875, 200.0, TARGET_MHZ],
        fine_channels_mhz=[TARGET_MHZ],
    )
    fields.update(changes)
    return SynthSpec(**fields)


def injector_spec(seed: int, **changes) -> SynthSpec:
    """Single-bin tone on 55% of satellites at the target channel."""
    fields = dict(
        seed=seed,
        n_satellites={Population.DTC: 40, Population.KU_ONLY: 80},
        detections_mean=20,
        channels_mhz=[CONTROL_MHZ, TARGET_MHZ],
        fine_channels_mhz=[CONTROL_MHZ, TARGET_MHZ],
        injector=Injector(channel_mhz=TARGET_MHZ, fine_index=22, amplitude=1.0, duty_fraction=0.55),
    )
    fields.update(changes)
    return SynthSpec(**fields)


def reversal_spec(seed: int, **changes) -> SynthSpec:
    """DTC brighter in eclipse, Ku-only dimmer."""
    fields = dict(
        seed=seed,
        n_satellites={Population.DTC: 100, Population.KU_ONLY: 100},
        detections_mean=30,
        channels_mhz=[150.78125, 161.71875, TARGET_MHZ],
        fine_channels_mhz=[],
        flux={Population.DTC: FluxLaw(median_jy=40.0, sigma_log=0.6),
              Population.KU_ONLY: FluxLaw(median_jy=40.0, sigma_log=0.6)},
        eclipse_multiplier={Population.DTC: 2.15, Population.KU_ONLY: 0.85},
    )
    fields.update(changes)
    return SynthSpec(**fields)


@pytest.fixture(scope="session")
def null_synth():
    return generate(null_spec(11))


@pytest.fixture(scope="session")
def injector_synth():
    return generate(injector_spec(5))


@pytest.fixture(scope="session")
def reversal_synth():
    return generate(reversal_spec(2))
