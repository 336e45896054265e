"""
Oracle Module - Independent reference implementations for verification

This module provides brute-force and high-precision counterparts of
production routines; it is used by the test-suite only:
- Exact Mann-Whitney p-value by enumerating every rank assignment
- Solar direction from a truncated VSOP87 series with nutation, aberration
  and apparent sidereal time (about 0.001 deg over 1990-2060)
- Shadow test on the oracle Sun written in cross-product form
"""

from itertools import combinations
from typing import Sequence

import numpy as np
import pandas as pd

from .geometry import EARTH_RADIUS_M, EcefVector

MAX_ORACLE_SAMPLES = 10
DELTA_T_S = 69.2

# Earth heliocentric series (amplitude 1e-8, phase rad, frequency rad per Julian millennium)
_L_SERIES = (
    (
        (175347046.0, 0.0, 0.0), (3341656.0, 4.6692568, 6283.07585), (34894.0, 4.6261, 12566.1517),
        (3497.0, 2.7441, 5753.3849), (3418.0, 2.8289, 3.5231), (3136.0, 3.6277, 77713.7715),
        (2676.0, 4.4181, 7860.4194), (2343.0, 6.1352, 3930.2097), (1324.0, 0.7425, 11506.7698),
        (1273.0, 2.0371, 529.691), (1199.0, 1.1096, 1577.3435), (990.0, 5.233, 5884.927),
        (902.0, 2.045, 26.298), (857.0, 3.508, 398.149), (780.0, 1.179, 5223.694),
        (753.0, 2.533, 5507.553), (505.0, 4.583, 18849.228), (492.0, 4.205, 775.523),
        (357.0, 2.92, 0.067), (317.0, 5.849, 11790.629), (284.0, 1.899, 796.298),
        (271.0, 0.315, 10977.079), (243.0, 0.345, 5486.778), (206.0, 4.806, 2544.314),
        (205.0, 1.869, 5573.143), (202.0, 2.458, 6069.777), (156.0, 0.833, 213.299),
        (132.0, 3.411, 2942.463), (126.0, 1.083, 20.775), (115.0, 0.645, 0.98),
        (103.0, 0.636, 4694.003), (102.0, 0.976, 15720.839), (102.0, 4.267, 7.114),
        (99.0, 6.21, 2146.17), (98.0, 0.68, 155.42), (86.0, 5.98, 161000.69),
        (85.0, 1.3, 6275.96), (85.0, 3.67, 71430.7), (80.0, 1.81, 17260.15),
        (79.0, 3.04, 12036.46), (75.0, 1.76, 5088.63), (74.0, 3.5, 3154.69),
        (74.0, 4.68, 801.82), (70.0, 0.83, 9437.76), (62.0, 3.98, 8827.39),
        (61.0, 1.82, 7084.9), (57.0, 2.78, 6286.6), (56.0, 4.39, 14143.5),
        (56.0, 3.47, 6279.55), (52.0, 0.19, 12139.55), (52.0, 1.33, 1748.02),
        (51.0, 0.28, 5856.48), (49.0, 0.49, 1194.45), (41.0, 5.37, 8429.24),
        (41.0, 2.4, 19651.05), (39.0, 6.17, 10447.39), (37.0, 6.04, 10213.29),
        (37.0, 2.57, 1059.38), (36.0, 1.71, 2352.87), (36.0, 1.78, 6812.77),
        (33.0, 0.59, 17789.85), (30.0, 0.44, 83996.85), (30.0, 2.74, 1349.87),
        (25.0, 3.16, 4690.48),
    ),
    (
        (628331966747.0, 0.0, 0.0), (206059.0, 2.678235, 6283.07585), (4303.0, 2.6351, 12566.1517),
        (425.0, 1.59, 3.523), (119.0, 5.796, 26.298), (109.0, 2.966, 1577.344),
        (93.0, 2.59, 18849.23), (72.0, 1.14, 529.69), (68.0, 1.87, 398.15),
        (67.0, 4.41, 5507.55), (59.0, 2.89, 5223.69), (56.0, 2.17, 155.42),
        (45.0, 0.4, 796.3), (36.0, 0.47, 775.52), (29.0, 2.65, 7.11),
        (21.0, 5.34, 0.98), (19.0, 1.85, 5486.78), (19.0, 4.97, 213.3),
        (17.0, 2.99, 6275.96), (16.0, 0.03, 2544.31),
    ),
    (
        (52919.0, 0.0, 0.0), (8720.0, 1.0721, 6283.0758), (309.0, 0.867, 12566.152),
        (27.0, 0.05, 3.52), (16.0, 5.19, 26.3), (16.0, 3.68, 155.42),
    ),
    ((289.0, 5.844, 6283.076), (35.0, 0.0, 0.0), (17.0, 5.49, 12566.15)),
    ((114.0, 3.142, 0.0), (8.0, 4.13, 6283.08)),
    ((1.0, 3.14, 0.0),),
)

_B_SERIES = (
    ((280.0, 3.199, 84334.662), (102.0, 5.422, 5507.553), (80.0, 3.88, 5223.69),
     (44.0, 3.7, 2352.87), (32.0, 4.0, 1577.34)),
    ((9.0, 3.9, 5507.55), (6.0, 1.73, 5223.69)),
)

_R_SERIES = (
    (
        (100013989.0, 0.0, 0.0), (1670700.0, 3.0984635, 6283.07585), (13956.0, 3.05525, 12566.1517),
        (3084.0, 5.1985, 77713.7715), (1628.0, 1.1739, 5753.3849), (1576.0, 2.8469, 7860.4194),
        (925.0, 5.453, 11506.77), (542.0, 4.564, 3930.21), (472.0, 3.661, 5884.927),
        (346.0, 0.964, 5507.553), (329.0, 5.9, 5223.694), (307.0, 0.299, 5573.143),
        (243.0, 4.273, 11790.629), (212.0, 5.847, 1577.344), (186.0, 5.022, 10977.079),
        (175.0, 3.012, 18849.228), (110.0, 5.055, 5486.778),
    ),
    ((103019.0, 1.10749, 6283.07585), (1721.0, 1.0644, 12566.1517), (702.0, 3.142, 0.0),
     (32.0, 1.02, 18849.23), (31.0, 2.84, 5507.55)),
    ((4359.0, 5.7846, 6283.0758), (124.0, 5.579, 12566.152), (12.0, 3.14, 0.0)),
    ((145.0, 4.273, 6283.076), (7.0, 3.92, 12566.15)),
    ((4.0, 2.56, 6283.08),),
)

# Leading nutation terms: multipliers of (D, M, M', F, Omega), longitude (a, b), obliquity (c, d), 1e-4 arcsec
_NUTATION = (
    ((0, 0, 0, 0, 1), (-171996.0, -174.2), (92025.0, 8.9)),
    ((-2, 0, 0, 2, 2), (-13187.0, -1.6), (5736.0, -3.1)),
    ((0, 0, 0, 2, 2), (-2274.0, -0.2), (977.0, -0.5)),
    ((0, 0, 0, 0, 2), (2062.0, 0.2), (-895.0, 0.5)),
    ((0, 1, 0, 0, 0), (1426.0, -3.4), (54.0, -0.1)),
    ((0, 0, 1, 0, 0), (712.0, 0.1), (-7.0, 0.0)),
    ((-2, 1, 0, 2, 2), (-517.0, 1.2), (224.0, -0.6)),
    ((0, 0, 0, 2, 1), (-386.0, -0.4), (200.0, 0.0)),
    ((0, 0, 1, 2, 2), (-301.0, 0.0), (129.0, -0.1)),
    ((-2, -1, 0, 2, 2), (217.0, -0.5), (-95.0, 0.3)),
    ((-2, 0, 1, 0, 0), (-158.0, 0.0), (0.0, 0.0)),
    ((-2, 0, 0, 2, 1), (129.0, 0.1), (-70.0, 0.0)),
    ((0, 0, -1, 2, 2), (123.0, 0.0), (-53.0, 0.0)),
)


def oracle_mwu_exact(x: Sequence[float], y: Sequence[float]) -> float:
    """
    Two-sided Mann-Whitney p-value by enumerating every assignment of ranks.

    Args:
        x: first sample (tie-free)
        y: second sample

    Returns:
        min(1, 2 * smaller tail probability) of the observed U.
    """
    xs, ys = list(x), list(y)
    n_x, n_y = len(xs), len(ys)
    if n_x == 0 or n_y == 0:
        raise ValueError("Samples must be non-empty")
    if n_x + n_y > MAX_ORACLE_SAMPLES:
        raise ValueError(f"Enumeration oracle supports at most {MAX_ORACLE_SAMPLES} values")

    def u_of(first, second) -> float:
        return sum(1.0 if a > b else 0.5 if a == b else 0.0 for a in first for b in second)

    observed = u_of(xs, ys)
    pooled = sorted(xs + ys)
    positions = range(n_x + n_y)
    lower = upper = total = 0
    for chosen in combinations(positions, n_x):
        chosen_set = set(chosen)
        first = [pooled[i] for i in chosen]
        second = [pooled[i] for i in positions if i not in chosen_set]
        u = u_of(first, second)
        total += 1
        lower += u <= observed
        upper += u >= observed
    return min(1.0, 2 * min(lower, upper) / total)


def _series(coefficients, jme: np.ndarray) -> np.ndarray:
    """Sum of the power series sum_i (sum A cos(B + C jme)) * jme**i."""
    total = np.zeros_like(jme)
    for power, terms in enumerate(coefficients):
        arr = np.asarray(terms, dtype=float)
        inner = np.sum(arr[:, 0] * np.cos(arr[:, 1] + arr[:, 2] * jme[..., None]), axis=-1)
        total = total + inner * jme ** power
    return total / 1e8


def _nutation(jce: np.ndarray):
    """Nutation in longitude and true obliquity of the ecliptic (both deg)."""
    args = np.radians(np.stack([
        297.85036 + 445267.111480 * jce - 0.0019142 * jce ** 2 + jce ** 3 / 189474.0,
        357.52772 + 35999.050340 * jce - 0.0001603 * jce ** 2 - jce ** 3 / 300000.0,
        134.96298 + 477198.867398 * jce + 0.0086972 * jce ** 2 + jce ** 3 / 56250.0,
        93.27191 + 483202.017538 * jce - 0.0036825 * jce ** 2 + jce ** 3 / 327270.0,
        125.04452 - 1934.136261 * jce + 0.0020708 * jce ** 2 + jce ** 3 / 450000.0,
    ], axis=-1))
    multipliers = np.array([t[0] for t in _NUTATION], dtype=float)
    longitude = np.array([t[1] for t in _NUTATION])
    obliquity = np.array([t[2] for t in _NUTATION])
    phase = args @ multipliers.T
    delta_psi = np.sum((longitude[:, 0] + longitude[:, 1] * jce[..., None]) * np.sin(phase), axis=-1) / 36e6
    delta_eps = np.sum((obliquity[:, 0] + obliquity[:, 1] * jce[..., None]) * np.cos(phase), axis=-1) / 36e6

    u = jce / 100.0
    mean_eps = np.polyval([2.45, 5.79, 27.87, 7.12, -39.05, -249.67, -51.38, 1999.25,
                           -1.55, -4680.93, 84381.448], u) / 3600.0
    return delta_psi, mean_eps + delta_eps


def _julian_day(epoch_utc) -> np.ndarray:
    if isinstance(epoch_utc, (pd.Timestamp, str)):
        stamp = pd.Timestamp(epoch_utc)
        stamp = stamp.tz_localize("UTC") if stamp.tzinfo is None else stamp
        return np.asarray(stamp.value / 86400e9 + 2440587.5)
    return pd.DatetimeIndex(pd.to_datetime(epoch_utc, utc=True)).asi8 / 86400e9 + 2440587.5


def oracle_sun_radec(epoch_utc, delta_t_s: float = DELTA_T_S):
    """Apparent geocentric right ascension, declination (deg) and apparent sidereal time (deg)."""
    jd = _julian_day(epoch_utc)
    jde = jd + delta_t_s / 86400.0
    jce = (jde - 2451545.0) / 36525.0
    jme = jce / 10.0

    helio_lon = np.degrees(_series(_L_SERIES, jme))
    helio_lat = np.degrees(_series(_B_SERIES, jme))
    radius_au = _series(_R_SERIES, jme)
    delta_psi, epsilon = _nutation(jce)

    longitude = np.radians(helio_lon + 180.0 + delta_psi - 20.4898 / (3600.0 * radius_au))
    beta = np.radians(-helio_lat)
    eps = np.radians(epsilon)
    alpha = np.degrees(np.arctan2(np.sin(longitude) * np.cos(eps) - np.tan(beta) * np.sin(eps),
                                  np.cos(longitude)))
    delta = np.degrees(np.arcsin(np.sin(beta) * np.cos(eps)
                                 + np.cos(beta) * np.sin(eps) * np.sin(longitude)))

    # Earth rotation angle plus the precession polynomial gives mean sidereal time
    du = jd - 2451545.0
    era = 360.0 * np.mod(0.7790572732640 + 1.00273781191135448 * du, 1.0)
    t = jce
    gmst = era + (0.014506 + 4612.156534 * t + 1.3915817 * t ** 2
                  - 0.00000044 * t ** 3 - 0.000029956 * t ** 4) / 3600.0
    gast = gmst + delta_psi * np.cos(eps)
    return alpha, delta, np.mod(gast, 360.0)


def oracle_sun(epoch_utc, delta_t_s: float = DELTA_T_S) -> EcefVector:
    """
    Unit vector to the Sun in the Earth-fixed frame.

    Args:
        epoch_utc: timestamp(s), UTC
        delta_t_s: TT - UT1 (s)

    Returns:
        EcefVector
    """
    alpha, delta, gast = oracle_sun_radec(epoch_utc, delta_t_s)
    hour = np.radians(alpha - gast)
    dec = np.radians(delta)
    return EcefVector(np.cos(dec) * np.cos(hour), np.cos(dec) * np.sin(hour), np.sin(dec))


def oracle_illuminated(sat_ecef: EcefVector, epoch_utc, earth_radius_m: float = EARTH_RADIUS_M):
    """Sunlit unless behind the Earth and within one radius of the shadow axis."""
    r = sat_ecef.as_array()
    s = oracle_sun(epoch_utc).as_array()
    behind = np.einsum("...i,...i->...", r, s) <= 0
    axis_distance = np.linalg.norm(np.cross(r, s), axis=-1)
    return ~(behind & (axis_distance <= earth_radius_m))
