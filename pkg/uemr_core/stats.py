"""
Statistics Module - Rank tests, effect sizes, bootstrap intervals and multiple testing

This module provides the inferential battery used by every analysis:
- Mann-Whitney U (exact for small tie-free samples, tie-corrected normal otherwise)
- Cliff's delta effect size
- Percentile bootstrap for ratios of medians (detection and satellite resampling)
- Bootstrap interaction test between two populations
- Exact two-sided binomial test in log space
- Benjamini-Hochberg false discovery rate control
- Wilson score interval
- Hash-based seed derivation for reproducible, parallel resampling
"""

import hashlib
import logging
from dataclasses import asdict, dataclass
from enum import Enum
from functools import lru_cache
from math import comb, log
from typing import Callable, Dict, Hashable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy import stats as sps
from scipy.special import logsumexp

from .errors import AnalysisError

logger = logging.getLogger(__name__)

DEFAULT_RESAMPLES = 2000
DEFAULT_FDR_Q = 0.05
DEFAULT_Z = 1.96
EXACT_MWU_MAX_N = 20
DIRECT_DELTA_MAX_PAIRS = 1_000_000
MAX_UNDEFINED_FRACTION = 0.05


class ResampleUnit(str, Enum):
    DETECTION = "Detection"
    SATELLITE = "Satellite"


class MwuMethod(str, Enum):
    EXACT = "Exact"
    NORMAL = "Normal"


@dataclass(frozen=True)
class RatioWithCI:
    """Point estimate with a 95% percentile bootstrap interval."""
    estimate: float
    ci_low: float
    ci_high: float
    n_resamples: int
    resample_unit: ResampleUnit
    seed: int
    n_undefined: int = 0

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["resample_unit"] = self.resample_unit.value
        return data

    def excludes(self, value: float) -> bool:
        return value < self.ci_low or value > self.ci_high


@dataclass(frozen=True)
class MwuResult:
    u_statistic: float
    p_two_sided: float
    method: MwuMethod
    n_x: int
    n_y: int
    cliffs_delta: float

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["method"] = self.method.value
        return data


@dataclass(frozen=True)
class InteractionResult:
    """Difference and ratio of two cluster-bootstrap ratios with a bootstrap p-value."""
    diff: RatioWithCI
    ratio_of_ratios: RatioWithCI
    p_two_sided: float

    def to_dict(self) -> Dict:
        return {"diff": self.diff.to_dict(),
                "ratio_of_ratios": self.ratio_of_ratios.to_dict(),
                "p_two_sided": self.p_two_sided}


# --------------------------------------------------
# Seeds
# --------------------------------------------------

def derive_seed(master_seed: int, stream_label: str, counter: int = 0) -> int:
    """
    Derive an independent 64-bit seed for a named stream.

    Args:
        master_seed: run-level seed
        stream_label: name of the consumer (e.g. "eclipse/DTC/detection")
        counter: iteration or sub-stream index

    Returns:
        Unsigned 64-bit integer.
    """
    digest = hashlib.sha256(f"{int(master_seed)}/{stream_label}/{int(counter)}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator (Philox) for one derived seed."""
    return np.random.Generator(np.random.Philox(seed))


# --------------------------------------------------
# Rank statistics
# --------------------------------------------------

def _as_sample(values: Sequence[float], name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0:
        raise ValueError(f"Sample {name} is empty")
    return arr


@lru_cache(maxsize=None)
def exact_u_counts(n_x: int, n_y: int) -> Tuple[int, ...]:
    """Number of orderings giving each U = 0..n_x*n_y for tie-free samples."""
    if n_x == 0 or n_y == 0:
        return (1,)
    without_top_x = exact_u_counts(n_x - 1, n_y)
    without_top_y = exact_u_counts(n_x, n_y - 1)
    counts = [0] * (n_x * n_y + 1)
    # Largest value is an x: it beats all n_y values of y
    for u, c in enumerate(without_top_x):
        counts[u + n_y] += c
    for u, c in enumerate(without_top_y):
        counts[u] += c
    return tuple(counts)


def exact_two_sided_p(counts: Sequence[int], u: int) -> float:
    """Doubled smaller tail of an exact U distribution given as counts."""
    total = sum(counts)
    lower = sum(counts[:u + 1])
    upper = sum(counts[u:])
    return min(1.0, 2 * min(lower, upper) / total)


def mann_whitney(x: Sequence[float], y: Sequence[float]) -> MwuResult:
    """
    Two-sided Mann-Whitney U test.

    U counts pairs with x > y plus half of the ties. Small tie-free samples
    (both n <= 20) use the exact null distribution; otherwise the normal
    approximation with tie-corrected variance and continuity correction.

    Args:
        x: first sample
        y: second sample

    Returns:
        MwuResult including Cliff's delta.
    """
    xs = _as_sample(x, "x")
    ys = _as_sample(y, "y")
    n_x, n_y = xs.size, ys.size
    pooled = np.concatenate([xs, ys])
    ranks = sps.rankdata(pooled)
    u = float(ranks[:n_x].sum() - n_x * (n_x + 1) / 2.0)

    _, tie_counts = np.unique(pooled, return_counts=True)
    has_ties = bool(np.any(tie_counts > 1))

    if n_x <= EXACT_MWU_MAX_N and n_y <= EXACT_MWU_MAX_N and not has_ties:
        p = exact_two_sided_p(exact_u_counts(n_x, n_y), int(round(u)))
        method = MwuMethod.EXACT
    else:
        n = n_x + n_y
        tie_term = float(np.sum(tie_counts.astype(float) ** 3 - tie_counts))
        variance = n_x * n_y / 12.0 * ((n + 1) - tie_term / (n * (n - 1)))
        if variance <= 0:
            p = 1.0
        else:
            z = max(abs(u - n_x * n_y / 2.0) - 0.5, 0.0) / np.sqrt(variance)
            p = float(min(1.0, 2.0 * sps.norm.sf(z)))
        method = MwuMethod.NORMAL

    return MwuResult(u_statistic=u, p_two_sided=p, method=method,
                     n_x=n_x, n_y=n_y, cliffs_delta=cliffs_delta(xs, ys))


def cliffs_delta(x: Sequence[float], y: Sequence[float], method: str = "auto") -> float:
    """
    Cliff's delta, (#{x > y} - #{x < y}) / (n_x * n_y).

    Args:
        x: first sample
        y: second sample
        method: "direct" (pairwise), "sorted" (binary search) or "auto"

    Returns:
        Effect size in [-1, 1].
    """
    xs = _as_sample(x, "x")
    ys = _as_sample(y, "y")
    if method == "auto":
        method = "direct" if xs.size * ys.size <= DIRECT_DELTA_MAX_PAIRS else "sorted"

    if method == "direct":
        signs = np.sign(xs[:, None] - ys[None, :])
        dominance = int(signs.sum())
    elif method == "sorted":
        ys_sorted = np.sort(ys)
        below = np.searchsorted(ys_sorted, xs, side="left")
        above = ys.size - np.searchsorted(ys_sorted, xs, side="right")
        dominance = int(below.sum()) - int(above.sum())
    else:
        raise ValueError(f"Unknown cliffs_delta method: {method}")
    return dominance / (xs.size * ys.size)


# --------------------------------------------------
# Bootstrap
# --------------------------------------------------

def _run_draws(draw: Callable[[np.random.Generator], float], n_resamples: int,
               seed: int, label: str, n_jobs: int = 1) -> np.ndarray:
    """Evaluate draw() once per iteration with a per-iteration derived generator."""

    def chunk(start: int, stop: int) -> List[float]:
        return [draw(make_rng(derive_seed(seed, label, b))) for b in range(start, stop)]

    if n_jobs == 1:
        return np.asarray(chunk(0, n_resamples), dtype=float)

    n_chunks = max(1, min(n_resamples, 4 * (n_jobs if n_jobs > 0 else 8)))
    bounds = np.linspace(0, n_resamples, n_chunks + 1).astype(int)
    parts = Parallel(n_jobs=n_jobs)(
        delayed(chunk)(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]))
    return np.asarray([v for part in parts for v in part], dtype=float)


def _percentile_interval(draws: np.ndarray, n_resamples: int, label: str,
                         max_undefined_fraction: float) -> Tuple[float, float, int]:
    valid = draws[np.isfinite(draws)]
    n_undefined = int(draws.size - valid.size)
    if n_undefined > max_undefined_fraction * n_resamples:
        raise AnalysisError(f"{label}: {n_undefined} of {n_resamples} bootstrap resamples undefined")
    if n_undefined:
        logger.warning(f"{label}: excluded {n_undefined} undefined bootstrap resamples")
    low, high = np.percentile(valid, [2.5, 97.5])
    return float(low), float(high), n_undefined


def _median_ratio(num: np.ndarray, den: np.ndarray) -> float:
    if num.size == 0 or den.size == 0:
        return np.nan
    bottom = np.median(den)
    if bottom == 0:
        return np.nan
    return float(np.median(num) / bottom)


def bootstrap_median_ratio(x: Sequence[float], y: Sequence[float],
                           n_resamples: int = DEFAULT_RESAMPLES, seed: int = 0,
                           n_jobs: int = 1, label: str = "median_ratio",
                           max_undefined_fraction: float = MAX_UNDEFINED_FRACTION) -> RatioWithCI:
    """
    Ratio of medians with a percentile bootstrap interval.

    Args:
        x: numerator sample
        y: denominator sample
        n_resamples: bootstrap iterations B (>= 100)
        seed: stream seed; each iteration derives its own generator from it
        n_jobs: joblib workers; output does not depend on this
        label: stream label used for seed derivation and log messages

    Returns:
        RatioWithCI with resample_unit Detection.
    """
    xs = _as_sample(x, "x")
    ys = _as_sample(y, "y")
    if n_resamples < 100:
        raise ValueError("At least 100 bootstrap resamples are required")
    estimate = _median_ratio(xs, ys)
    if not np.isfinite(estimate):
        raise AnalysisError(f"{label}: denominator median is zero")

    def draw(rng: np.random.Generator) -> float:
        return _median_ratio(xs[rng.integers(0, xs.size, xs.size)],
                             ys[rng.integers(0, ys.size, ys.size)])

    draws = _run_draws(draw, n_resamples, seed, label, n_jobs)
    low, high, n_undefined = _percentile_interval(draws, n_resamples, label, max_undefined_fraction)
    return RatioWithCI(estimate=estimate, ci_low=low, ci_high=high, n_resamples=n_resamples,
                       resample_unit=ResampleUnit.DETECTION, seed=seed, n_undefined=n_undefined)


def bootstrap_median(values: Sequence[float], n_resamples: int = DEFAULT_RESAMPLES, seed: int = 0,
                     resample_unit: ResampleUnit = ResampleUnit.SATELLITE, n_jobs: int = 1,
                     label: str = "median") -> RatioWithCI:
    """Median of a sample with a percentile bootstrap interval."""
    xs = _as_sample(values, "values")
    if n_resamples < 100:
        raise ValueError("At least 100 bootstrap resamples are required")

    def draw(rng: np.random.Generator) -> float:
        return float(np.median(xs[rng.integers(0, xs.size, xs.size)]))

    draws = _run_draws(draw, n_resamples, seed, label, n_jobs)
    low, high = np.percentile(draws, [2.5, 97.5])
    return RatioWithCI(estimate=float(np.median(xs)), ci_low=float(low), ci_high=float(high),
                       n_resamples=n_resamples, resample_unit=resample_unit, seed=seed)


class ClusterSample:
    """Detections grouped by satellite, flattened for fast cluster resampling."""

    def __init__(self, groups: Mapping[Hashable, Tuple[Sequence[float], Sequence[bool]]]):
        if len(groups) == 0:
            raise ValueError("At least one group is required")
        keys = sorted(groups)
        values, states, lengths = [], [], []
        for key in keys:
            v, s = groups[key]
            v = np.asarray(v, dtype=float).ravel()
            s = np.asarray(s, dtype=bool).ravel()
            if v.size != s.size:
                raise ValueError(f"Group {key}: values and states differ in length")
            values.append(v)
            states.append(s)
            lengths.append(v.size)
        self.keys = keys
        self.values = np.concatenate(values)
        self.states = np.concatenate(states)
        self.lengths = np.asarray(lengths, dtype=np.int64)
        self.offsets = np.concatenate([[0], np.cumsum(self.lengths)[:-1]]).astype(np.int64)

    @property
    def n_groups(self) -> int:
        return len(self.keys)

    def ratio(self, index: Optional[np.ndarray] = None) -> float:
        values = self.values if index is None else self.values[index]
        states = self.states if index is None else self.states[index]
        return _median_ratio(values[states], values[~states])

    def draw(self, rng: np.random.Generator) -> float:
        chosen = rng.integers(0, self.n_groups, self.n_groups)
        lengths = self.lengths[chosen]
        ends = np.cumsum(lengths)
        shift = np.repeat(self.offsets[chosen] - (ends - lengths), lengths)
        return self.ratio(np.arange(ends[-1] if ends.size else 0) + shift)


def cluster_bootstrap_ratio(groups: Mapping[Hashable, Tuple[Sequence[float], Sequence[bool]]],
                            n_resamples: int = DEFAULT_RESAMPLES, seed: int = 0,
                            n_jobs: int = 1, label: str = "cluster_ratio",
                            max_undefined_fraction: float = MAX_UNDEFINED_FRACTION) -> RatioWithCI:
    """
    Illuminated/eclipsed ratio of pooled medians, resampling whole satellites.

    Args:
        groups: satellite -> (flux values, illuminated flags)
        n_resamples: bootstrap iterations B
        seed: stream seed

    Returns:
        RatioWithCI with resample_unit Satellite.
    """
    sample = groups if isinstance(groups, ClusterSample) else ClusterSample(groups)
    estimate = sample.ratio()
    if not np.isfinite(estimate):
        raise AnalysisError(f"{label}: ratio undefined on the observed data")
    draws = _run_draws(sample.draw, n_resamples, seed, label, n_jobs)
    low, high, n_undefined = _percentile_interval(draws, n_resamples, label, max_undefined_fraction)
    return RatioWithCI(estimate=estimate, ci_low=low, ci_high=high, n_resamples=n_resamples,
                       resample_unit=ResampleUnit.SATELLITE, seed=seed, n_undefined=n_undefined)


def interaction_test(groups_a, groups_b, n_resamples: int = DEFAULT_RESAMPLES,
                     seed: int = 0, n_jobs: int = 1,
                     max_undefined_fraction: float = MAX_UNDEFINED_FRACTION) -> InteractionResult:
    """
    Bootstrap test that two populations share the same cluster ratio.

    Satellites of each population are resampled independently on split
    streams; each iteration records the difference and ratio of the two
    cluster ratios. p = 2 min(Pr[diff >= 0], Pr[diff <= 0]), floored at 1/B.
    """
    sample_a = groups_a if isinstance(groups_a, ClusterSample) else ClusterSample(groups_a)
    sample_b = groups_b if isinstance(groups_b, ClusterSample) else ClusterSample(groups_b)
    ratio_a, ratio_b = sample_a.ratio(), sample_b.ratio()
    if not (np.isfinite(ratio_a) and np.isfinite(ratio_b)):
        raise AnalysisError("interaction: a population ratio is undefined on the observed data")

    draws_a = _run_draws(sample_a.draw, n_resamples, seed, "interaction/a", n_jobs)
    draws_b = _run_draws(sample_b.draw, n_resamples, seed, "interaction/b", n_jobs)
    diffs = draws_a - draws_b
    ratios = draws_a / draws_b

    d_low, d_high, n_undefined = _percentile_interval(diffs, n_resamples, "interaction", max_undefined_fraction)
    r_low, r_high, _ = _percentile_interval(ratios, n_resamples, "interaction", max_undefined_fraction)

    valid = diffs[np.isfinite(diffs)]
    tail = min(np.mean(valid >= 0), np.mean(valid <= 0))
    p = float(min(1.0, max(2.0 * tail, 1.0 / n_resamples)))

    return InteractionResult(
        diff=RatioWithCI(ratio_a - ratio_b, d_low, d_high, n_resamples, ResampleUnit.SATELLITE, seed, n_undefined),
        ratio_of_ratios=RatioWithCI(ratio_a / ratio_b, r_low, r_high, n_resamples,
                                    ResampleUnit.SATELLITE, seed, n_undefined),
        p_two_sided=p,
    )


# --------------------------------------------------
# Counting statistics
# --------------------------------------------------

def binom_two_sided_log10(k: int, n: int, p0: float) -> float:
    """
    log10 of the exact two-sided binomial p-value.

    Sums pmf(k') over every outcome no more likely than the observed one
    (relative tolerance 1e-7), in log space.
    """
    if not 0 <= k <= n:
        raise ValueError(f"Need 0 <= k <= n, got k={k}, n={n}")
    if not 0 < p0 < 1:
        raise ValueError(f"Null proportion must lie in (0, 1), got {p0}")
    log_pmf = sps.binom.logpmf(np.arange(n + 1), n, p0)
    threshold = log_pmf[k] + log(1 + 1e-7)
    log_p = float(logsumexp(log_pmf[log_pmf <= threshold]))
    return min(0.0, log_p) / log(10)


def binom_two_sided(k: int, n: int, p0: float) -> float:
    """Exact two-sided binomial p-value in (0, 1]."""
    p = 10.0 ** binom_two_sided_log10(k, n, p0)
    return float(max(p, np.finfo(float).tiny))


def bh_fdr(pvals: Sequence[float], q: float = DEFAULT_FDR_Q) -> np.ndarray:
    """
    Benjamini-Hochberg step-up procedure.

    Args:
        pvals: p-values in [0, 1]
        q: false discovery rate

    Returns:
        Boolean array, True where the hypothesis is rejected.
    """
    p = np.asarray(pvals, dtype=float)
    if p.size == 0:
        return np.zeros(0, dtype=bool)
    if np.any((p < 0) | (p > 1)) or np.any(np.isnan(p)):
        raise ValueError("p-values must lie in [0, 1]")
    m = p.size
    ordered = np.sort(p)
    passing = np.nonzero(ordered <= q * np.arange(1, m + 1) / m)[0]
    if passing.size == 0:
        return np.zeros(m, dtype=bool)
    cutoff = ordered[passing[-1]]
    return p <= cutoff


def wilson_interval(k: int, n: int, z: float = DEFAULT_Z) -> Tuple[float, float]:
    """
    Wilson score interval for a binomial proportion.

    Args:
        k: successes
        n: trials (>= 1)
        z: normal quantile

    Returns:
        (low, high) clipped to [0, 1].
    """
    if n < 1:
        raise ValueError("Wilson interval needs n >= 1")
    if z <= 0:
        raise ValueError("z must be positive")
    phat = k / n
    z2 = z * z
    denom = 1.0 + z2 / n
    centre = (phat + z2 / (2 * n)) / denom
    half = z / denom * np.sqrt(phat * (1 - phat) / n + z2 / (4 * n * n))
    low = 0.0 if k == 0 else max(0.0, centre - half)
    high = 1.0 if k == n else min(1.0, centre + half)
    return float(low), float(high)
