"""Two-sample statistics for cut-in event populations.

Mann-Whitney U (exact permutation null for small samples, tie-corrected
normal approximation with continuity correction otherwise), Cohen's d,
Cliff's delta, seeded percentile-bootstrap median CIs, Pearson chi-square on
2x2 threshold tables, Bonferroni correction, Shapiro-Wilk screening, lead
speed matched resampling, and KDE/ECDF curve evaluation.

The random source is numpy's PCG64 (named in every report) so bootstrap and
subsampling are reproducible bit-for-bit for a fixed seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.stats

from .metrics import MS_TO_KMH, EventRow

DEFAULT_SEED = 42
RNG_NAME = "numpy-pcg64"
DEFAULT_FAMILY = 7
DEFAULT_RESAMPLES = 10_000
EXACT_MW_LIMIT = 40              # combined n at or below which the exact null is used
GAP_THRESHOLDS = (5.0, 10.0)     # m, chi-square boundary tests
SPEED_MATCH_RANGE_KMH = (40.0, 65.0)

# (attribute on EventRow, report unit, SI -> report factor)
METRIC_SPECS: dict[str, tuple[str, str, float]] = {
    "gap": ("gap", "m", 1.0),
    "min_dist": ("min_dist", "m", 1.0),
    "ttc": ("ttc", "s", 1.0),
    "cutin_speed": ("cutin_speed", "km/h", MS_TO_KMH),
    "speed_diff": ("speed_diff", "km/h", MS_TO_KMH),
    "lc_duration": ("lc_duration", "s", 1.0),
    "lead_speed_drop": ("lead_speed_drop", "km/h", MS_TO_KMH),
}


@dataclass(frozen=True)
class SampleSet:
    """One metric drawn from one population."""

    label: str
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1:
            raise ValueError("sample values must be one-dimensional")
        if vals.size and not np.isfinite(vals).all():
            raise ValueError(f"sample {self.label!r} contains non-finite values")
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return self.values.size


def _as_array(a) -> np.ndarray:
    if isinstance(a, SampleSet):
        return a.values
    return np.asarray(a, dtype=float)


def _norm_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def _midranks(values: np.ndarray) -> np.ndarray:
    """Average ranks (1-based), ties share the mean rank."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _exact_mw_p(u_stat: float, a: np.ndarray, b: np.ndarray) -> float:
    """Two-sided exact p on the tie-conditioned permutation null:
    min(1, 2*min(P(U <= u), P(U >= u))).

    The null distribution of 2U (integer-valued with midrank ties) is built
    by dynamic programming over the distinct pooled values, weighting each
    split of a tie group hypergeometrically.
    """
    n1, n2 = len(a), len(b)
    _, counts = np.unique(np.concatenate([a, b]), return_counts=True)
    max_u2 = 2 * n1 * n2
    # dp[k, u2] = number of ways to place k pooled elements into group A with 2U = u2
    dp = np.zeros((n1 + 1, max_u2 + 1))
    dp[0, 0] = 1.0
    processed = 0
    for t in counts:
        t = int(t)
        ndp = np.zeros_like(dp)
        for k in range(max(0, processed - n2), min(n1, processed) + 1):
            row = dp[k]
            if not row.any():
                continue
            b_below = processed - k
            # keep both groups within capacity so partial 2U never exceeds max_u2
            aj_lo = max(0, t - (n2 - b_below))
            aj_hi = min(t, n1 - k)
            for aj in range(aj_lo, aj_hi + 1):
                bj = t - aj
                du = 2 * aj * b_below + aj * bj
                w = math.comb(t, aj)
                ndp[k + aj, du:max_u2 + 1] += w * row[:max_u2 + 1 - du]
        dp = ndp
        processed += t
    dist = dp[n1]
    total = dist.sum()
    u2 = int(round(2.0 * u_stat))
    p_le = dist[:u2 + 1].sum() / total
    p_ge = dist[u2:].sum() / total
    return min(1.0, 2.0 * min(p_le, p_ge))


def mann_whitney_u(a, b) -> tuple[float, float]:
    """Mann-Whitney U (for the first sample, midranks for ties) and the
    two-sided p-value.

    Combined sizes <= 40 use exact enumeration of the permutation null;
    larger samples use the normal approximation with tie-corrected variance
    and continuity correction.
    """
    av, bv = _as_array(a), _as_array(b)
    n1, n2 = len(av), len(bv)
    if n1 == 0 or n2 == 0:
        raise ValueError("Mann-Whitney requires nonempty samples")
    pooled = np.concatenate([av, bv])
    ranks = _midranks(pooled)
    u = float(ranks[:n1].sum() - n1 * (n1 + 1) / 2.0)

    if n1 + n2 <= EXACT_MW_LIMIT:
        return u, _exact_mw_p(u, av, bv)

    n = n1 + n2
    _, counts = np.unique(pooled, return_counts=True)
    tie_term = float((counts.astype(float) ** 3 - counts).sum())
    var = n1 * n2 / 12.0 * ((n + 1) - tie_term / (n * (n - 1)))
    if var <= 0.0:
        return u, 1.0
    mu = n1 * n2 / 2.0
    diff = u - mu
    # continuity correction shrinks |U - mu| by 0.5
    adj = max(0.0, abs(diff) - 0.5)
    z = adj / math.sqrt(var)
    return u, min(1.0, 2.0 * _norm_sf(z))


def cohens_d(a, b) -> float:
    """Standardized mean difference with the pooled standard deviation."""
    av, bv = _as_array(a), _as_array(b)
    n1, n2 = len(av), len(bv)
    if n1 < 2 or n2 < 2:
        raise ValueError("Cohen's d requires at least two values per sample")
    var_pooled = ((n1 - 1) * av.var(ddof=1) + (n2 - 1) * bv.var(ddof=1)) / (n1 + n2 - 2)
    if var_pooled <= 0.0:
        raise ValueError("Cohen's d undefined for zero pooled variance")
    return float((av.mean() - bv.mean()) / math.sqrt(var_pooled))


def cliffs_delta(a, b) -> float:
    """(#{x>y} - #{x<y}) / (n_a * n_b) over all cross-sample pairs, computed
    with sorted counting; equals the O(n^2) pairwise definition exactly."""
    av, bv = _as_array(a), _as_array(b)
    if len(av) == 0 or len(bv) == 0:
        raise ValueError("Cliff's delta requires nonempty samples")
    sb = np.sort(bv)
    greater = int(np.searchsorted(sb, av, side="left").sum())
    less = int((len(bv) - np.searchsorted(sb, av, side="right")).sum())
    return (greater - less) / (len(av) * len(bv))


def bootstrap_median_ci(a, resamples: int = DEFAULT_RESAMPLES, level: float = 0.95,
                        seed: int = DEFAULT_SEED) -> tuple[float, float]:
    """Seeded percentile-bootstrap CI for the median. Deterministic for a
    fixed (sample, seed, resamples); resampling is chunked, never parallel,
    so thread counts cannot change the draw order."""
    vals = _as_array(a)
    n = len(vals)
    if n < 2:
        raise ValueError("bootstrap CI requires n >= 2")
    rng = np.random.default_rng(seed)
    medians = np.empty(resamples)
    chunk = max(1, min(resamples, 4_000_000 // max(n, 1)))
    done = 0
    while done < resamples:
        m = min(chunk, resamples - done)
        idx = rng.integers(0, n, size=(m, n))
        medians[done:done + m] = np.median(vals[idx], axis=1)
        done += m
    alpha = (1.0 - level) / 2.0
    lo, hi = np.quantile(medians, [alpha, 1.0 - alpha])
    return float(lo), float(hi)


def chi_square_2x2(below_a: int, n_a: int, below_b: int, n_b: int) -> tuple[float, float]:
    """Pearson chi-square (no Yates correction) on the {below/above} x {A/B}
    table; p from the chi-square distribution with 1 df."""
    obs = np.array([[below_a, n_a - below_a], [below_b, n_b - below_b]], dtype=float)
    if (obs < 0).any():
        raise ValueError("negative cell count")
    row = obs.sum(axis=1, keepdims=True)
    col = obs.sum(axis=0, keepdims=True)
    expected = row @ col / obs.sum()
    if (expected <= 0.0).any():
        raise ValueError("chi-square undefined: zero expected cell count")
    chi2 = float(((obs - expected) ** 2 / expected).sum())
    p = math.erfc(math.sqrt(chi2 / 2.0))  # sf of chi2(1)
    return chi2, p


def bonferroni(p: float, family: int = DEFAULT_FAMILY) -> float:
    """min(1, family * p)."""
    if not (0.0 <= p <= 1.0):
        raise ValueError(f"p-value {p} outside [0, 1]")
    return min(1.0, family * p)


def shapiro_wilk(a, max_n: int = 5000, seed: int = DEFAULT_SEED) -> tuple[float, float]:
    """Shapiro-Wilk W and p (Royston approximation, via scipy). Samples larger
    than max_n are subsampled uniformly with the fixed seed."""
    vals = _as_array(a)
    if len(vals) < 3:
        raise ValueError("Shapiro-Wilk requires n >= 3")
    if np.ptp(vals) == 0.0:
        raise ValueError("Shapiro-Wilk undefined for a constant sample")
    if len(vals) > max_n:
        rng = np.random.default_rng(seed)
        vals = vals[rng.choice(len(vals), size=max_n, replace=False)]
    w, p = scipy.stats.shapiro(vals)
    return float(w), float(p)


def speed_matched_subsample(events_a: list[EventRow], events_b: list[EventRow],
                            lead_speed_range_kmh: tuple[float, float] = SPEED_MATCH_RANGE_KMH,
                            ) -> tuple[SampleSet, SampleSet]:
    """Entry gaps for the events whose target (lead) speed at entry lies in
    the inclusive km/h band; controls the speed confound."""
    lo, hi = (v / MS_TO_KMH for v in lead_speed_range_kmh)

    def gaps(rows, label):
        kept = [r.gap for r in rows if lo <= r.lead_speed <= hi]
        return SampleSet(label, np.asarray(kept, dtype=float))

    return gaps(events_a, "a"), gaps(events_b, "b")


def silverman_bandwidth(values: np.ndarray) -> float:
    """Silverman's rule of thumb: 0.9 * min(sd, IQR/1.34) * n^(-1/5)."""
    sd = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
    q75, q25 = np.percentile(values, [75, 25])
    iqr = float(q75 - q25)
    scale = min(sd, iqr / 1.34) if iqr > 0 else sd
    if scale <= 0.0:
        raise ValueError("KDE bandwidth undefined for zero-variance sample")
    return 0.9 * scale * len(values) ** (-0.2)


def kde_1d(a, grid) -> np.ndarray:
    """Gaussian-kernel density on the grid, Silverman bandwidth."""
    vals = _as_array(a)
    if len(vals) < 2:
        raise ValueError("KDE requires n >= 2")
    h = silverman_bandwidth(vals)
    g = np.asarray(grid, dtype=float)
    z = (g[:, None] - vals[None, :]) / h
    return np.exp(-0.5 * z * z).sum(axis=1) / (len(vals) * h * math.sqrt(2.0 * math.pi))


def ecdf(a, grid) -> np.ndarray:
    """Right-continuous empirical CDF sampled on the grid."""
    vals = np.sort(_as_array(a))
    if len(vals) == 0:
        raise ValueError("ECDF requires a nonempty sample")
    g = np.asarray(grid, dtype=float)
    return np.searchsorted(vals, g, side="right") / len(vals)


def kde_2d(xy: np.ndarray, xgrid: np.ndarray, ygrid: np.ndarray) -> np.ndarray:
    """Product-Gaussian 2-D density, per-axis Silverman bandwidths.
    Returns shape (len(ygrid), len(xgrid))."""
    pts = np.asarray(xy, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
        raise ValueError("2-D KDE requires an (n>=2, 2) array")
    hx = silverman_bandwidth(pts[:, 0])
    hy = silverman_bandwidth(pts[:, 1])
    zx = (np.asarray(xgrid)[:, None] - pts[None, :, 0]) / hx
    zy = (np.asarray(ygrid)[:, None] - pts[None, :, 1]) / hy
    kx = np.exp(-0.5 * zx * zx)                       # (gx, n)
    ky = np.exp(-0.5 * zy * zy)                       # (gy, n)
    dens = ky @ kx.T                                  # (gy, gx)
    return dens / (len(pts) * 2.0 * math.pi * hx * hy)


# ---------------------------------------------------------------------------
# Full comparison report


@dataclass(frozen=True)
class TestResult:
    metric: str
    unit: str
    n_a: int
    n_b: int
    median_a: float
    median_b: float
    u_statistic: float
    p_value: float
    p_bonferroni: float
    cohens_d: float
    cliffs_delta: float
    ci_a: tuple[float, float] | None = None
    ci_b: tuple[float, float] | None = None


@dataclass(frozen=True)
class ThresholdTest:
    threshold: float
    below_a: int
    below_b: int
    n_a: int
    n_b: int
    chi2: float
    p_value: float

    @property
    def share_a(self) -> float:
        return self.below_a / self.n_a

    @property
    def share_b(self) -> float:
        return self.below_b / self.n_b


@dataclass(frozen=True)
class SpeedMatchedResult:
    lead_speed_range_kmh: tuple[float, float]
    n_a: int
    n_b: int
    median_a: float
    median_b: float
    u_statistic: float
    p_value: float


@dataclass(frozen=True)
class ComparisonReport:
    label_a: str
    label_b: str
    n_a: int
    n_b: int
    family: int
    seed: int
    rng: str
    metrics: dict[str, TestResult] = field(default_factory=dict)
    insufficient: dict[str, str] = field(default_factory=dict)
    thresholds: list[ThresholdTest] = field(default_factory=list)
    severity_shares_a: dict[str, float] = field(default_factory=dict)
    severity_shares_b: dict[str, float] = field(default_factory=dict)
    ttc_coverage_a: float = 0.0
    ttc_coverage_b: float = 0.0
    speed_matched: SpeedMatchedResult | None = None
    shapiro: dict[str, tuple[float, float]] = field(default_factory=dict)


def _metric_values(rows: list[EventRow], attr: str) -> np.ndarray:
    vals = [getattr(r, attr) for r in rows]
    return np.asarray([v for v in vals if v is not None], dtype=float)


def _severity_shares(rows: list[EventRow]) -> dict[str, float]:
    n = len(rows)
    return {cls: sum(r.severity == cls for r in rows) / n
            for cls in ("Critical", "Moderate", "Low")} if n else {}


def compare_metrics(events_a: list[EventRow], events_b: list[EventRow],
                    family: int = DEFAULT_FAMILY, seed: int = DEFAULT_SEED,
                    resamples: int = DEFAULT_RESAMPLES,
                    gap_thresholds: tuple[float, ...] = GAP_THRESHOLDS,
                    speed_range_kmh: tuple[float, float] = SPEED_MATCH_RANGE_KMH,
                    label_a: str = "HDV->AV", label_b: str = "HDV->HDV",
                    ) -> ComparisonReport:
    """Full two-population comparison: one test per metric, threshold
    chi-square tests on the entry gap, bootstrap CIs for the gap medians,
    severity shares, TTC coverage, Shapiro-Wilk screening, and the
    speed-matched re-analysis.

    Metrics with fewer than two defined values on either side are reported
    as insufficient rather than aborting the run (TTC is routinely sparse).
    """
    if not events_a or not events_b:
        raise ValueError("both event populations must be nonempty")

    results: dict[str, TestResult] = {}
    insufficient: dict[str, str] = {}
    shapiro: dict[str, tuple[float, float]] = {}

    for name, (attr, unit, factor) in METRIC_SPECS.items():
        va = _metric_values(events_a, attr)
        vb = _metric_values(events_b, attr)
        if len(va) < 2 or len(vb) < 2:
            insufficient[name] = (
                f"insufficient data (n_a={len(va)}, n_b={len(vb)})")
            continue
        u, p = mann_whitney_u(va, vb)
        try:
            d = cohens_d(va, vb)
        except ValueError:
            d = 0.0  # identical constant samples
        ci_a = ci_b = None
        if name == "gap":
            ci_a = bootstrap_median_ci(va, resamples=resamples, seed=seed)
            ci_b = bootstrap_median_ci(vb, resamples=resamples, seed=seed)
            ci_a = (ci_a[0] * factor, ci_a[1] * factor)
            ci_b = (ci_b[0] * factor, ci_b[1] * factor)
        results[name] = TestResult(
            metric=name, unit=unit, n_a=len(va), n_b=len(vb),
            median_a=float(np.median(va)) * factor,
            median_b=float(np.median(vb)) * factor,
            u_statistic=u, p_value=p, p_bonferroni=bonferroni(p, family),
            cohens_d=d, cliffs_delta=cliffs_delta(va, vb),
            ci_a=ci_a, ci_b=ci_b,
        )
        try:
            shapiro[name] = (shapiro_wilk(va, seed=seed)[1],
                             shapiro_wilk(vb, seed=seed)[1])
        except ValueError:
            pass  # screening only; constant/tiny samples just skip it

    gaps_a = _metric_values(events_a, "gap")
    gaps_b = _metric_values(events_b, "gap")
    thresholds = []
    for thr in gap_thresholds:
        below_a = int((gaps_a < thr).sum())
        below_b = int((gaps_b < thr).sum())
        chi2, p = chi_square_2x2(below_a, len(gaps_a), below_b, len(gaps_b))
        thresholds.append(ThresholdTest(
            threshold=thr, below_a=below_a, below_b=below_b,
            n_a=len(gaps_a), n_b=len(gaps_b), chi2=chi2, p_value=p))

    sm_a, sm_b = speed_matched_subsample(events_a, events_b, speed_range_kmh)
    speed_matched = None
    if sm_a.n >= 2 and sm_b.n >= 2:
        u, p = mann_whitney_u(sm_a, sm_b)
        speed_matched = SpeedMatchedResult(
            lead_speed_range_kmh=tuple(speed_range_kmh),
            n_a=sm_a.n, n_b=sm_b.n,
            median_a=float(np.median(sm_a.values)),
            median_b=float(np.median(sm_b.values)),
            u_statistic=u, p_value=p)

    ttc_a = _metric_values(events_a, "ttc")
    ttc_b = _metric_values(events_b, "ttc")

    return ComparisonReport(
        label_a=label_a, label_b=label_b,
        n_a=len(events_a), n_b=len(events_b),
        family=family, seed=seed, rng=RNG_NAME,
        metrics=results, insufficient=insufficient, thresholds=thresholds,
        severity_shares_a=_severity_shares(events_a),
        severity_shares_b=_severity_shares(events_b),
        ttc_coverage_a=len(ttc_a) / len(events_a),
        ttc_coverage_b=len(ttc_b) / len(events_b),
        speed_matched=speed_matched, shapiro=shapiro,
    )
