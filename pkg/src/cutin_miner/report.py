"""Report emission: run manifests, comparison documents, distribution curves,
risk-space grids, and case-replay time series.

Every output file starts with a '#'-prefixed manifest header naming the tool
version, inputs, seed, and every threshold in effect; the same manifest is
written standalone as JSON. Timestamps honor SOURCE_DATE_EPOCH so that
fixed-seed pipelines are byte-reproducible.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .detector import CutInEvent, DetectorParams
from .metrics import EventRow
from .stats import (
    ComparisonReport,
    RNG_NAME,
    ecdf,
    kde_1d,
    kde_2d,
    silverman_bandwidth,
)

TOOL_NAME = "cutin-miner"

# Fig.-style risk-space zones: (max gap m, max ttc s)
CRITICAL_ZONE = (5.0, 1.5)
HIGH_RISK_ZONE = (10.0, 3.0)


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = int(epoch) if epoch else int(time.time())
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(t))


@dataclass(frozen=True)
class RunManifest:
    command: str
    inputs: list[str]
    seed: int
    params: dict
    counts: dict = field(default_factory=dict)
    tool: str = TOOL_NAME
    version: str = ""
    rng: str = RNG_NAME
    generated_at: str = field(default_factory=_timestamp)

    def __post_init__(self):
        if not self.version:
            object.__setattr__(self, "version", __version__)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def header_lines(self) -> list[str]:
        return [f"manifest: {json.dumps(self.to_dict(), sort_keys=True)}"]

    def write(self, path: Path) -> None:
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n",
                        encoding="utf-8")


def manifest_params(detector: DetectorParams, severity_bounds, family,
                    speed_match_range_kmh, resamples,
                    gap_thresholds=(5.0, 10.0)) -> dict:
    return {
        "detector": detector.to_dict(),
        "severity_bounds_m": list(severity_bounds),
        "bonferroni_family": family,
        "speed_match_range_kmh": list(speed_match_range_kmh),
        "bootstrap_resamples": resamples,
        "gap_thresholds_m": list(gap_thresholds),
        "risk_zones": {"critical": list(CRITICAL_ZONE),
                       "high": list(HIGH_RISK_ZONE)},
    }


# ---------------------------------------------------------------------------
# comparison report serialization


def comparison_to_dict(report: ComparisonReport) -> dict:
    metrics = {}
    for name, r in report.metrics.items():
        metrics[name] = {
            "unit": r.unit, "n_a": r.n_a, "n_b": r.n_b,
            "median_a": r.median_a, "median_b": r.median_b,
            "u_statistic": r.u_statistic, "p_value": r.p_value,
            "p_bonferroni": r.p_bonferroni, "cohens_d": r.cohens_d,
            "cliffs_delta": r.cliffs_delta,
            "ci_a": list(r.ci_a) if r.ci_a else None,
            "ci_b": list(r.ci_b) if r.ci_b else None,
        }
    for name, reason in report.insufficient.items():
        metrics[name] = {"insufficient": reason}
    return {
        "groups": {"a": {"label": report.label_a, "n": report.n_a},
                   "b": {"label": report.label_b, "n": report.n_b}},
        "family": report.family,
        "seed": report.seed,
        "rng": report.rng,
        "metrics": metrics,
        "threshold_tests": [{
            "threshold_m": t.threshold, "below_a": t.below_a, "below_b": t.below_b,
            "n_a": t.n_a, "n_b": t.n_b, "share_a": t.share_a, "share_b": t.share_b,
            "chi2": t.chi2, "p_value": t.p_value,
        } for t in report.thresholds],
        "severity_shares": {"a": report.severity_shares_a,
                            "b": report.severity_shares_b},
        "ttc_coverage": {"a": report.ttc_coverage_a, "b": report.ttc_coverage_b},
        "speed_matched": None if report.speed_matched is None else {
            "lead_speed_range_kmh": list(report.speed_matched.lead_speed_range_kmh),
            "n_a": report.speed_matched.n_a, "n_b": report.speed_matched.n_b,
            "median_a_m": report.speed_matched.median_a,
            "median_b_m": report.speed_matched.median_b,
            "u_statistic": report.speed_matched.u_statistic,
            "p_value": report.speed_matched.p_value,
        },
        "shapiro_p": {k: list(v) for k, v in report.shapiro.items()},
    }


def write_comparison_report(report: ComparisonReport, manifest: RunManifest,
                            path: Path) -> None:
    doc = {"manifest": manifest.to_dict(), "comparison": comparison_to_dict(report)}
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def format_comparison_text(report: ComparisonReport) -> str:
    """Human-readable summary table, mirroring the published layout."""
    lines = [
        f"{report.label_a} (n={report.n_a}) vs {report.label_b} (n={report.n_b}); "
        f"Bonferroni family={report.family}, seed={report.seed} ({report.rng})",
        f"{'metric':<16}{'unit':<6}{'med A':>9}{'med B':>9}"
        f"{'p':>11}{'p_corr':>11}{'d':>8}{'delta':>8}",
    ]
    for name, r in report.metrics.items():
        lines.append(
            f"{name:<16}{r.unit:<6}{r.median_a:>9.2f}{r.median_b:>9.2f}"
            f"{r.p_value:>11.3g}{r.p_bonferroni:>11.3g}"
            f"{r.cohens_d:>8.3f}{r.cliffs_delta:>8.3f}")
    for name, reason in report.insufficient.items():
        lines.append(f"{name:<16}{reason}")
    gap = report.metrics.get("gap")
    if gap and gap.ci_a and gap.ci_b:
        lines.append(f"gap 95% CI: A [{gap.ci_a[0]:.2f}, {gap.ci_a[1]:.2f}] m, "
                     f"B [{gap.ci_b[0]:.2f}, {gap.ci_b[1]:.2f}] m")
    for t in report.thresholds:
        lines.append(
            f"gap < {t.threshold:g} m: {t.share_a:.1%} vs {t.share_b:.1%} "
            f"(chi2={t.chi2:.1f}, p={t.p_value:.3g})")
    sev_a, sev_b = report.severity_shares_a, report.severity_shares_b
    if sev_a and sev_b:
        lines.append("severity shares (A vs B): " + ", ".join(
            f"{cls} {sev_a.get(cls, 0.0):.1%}/{sev_b.get(cls, 0.0):.1%}"
            for cls in ("Critical", "Moderate", "Low")))
    lines.append(f"TTC defined: {report.ttc_coverage_a:.1%} of A, "
                 f"{report.ttc_coverage_b:.1%} of B")
    if report.speed_matched:
        sm = report.speed_matched
        lines.append(
            f"speed-matched (lead {sm.lead_speed_range_kmh[0]:g}-"
            f"{sm.lead_speed_range_kmh[1]:g} km/h): n={sm.n_a}/{sm.n_b}, "
            f"gap medians {sm.median_a:.2f} vs {sm.median_b:.2f} m, p={sm.p_value:.3g}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# curve and risk-space emission


def _curve_grid(va: np.ndarray, vb: np.ndarray) -> np.ndarray:
    both = np.concatenate([va, vb])
    h = max(silverman_bandwidth(va), silverman_bandwidth(vb))
    lo, hi = both.min() - 5.0 * h, both.max() + 5.0 * h
    # keep the step well under the bandwidth so the density integrates cleanly
    n = int(min(8192, max(512, math.ceil((hi - lo) / (h / 4.0)))))
    return np.linspace(lo, hi, n)


def write_curves(rows_a: list[EventRow], rows_b: list[EventRow],
                 out_dir: Path, manifest: RunManifest) -> list[str]:
    """Per-metric KDE + ECDF curves as CSV (grid, density_a, density_b,
    ecdf_a, ecdf_b). Metrics without enough spread are skipped."""
    from .stats import METRIC_SPECS, _metric_values

    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, (attr, _unit, factor) in METRIC_SPECS.items():
        va = _metric_values(rows_a, attr) * factor
        vb = _metric_values(rows_b, attr) * factor
        if len(va) < 2 or len(vb) < 2:
            continue
        try:
            grid = _curve_grid(va, vb)
            dens_a, dens_b = kde_1d(va, grid), kde_1d(vb, grid)
        except ValueError:
            continue  # zero-variance sample
        cdf_a, cdf_b = ecdf(va, grid), ecdf(vb, grid)
        path = out_dir / f"{name}.csv"
        with open(path, "w", encoding="utf-8", newline="") as fp:
            for line in manifest.header_lines():
                fp.write(f"# {line}\n")
            w = csv.writer(fp, lineterminator="\n")
            w.writerow(["grid", "density_a", "density_b", "ecdf_a", "ecdf_b"])
            for i in range(len(grid)):
                w.writerow([f"{grid[i]:.6f}", f"{dens_a[i]:.8g}", f"{dens_b[i]:.8g}",
                            f"{cdf_a[i]:.8g}", f"{cdf_b[i]:.8g}"])
        written.append(path.name)
    return written


def write_risk_space(rows: list[EventRow], label: str, out_dir: Path,
                     manifest: RunManifest, grid_n: int = 80) -> str | None:
    """Gridded (gap, ttc, density) table for one group, defined-TTC events
    only; None when the group has too few defined TTC values."""
    pts = np.array([[r.gap, r.ttc] for r in rows if r.ttc is not None])
    if len(pts) < 2:
        return None
    try:
        hx = silverman_bandwidth(pts[:, 0])
        hy = silverman_bandwidth(pts[:, 1])
    except ValueError:
        return None
    xg = np.linspace(max(0.0, pts[:, 0].min() - 3 * hx), pts[:, 0].max() + 3 * hx, grid_n)
    yg = np.linspace(max(0.0, pts[:, 1].min() - 3 * hy), pts[:, 1].max() + 3 * hy, grid_n)
    dens = kde_2d(pts, xg, yg)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"riskspace_{label}.csv"
    with open(path, "w", encoding="utf-8", newline="") as fp:
        for line in manifest.header_lines():
            fp.write(f"# {line}\n")
        w = csv.writer(fp, lineterminator="\n")
        w.writerow(["gap_m", "ttc_s", "density"])
        for j, y in enumerate(yg):
            for i, x in enumerate(xg):
                w.writerow([f"{x:.6f}", f"{y:.6f}", f"{dens[j, i]:.8g}"])
    return path.name


# ---------------------------------------------------------------------------
# case replay


REPLAY_COLUMNS = ("frame", "t_s", "gap_m", "dv_app_ms", "ttc_s",
                  "lat_offset_m", "phase", "note")


def replay_series(scenario, event: CutInEvent, target_lane_id: str) -> list[dict]:
    """Per-frame replay rows for one event: gap, approach speed
    (target minus cutter), TTC where defined, lateral offset to the target
    lane center, and the phase label. Phase boundaries sit at entry and
    completion."""
    from .metrics import time_to_collision
    from .model import bumper_gap, lateral_offset_series

    cutter = scenario.track(event.cutter_id)
    target = scenario.track(event.target_id)
    lane = scenario.lane(target_lane_id)
    offsets = lateral_offset_series(cutter, lane)
    rows = []
    for f in range(scenario.frame_count):
        if not (cutter.valid[f] and target.valid[f]):
            continue
        gap = bumper_gap(scenario, event.cutter_id, event.target_id, f)
        dv_app = float(target.speed[f] - cutter.speed[f])
        ttc = time_to_collision(gap, dv_app)
        if f < event.entry_frame:
            phase = "free-flow"
        elif f < event.completion_frame:
            phase = "lane-change"
        else:
            phase = "merged"
        rows.append({
            "frame": f, "t_s": f / 10.0, "gap_m": gap, "dv_app_ms": dv_app,
            "ttc_s": ttc, "lat_offset_m": float(offsets[f]), "phase": phase,
            "note": "CI faster" if dv_app <= 0 else "",
        })
    return rows


def key_instants(rows: list[dict], event: CutInEvent) -> list[dict]:
    """The published replay table shape: onset, entry, completion, and
    completion + 3 s (capped at the recording end)."""
    by_frame = {r["frame"]: r for r in rows}
    last = max(by_frame)
    picks = [
        ("t0 (LC onset)", event.onset_frame),
        ("t_LC (LC entry)", event.entry_frame),
        ("t_end (merged)", event.completion_frame),
        ("t_end+3s (recovery)", min(event.completion_frame + 30, last)),
    ]
    out = []
    for name, f in picks:
        r = by_frame.get(f)
        if r is None:
            continue
        out.append({"instant": name, "frame": f, "gap_m": r["gap_m"],
                    "dv_app_ms": r["dv_app_ms"], "ttc_s": r["ttc_s"],
                    "note": r["note"]})
    return out


def write_replay(rows: list[dict], instants: list[dict], manifest: RunManifest,
                 out_dir: Path) -> tuple[Path, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    series_path = out_dir / "replay.csv"
    with open(series_path, "w", encoding="utf-8", newline="") as fp:
        for line in manifest.header_lines():
            fp.write(f"# {line}\n")
        w = csv.writer(fp, lineterminator="\n")
        w.writerow(REPLAY_COLUMNS)
        for r in rows:
            w.writerow([r["frame"], f"{r['t_s']:.1f}", f"{r['gap_m']:.6f}",
                        f"{r['dv_app_ms']:.6f}",
                        f"{r['ttc_s']:.6f}" if r["ttc_s"] is not None else "",
                        f"{r['lat_offset_m']:.6f}", r["phase"], r["note"]])
    instants_path = out_dir / "key_instants.json"
    instants_path.write_text(
        json.dumps({"manifest": manifest.to_dict(), "instants": instants},
                   indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return series_path, instants_path


def format_instants_text(instants: list[dict]) -> str:
    lines = [f"{'instant':<22}{'gap (m)':>9}{'dv_app (m/s)':>14}{'TTC (s)':>9}"]
    for r in instants:
        ttc = f"{r['ttc_s']:.1f}" if r["ttc_s"] is not None else "---"
        dv = f"{r['dv_app_ms']:+.1f}" if not r["note"] else f"<0 ({r['note']})"
        lines.append(f"{r['instant']:<22}{r['gap_m']:>9.1f}{dv:>14}{ttc:>9}")
    return "\n".join(lines)
