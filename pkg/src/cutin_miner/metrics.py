"""Entry-frame safety metrics for detected cut-in events.

Seven quantities per event, all SI internally: gap at entry (bumper to
bumper), time-to-collision, minimum separation over the maneuver window,
cutter speed, speed differential, lane-change duration, and the target's
speed drop over the 2 s after entry. Severity classes partition events by
the entry gap alone. km/h appears only in the emitted table.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, TextIO

from .detector import CutInEvent
from .model import FRAME_RATE_HZ, InvalidStateError, Scenario, bumper_gap

MS_TO_KMH = 3.6

SEVERITY_BOUNDS = (5.0, 10.0)  # m: Critical < 5 <= Moderate < 10 <= Low
SEVERITY_CLASSES = ("Critical", "Moderate", "Low")

LEAD_DROP_FRAMES = 20  # 2 s at 10 Hz

TABLE_COLUMNS = (
    "scenario_id", "cutter_id", "target_id", "target_kind", "side",
    "entry_frame", "gap_m", "ttc_s", "min_dist_m", "cutin_speed_kmh",
    "speed_diff_kmh", "lc_duration_s", "lead_speed_drop_kmh", "severity",
)


@dataclass(frozen=True)
class SafetyMetrics:
    gap_entry: float            # m
    ttc: float | None           # s; defined only for positive closing speed
    min_distance: float         # m, over onset..completion
    cutin_speed: float          # m/s, scalar speed at entry
    speed_diff: float           # m/s, cutter minus target at entry
    lc_duration: float          # s
    lead_speed_drop: float      # m/s, positive = target slowed
    severity: str


def gap_at_entry(event: CutInEvent, scenario: Scenario) -> float:
    """Cutter rear bumper to target front bumper, longitudinal along the
    target's heading at the entry frame; 0 when overlapping."""
    return bumper_gap(scenario, event.cutter_id, event.target_id, event.entry_frame)


def time_to_collision(gap: float, closing_speed: float) -> float | None:
    """gap / closing_speed for a strictly positive closing speed (target
    approaching the cutter); undefined otherwise."""
    if closing_speed > 0.0:
        return gap / closing_speed
    return None


def min_distance(event: CutInEvent, scenario: Scenario) -> float:
    """Smallest bumper-to-bumper separation (gap convention) over
    onset..completion; requires at least one jointly valid frame."""
    cutter = scenario.track(event.cutter_id)
    target = scenario.track(event.target_id)
    best = None
    for f in range(event.onset_frame, event.completion_frame + 1):
        if cutter.valid[f] and target.valid[f]:
            g = bumper_gap(scenario, event.cutter_id, event.target_id, f)
            best = g if best is None else min(best, g)
    if best is None:
        raise InvalidStateError(
            f"no jointly valid frame in [{event.onset_frame}, {event.completion_frame}]"
        )
    return best


def lead_speed_drop(event: CutInEvent, scenario: Scenario) -> float:
    """Target speed at entry minus its speed 2 s later (positive = slowdown);
    uses the last valid target frame within the horizon when the scenario
    ends early."""
    target = scenario.track(event.target_id)
    target.require_valid(event.entry_frame)
    speed = target.speed
    horizon = min(event.entry_frame + LEAD_DROP_FRAMES, target.n_frames - 1)
    last = None
    for f in range(event.entry_frame + 1, horizon + 1):
        if target.valid[f]:
            last = f
    if last is None:
        raise InvalidStateError(
            f"target {event.target_id!r} has no valid frame in the 2 s after entry"
        )
    return float(speed[event.entry_frame] - speed[last])


def classify_severity(gap_entry: float,
                      bounds: tuple[float, float] = SEVERITY_BOUNDS) -> str:
    """Critical below bounds[0], Moderate in [bounds[0], bounds[1]), Low above."""
    critical, moderate = bounds
    if gap_entry < critical:
        return "Critical"
    if gap_entry < moderate:
        return "Moderate"
    return "Low"


def compute_all(event: CutInEvent, scenario: Scenario,
                severity_bounds: tuple[float, float] = SEVERITY_BOUNDS) -> SafetyMetrics:
    """All seven metrics plus severity for one detected event."""
    cutter = scenario.track(event.cutter_id)
    target = scenario.track(event.target_id)
    cutter.require_valid(event.entry_frame)
    target.require_valid(event.entry_frame)

    gap = gap_at_entry(event, scenario)
    v_cutin = float(cutter.speed[event.entry_frame])
    v_target = float(target.speed[event.entry_frame])
    closing = v_target - v_cutin
    return SafetyMetrics(
        gap_entry=gap,
        ttc=time_to_collision(gap, closing),
        min_distance=min_distance(event, scenario),
        cutin_speed=v_cutin,
        speed_diff=v_cutin - v_target,
        lc_duration=(event.completion_frame - event.entry_frame) / FRAME_RATE_HZ,
        lead_speed_drop=lead_speed_drop(event, scenario),
        severity=classify_severity(gap, severity_bounds),
    )


# ---------------------------------------------------------------------------
# Event-metrics table (the pipeline's on-disk hand-off format)


@dataclass(frozen=True)
class EventRow:
    """One event with its metrics, SI units (the CSV stores km/h)."""

    scenario_id: str
    cutter_id: str
    target_id: str
    target_kind: str
    side: str
    entry_frame: int
    gap: float
    ttc: float | None
    min_dist: float
    cutin_speed: float
    speed_diff: float
    lc_duration: float
    lead_speed_drop: float
    severity: str

    @property
    def lead_speed(self) -> float:
        """Target (lead) speed at entry, m/s."""
        return self.cutin_speed - self.speed_diff


def event_row(event: CutInEvent, metrics: SafetyMetrics) -> EventRow:
    return EventRow(
        scenario_id=event.scenario_id, cutter_id=event.cutter_id,
        target_id=event.target_id, target_kind=event.target_kind,
        side=event.side, entry_frame=event.entry_frame,
        gap=metrics.gap_entry, ttc=metrics.ttc, min_dist=metrics.min_distance,
        cutin_speed=metrics.cutin_speed, speed_diff=metrics.speed_diff,
        lc_duration=metrics.lc_duration, lead_speed_drop=metrics.lead_speed_drop,
        severity=metrics.severity,
    )


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def write_event_table(rows: Iterable[EventRow], fp: TextIO,
                      header_lines: Iterable[str] = ()) -> int:
    """Write the metrics table: optional '#' header block, then CSV with the
    mandatory column header. Speeds leave here in km/h; TTC cells are empty
    when undefined."""
    for line in header_lines:
        fp.write(f"# {line}\n")
    writer = csv.writer(fp, lineterminator="\n")
    writer.writerow(TABLE_COLUMNS)
    n = 0
    for r in rows:
        writer.writerow([
            r.scenario_id, r.cutter_id, r.target_id, r.target_kind, r.side,
            r.entry_frame, _fmt(r.gap),
            _fmt(r.ttc) if r.ttc is not None else "",
            _fmt(r.min_dist), _fmt(r.cutin_speed * MS_TO_KMH),
            _fmt(r.speed_diff * MS_TO_KMH), _fmt(r.lc_duration),
            _fmt(r.lead_speed_drop * MS_TO_KMH), r.severity,
        ])
        n += 1
    return n


def read_event_table(fp: Iterable[str]) -> list[EventRow]:
    """Read a metrics table written by write_event_table ('#' lines skipped)."""
    reader = csv.reader(line for line in fp if not line.startswith("#"))
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError("empty event table") from None
    if tuple(header) != TABLE_COLUMNS:
        raise ValueError(f"unexpected event-table header: {header}")
    rows = []
    for rec in reader:
        if not rec:
            continue
        rows.append(EventRow(
            scenario_id=rec[0], cutter_id=rec[1], target_id=rec[2],
            target_kind=rec[3], side=rec[4], entry_frame=int(rec[5]),
            gap=float(rec[6]), ttc=float(rec[7]) if rec[7] else None,
            min_dist=float(rec[8]), cutin_speed=float(rec[9]) / MS_TO_KMH,
            speed_diff=float(rec[10]) / MS_TO_KMH, lc_duration=float(rec[11]),
            lead_speed_drop=float(rec[12]) / MS_TO_KMH, severity=rec[13],
        ))
    return rows
